#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "vadfuse/experiment.hpp"
#include "vadfuse/pipeline.hpp"
#include "vadfuse/random.hpp"
#include "vadfuse/synth.hpp"

using namespace vadfuse;

namespace {

SampleStream test_audio(std::uint64_t seed) {
  const CleanUtterance clean = generate_clean_utterance(seed, 0.1, 3);
  const SampleStream noise = synth_noise(
      {NoiseKind::kBabble, seed + 1},
      static_cast<std::int64_t>(clean.audio.samples.size()));
  return mix_at_snr(clean.audio, noise, 10.0);
}

StreamingVad::Output run_streaming(const SampleStream& audio,
                                   const PipelineConfig& cfg,
                                   std::optional<DnnWeights> weights,
                                   std::size_t chunk) {
  StreamingVad vad(cfg, std::move(weights));
  StreamingVad::Output all;
  for (std::size_t pos = 0; pos < audio.samples.size(); pos += chunk) {
    const std::size_t take = std::min(chunk, audio.samples.size() - pos);
    auto out = vad.push(std::span<const double>(audio.samples.data() + pos, take));
    all.decisions.insert(all.decisions.end(), out.decisions.begin(),
                         out.decisions.end());
    for (auto& s : out.segments) all.segments.push_back(std::move(s));
  }
  auto out = vad.finish();
  all.decisions.insert(all.decisions.end(), out.decisions.begin(),
                       out.decisions.end());
  for (auto& s : out.segments) all.segments.push_back(std::move(s));
  return all;
}

TEST(StreamingVad, MatchesOfflineDetectorRun) {
  const SampleStream audio = test_audio(100);
  PipelineConfig cfg;
  Rng rng(7);
  DnnWeights w = init_weights(spliced_dim(cfg.features.context_left,
                                          cfg.features.context_right),
                              rng);
  const auto streamed = run_streaming(audio, cfg, w, 1000);
  const DetectorRun offline = run_detectors(audio, cfg, &w);
  ASSERT_EQ(streamed.decisions.size(), offline.fused.size());
  for (std::size_t t = 0; t < offline.fused.size(); ++t) {
    EXPECT_EQ(streamed.decisions[t].flag, offline.fused[t]) << "frame " << t;
    EXPECT_EQ(streamed.decisions[t].dnn_flag, offline.dnn[t]) << "frame " << t;
    EXPECT_EQ(streamed.decisions[t].dnn_p_speech, offline.p_speech[t])
        << "frame " << t;
  }
}

TEST(StreamingVad, ChunkSizeDoesNotChangeOutput) {
  const SampleStream audio = test_audio(200);
  PipelineConfig cfg;
  Rng rng(8);
  DnnWeights w = init_weights(spliced_dim(cfg.features.context_left,
                                          cfg.features.context_right),
                              rng);
  const auto a = run_streaming(audio, cfg, w, 160);
  const auto b = run_streaming(audio, cfg, w, 7919);
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t t = 0; t < a.decisions.size(); ++t)
    EXPECT_EQ(a.decisions[t].flag, b.decisions[t].flag);
  ASSERT_EQ(a.segments.size(), b.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i)
    EXPECT_EQ(a.segments[i].samples, b.segments[i].samples);
}

TEST(StreamingVad, RunsAreByteDeterministic) {
  const SampleStream audio = test_audio(300);
  PipelineConfig cfg;
  Rng rng(9);
  DnnWeights w = init_weights(spliced_dim(cfg.features.context_left,
                                          cfg.features.context_right),
                              rng);
  std::ostringstream log_a, log_b;
  const auto a = run_streaming(audio, cfg, w, 4096);
  const auto b = run_streaming(audio, cfg, w, 4096);
  for (const auto& d : a.decisions) write_decision_line(log_a, d);
  for (const auto& d : b.decisions) write_decision_line(log_b, d);
  EXPECT_EQ(log_a.str(), log_b.str());
  ASSERT_EQ(a.segments.size(), b.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i)
    EXPECT_EQ(a.segments[i].samples, b.segments[i].samples);
}

TEST(StreamingVad, WithoutWeightsEqualsStandaloneGmm) {
  const SampleStream audio = test_audio(400);
  PipelineConfig cfg;
  const auto streamed = run_streaming(audio, cfg, std::nullopt, 4096);
  const DetectorRun offline = run_detectors(audio, cfg, nullptr);
  ASSERT_EQ(streamed.decisions.size(), offline.gmm.size());
  for (std::size_t t = 0; t < offline.gmm.size(); ++t)
    EXPECT_EQ(streamed.decisions[t].flag, offline.gmm[t]) << "frame " << t;
}

TEST(StreamingVad, SegmentAudioMatchesInputSlice) {
  const SampleStream audio = test_audio(500);
  PipelineConfig cfg;
  cfg.endpoint.traceback = 10;
  const auto out = run_streaming(audio, cfg, std::nullopt, 2048);
  ASSERT_FALSE(out.segments.empty());
  for (const auto& seg : out.segments) {
    ASSERT_FALSE(seg.truncated);
    const std::size_t lo = static_cast<std::size_t>(seg.begin_frame) * kFrameHop;
    ASSERT_EQ(seg.samples.size(),
              static_cast<std::size_t>(seg.end_frame - seg.begin_frame) *
                  kFrameHop);
    for (std::size_t i = 0; i < seg.samples.size(); ++i)
      ASSERT_DOUBLE_EQ(seg.samples[i], audio.samples[lo + i]);
  }
}

TEST(DecisionLog, LineFormat) {
  FrameDecision d;
  d.frame = 42;
  d.dnn_p_speech = 0.25;
  d.gmm_total_llr = -1.5;
  d.flag = 1;
  std::ostringstream out;
  write_decision_line(out, d);
  EXPECT_EQ(out.str(), "{\"frame\":42,\"dnn\":0.25,\"gmm_llr\":-1.5,\"flag\":1}\n");
}

TEST(SegmentReport, RowFormat) {
  ExtractedSegment seg;
  seg.begin_frame = 150;
  seg.end_frame = 250;
  seg.truncated = false;
  std::ostringstream out;
  write_segment_report_header(out);
  write_segment_report_row(out, seg);
  EXPECT_EQ(out.str(),
            "begin_frame\tend_frame\tbegin_sec\tend_sec\ttruncated\n"
            "150\t250\t1.50\t2.50\t0\n");
}

}  // namespace
