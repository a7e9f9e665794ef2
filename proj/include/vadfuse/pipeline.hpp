#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "vadfuse/audio.hpp"
#include "vadfuse/dnn.hpp"
#include "vadfuse/features.hpp"
#include "vadfuse/fusion.hpp"
#include "vadfuse/gmm.hpp"
#include "vadfuse/segmenter.hpp"

namespace vadfuse {

struct PipelineConfig {
  FeatureConfig features;
  GmmConfig gmm;
  FusionConfig fusion;
  EndpointConfig endpoint;
  std::int64_t buffer_frames = 1000;  // 10 s of audio at the frame hop
  Activation dnn_activation = Activation::kRelu;
};

struct FrameDecision {
  std::int64_t frame = 0;
  double dnn_p_speech = 0.0;
  double gmm_total_llr = 0.0;
  int flag = 0;
  int dnn_flag = 0;
  int gmm_flag = 0;
  double p_h0 = 0.5;
  double p_h1 = 0.5;
};

// Whole detector over a live sample stream. Decisions lag the audio by the
// delta and splice lookahead (4 + R frames); the ring buffer is written on
// the decision clock so flags and frames stay aligned.
class StreamingVad {
 public:
  StreamingVad(const PipelineConfig& cfg, std::optional<DnnWeights> weights)
      : cfg_(cfg),
        extractor_(cfg.features),
        weights_(std::move(weights)),
        engine_(cfg.gmm, effective_fusion(cfg, weights_.has_value())),
        assembler_(cfg.endpoint, cfg.buffer_frames, kFrameHop) {
    if (weights_) {
      weights_->activation = cfg.dnn_activation;
      if (weights_->input_dim !=
          spliced_dim(cfg.features.context_left, cfg.features.context_right))
        throw Error(ErrorCode::kDimMismatch,
                    "weights expect input_dim " +
                        std::to_string(weights_->input_dim) + ", features give " +
                        std::to_string(spliced_dim(cfg.features.context_left,
                                                   cfg.features.context_right)));
    }
    cmn_.decay = cfg.features.cmn_decay;
    cmn_.warmup_frames = cfg.features.cmn_warmup_frames;
  }

  struct Output {
    std::vector<FrameDecision> decisions;
    std::vector<ExtractedSegment> segments;
  };

  Output push(std::span<const double> samples) {
    Output out;
    framer_.push(samples, [&](const Frame& f) { on_raw_frame(f, out); });
    return out;
  }

  Output finish() {
    Output out;
    stack_.finish([&](const FeatureFrame& ff) { add_feature(ff); });
    drain(out, /*final=*/true);
    if (auto seg = assembler_.finish()) out.segments.push_back(std::move(*seg));
    return out;
  }

  std::int64_t frames_decided() const { return next_decision_; }
  const FusionEngine& engine() const { return engine_; }

 private:
  struct PendingFrame {
    SubbandFeature subbands;
    std::vector<double> hop_samples;
  };

  static FusionConfig effective_fusion(const PipelineConfig& cfg,
                                       bool has_weights) {
    if (has_weights) return cfg.fusion;
    // No net loaded: run the adaptive model alone.
    FusionConfig f = cfg.fusion;
    f.alpha = 0.0;
    f.beta = 0.0;
    return f;
  }

  void on_raw_frame(const Frame& f, Output& out) {
    PendingFrame p;
    p.subbands = extractor_.subbands(f.window);
    p.hop_samples.assign(f.window.begin(), f.window.begin() + kFrameHop);
    pending_.push_back(std::move(p));
    stack_.push(extractor_.fbank(f.window),
                [&](const FeatureFrame& ff) { add_feature(ff); });
    drain(out, /*final=*/false);
  }

  void add_feature(const FeatureFrame& ff) {
    feats_.push_back(cmn_apply(cmn_, ff));
    ++n_feats_;
  }

  void drain(Output& out, bool final) {
    const int right = cfg_.features.context_right;
    while (final ? next_decision_ < n_feats_
                 : n_feats_ >= next_decision_ + right + 1) {
      decide(out);
    }
  }

  void decide(Output& out) {
    const std::int64_t u = next_decision_;
    const int left = cfg_.features.context_left;
    const int right = cfg_.features.context_right;
    DnnPosterior post{0.0, 1.0};
    if (weights_) {
      const SplicedFeature x = splice_window(u, left, right);
      post = forward(*weights_, x.values);
    }
    const FusedDecision d = engine_.step(pending_.front().subbands, post);
    FrameDecision fd;
    fd.frame = u;
    fd.dnn_p_speech = post.p_speech;
    fd.gmm_total_llr = d.gmm_total_llr;
    fd.flag = d.flag;
    fd.dnn_flag = d.dnn_flag;
    fd.gmm_flag = d.gmm_flag;
    fd.p_h0 = d.p_h0_smoothed;
    fd.p_h1 = d.p_h1_smoothed;
    out.decisions.push_back(fd);
    if (auto seg = assembler_.push(d.flag, pending_.front().hop_samples))
      out.segments.push_back(std::move(*seg));
    pending_.pop_front();
    ++next_decision_;
    while (feats_base_ < next_decision_ - left) {
      feats_.pop_front();
      ++feats_base_;
    }
  }

  SplicedFeature splice_window(std::int64_t t, int left, int right) const {
    SplicedFeature out;
    out.values.resize(static_cast<std::size_t>(spliced_dim(left, right)));
    std::size_t pos = 0;
    for (std::int64_t c = t - left; c <= t + right; ++c) {
      std::int64_t i = c < 0 ? 0 : (c >= n_feats_ ? n_feats_ - 1 : c);
      const FeatureFrame& f = feats_[static_cast<std::size_t>(i - feats_base_)];
      for (int k = 0; k < kNumMel; ++k) out.values[pos++] = f.statics[k];
      for (int k = 0; k < kNumMel; ++k) out.values[pos++] = f.delta1[k];
      for (int k = 0; k < kNumMel; ++k) out.values[pos++] = f.delta2[k];
    }
    return out;
  }

  PipelineConfig cfg_;
  FeatureExtractor extractor_;
  std::optional<DnnWeights> weights_;
  FusionEngine engine_;
  SegmentAssembler assembler_;
  StreamingFramer framer_;
  StreamingFeatureStack stack_;
  CmnState cmn_;
  std::deque<PendingFrame> pending_;
  std::deque<FeatureFrame> feats_;
  std::int64_t feats_base_ = 0;
  std::int64_t n_feats_ = 0;
  std::int64_t next_decision_ = 0;
};

// One JSON object per frame, newline terminated.
inline void write_decision_line(std::ostream& out, const FrameDecision& d) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "{\"frame\":%lld,\"dnn\":%.9g,\"gmm_llr\":%.9g,\"flag\":%d}\n",
                static_cast<long long>(d.frame), d.dnn_p_speech,
                d.gmm_total_llr, d.flag);
  out << buf;
}

inline void write_segment_report_header(std::ostream& out) {
  out << "begin_frame\tend_frame\tbegin_sec\tend_sec\ttruncated\n";
}

inline void write_segment_report_row(std::ostream& out,
                                     const ExtractedSegment& seg) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%lld\t%lld\t%.2f\t%.2f\t%d\n",
                static_cast<long long>(seg.begin_frame),
                static_cast<long long>(seg.end_frame),
                static_cast<double>(seg.begin_frame) * kFrameHop / kSampleRate,
                static_cast<double>(seg.end_frame) * kFrameHop / kSampleRate,
                seg.truncated ? 1 : 0);
  out << buf;
}

}  // namespace vadfuse
