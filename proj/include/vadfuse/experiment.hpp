#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vadfuse/config.hpp"
#include "vadfuse/harness.hpp"
#include "vadfuse/pipeline.hpp"
#include "vadfuse/synth.hpp"

namespace vadfuse {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Per-frame flags of the three detectors over one recording, sharing a
// single feature pass and a single posterior per frame.
struct DetectorRun {
  std::vector<int> gmm;
  std::vector<int> dnn;
  std::vector<int> fused;
  std::vector<double> p_speech;
  std::vector<SubbandFeature> subbands;
};

inline DetectorRun run_detectors(const SampleStream& audio,
                                 const PipelineConfig& cfg,
                                 const DnnWeights* weights) {
  FrameStream frames(audio);
  const std::int64_t n = frames.size();
  FeatureExtractor ex(cfg.features);
  std::vector<FbankVector> fbanks;
  fbanks.reserve(static_cast<std::size_t>(n));
  DetectorRun r;
  r.subbands.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const Frame f = frames[i];
    fbanks.push_back(ex.fbank(f.window));
    r.subbands.push_back(ex.subbands(f.window));
  }
  auto feats = compute_deltas(fbanks);
  CmnState cmn;
  cmn.decay = cfg.features.cmn_decay;
  cmn.warmup_frames = cfg.features.cmn_warmup_frames;
  for (auto& f : feats) f = cmn_apply(cmn, f);

  GmmRunner gmm(cfg.gmm);
  FusionConfig fcfg = cfg.fusion;
  if (!weights) {
    fcfg.alpha = 0.0;
    fcfg.beta = 0.0;
  }
  FusionEngine fused(cfg.gmm, fcfg);
  const int left = cfg.features.context_left;
  const int right = cfg.features.context_right;
  for (std::int64_t t = 0; t < n; ++t) {
    DnnPosterior post{0.0, 1.0};
    if (weights) {
      const SplicedFeature x = splice_at(feats, t, left, right);
      post = forward(*weights, x.values);
    }
    r.p_speech.push_back(post.p_speech);
    r.dnn.push_back(dnn_flag(post, fcfg.dnn_threshold));
    r.gmm.push_back(gmm.step(r.subbands[static_cast<std::size_t>(t)]));
    r.fused.push_back(
        fused.step(r.subbands[static_cast<std::size_t>(t)], post).flag);
  }
  return r;
}

// Segment ranges a flag stream produces, buffer exhaustion included.
inline std::vector<FrameRange> detect_ranges(std::span<const int> flags,
                                             const EndpointConfig& cfg,
                                             std::int64_t buffer_frames) {
  SegmentAssembler assembler(cfg, buffer_frames, 1);
  std::vector<FrameRange> out;
  const double zero = 0.0;
  for (int flag : flags) {
    if (auto seg = assembler.push(flag, std::span<const double>(&zero, 1)))
      out.push_back({seg->begin_frame, seg->end_frame});
  }
  if (auto seg = assembler.finish())
    out.push_back({seg->begin_frame, seg->end_frame});
  return out;
}

struct SimUtterance {
  SampleStream noisy;
  std::vector<double> labels;
};

inline SimUtterance make_sim_utterance(NoiseKind kind, double snr_db,
                                       std::uint64_t seed,
                                       const HarnessConfig& hc) {
  const CleanUtterance clean = generate_clean_utterance(
      mix_seed(seed, 17), hc.label_threshold_ratio, hc.label_boundary_frames);
  const SampleStream noise =
      synth_noise({kind, mix_seed(seed, 71)},
                  static_cast<std::int64_t>(clean.audio.samples.size()));
  SimUtterance out;
  out.noisy = mix_at_snr(clean.audio, noise, snr_db, hc.label_threshold_ratio);
  out.labels = clean.labels;
  return out;
}

inline std::uint64_t condition_seed(std::uint64_t base, NoiseKind kind,
                                    double snr_db, int utt) {
  return mix_seed(mix_seed(base, static_cast<std::uint64_t>(kind) * 1000 +
                                     static_cast<std::uint64_t>(snr_db)),
                  static_cast<std::uint64_t>(utt));
}

struct TrainUtterance {
  std::vector<FeatureFrame> feats;
  std::vector<double> labels;
};

// Training features go through the same streaming normalization the runtime
// uses. Normalizing with the per-utterance mean instead looks cleaner but
// shifts the early-stream feature distribution away from what the detector
// sees live, which costs real accuracy.
inline TrainUtterance prepare_train_utterance(const SampleStream& noisy,
                                              std::span<const double> labels,
                                              const FeatureConfig& fc) {
  FrameStream frames(noisy);
  FeatureExtractor ex(fc);
  std::vector<FbankVector> fbanks;
  fbanks.reserve(static_cast<std::size_t>(frames.size()));
  for (std::int64_t i = 0; i < frames.size(); ++i)
    fbanks.push_back(ex.fbank(frames[i].window));
  TrainUtterance out;
  out.feats = compute_deltas(fbanks);
  CmnState cmn;
  cmn.decay = fc.cmn_decay;
  cmn.warmup_frames = fc.cmn_warmup_frames;
  for (auto& f : out.feats) f = cmn_apply(cmn, f);
  if (static_cast<std::int64_t>(labels.size()) != frames.size())
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(labels.size()) + " labels for " +
                    std::to_string(frames.size()) + " frames");
  out.labels.assign(labels.begin(), labels.end());
  return out;
}

// Minibatch gradient descent over spliced frames, shuffled each epoch.
inline DnnWeights train_dnn(std::span<const TrainUtterance> data,
                            const FeatureConfig& fc, const TrainConfig& tc,
                            Activation activation, std::ostream* log = nullptr) {
  const int left = fc.context_left;
  const int right = fc.context_right;
  Rng rng(tc.seed);
  DnnWeights w = init_weights(spliced_dim(left, right), rng);
  w.activation = activation;

  std::vector<std::pair<std::uint32_t, std::uint32_t>> index;
  for (std::uint32_t u = 0; u < data.size(); ++u)
    for (std::uint32_t t = 0; t < data[u].feats.size(); ++t)
      index.push_back({u, t});
  if (index.empty())
    throw Error(ErrorCode::kDimMismatch, "no training frames");

  std::vector<SplicedFeature> batch_x(static_cast<std::size_t>(tc.batch_size));
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t i = index.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(index[i - 1], index[j]);
    }
    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::size_t pos = 0; pos < index.size(); pos += tc.batch_size) {
      const std::size_t take =
          std::min<std::size_t>(tc.batch_size, index.size() - pos);
      std::vector<TrainSample> batch;
      batch.reserve(take);
      for (std::size_t b = 0; b < take; ++b) {
        const auto [u, t] = index[pos + b];
        batch_x[b] = splice_at(data[u].feats, t, left, right);
        batch.push_back({std::span<const double>(batch_x[b].values),
                         SoftLabel{data[u].labels[t]}});
      }
      epoch_loss += train_step(w, batch, tc.lr);
      ++batches;
    }
    if (log)
      *log << "epoch " << epoch + 1 << "/" << tc.epochs << " loss "
           << epoch_loss / static_cast<double>(batches) << "\n";
  }
  return w;
}

inline DnnWeights train_for_noises(const VadConfig& cfg,
                                   std::span<const NoiseKind> kinds,
                                   std::span<const double> snrs,
                                   int utts_per_condition, std::uint64_t seed,
                                   std::ostream* log = nullptr) {
  std::vector<TrainUtterance> data;
  for (const NoiseKind kind : kinds) {
    for (const double snr : snrs) {
      for (int u = 0; u < utts_per_condition; ++u) {
        const SimUtterance sim = make_sim_utterance(
            kind, snr, condition_seed(seed, kind, snr, u), cfg.harness);
        data.push_back(prepare_train_utterance(sim.noisy, sim.labels,
                                               cfg.pipeline.features));
      }
    }
  }
  return train_dnn(data, cfg.pipeline.features, cfg.train,
                   cfg.pipeline.dnn_activation, log);
}

struct ConditionAccuracy {
  NoiseKind kind = NoiseKind::kWind;
  double snr_db = 0.0;
  EvalResult gmm;
  EvalResult dnn;
  EvalResult fused;

  double gmm_pct() const { return 100.0 * gmm.frame_accuracy(); }
  double dnn_pct() const { return 100.0 * dnn.frame_accuracy(); }
  double fused_pct() const { return 100.0 * fused.frame_accuracy(); }
};

inline std::vector<ConditionAccuracy> evaluate_simulation(
    const VadConfig& cfg, const DnnWeights* weights,
    std::span<const NoiseKind> kinds, std::span<const double> snrs,
    int utts_per_condition, std::uint64_t seed) {
  std::vector<ConditionAccuracy> out;
  for (const NoiseKind kind : kinds) {
    for (const double snr : snrs) {
      ConditionAccuracy acc;
      acc.kind = kind;
      acc.snr_db = snr;
      for (int u = 0; u < utts_per_condition; ++u) {
        const SimUtterance sim = make_sim_utterance(
            kind, snr, condition_seed(seed, kind, snr, u), cfg.harness);
        const DetectorRun run =
            run_detectors(sim.noisy, cfg.pipeline, weights);
        const auto truth = label_runs(sim.labels);
        const int tol = cfg.harness.utterance_tolerance_frames;
        const auto buf = cfg.pipeline.buffer_frames;
        acc.gmm += evaluate(run.gmm, sim.labels,
                            detect_ranges(run.gmm, cfg.pipeline.endpoint, buf),
                            truth, tol);
        acc.dnn += evaluate(run.dnn, sim.labels,
                            detect_ranges(run.dnn, cfg.pipeline.endpoint, buf),
                            truth, tol);
        acc.fused +=
            evaluate(run.fused, sim.labels,
                     detect_ranges(run.fused, cfg.pipeline.endpoint, buf),
                     truth, tol);
      }
      out.push_back(acc);
    }
  }
  return out;
}

// ---- corpus files -------------------------------------------------------

inline void write_labels_tsv(const std::string& path,
                             std::span<const double> labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << '\t';
    if (labels[i] == 0.5)
      out << "0.5";
    else
      out << (labels[i] > 0.5 ? '1' : '0');
    out << '\n';
  }
}

inline std::vector<double> read_labels_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<double> labels;
  std::string line;
  std::int64_t expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::int64_t frame;
    double label;
    if (!(ss >> frame >> label))
      throw Error(ErrorCode::kIoError, path + ": bad label line: " + line);
    if (frame != expect++)
      throw Error(ErrorCode::kIoError, path + ": non-contiguous frame index");
    if (label != 0.0 && label != 0.5 && label != 1.0)
      throw Error(ErrorCode::kIoError, path + ": label outside {0,0.5,1}");
    labels.push_back(label);
  }
  return labels;
}

inline std::vector<AnnotatedSegment> read_segments_tsv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<AnnotatedSegment> segs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    AnnotatedSegment seg;
    std::string cls;
    if (!(ss >> seg.start_sec >> seg.end_sec >> cls))
      throw Error(ErrorCode::kIoError, path + ": bad segment line: " + line);
    seg.speech = (cls == "speech" || cls == "1");
    segs.push_back(seg);
  }
  return segs;
}

struct ManifestEntry {
  std::string wav;
  std::string labels;
  NoiseKind kind = NoiseKind::kWind;
  double snr_db = 0.0;
};

inline void write_manifest(const std::string& path,
                           std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path);
  out << "#wav\tlabels\tnoise\tsnr_db\n";
  for (const auto& e : entries)
    out << e.wav << '\t' << e.labels << '\t' << noise_kind_name(e.kind) << '\t'
        << e.snr_db << '\n';
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string kind;
    if (!(ss >> e.wav >> e.labels >> kind >> e.snr_db))
      throw Error(ErrorCode::kIoError, path + ": bad manifest line: " + line);
    e.kind = parse_noise_kind(kind);
    entries.push_back(e);
  }
  return entries;
}

inline void write_eval_report(std::ostream& out,
                              std::span<const ConditionAccuracy> rows) {
  out << "# utterance endpoints matched within +-200 ms\n";
  out << "snr_db\tnoise\talgorithm\tframe_accuracy\tutterance_accuracy\t"
         "frames_scored\tutterances\n";
  char buf[64];
  for (const auto& row : rows) {
    const struct {
      const char* name;
      const EvalResult* r;
    } algos[] = {{"gmm", &row.gmm}, {"dnn", &row.dnn}, {"fused", &row.fused}};
    for (const auto& a : algos) {
      out << row.snr_db << '\t' << noise_kind_name(row.kind) << '\t' << a.name
          << '\t';
      std::snprintf(buf, sizeof(buf), "%.4f\t%.4f", a.r->frame_accuracy(),
                    a.r->utterance_accuracy());
      out << buf << '\t' << a.r->frames_scored << '\t' << a.r->utterances_total
          << '\n';
    }
  }
}

}  // namespace vadfuse
