#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vadfuse/audio.hpp"
#include "vadfuse/config.hpp"
#include "vadfuse/dnn.hpp"
#include "vadfuse/error.hpp"
#include "vadfuse/features.hpp"
#include "vadfuse/gmm.hpp"

namespace vadfuse {

struct LabeledFrame {
  std::int64_t frame_index = 0;
  double label = 0.0;  // 0, 0.5 or 1
};

inline std::vector<double> frame_energies(const SampleStream& s) {
  FrameStream frames(s);
  std::vector<double> out(static_cast<std::size_t>(frames.size()));
  for (std::int64_t i = 0; i < frames.size(); ++i) {
    double acc = 0.0;
    for (double v : frames[i].window) acc += v * v;
    out[static_cast<std::size_t>(i)] = acc / kFrameWindow;
  }
  return out;
}

namespace detail {

// Nearest-rank percentile on a copy.
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(v.size())));
  if (idx > 0) --idx;
  if (idx >= v.size()) idx = v.size() - 1;
  return v[idx];
}

// Relabels the 2*boundary frames straddling each hard transition to 0.5.
// A transition sits between frames i-1 and i; frames [i-b, i+b) soften.
inline void soften_transitions(std::vector<double>& labels, int boundary) {
  if (boundary <= 0) return;
  const std::int64_t n = static_cast<std::int64_t>(labels.size());
  std::vector<std::int64_t> edges;
  for (std::int64_t i = 1; i < n; ++i)
    if (labels[i] != labels[i - 1]) edges.push_back(i);
  for (std::int64_t i : edges) {
    const std::int64_t lo = std::max<std::int64_t>(0, i - boundary);
    const std::int64_t hi = std::min<std::int64_t>(n, i + boundary);
    for (std::int64_t j = lo; j < hi; ++j) labels[j] = 0.5;
  }
}

}  // namespace detail

// Frame labels from the clean signal's energy: above threshold_ratio times
// the 95th-percentile frame energy is speech; transitions soften to 0.5.
inline std::vector<double> energy_labels(const SampleStream& clean,
                                         double threshold_ratio,
                                         int boundary) {
  const auto energies = frame_energies(clean);
  const double thr = threshold_ratio * detail::percentile(energies, 0.95);
  std::vector<double> labels(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i)
    labels[i] = energies[i] > thr ? 1.0 : 0.0;
  detail::soften_transitions(labels, boundary);
  return labels;
}

struct AnnotatedSegment {
  double start_sec = 0.0;
  double end_sec = 0.0;
  bool speech = false;
};

// Expands segment annotations to frame labels. Edges that coincide with the
// stream boundary are not transitions and stay hard.
inline std::vector<double> refine_segment_labels(
    std::span<const AnnotatedSegment> segments, std::int64_t total_frames,
    int boundary) {
  std::vector<double> labels(static_cast<std::size_t>(total_frames), 0.0);
  double prev_end = -1.0;
  for (const auto& seg : segments) {
    if (seg.start_sec < prev_end)
      throw Error(ErrorCode::kOverlappingSegments,
                  "segment at " + std::to_string(seg.start_sec) + "s");
    if (seg.end_sec < seg.start_sec)
      throw Error(ErrorCode::kOverlappingSegments,
                  "segment ends before it starts");
    prev_end = seg.end_sec;
  }
  const double frames_per_sec =
      static_cast<double>(kSampleRate) / kFrameHop;
  std::vector<std::int64_t> edges;
  for (const auto& seg : segments) {
    if (!seg.speech) continue;
    std::int64_t b = std::llround(seg.start_sec * frames_per_sec);
    std::int64_t e = std::llround(seg.end_sec * frames_per_sec);
    b = std::clamp<std::int64_t>(b, 0, total_frames);
    e = std::clamp<std::int64_t>(e, 0, total_frames);
    for (std::int64_t i = b; i < e; ++i) labels[static_cast<std::size_t>(i)] = 1.0;
    if (b > 0) edges.push_back(b);
    if (e < total_frames) edges.push_back(e);
  }
  if (boundary > 0) {
    for (std::int64_t i : edges) {
      const std::int64_t lo = std::max<std::int64_t>(0, i - boundary);
      const std::int64_t hi = std::min<std::int64_t>(total_frames, i + boundary);
      for (std::int64_t j = lo; j < hi; ++j)
        labels[static_cast<std::size_t>(j)] = 0.5;
    }
  }
  return labels;
}

inline double snr_gain(double p_speech, double p_noise, double snr_db) {
  return std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
}

// Adds noise to clean speech at the requested SNR, measured over the clean
// signal's speech-labeled frames. Noise shorter than the clean signal tiles.
inline SampleStream mix_at_snr(const SampleStream& clean,
                               const SampleStream& noise, double snr_db,
                               double threshold_ratio = 0.1) {
  const auto labels = energy_labels(clean, threshold_ratio, 0);
  const auto energies = frame_energies(clean);
  double p_speech = 0.0;
  std::int64_t n_speech = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1.0) {
      p_speech += energies[i];
      ++n_speech;
    }
  }
  if (n_speech == 0 || !(p_speech > 0.0))
    throw Error(ErrorCode::kSilentClean, "no speech-labeled energy in clean");
  p_speech /= static_cast<double>(n_speech);

  const std::size_t n = clean.samples.size();
  if (noise.samples.empty())
    throw Error(ErrorCode::kSilentClean, "empty noise stream");
  std::vector<double> tiled(n);
  for (std::size_t i = 0; i < n; ++i)
    tiled[i] = noise.samples[i % noise.samples.size()];

  double p_noise = 0.0;
  for (double v : tiled) p_noise += v * v;
  p_noise /= static_cast<double>(n);
  if (!(p_noise > 0.0))
    throw Error(ErrorCode::kSilentClean, "noise stream has zero power");

  const double g = snr_gain(p_speech, p_noise, snr_db);
  SampleStream out;
  out.sample_rate_hz = clean.sample_rate_hz;
  out.samples.resize(n);
  const double hi = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = clean.samples[i] + g * tiled[i];
    if (v < -1.0) v = -1.0;
    if (v > hi) v = hi;
    out.samples[i] = v;
  }
  return out;
}

struct FrameRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;  // exclusive
};

// Truth utterances: maximal label runs above 0 that contain at least one
// hard speech frame (boundary 0.5s attach to the run they touch).
inline std::vector<FrameRange> label_runs(std::span<const double> labels) {
  std::vector<FrameRange> out;
  const std::int64_t n = static_cast<std::int64_t>(labels.size());
  std::int64_t i = 0;
  while (i < n) {
    if (labels[i] == 0.0) {
      ++i;
      continue;
    }
    std::int64_t j = i;
    bool has_hard = false;
    while (j < n && labels[j] != 0.0) {
      if (labels[j] == 1.0) has_hard = true;
      ++j;
    }
    if (has_hard) out.push_back({i, j});
    i = j;
  }
  return out;
}

struct EvalResult {
  std::int64_t frames_total = 0;
  std::int64_t frames_scored = 0;
  std::int64_t frames_correct = 0;
  std::int64_t utterances_total = 0;
  std::int64_t utterances_matched = 0;

  double frame_accuracy() const {
    return frames_scored > 0
               ? static_cast<double>(frames_correct) / frames_scored
               : 1.0;
  }
  double utterance_accuracy() const {
    return utterances_total > 0
               ? static_cast<double>(utterances_matched) / utterances_total
               : 1.0;
  }
  EvalResult& operator+=(const EvalResult& o) {
    frames_total += o.frames_total;
    frames_scored += o.frames_scored;
    frames_correct += o.frames_correct;
    utterances_total += o.utterances_total;
    utterances_matched += o.utterances_matched;
    return *this;
  }
};

// Frame accuracy over hard-labeled frames only; 0.5 frames are not scored.
// An utterance counts as matched when some detected segment has both
// endpoints within the tolerance.
inline EvalResult evaluate(std::span<const int> flags,
                           std::span<const double> labels,
                           std::span<const FrameRange> detected,
                           std::span<const FrameRange> truth,
                           int tolerance_frames = 20) {
  if (flags.size() != labels.size())
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(flags.size()) + " flags vs " +
                    std::to_string(labels.size()) + " labels");
  EvalResult r;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    ++r.frames_total;
    if (labels[i] == 0.5) continue;
    ++r.frames_scored;
    const int want = labels[i] > 0.5 ? 1 : 0;
    if (flags[i] == want) ++r.frames_correct;
  }
  r.utterances_total = static_cast<std::int64_t>(truth.size());
  for (const auto& t : truth) {
    for (const auto& d : detected) {
      if (std::llabs(d.begin - t.begin) <= tolerance_frames &&
          std::llabs(d.end - t.end) <= tolerance_frames) {
        ++r.utterances_matched;
        break;
      }
    }
  }
  return r;
}

struct CalibrationUtterance {
  std::vector<SubbandFeature> subbands;
  std::vector<double> labels;
  std::vector<double> dnn_p_speech;  // may be empty when no net is loaded
};

struct ThresholdGrid {
  std::vector<double> t_tau;
  std::vector<double> t_a;
  std::vector<double> dnn_threshold;
};

struct CalibrationResult {
  double t_tau = 0.0;
  double t_a = 0.0;
  double dnn_threshold = 0.5;
  double gmm_frame_accuracy = 0.0;
  double dnn_frame_accuracy = 0.0;
};

// Exhaustive search maximizing standalone frame accuracy: the detector
// thresholds first, then the net threshold. Ties go to the smaller values.
inline CalibrationResult calibrate_thresholds(
    std::span<const CalibrationUtterance> corpus, const ThresholdGrid& grid,
    const GmmConfig& base_cfg) {
  if (grid.t_tau.empty() || grid.t_a.empty())
    throw Error(ErrorCode::kEmptyGrid, "threshold grid is empty");
  bool have_posteriors = false;
  for (const auto& u : corpus)
    if (!u.dnn_p_speech.empty()) have_posteriors = true;
  if (have_posteriors && grid.dnn_threshold.empty())
    throw Error(ErrorCode::kEmptyGrid, "net threshold grid is empty");

  std::vector<double> taus(grid.t_tau.begin(), grid.t_tau.end());
  std::vector<double> tas(grid.t_a.begin(), grid.t_a.end());
  std::sort(taus.begin(), taus.end());
  std::sort(tas.begin(), tas.end());

  CalibrationResult best;
  double best_score = -1.0;
  for (double tau : taus) {
    for (double ta : tas) {
      GmmConfig cfg = base_cfg;
      cfg.t_tau = tau;
      cfg.t_a = ta;
      std::int64_t scored = 0, correct = 0;
      for (const auto& u : corpus) {
        GmmRunner runner(cfg);
        for (std::size_t t = 0; t < u.subbands.size(); ++t) {
          const int flag = runner.step(u.subbands[t]);
          if (u.labels[t] == 0.5) continue;
          ++scored;
          if (flag == (u.labels[t] > 0.5 ? 1 : 0)) ++correct;
        }
      }
      const double score =
          scored > 0 ? static_cast<double>(correct) / scored : 0.0;
      if (score > best_score) {
        best_score = score;
        best.t_tau = tau;
        best.t_a = ta;
        best.gmm_frame_accuracy = score;
      }
    }
  }

  if (have_posteriors) {
    std::vector<double> thrs(grid.dnn_threshold.begin(),
                             grid.dnn_threshold.end());
    std::sort(thrs.begin(), thrs.end());
    double best_dnn = -1.0;
    for (double thr : thrs) {
      std::int64_t scored = 0, correct = 0;
      for (const auto& u : corpus) {
        for (std::size_t t = 0; t < u.dnn_p_speech.size(); ++t) {
          if (u.labels[t] == 0.5) continue;
          ++scored;
          const int flag = u.dnn_p_speech[t] > thr ? 1 : 0;
          if (flag == (u.labels[t] > 0.5 ? 1 : 0)) ++correct;
        }
      }
      const double score =
          scored > 0 ? static_cast<double>(correct) / scored : 0.0;
      if (score > best_dnn) {
        best_dnn = score;
        best.dnn_threshold = thr;
        best.dnn_frame_accuracy = score;
      }
    }
  }
  return best;
}

}  // namespace vadfuse
