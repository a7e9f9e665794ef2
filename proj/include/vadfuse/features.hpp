#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "vadfuse/audio.hpp"
#include "vadfuse/error.hpp"
#include "vadfuse/fft.hpp"

namespace vadfuse {

inline constexpr int kNumMel = 29;
inline constexpr int kFeatureDim = 3 * kNumMel;  // statics + delta1 + delta2
inline constexpr int kNumSubbands = 6;
inline constexpr int kFftSize = 512;

struct FbankVector {
  std::array<double, kNumMel> values{};
};

struct FeatureFrame {
  std::array<double, kNumMel> statics{};
  std::array<double, kNumMel> delta1{};
  std::array<double, kNumMel> delta2{};

  double get(int i) const {
    return i < kNumMel ? statics[i]
                       : (i < 2 * kNumMel ? delta1[i - kNumMel]
                                          : delta2[i - 2 * kNumMel]);
  }
  void set(int i, double v) {
    if (i < kNumMel)
      statics[i] = v;
    else if (i < 2 * kNumMel)
      delta1[i - kNumMel] = v;
    else
      delta2[i - 2 * kNumMel] = v;
  }
};

struct SubbandFeature {
  std::array<double, kNumSubbands> e{};
};

struct FeatureConfig {
  double preemphasis = 0.97;
  double energy_floor = 1e-10;
  double cmn_decay = 0.995;
  int cmn_warmup_frames = 20;
  int context_left = 5;
  int context_right = 5;
  // WebRTC's six analysis bands, in Hz.
  std::array<std::pair<double, double>, kNumSubbands> band_edges{{
      {80.0, 250.0},
      {250.0, 500.0},
      {500.0, 1000.0},
      {1000.0, 2000.0},
      {2000.0, 3000.0},
      {3000.0, 4000.0},
  }};
};

namespace detail {

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

}  // namespace detail

// Frame-level spectral features: 29 mel filterbank log-energies for the
// classifier path and six band log-energies for the adaptive model path.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg = {}) : cfg_(cfg) {
    for (int i = 0; i < kFrameWindow; ++i)
      hamming_[i] = 0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * i /
                                           (kFrameWindow - 1));

    // Triangular filters with equal width on the mel scale, 0..Nyquist.
    const double nyquist = kSampleRate / 2.0;
    const double mel_max = detail::hz_to_mel(nyquist);
    std::array<double, kNumMel + 2> mel_points;
    for (int j = 0; j < kNumMel + 2; ++j)
      mel_points[j] = mel_max * j / (kNumMel + 1);
    const int num_bins = kFftSize / 2 + 1;
    for (int k = 0; k < kNumMel; ++k) {
      const double lo = mel_points[k], mid = mel_points[k + 1],
                   hi = mel_points[k + 2];
      std::vector<std::pair<int, double>> taps;
      for (int b = 0; b < num_bins; ++b) {
        const double m = detail::hz_to_mel(b * static_cast<double>(kSampleRate) /
                                           kFftSize);
        double w = 0.0;
        if (m >= lo && m <= mid && mid > lo)
          w = (m - lo) / (mid - lo);
        else if (m > mid && m <= hi && hi > mid)
          w = (hi - m) / (hi - mid);
        if (w > 0.0) taps.emplace_back(b, w);
      }
      mel_filters_[k] = std::move(taps);
    }

    for (int k = 0; k < kNumSubbands; ++k) {
      const auto [lo_hz, hi_hz] = cfg_.band_edges[k];
      int lo = static_cast<int>(
          std::ceil(lo_hz * kFftSize / static_cast<double>(kSampleRate)));
      int hi = static_cast<int>(
          std::ceil(hi_hz * kFftSize / static_cast<double>(kSampleRate)));
      if (hi > num_bins) hi = num_bins;
      band_bins_[k] = {lo, hi};  // [lo, hi)
    }
  }

  const FeatureConfig& config() const { return cfg_; }

  FbankVector fbank(std::span<const double> window) const {
    if (window.size() != kFrameWindow)
      throw Error(ErrorCode::kDimMismatch, "frame window must be 400 samples");
    std::array<double, kFrameWindow> buf;
    buf[0] = (window[0] - cfg_.preemphasis * window[0]) * hamming_[0];
    for (int i = 1; i < kFrameWindow; ++i)
      buf[i] = (window[i] - cfg_.preemphasis * window[i - 1]) * hamming_[i];
    const auto power = detail::power_spectrum(buf, kFftSize);
    FbankVector out;
    for (int k = 0; k < kNumMel; ++k) {
      double acc = 0.0;
      for (const auto& [b, w] : mel_filters_[k]) acc += w * power[b];
      out.values[k] = std::log(acc > cfg_.energy_floor ? acc
                                                       : cfg_.energy_floor);
    }
    return out;
  }

  SubbandFeature subbands(std::span<const double> window) const {
    if (window.size() != kFrameWindow)
      throw Error(ErrorCode::kDimMismatch, "frame window must be 400 samples");
    std::array<double, kFrameWindow> buf;
    for (int i = 0; i < kFrameWindow; ++i) buf[i] = window[i] * hamming_[i];
    const auto power = detail::power_spectrum(buf, kFftSize);
    SubbandFeature out;
    for (int k = 0; k < kNumSubbands; ++k) {
      double acc = 0.0;
      for (int b = band_bins_[k].first; b < band_bins_[k].second; ++b)
        acc += power[b];
      out.e[k] = std::log(acc > cfg_.energy_floor ? acc : cfg_.energy_floor);
    }
    return out;
  }

 private:
  FeatureConfig cfg_;
  std::array<double, kFrameWindow> hamming_;
  std::array<std::vector<std::pair<int, double>>, kNumMel> mel_filters_;
  std::array<std::pair<int, int>, kNumSubbands> band_bins_;
};

namespace detail {

// +-2 regression deltas with edge replication; idx() clamps into [0, n).
template <typename GetFn>
inline std::array<double, kNumMel> regression_delta(GetFn&& at, std::int64_t t,
                                                    std::int64_t n) {
  auto idx = [n](std::int64_t i) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
  std::array<double, kNumMel> d{};
  const auto& m2 = at(idx(t - 2));
  const auto& m1 = at(idx(t - 1));
  const auto& p1 = at(idx(t + 1));
  const auto& p2 = at(idx(t + 2));
  for (int k = 0; k < kNumMel; ++k)
    d[k] = (1.0 * (p1[k] - m1[k]) + 2.0 * (p2[k] - m2[k])) / 10.0;
  return d;
}

}  // namespace detail

// First and second temporal derivatives over the whole utterance.
inline std::vector<FeatureFrame> compute_deltas(
    std::span<const FbankVector> seq) {
  const std::int64_t n = static_cast<std::int64_t>(seq.size());
  std::vector<FeatureFrame> out(seq.size());
  for (std::int64_t t = 0; t < n; ++t) {
    out[t].statics = seq[t].values;
    out[t].delta1 = detail::regression_delta(
        [&](std::int64_t i) -> const std::array<double, kNumMel>& {
          return seq[i].values;
        },
        t, n);
  }
  for (std::int64_t t = 0; t < n; ++t)
    out[t].delta2 = detail::regression_delta(
        [&](std::int64_t i) -> const std::array<double, kNumMel>& {
          return out[i].delta1;
        },
        t, n);
  return out;
}

struct CmnState {
  std::array<double, kFeatureDim> running_mean{};
  double decay = 0.995;
  int warmup_frames = 20;
  int warmup_count = 0;
};

// Streaming mean normalization: cumulative mean for the first warmup frames,
// exponential running mean afterwards. Mutates state.
inline FeatureFrame cmn_apply(CmnState& state, const FeatureFrame& f) {
  FeatureFrame out = f;
  if (state.warmup_count < state.warmup_frames) {
    ++state.warmup_count;
    for (int i = 0; i < kFeatureDim; ++i) {
      state.running_mean[i] += (f.get(i) - state.running_mean[i]) /
                               state.warmup_count;
      out.set(i, f.get(i) - state.running_mean[i]);
    }
  } else {
    for (int i = 0; i < kFeatureDim; ++i) {
      out.set(i, f.get(i) - state.running_mean[i]);
      state.running_mean[i] = state.decay * state.running_mean[i] +
                              (1.0 - state.decay) * f.get(i);
    }
  }
  return out;
}

// Per-utterance mean subtraction, used when preparing training data.
inline std::vector<FeatureFrame> cmn_batch(std::span<const FeatureFrame> seq) {
  std::array<double, kFeatureDim> mean{};
  for (const auto& f : seq)
    for (int i = 0; i < kFeatureDim; ++i) mean[i] += f.get(i);
  if (!seq.empty())
    for (int i = 0; i < kFeatureDim; ++i) mean[i] /= static_cast<double>(seq.size());
  std::vector<FeatureFrame> out(seq.begin(), seq.end());
  for (auto& f : out)
    for (int i = 0; i < kFeatureDim; ++i) f.set(i, f.get(i) - mean[i]);
  return out;
}

struct SplicedFeature {
  std::vector<double> values;  // kFeatureDim * (L + 1 + R)
};

inline int spliced_dim(int left, int right) {
  return kFeatureDim * (left + 1 + right);
}

// Context stack [t-L .. t+R], edge-replicated.
inline SplicedFeature splice_at(std::span<const FeatureFrame> seq,
                                std::int64_t t, int left, int right) {
  const std::int64_t n = static_cast<std::int64_t>(seq.size());
  SplicedFeature out;
  out.values.resize(static_cast<std::size_t>(spliced_dim(left, right)));
  std::size_t pos = 0;
  for (std::int64_t c = t - left; c <= t + right; ++c) {
    const std::int64_t i = c < 0 ? 0 : (c >= n ? n - 1 : c);
    const FeatureFrame& f = seq[i];
    for (int k = 0; k < kNumMel; ++k) out.values[pos++] = f.statics[k];
    for (int k = 0; k < kNumMel; ++k) out.values[pos++] = f.delta1[k];
    for (int k = 0; k < kNumMel; ++k) out.values[pos++] = f.delta2[k];
  }
  return out;
}

inline std::vector<SplicedFeature> splice(std::span<const FeatureFrame> seq,
                                          int left, int right) {
  std::vector<SplicedFeature> out;
  out.reserve(seq.size());
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(seq.size()); ++t)
    out.push_back(splice_at(seq, t, left, right));
  return out;
}

// Streaming delta stack. Emits FeatureFrames four frames behind the input;
// finish() drains the tail with the same edge replication the batch path
// uses, so streamed output matches compute_deltas() exactly.
class StreamingFeatureStack {
 public:
  template <typename Fn>
  void push(const FbankVector& f, Fn&& emit) {
    fbanks_.push_back(f.values);
    ++n_in_;
    while (next_d1_ + 2 < n_in_) emit_delta1(emit, /*upper_clamp=*/n_in_);
  }

  template <typename Fn>
  void finish(Fn&& emit) {
    while (next_d1_ < n_in_) emit_delta1(emit, n_in_);
    while (next_out_ < n_in_) emit_frame(emit, n_in_);
  }

  std::int64_t frames_in() const { return n_in_; }
  std::int64_t frames_out() const { return next_out_; }

 private:
  template <typename Fn>
  void emit_delta1(Fn&& emit, std::int64_t n_total) {
    const std::int64_t t = next_d1_;
    auto fb = [&](std::int64_t i) -> const std::array<double, kNumMel>& {
      return fbanks_[static_cast<std::size_t>(i - fbank_base_)];
    };
    delta1_.push_back(detail::regression_delta(fb, t, n_total));
    ++next_d1_;
    while (next_out_ + 2 < next_d1_) emit_frame(emit, n_total);
  }

  template <typename Fn>
  void emit_frame(Fn&& emit, std::int64_t n_total) {
    const std::int64_t t = next_out_;
    auto d1 = [&](std::int64_t i) -> const std::array<double, kNumMel>& {
      return delta1_[static_cast<std::size_t>(i - d1_base_)];
    };
    FeatureFrame out;
    out.statics = fbanks_[static_cast<std::size_t>(t - fbank_base_)];
    out.delta1 = delta1_[static_cast<std::size_t>(t - d1_base_)];
    out.delta2 = detail::regression_delta(
        d1, t, next_d1_ < n_total ? next_d1_ : n_total);
    emit(out);
    ++next_out_;
    while (fbank_base_ < next_out_ - 2 && fbank_base_ < next_d1_ - 2) {
      fbanks_.pop_front();
      ++fbank_base_;
    }
    while (d1_base_ < next_out_ - 2) {
      delta1_.pop_front();
      ++d1_base_;
    }
  }

  std::deque<std::array<double, kNumMel>> fbanks_;
  std::deque<std::array<double, kNumMel>> delta1_;
  std::int64_t fbank_base_ = 0;
  std::int64_t d1_base_ = 0;
  std::int64_t n_in_ = 0;
  std::int64_t next_d1_ = 0;   // next delta1 index to compute
  std::int64_t next_out_ = 0;  // next FeatureFrame index to emit
};

// Debug/training dump: `#dims=<n>` header, one frame per line.
inline void write_feature_dump(std::ostream& out,
                               std::span<const FeatureFrame> seq) {
  out << "#dims=" << kFeatureDim << "\n";
  char buf[32];
  for (const auto& f : seq) {
    for (int i = 0; i < kFeatureDim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", f.get(i));
      if (i) out << '\t';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace vadfuse
