#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vadfuse/audio.hpp"
#include "vadfuse/error.hpp"
#include "vadfuse/harness.hpp"
#include "vadfuse/random.hpp"

namespace vadfuse {

enum class NoiseKind { kWind, kWater, kBabble, kTelevision };

inline const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::kWind: return "wind";
    case NoiseKind::kWater: return "water";
    case NoiseKind::kBabble: return "babble";
    case NoiseKind::kTelevision: return "television";
  }
  return "unknown";
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "wind") return NoiseKind::kWind;
  if (s == "water") return NoiseKind::kWater;
  if (s == "babble") return NoiseKind::kBabble;
  if (s == "television") return NoiseKind::kTelevision;
  throw Error(ErrorCode::kBadConfig, "unknown noise kind: " + s);
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kWind;
  std::uint64_t seed = 0;
};

namespace detail {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

inline void normalize_rms(std::vector<double>& x, double target) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  if (x.empty() || !(acc > 0.0)) return;
  const double scale = target / std::sqrt(acc / static_cast<double>(x.size()));
  for (double& v : x) v *= scale;
}

inline double onepole_coeff(double cutoff_hz) {
  return 1.0 - std::exp(-kTwoPi * cutoff_hz / kSampleRate);
}

// Rumble: white noise through two low-pass poles under slow deep swells.
inline std::vector<double> gen_wind(Rng& rng, std::int64_t n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  const double a = onepole_coeff(100.0);
  const double am = onepole_coeff(1.2);
  const double fm1 = rng.uniform(0.15, 0.5);
  const double ph1 = rng.uniform(0.0, kTwoPi);
  double y1 = 0.0, y2 = 0.0, z = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    y1 += a * (w - y1);
    y2 += a * (y1 - y2);
    z += am * (rng.normal() - z);
    const double t = static_cast<double>(i) / kSampleRate;
    const double g = 1.0 + 0.45 * std::sin(kTwoPi * fm1 * t + ph1) +
                     0.75 * std::tanh(45.0 * z);
    x[static_cast<std::size_t>(i)] = y2 * g;
  }
  normalize_rms(x, 0.06);
  return x;
}

// Flat broadband carrier with a fast-moving random envelope. The envelope
// poles sit below the frame rate so the swings survive frame averaging.
inline std::vector<double> gen_water(Rng& rng, std::int64_t n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  const double am_fast = onepole_coeff(12.0);
  const double am_slow = onepole_coeff(4.0);
  double zf = 0.0, zs = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    zf += am_fast * (rng.normal() - zf);
    zs += am_slow * (rng.normal() - zs);
    const double env =
        1.0 + 0.35 * std::tanh(12.0 * zf) + 0.85 * std::tanh(28.0 * zs);
    x[static_cast<std::size_t>(i)] = w * env;
  }
  normalize_rms(x, 0.06);
  return x;
}

struct BabbleVoice {
  double home;  // register center; the walk stays near it
  double freq;
  double phase;
  double am_rate;
  double am_phase;
};

inline std::vector<double> gen_babble_voices(Rng& rng, std::int64_t n,
                                             int num_voices) {
  std::vector<BabbleVoice> voices;
  voices.reserve(static_cast<std::size_t>(num_voices));
  for (int v = 0; v < num_voices; ++v) {
    // Spread registers across the speech band so every analysis band keeps
    // a stable occupant.
    const double home = 300.0 * std::pow(2800.0 / 300.0,
                                         (v + rng.uniform(0.2, 0.8)) /
                                             num_voices);
    voices.push_back({home, home, rng.uniform(0.0, kTwoPi),
                      rng.uniform(4.0, 8.0), rng.uniform(0.0, kTwoPi)});
  }
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  constexpr int kWalkBlock = 80;  // pitch walk updates every 5 ms
  for (std::int64_t i = 0; i < n; ++i) {
    if (i % kWalkBlock == 0) {
      for (auto& v : voices) {
        v.freq *= std::exp(0.015 * rng.normal());
        if (v.freq < 0.8 * v.home) v.freq = 0.8 * v.home;
        if (v.freq > 1.25 * v.home) v.freq = 1.25 * v.home;
      }
    }
    const double t = static_cast<double>(i) / kSampleRate;
    double acc = 0.0;
    for (auto& v : voices) {
      v.phase += kTwoPi * v.freq / kSampleRate;
      const double s = std::sin(kTwoPi * v.am_rate * t + v.am_phase);
      const double env = 0.55 + 0.45 * (s > 0.0 ? s * s : 0.0);
      acc += env * std::sin(v.phase);
    }
    x[static_cast<std::size_t>(i)] = acc / num_voices;
  }
  return x;
}

inline std::vector<double> gen_babble(Rng& rng, std::int64_t n) {
  auto x = gen_babble_voices(rng, n, 6);
  normalize_rms(x, 0.06);
  return x;
}

// Harmonic chords and babble alternate by emphasis over a common level,
// the way compressed broadcast audio keeps its loudness steady.
inline std::vector<double> gen_television(Rng& rng, std::int64_t n) {
  const auto babble = gen_babble_voices(rng, n, 3);

  // One chord register per stream; notes repeat within it so the spectral
  // footprint stays put while the rhythm keeps pulsing.
  std::vector<double> music(static_cast<std::size_t>(n), 0.0);
  const double base = rng.uniform(150.0, 400.0);
  const double ratios[3] = {1.0, 1.25, 1.5};
  double phases[3][3];
  for (auto& row : phases)
    for (double& p : row) p = rng.uniform(0.0, kTwoPi);
  const double note_rate = rng.uniform(2.0, 4.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double beat = t * note_rate - std::floor(t * note_rate);
    const double env = 0.55 + 0.45 * std::exp(-2.0 * beat) *
                                  (beat < 0.02 ? beat / 0.02 : 1.0);
    double acc = 0.0;
    for (int v = 0; v < 3; ++v) {
      const double f = base * ratios[v];
      for (int h = 1; h <= 3; ++h)
        acc += std::sin(kTwoPi * f * h * t + phases[v][h - 1]) / (h * h);
    }
    music[static_cast<std::size_t>(i)] = acc * env / 3.0;
  }

  std::vector<double> x(static_cast<std::size_t>(n));
  // Alternating emphasis with smooth crossfades.
  const double flip_rate = rng.uniform(0.3, 0.6);
  const double flip_phase = rng.uniform(0.0, kTwoPi);
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double s = std::sin(kTwoPi * flip_rate * t + flip_phase);
    const double music_gain = 0.55 + 0.45 * (0.5 + 0.5 * std::tanh(6.0 * s));
    const double babble_gain = 1.55 - music_gain;
    x[static_cast<std::size_t>(i)] =
        music_gain * music[static_cast<std::size_t>(i)] +
        babble_gain * babble[static_cast<std::size_t>(i)];
  }
  normalize_rms(x, 0.06);
  return x;
}

}  // namespace detail

// Deterministic stand-in noise, reproducible from the spec alone.
inline SampleStream synth_noise(const NoiseSpec& spec, std::int64_t length) {
  SampleStream out;
  out.sample_rate_hz = kSampleRate;
  if (length <= 0) return out;
  Rng rng(spec.seed ^ (static_cast<std::uint64_t>(spec.kind) + 1) * 0x9E3779B97F4A7C15ULL);
  switch (spec.kind) {
    case NoiseKind::kWind: out.samples = detail::gen_wind(rng, length); break;
    case NoiseKind::kWater: out.samples = detail::gen_water(rng, length); break;
    case NoiseKind::kBabble: out.samples = detail::gen_babble(rng, length); break;
    case NoiseKind::kTelevision:
      out.samples = detail::gen_television(rng, length);
      break;
  }
  return out;
}

struct CleanUtterance {
  SampleStream audio;
  std::vector<double> labels;
};

namespace detail {

// One voiced burst: a harmonic stack under a formant-shaped envelope with a
// syllabic amplitude swing, plus a little modulated breath noise.
inline void add_speech_burst(Rng& rng, std::vector<double>& x,
                             std::int64_t start, std::int64_t len) {
  const double f1 = rng.uniform(350.0, 800.0);
  const double f2 = rng.uniform(1000.0, 2200.0);
  const double f3 = rng.uniform(2400.0, 3100.0);
  const double f0_start = rng.uniform(95.0, 230.0);
  const double f0_end = f0_start * rng.uniform(0.85, 1.2);
  const double gain = std::pow(10.0, rng.uniform(-8.0, 0.0) / 20.0);
  const double syl_rate = rng.uniform(2.5, 5.0);
  const double syl_phase = rng.uniform(0.0, kTwoPi);

  const int max_h = static_cast<int>(3800.0 / f0_start);
  std::vector<double> amp(static_cast<std::size_t>(max_h));
  std::vector<double> phase(static_cast<std::size_t>(max_h));
  for (int h = 1; h <= max_h; ++h) {
    const double f = h * f0_start;
    auto bump = [f](double c, double bw) {
      const double d = (f - c) / bw;
      return std::exp(-0.5 * d * d);
    };
    amp[h - 1] = (0.05 + bump(f1, 130.0) + 0.55 * bump(f2, 180.0) +
                  0.30 * bump(f3, 240.0)) /
                 std::sqrt(static_cast<double>(h));
    phase[h - 1] = rng.uniform(0.0, kTwoPi);
  }

  const double dur = static_cast<double>(len) / kSampleRate;
  const double ramp = 0.03;  // edge ramps, seconds
  std::vector<double> burst(static_cast<std::size_t>(len), 0.0);
  for (std::int64_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double f0 = f0_start * std::pow(f0_end / f0_start, t / dur);
    const double s = std::sin(kTwoPi * syl_rate * t + syl_phase);
    double env = 0.4 + 0.6 * (s > 0.0 ? s * s : 0.0);
    if (t < ramp) env *= 0.5 - 0.5 * std::cos(3.14159265358979323846 * t / ramp);
    const double tail = dur - t;
    if (tail < ramp)
      env *= 0.5 - 0.5 * std::cos(3.14159265358979323846 * tail / ramp);
    double acc = 0.0;
    for (int h = 1; h <= max_h; ++h) {
      phase[h - 1] += kTwoPi * f0 * h / kSampleRate;
      acc += amp[h - 1] * std::sin(phase[h - 1]);
    }
    acc += 0.10 * rng.normal() * env;  // breathiness
    burst[static_cast<std::size_t>(i)] = acc * env;
  }
  normalize_rms(burst, 0.08 * gain);
  for (std::int64_t i = 0; i < len; ++i)
    x[static_cast<std::size_t>(start + i)] += burst[static_cast<std::size_t>(i)];
}

}  // namespace detail

// Synthetic utterance: silence, one to three voiced bursts, silence. Labels
// come from the clean energy, the same way recorded corpora are labeled.
inline CleanUtterance generate_clean_utterance(std::uint64_t seed,
                                               double label_threshold_ratio,
                                               int label_boundary) {
  Rng rng(seed);
  const std::int64_t lead =
      static_cast<std::int64_t>(rng.uniform(0.45, 0.75) * kSampleRate);
  const std::int64_t tail =
      static_cast<std::int64_t>(rng.uniform(0.35, 0.6) * kSampleRate);
  const int bursts = static_cast<int>(rng.uniform_int(1, 3));
  std::vector<std::int64_t> burst_lens, gap_lens;
  for (int b = 0; b < bursts; ++b) {
    burst_lens.push_back(
        static_cast<std::int64_t>(rng.uniform(0.4, 1.0) * kSampleRate));
    if (b + 1 < bursts)
      gap_lens.push_back(
          static_cast<std::int64_t>(rng.uniform(0.25, 0.55) * kSampleRate));
  }
  std::int64_t total = lead + tail;
  for (auto v : burst_lens) total += v;
  for (auto v : gap_lens) total += v;

  CleanUtterance out;
  out.audio.sample_rate_hz = kSampleRate;
  out.audio.samples.assign(static_cast<std::size_t>(total), 0.0);
  std::int64_t pos = lead;
  for (int b = 0; b < bursts; ++b) {
    detail::add_speech_burst(rng, out.audio.samples, pos, burst_lens[b]);
    pos += burst_lens[b];
    if (b < static_cast<int>(gap_lens.size())) pos += gap_lens[b];
  }
  out.labels = energy_labels(out.audio, label_threshold_ratio, label_boundary);
  return out;
}

}  // namespace vadfuse
