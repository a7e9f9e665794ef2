#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>

#include "vadfuse/error.hpp"
#include "vadfuse/features.hpp"

namespace vadfuse {

inline constexpr double kVarFloor = 1e-4;  // hard lower bound, any config
inline constexpr double kDefaultVarFloor = 0.1;
inline constexpr double kMixFloor = 1e-300;
inline constexpr double kLogLikClamp = 700.0;

struct GaussComponent {
  double mean = 0.0;
  double var = 1.0;
};

inline double gauss_pdf(double x, const GaussComponent& g) {
  const double d = x - g.mean;
  return std::exp(-d * d / (2.0 * g.var)) /
         std::sqrt(2.0 * 3.14159265358979323846 * g.var);
}

// One analysis band: two-component speech and noise mixtures (weights fixed
// at 0.5/0.5), a noise-floor tracker, and the band's weight in the total.
struct SubbandModel {
  std::array<GaussComponent, 2> speech;
  std::array<GaussComponent, 2> noise;
  double x_min = 0.0;
  double k = 1.0 / kNumSubbands;

  double noise_mean_avg() const {
    return 0.5 * (noise[0].mean + noise[1].mean);
  }
};

struct GmmCoefficients {
  double k_delta_n = 0.02;  // noise mean step
  double k_delta_s = 0.2;   // speech mean step
  double c_delta_n = 0.1;   // noise sigma step
  double c_delta_s = 0.1;   // speech sigma step
  double k_l = 0.6;         // pull of the noise mean toward x_min
};

struct GmmConfig {
  double t_tau = 3.0;               // per-band decision threshold
  double t_a = 1.5;                 // total decision threshold
  GmmCoefficients coeffs;
  int bootstrap_frames = 20;        // leading frames assumed non-speech
  double component_offset = 0.1;    // +- split of the two components
  double speech_offset = 4.0;       // initial speech mean above noise
  double init_var = 1.0;
  // Working variance floor. The sigma step is C/sigma, so floors below
  // C destabilize the recursion; this must stay >= kVarFloor.
  double var_floor = kDefaultVarFloor;
  bool approx_llr = false;          // drop log/scale factors in the ratio
  std::array<double, kNumSubbands> band_weights{
      1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
};

struct GmmState {
  std::array<SubbandModel, kNumSubbands> bands;
  double t_tau = 3.0;
  double t_a = 1.5;
  GmmCoefficients coeffs;
  double var_floor = kDefaultVarFloor;
  bool approx_llr = false;
};

struct ClassLikelihoods {
  double p_h0 = 0.5;  // noise hypothesis
  double p_h1 = 0.5;  // speech hypothesis
};

inline ClassLikelihoods normalize(const ClassLikelihoods& l) {
  const double s = l.p_h0 + l.p_h1;
  if (!(s > 0.0) || !std::isfinite(s)) return {0.5, 0.5};
  return {l.p_h0 / s, l.p_h1 / s};
}

inline GmmState make_initial_state(
    const GmmConfig& cfg, const std::array<double, kNumSubbands>& noise_means) {
  GmmState s;
  s.t_tau = cfg.t_tau;
  s.t_a = cfg.t_a;
  s.coeffs = cfg.coeffs;
  s.approx_llr = cfg.approx_llr;
  if (cfg.var_floor < kVarFloor)
    throw Error(ErrorCode::kBadConfig, "var_floor below the hard minimum");
  if (cfg.init_var < cfg.var_floor)
    throw Error(ErrorCode::kBadConfig, "init_var below the variance floor");
  s.var_floor = cfg.var_floor;
  double wsum = 0.0;
  for (double w : cfg.band_weights) {
    if (w < 0.0)
      throw Error(ErrorCode::kBadConfig, "band weights must be non-negative");
    wsum += w;
  }
  if (!(wsum > 0.0))
    throw Error(ErrorCode::kBadConfig, "band weights must not all be zero");
  for (int i = 0; i < kNumSubbands; ++i) {
    SubbandModel& b = s.bands[i];
    const double m = noise_means[i];
    b.noise[0] = {m - cfg.component_offset, cfg.init_var};
    b.noise[1] = {m + cfg.component_offset, cfg.init_var};
    b.speech[0] = {m + cfg.speech_offset - cfg.component_offset, cfg.init_var};
    b.speech[1] = {m + cfg.speech_offset + cfg.component_offset, cfg.init_var};
    b.x_min = m;
    b.k = cfg.band_weights[i] / wsum;
  }
  return s;
}

namespace detail {

inline double mixture_density(double f, const std::array<GaussComponent, 2>& c) {
  const double p = 0.5 * gauss_pdf(f, c[0]) + 0.5 * gauss_pdf(f, c[1]);
  return p > kMixFloor ? p : kMixFloor;
}

// The shortcut ratio form: exponentials without the 1/2 factor, the 1/sigma
// scale, or the log.
inline double mixture_kernel_sum(double f,
                                 const std::array<GaussComponent, 2>& c) {
  double acc = 0.0;
  for (const auto& g : c) {
    const double d = f - g.mean;
    acc += std::exp(-d * d / g.var);
  }
  return acc > kMixFloor ? acc : kMixFloor;
}

}  // namespace detail

inline double subband_llr(double f, const SubbandModel& m) {
  return std::log(detail::mixture_density(f, m.speech)) -
         std::log(detail::mixture_density(f, m.noise));
}

inline double subband_llr_approx(double f, const SubbandModel& m) {
  return detail::mixture_kernel_sum(f, m.speech) /
         detail::mixture_kernel_sum(f, m.noise);
}

inline double total_llr(const SubbandFeature& feats, const GmmState& s) {
  double acc = 0.0;
  for (int i = 0; i < kNumSubbands; ++i) {
    const double li = s.approx_llr ? subband_llr_approx(feats.e[i], s.bands[i])
                                   : subband_llr(feats.e[i], s.bands[i]);
    acc += s.bands[i].k * li;
  }
  return acc;
}

struct GmmDecision {
  int flag = 0;
  ClassLikelihoods lik;  // per-class mixture likelihoods over all bands
  double total = 0.0;
  std::array<double, kNumSubbands> band_llr{};
};

// Per-band comparison against t_tau first; any hit confirms speech, else the
// weighted total against t_a. Likelihoods are the product over bands of each
// class mixture, computed in log space.
inline GmmDecision gmm_decide(const SubbandFeature& feats, const GmmState& s) {
  GmmDecision d;
  double log_h1 = 0.0, log_h0 = 0.0;
  bool band_hit = false;
  for (int i = 0; i < kNumSubbands; ++i) {
    const SubbandModel& b = s.bands[i];
    const double li = s.approx_llr ? subband_llr_approx(feats.e[i], b)
                                   : subband_llr(feats.e[i], b);
    d.band_llr[i] = li;
    d.total += b.k * li;
    if (li > s.t_tau) band_hit = true;
    log_h1 += std::log(detail::mixture_density(feats.e[i], b.speech));
    log_h0 += std::log(detail::mixture_density(feats.e[i], b.noise));
  }
  auto clamp_exp = [](double lg) {
    if (lg > kLogLikClamp) lg = kLogLikClamp;
    if (lg < -kLogLikClamp) lg = -kLogLikClamp;
    return std::exp(lg);
  };
  d.lik = {clamp_exp(log_h0), clamp_exp(log_h1)};
  d.flag = (band_hit || d.total > s.t_a) ? 1 : 0;
  return d;
}

// Mean and sigma follow the likelihood gradient, scaled by the class
// responsibility and gated by the fused flag; the noise mean is additionally
// pulled toward the tracked minimum whether or not the frame was speech.
inline void update_noise(GmmState& s, const SubbandFeature& feats,
                         int fused_flag, const ClassLikelihoods& lik) {
  const double denom = lik.p_h0 + lik.p_h1;
  const double r = denom > 0.0 ? lik.p_h0 / denom : 0.5;
  const double gate = fused_flag ? 0.0 : 1.0;
  const double sigma_floor = std::sqrt(s.var_floor);
  for (int i = 0; i < kNumSubbands; ++i) {
    SubbandModel& b = s.bands[i];
    const double f = feats.e[i];
    for (auto& g : b.noise) {
      const double u = g.mean;
      const double var = g.var;
      const double sigma = std::sqrt(var);
      const double grad_u = (f - u) / var;
      const double grad_s = (1.0 / sigma) * ((f - u) * (f - u) / var - 1.0);
      g.mean = u + gate * s.coeffs.k_delta_n * grad_u * r +
               s.coeffs.k_l * (b.x_min - u);
      const double ds = gate * s.coeffs.c_delta_n * grad_s * r;
      if (ds != 0.0) {
        double sn = sigma + ds;
        if (sn < sigma_floor) sn = sigma_floor;  // floor sigma before squaring
        g.var = sn * sn;
        if (g.var < s.var_floor) g.var = s.var_floor;
      }
    }
  }
}

inline void update_speech(GmmState& s, const SubbandFeature& feats,
                          int fused_flag, const ClassLikelihoods& lik) {
  const double denom = lik.p_h0 + lik.p_h1;
  const double r = denom > 0.0 ? lik.p_h1 / denom : 0.5;
  const double gate = fused_flag ? 1.0 : 0.0;
  const double sigma_floor = std::sqrt(s.var_floor);
  for (int i = 0; i < kNumSubbands; ++i) {
    SubbandModel& b = s.bands[i];
    const double f = feats.e[i];
    for (auto& g : b.speech) {
      const double u = g.mean;
      const double var = g.var;
      const double sigma = std::sqrt(var);
      const double grad_u = (f - u) / var;
      const double grad_s = (1.0 / sigma) * ((f - u) * (f - u) / var - 1.0);
      g.mean = u + gate * s.coeffs.k_delta_s * grad_u * r;
      const double ds = gate * s.coeffs.c_delta_s * grad_s * r;
      if (ds != 0.0) {
        double sn = sigma + ds;
        if (sn < sigma_floor) sn = sigma_floor;
        g.var = sn * sn;
        if (g.var < s.var_floor) g.var = s.var_floor;
      }
    }
  }
}

// Noise-floor tracker: rises slowly, falls fast. u_n is the band's current
// average noise mean.
inline void update_min(SubbandModel& m, double f, double u_n) {
  if (f > m.x_min)
    m.x_min = 0.99 * m.x_min + 0.01 * u_n;
  else if (f < m.x_min)
    m.x_min = 0.20 * m.x_min + 0.80 * u_n;
}

inline void update_min_all(GmmState& s, const SubbandFeature& feats) {
  for (int i = 0; i < kNumSubbands; ++i)
    update_min(s.bands[i], feats.e[i], s.bands[i].noise_mean_avg());
}

// Accumulates the leading frames assumed to be noise; complete() builds the
// warm-started state.
class GmmBootstrap {
 public:
  explicit GmmBootstrap(int frames) : needed_(frames) {}

  bool push(const SubbandFeature& f) {
    for (int i = 0; i < kNumSubbands; ++i) sum_[i] += f.e[i];
    return ++seen_ >= needed_;
  }

  bool done() const { return seen_ >= needed_; }

  std::array<double, kNumSubbands> means() const {
    std::array<double, kNumSubbands> m{};
    for (int i = 0; i < kNumSubbands; ++i)
      m[i] = seen_ > 0 ? sum_[i] / seen_ : 0.0;
    return m;
  }

 private:
  int needed_;
  int seen_ = 0;
  std::array<double, kNumSubbands> sum_{};
};

// Standalone adaptive detector. The responsibilities that scale each frame's
// parameter update come from the previous frame's normalized class
// likelihoods, which is the same one-frame feedback the fused engine uses.
class GmmRunner {
 public:
  explicit GmmRunner(const GmmConfig& cfg)
      : cfg_(cfg), bootstrap_(cfg.bootstrap_frames) {}

  explicit GmmRunner(const GmmState& state)
      : state_(state), bootstrap_(0), ready_(true) {}

  int step(const SubbandFeature& feats) {
    if (!ready_) {
      if (bootstrap_.push(feats)) {
        state_ = make_initial_state(cfg_, bootstrap_.means());
        ready_ = true;
      }
      last_total_ = 0.0;
      return 0;
    }
    const GmmDecision d = gmm_decide(feats, state_);
    const ClassLikelihoods resp = smoothed_;
    smoothed_ = normalize(d.lik);
    update_min_all(state_, feats);
    update_noise(state_, feats, d.flag, resp);
    update_speech(state_, feats, d.flag, resp);
    last_total_ = d.total;
    return d.flag;
  }

  bool ready() const { return ready_; }
  const GmmState& state() const { return state_; }
  double last_total_llr() const { return last_total_; }

 private:
  GmmConfig cfg_;
  GmmState state_;
  GmmBootstrap bootstrap_;
  bool ready_ = false;
  ClassLikelihoods smoothed_{0.5, 0.5};
  double last_total_ = 0.0;
};

// Debug snapshot, one band per line.
inline void dump_state(std::ostream& out, const GmmState& s) {
  char buf[64];
  for (int i = 0; i < kNumSubbands; ++i) {
    const SubbandModel& b = s.bands[i];
    out << "band_" << i;
    const double fields[] = {b.k,
                             b.speech[0].mean, b.speech[0].var,
                             b.speech[1].mean, b.speech[1].var,
                             b.noise[0].mean,  b.noise[0].var,
                             b.noise[1].mean,  b.noise[1].var,
                             b.x_min};
    for (double v : fields) {
      std::snprintf(buf, sizeof(buf), " %.9g", v);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace vadfuse
