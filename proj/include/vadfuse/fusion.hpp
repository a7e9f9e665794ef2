#pragma once

#include <cstdint>

#include "vadfuse/dnn.hpp"
#include "vadfuse/gmm.hpp"

namespace vadfuse {

struct FusionConfig {
  double alpha = 0.1;          // weight of the net's silence probability
  double beta = 0.8;           // weight of the net's speech probability
  double dnn_threshold = 0.5;  // posterior threshold for the net's flag
};

struct FusedDecision {
  std::int64_t frame_index = 0;
  int flag = 0;  // combined decision
  double p_h0_smoothed = 0.5;
  double p_h1_smoothed = 0.5;
  int dnn_flag = 0;
  int gmm_flag = 0;
  double gmm_total_llr = 0.0;
  double dnn_p_speech = 0.5;
};

// A speech call from the net wins outright; otherwise the adaptive model
// decides.
inline int fuse_flags(int dnn_flag, int gmm_flag) {
  return dnn_flag == 1 ? 1 : gmm_flag;
}

// Blend the net's posterior into the normalized class pair, then put the
// result back on the simplex. With both coefficients zero the pair passes
// through untouched.
inline ClassLikelihoods smooth_likelihoods(const DnnPosterior& prev_dnn,
                                           const ClassLikelihoods& prev_gmm,
                                           const FusionConfig& cfg) {
  if (cfg.alpha == 0.0 && cfg.beta == 0.0) return prev_gmm;
  ClassLikelihoods out;
  out.p_h0 = cfg.alpha * prev_dnn.p_silence + (1.0 - cfg.alpha) * prev_gmm.p_h0;
  out.p_h1 = cfg.beta * prev_dnn.p_speech + (1.0 - cfg.beta) * prev_gmm.p_h1;
  return normalize(out);
}

// Per-frame combination loop. Within a frame: decide, fuse, smooth, then the
// three model updates (minimum tracker, noise, speech), in that order. The
// smoothed pair computed at frame n scales the responsibilities of frame
// n+1's updates; frame n's updates use the pair from frame n-1.
class FusionEngine {
 public:
  FusionEngine(const GmmConfig& gmm_cfg, const FusionConfig& fusion_cfg)
      : gmm_cfg_(gmm_cfg),
        fusion_cfg_(fusion_cfg),
        bootstrap_(gmm_cfg.bootstrap_frames) {}

  FusionEngine(const GmmState& state, const FusionConfig& fusion_cfg)
      : fusion_cfg_(fusion_cfg), state_(state), bootstrap_(0), ready_(true) {}

  FusedDecision step(const SubbandFeature& feats, const DnnPosterior& post) {
    FusedDecision out;
    out.frame_index = frame_index_++;
    out.dnn_p_speech = post.p_speech;
    out.dnn_flag = dnn_flag(post, fusion_cfg_.dnn_threshold);
    if (!ready_) {
      // Warm-up: the adaptive model stays silent and untouched.
      if (bootstrap_.push(feats)) {
        state_ = make_initial_state(gmm_cfg_, bootstrap_.means());
        ready_ = true;
      }
      out.flag = fuse_flags(out.dnn_flag, 0);
      out.p_h0_smoothed = smoothed_.p_h0;
      out.p_h1_smoothed = smoothed_.p_h1;
      return out;
    }
    const GmmDecision d = gmm_decide(feats, state_);
    out.gmm_flag = d.flag;
    out.gmm_total_llr = d.total;
    out.flag = fuse_flags(out.dnn_flag, d.flag);
    const ClassLikelihoods resp = smoothed_;
    smoothed_ = smooth_likelihoods(post, normalize(d.lik), fusion_cfg_);
    update_min_all(state_, feats);
    update_noise(state_, feats, out.flag, resp);
    update_speech(state_, feats, out.flag, resp);
    out.p_h0_smoothed = smoothed_.p_h0;
    out.p_h1_smoothed = smoothed_.p_h1;
    return out;
  }

  bool ready() const { return ready_; }
  const GmmState& gmm_state() const { return state_; }
  const ClassLikelihoods& smoothed() const { return smoothed_; }

 private:
  GmmConfig gmm_cfg_;
  FusionConfig fusion_cfg_;
  GmmState state_;
  GmmBootstrap bootstrap_;
  bool ready_ = false;
  ClassLikelihoods smoothed_{0.5, 0.5};
  std::int64_t frame_index_ = 0;
};

}  // namespace vadfuse
