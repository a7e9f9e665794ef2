#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vadfuse/fusion.hpp"
#include "vadfuse/random.hpp"

using namespace vadfuse;

namespace {

TEST(FuseFlags, TruthTable) {
  EXPECT_EQ(fuse_flags(1, 0), 1);
  EXPECT_EQ(fuse_flags(0, 1), 1);
  EXPECT_EQ(fuse_flags(0, 0), 0);
  EXPECT_EQ(fuse_flags(1, 1), 1);
}

TEST(FuseFlags, NeverBelowDnnFlag) {
  for (int d = 0; d <= 1; ++d)
    for (int g = 0; g <= 1; ++g) EXPECT_GE(fuse_flags(d, g), d);
}

TEST(Smooth, EvenPairIsFixedPoint) {
  for (double alpha : {0.0, 0.1, 0.5, 1.0})
    for (double beta : {0.0, 0.3, 0.8, 1.0}) {
      const ClassLikelihoods out = smooth_likelihoods(
          {0.5, 0.5}, {0.5, 0.5}, {alpha, beta, 0.5});
      EXPECT_NEAR(out.p_h0, 0.5, 1e-12) << alpha << " " << beta;
      EXPECT_NEAR(out.p_h1, 0.5, 1e-12);
    }
}

TEST(Smooth, HandComputedBlend) {
  // net fully speech, model pair fully noise: (0.9, 0.8) renormalized.
  const ClassLikelihoods out =
      smooth_likelihoods({1.0, 0.0}, {1.0, 0.0}, {0.1, 0.8, 0.5});
  EXPECT_NEAR(out.p_h0, 0.9 / 1.7, 1e-9);
  EXPECT_NEAR(out.p_h1, 0.8 / 1.7, 1e-9);
  EXPECT_NEAR(out.p_h0, 0.52941, 1e-5);
  EXPECT_NEAR(out.p_h1, 0.47059, 1e-5);
}

TEST(Smooth, ZeroCoefficientsPassGmmThrough) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const double h0 = rng.uniform(0.0, 1.0);
    const ClassLikelihoods gmm{h0, 1.0 - h0};
    const ClassLikelihoods out = smooth_likelihoods(
        {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)}, gmm, {0.0, 0.0, 0.5});
    EXPECT_EQ(out.p_h0, gmm.p_h0);
    EXPECT_EQ(out.p_h1, gmm.p_h1);
  }
}

TEST(Smooth, OutputAlwaysNormalized) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const double ps = rng.uniform(0.0, 1.0);
    const double h0 = rng.uniform(0.0, 1.0);
    const ClassLikelihoods out =
        smooth_likelihoods({ps, 1.0 - ps}, {h0, 1.0 - h0},
                           {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.5});
    EXPECT_NEAR(out.p_h0 + out.p_h1, 1.0, 1e-9);
    EXPECT_GE(out.p_h0, 0.0);
    EXPECT_LE(out.p_h0, 1.0);
  }
}

SubbandFeature uniform_feature(double v) {
  SubbandFeature f;
  f.e.fill(v);
  return f;
}

std::vector<SubbandFeature> random_stream(Rng& rng, int n) {
  std::vector<SubbandFeature> out;
  for (int t = 0; t < n; ++t) {
    SubbandFeature f;
    const bool loud = t >= 20 && rng.bernoulli(0.4);
    for (auto& v : f.e)
      v = (loud ? 6.0 : 1.0) + rng.normal() * 0.5;
    out.push_back(f);
  }
  return out;
}

TEST(Engine, DnnSpeechAlwaysWins) {
  GmmConfig cfg;
  FusionEngine engine(cfg, FusionConfig{});
  Rng rng(3);
  const auto stream = random_stream(rng, 100);
  for (const auto& f : stream) {
    const FusedDecision d = engine.step(f, {1.0, 0.0});
    EXPECT_EQ(d.flag, 1);
  }
}

TEST(Engine, InertDnnReproducesStandaloneGmmBitForBit) {
  GmmConfig cfg;
  FusionConfig fcfg;
  fcfg.alpha = 0.0;
  fcfg.beta = 0.0;
  fcfg.dnn_threshold = 1.0;  // the posterior can never exceed this
  FusionEngine engine(cfg, fcfg);
  GmmRunner runner(cfg);
  Rng rng(4);
  const auto stream = random_stream(rng, 500);
  for (const auto& f : stream) {
    const double ps = rng.uniform(0.0, 1.0);
    const FusedDecision d = engine.step(f, {ps, 1.0 - ps});
    const int flag = runner.step(f);
    ASSERT_EQ(d.flag, flag);
  }
  const GmmState& a = engine.gmm_state();
  const GmmState& b = runner.state();
  for (int i = 0; i < kNumSubbands; ++i) {
    for (int j = 0; j < 2; ++j) {
      EXPECT_EQ(a.bands[i].speech[j].mean, b.bands[i].speech[j].mean);
      EXPECT_EQ(a.bands[i].speech[j].var, b.bands[i].speech[j].var);
      EXPECT_EQ(a.bands[i].noise[j].mean, b.bands[i].noise[j].mean);
      EXPECT_EQ(a.bands[i].noise[j].var, b.bands[i].noise[j].var);
    }
    EXPECT_EQ(a.bands[i].x_min, b.bands[i].x_min);
  }
}

TEST(Engine, FrameOrderMatters) {
  GmmConfig cfg;
  std::array<double, kNumSubbands> means;
  means.fill(1.0);
  const GmmState init = make_initial_state(cfg, means);
  const SubbandFeature a = uniform_feature(2.0);
  const SubbandFeature b = uniform_feature(5.0);
  const SubbandFeature c = uniform_feature(0.5);

  FusionEngine e1(init, FusionConfig{});
  FusionEngine e2(init, FusionConfig{});
  const DnnPosterior post{0.7, 0.3};
  e1.step(a, post);
  e1.step(b, post);
  e1.step(c, post);
  e2.step(a, post);
  e2.step(c, post);
  e2.step(b, post);

  bool any_diff = false;
  for (int i = 0; i < kNumSubbands && !any_diff; ++i)
    for (int j = 0; j < 2 && !any_diff; ++j)
      if (e1.gmm_state().bands[i].noise[j].mean !=
              e2.gmm_state().bands[i].noise[j].mean ||
          e1.gmm_state().bands[i].speech[j].mean !=
              e2.gmm_state().bands[i].speech[j].mean)
        any_diff = true;
  EXPECT_TRUE(any_diff);
}

TEST(Engine, FusedFlagDominatesDnnFlagOverStream) {
  GmmConfig cfg;
  FusionEngine engine(cfg, FusionConfig{});
  Rng rng(5);
  const auto stream = random_stream(rng, 400);
  for (const auto& f : stream) {
    const double ps = rng.uniform(0.0, 1.0);
    const FusedDecision d = engine.step(f, {ps, 1.0 - ps});
    EXPECT_GE(d.flag, d.dnn_flag);
    EXPECT_NEAR(d.p_h0_smoothed + d.p_h1_smoothed, 1.0, 1e-9);
  }
}

TEST(Engine, BootstrapHoldsFlagUnlessDnnFires) {
  GmmConfig cfg;
  FusionEngine engine(cfg, FusionConfig{});
  for (int t = 0; t < cfg.bootstrap_frames; ++t) {
    const FusedDecision d = engine.step(uniform_feature(1.0),
                                        t % 2 ? DnnPosterior{0.9, 0.1}
                                              : DnnPosterior{0.1, 0.9});
    EXPECT_EQ(d.gmm_flag, 0);
    EXPECT_EQ(d.flag, t % 2 ? 1 : 0);
  }
  EXPECT_TRUE(engine.ready());
}

}  // namespace
