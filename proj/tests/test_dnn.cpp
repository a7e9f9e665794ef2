#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "gradcheck.hpp"
#include "vadfuse/dnn.hpp"
#include "vadfuse/random.hpp"

using namespace vadfuse;

namespace {

DnnWeights zero_weights(int input_dim) {
  DnnWeights w;
  w.input_dim = input_dim;
  w.w1.assign(static_cast<std::size_t>(kDnnHidden) * input_dim, 0.0f);
  return w;
}

std::vector<double> random_input(Rng& rng, int dim) {
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (auto& v : x) v = rng.uniform(-2.0, 2.0);
  return x;
}

TEST(Forward, ZeroWeightsGiveEvenPosterior) {
  const DnnWeights w = zero_weights(10);
  Rng rng(1);
  const auto x = random_input(rng, 10);
  const DnnPosterior p = forward(w, x);
  EXPECT_DOUBLE_EQ(p.p_speech, 0.5);
  EXPECT_DOUBLE_EQ(p.p_silence, 0.5);
}

TEST(Forward, LargeBiasSaturates) {
  DnnWeights w = zero_weights(10);
  w.b2 = {20.0f, -20.0f};
  Rng rng(2);
  const DnnPosterior p = forward(w, random_input(rng, 10));
  EXPECT_GE(p.p_speech, 1.0 - 1e-9);
}

TEST(Forward, DimMismatch) {
  const DnnWeights w = zero_weights(10);
  std::vector<double> x(9, 0.0);
  try {
    forward(w, x);
    FAIL() << "expected DimMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
}

TEST(Forward, PosteriorNormalizedForHugeLogits) {
  DnnWeights w = zero_weights(4);
  w.b2 = {1e4f, -1e4f};
  Rng rng(3);
  const DnnPosterior p = forward(w, random_input(rng, 4));
  EXPECT_FALSE(std::isnan(p.p_speech));
  EXPECT_FALSE(std::isnan(p.p_silence));
  EXPECT_NEAR(p.p_speech + p.p_silence, 1.0, 1e-9);
}

TEST(Forward, Deterministic) {
  Rng rng(4);
  DnnWeights w = init_weights(16, rng);
  const auto x = random_input(rng, 16);
  const DnnPosterior a = forward(w, x);
  const DnnPosterior b = forward(w, x);
  EXPECT_EQ(a.p_speech, b.p_speech);
  EXPECT_EQ(a.p_silence, b.p_silence);
}

TEST(Flag, ThresholdIsStrict) {
  EXPECT_EQ(dnn_flag({0.9, 0.1}, 0.5), 1);
  EXPECT_EQ(dnn_flag({0.5, 0.5}, 0.5), 0);
  EXPECT_EQ(dnn_flag({0.4, 0.6}, 0.3), 1);
}

TEST(TrainStep, SymmetricTargetHasBalancedOutputGradient) {
  Rng rng(5);
  DnnWeights w = init_weights(8, rng);
  w.b2 = {0.0f, 0.0f};
  w.w2.fill(0.0f);  // logits are exactly equal -> posterior (0.5, 0.5)
  std::vector<std::vector<double>> xs;
  std::vector<TrainSample> batch;
  for (int i = 0; i < 16; ++i) xs.push_back(random_input(rng, 8));
  for (const auto& x : xs) batch.push_back({x, SoftLabel{0.5}});
  DnnGradients g;
  dnn_loss_and_gradients(w, batch, &g);
  EXPECT_LT(std::abs(g.b2[0] - g.b2[1]), 1e-9);
}

TEST(TrainStep, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  const int shapes[] = {3, 5, 8, 13, 21, 34, 55, 89, 144, 233};
  const auto r = vadfuse_test::gradient_check(rng, shapes, 5);
  EXPECT_TRUE(r.ok) << "worst relative error " << r.worst_rel;
  EXPECT_GE(r.checked, 100);
}

TEST(TrainStep, LearnsSeparableToyProblem) {
  Rng rng(7);
  const int dim = 4;
  const double mu[4] = {1.0, 1.0, -1.0, 0.5};
  std::vector<std::vector<double>> xs;
  std::vector<double> targets;
  for (int i = 0; i < 40; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    std::vector<double> x(dim);
    for (int d = 0; d < dim; ++d) x[d] = sign * mu[d] + 0.1 * rng.normal();
    xs.push_back(std::move(x));
    targets.push_back(sign > 0 ? 1.0 : 0.0);
  }
  std::vector<TrainSample> batch;
  for (std::size_t i = 0; i < xs.size(); ++i)
    batch.push_back({xs[i], SoftLabel{targets[i]}});

  DnnWeights w = init_weights(dim, rng);
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step)
    losses.push_back(train_step(w, batch, 0.05));
  for (std::size_t k = 10; k + 1 < losses.size(); ++k)
    EXPECT_LE(losses[k + 1], losses[k] + 1e-12) << "step " << k;
  int correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int flag = dnn_flag(forward(w, xs[i]));
    if (flag == (targets[i] > 0.5 ? 1 : 0)) ++correct;
  }
  EXPECT_EQ(correct, 40);
}

TEST(TrainStep, NonFiniteLossSignalsDivergence) {
  DnnWeights w = zero_weights(4);
  w.b2 = {std::numeric_limits<float>::infinity(), 0.0f};
  std::vector<double> x(4, 1.0);
  std::vector<TrainSample> batch{{x, SoftLabel{1.0}}};
  try {
    train_step(w, batch, 0.01);
    FAIL() << "expected NonFiniteLoss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
}

class WeightFileTest : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = (std::filesystem::temp_directory_path() / "vadfuse_w_test.bin")
                .string();
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::string path_;
};

TEST_F(WeightFileTest, RoundTripIsBitExact) {
  Rng rng(8);
  DnnWeights w = init_weights(37, rng);
  for (auto& v : w.b1) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : w.b2) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  save_weights(w, path_);
  const DnnWeights back = load_weights(path_);
  EXPECT_EQ(back.input_dim, w.input_dim);
  ASSERT_EQ(back.w1.size(), w.w1.size());
  for (std::size_t i = 0; i < w.w1.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.w1[i]),
              std::bit_cast<std::uint32_t>(w.w1[i]));
  for (int i = 0; i < kDnnHidden; ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.b1[i]),
              std::bit_cast<std::uint32_t>(w.b1[i]));
  for (int i = 0; i < kDnnOutput * kDnnHidden; ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.w2[i]),
              std::bit_cast<std::uint32_t>(w.w2[i]));
  for (int i = 0; i < kDnnOutput; ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.b2[i]),
              std::bit_cast<std::uint32_t>(w.b2[i]));
}

TEST_F(WeightFileTest, BadMagicRejected) {
  Rng rng(9);
  save_weights(init_weights(5, rng), path_);
  std::fstream f(path_, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(0);
  f.write("NOPE", 4);
  f.close();
  try {
    load_weights(path_);
    FAIL() << "expected BadMagic";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadMagic);
  }
}

TEST_F(WeightFileTest, TruncatedPayloadRejected) {
  Rng rng(10);
  save_weights(init_weights(957, rng), path_);
  const auto size = std::filesystem::file_size(path_);
  std::filesystem::resize_file(path_, size - 100);
  try {
    load_weights(path_);
    FAIL() << "expected TruncatedFile";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncatedFile);
  }
}

TEST_F(WeightFileTest, WrongHiddenSizeRejected) {
  Rng rng(11);
  save_weights(init_weights(5, rng), path_);
  std::fstream f(path_, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(9);  // hidden-size header field
  const char sixteen[4] = {16, 0, 0, 0};
  f.write(sixteen, 4);
  f.close();
  try {
    load_weights(path_);
    FAIL() << "expected DimHeaderMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimHeaderMismatch);
  }
}

}  // namespace
