#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vadfuse/features.hpp"
#include "vadfuse/random.hpp"

using namespace vadfuse;

namespace {

constexpr double kLogFloor = -23.025850929940457;  // log(1e-10)

std::vector<double> sine_window(double freq_hz, double amp = 0.3) {
  std::vector<double> w(kFrameWindow);
  for (int i = 0; i < kFrameWindow; ++i)
    w[i] = amp * std::sin(2.0 * 3.14159265358979323846 * freq_hz * i /
                          kSampleRate);
  return w;
}

std::vector<double> noise_window(Rng& rng, double amp = 0.1) {
  std::vector<double> w(kFrameWindow);
  for (auto& v : w) v = amp * rng.normal();
  return w;
}

double mel_center_hz(int filter_index) {
  // Independent of the implementation: 31 equally spaced mel points.
  const double mel_max = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  const double m = mel_max * (filter_index + 1) / (kNumMel + 1);
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

TEST(Fbank, SilenceFloorsToLogFloor) {
  FeatureExtractor ex;
  std::vector<double> zeros(kFrameWindow, 0.0);
  const FbankVector f = ex.fbank(zeros);
  for (double v : f.values) EXPECT_DOUBLE_EQ(v, kLogFloor);
}

TEST(Fbank, SinePeaksInNearestFilter) {
  FeatureExtractor ex;
  const FbankVector f = ex.fbank(sine_window(1000.0));
  int argmax = 0;
  for (int k = 1; k < kNumMel; ++k)
    if (f.values[k] > f.values[argmax]) argmax = k;
  int nearest = 0;
  for (int k = 1; k < kNumMel; ++k)
    if (std::abs(mel_center_hz(k) - 1000.0) <
        std::abs(mel_center_hz(nearest) - 1000.0))
      nearest = k;
  EXPECT_EQ(argmax, nearest);
}

TEST(Fbank, DoublingInputAddsLogFour) {
  FeatureExtractor ex;
  Rng rng(11);
  const auto w1 = noise_window(rng);
  std::vector<double> w2 = w1;
  for (auto& v : w2) v *= 2.0;
  const FbankVector a = ex.fbank(w1);
  const FbankVector b = ex.fbank(w2);
  for (int k = 0; k < kNumMel; ++k)
    EXPECT_NEAR(b.values[k] - a.values[k], std::log(4.0), 1e-6);
}

TEST(Fbank, ScaleShiftProperty) {
  FeatureExtractor ex;
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w1 = noise_window(rng);
    const double c = rng.uniform(0.1, 4.0);
    std::vector<double> w2 = w1;
    for (auto& v : w2) v *= c;
    const FbankVector a = ex.fbank(w1);
    const FbankVector b = ex.fbank(w2);
    for (int k = 0; k < kNumMel; ++k)
      EXPECT_NEAR(b.values[k] - a.values[k], 2.0 * std::log(c), 1e-6);
  }
}

TEST(Subbands, SilenceFloorsToLogFloor) {
  FeatureExtractor ex;
  std::vector<double> zeros(kFrameWindow, 0.0);
  const SubbandFeature f = ex.subbands(zeros);
  for (double v : f.e) EXPECT_DOUBLE_EQ(v, kLogFloor);
}

TEST(Subbands, SineAt1500HzPeaksInFourthBand) {
  FeatureExtractor ex;
  const SubbandFeature f = ex.subbands(sine_window(1500.0));
  int argmax = 0;
  for (int k = 1; k < kNumSubbands; ++k)
    if (f.e[k] > f.e[argmax]) argmax = k;
  EXPECT_EQ(argmax, 3);
}

TEST(Subbands, WhiteNoiseEnergyOrderedByBandwidth) {
  FeatureExtractor ex;
  Rng rng(13);
  std::array<double, kNumSubbands> mean{};
  const int frames = 1000;
  for (int t = 0; t < frames; ++t) {
    const SubbandFeature f = ex.subbands(noise_window(rng));
    for (int k = 0; k < kNumSubbands; ++k) mean[k] += f.e[k];
  }
  for (auto& v : mean) v /= frames;
  // Bands 1..4 widen strictly (170, 250, 500, 1000 Hz); 4..6 are equal.
  EXPECT_LT(mean[0], mean[1]);
  EXPECT_LT(mean[1], mean[2]);
  EXPECT_LT(mean[2], mean[3]);
  EXPECT_NEAR(mean[3], mean[4], 0.05);
  EXPECT_NEAR(mean[4], mean[5], 0.05);
}

TEST(Subbands, ScaleShiftProperty) {
  FeatureExtractor ex;
  Rng rng(14);
  const auto w1 = noise_window(rng);
  std::vector<double> w2 = w1;
  for (auto& v : w2) v *= 3.0;
  const SubbandFeature a = ex.subbands(w1);
  const SubbandFeature b = ex.subbands(w2);
  for (int k = 0; k < kNumSubbands; ++k)
    EXPECT_NEAR(b.e[k] - a.e[k], 2.0 * std::log(3.0), 1e-6);
}

FbankVector constant_fbank(double v) {
  FbankVector f;
  f.values.fill(v);
  return f;
}

TEST(Deltas, ConstantSequenceHasZeroDeltas) {
  std::vector<FbankVector> seq(20, constant_fbank(3.5));
  const auto out = compute_deltas(seq);
  for (const auto& f : out)
    for (int k = 0; k < kNumMel; ++k) {
      EXPECT_DOUBLE_EQ(f.delta1[k], 0.0);
      EXPECT_DOUBLE_EQ(f.delta2[k], 0.0);
    }
}

TEST(Deltas, LinearRampGivesSlope) {
  const double slope = 0.25;
  std::vector<FbankVector> seq;
  for (int t = 0; t < 20; ++t) seq.push_back(constant_fbank(slope * t));
  const auto out = compute_deltas(seq);
  for (int t = 4; t < 16; ++t)
    for (int k = 0; k < kNumMel; ++k) {
      EXPECT_NEAR(out[t].delta1[k], slope, 1e-12);
      EXPECT_NEAR(out[t].delta2[k], 0.0, 1e-12);
    }
}

TEST(Deltas, SingleFrameHasZeroDeltas) {
  std::vector<FbankVector> seq(1, constant_fbank(-2.0));
  const auto out = compute_deltas(seq);
  ASSERT_EQ(out.size(), 1u);
  for (int k = 0; k < kNumMel; ++k) {
    EXPECT_DOUBLE_EQ(out[0].statics[k], -2.0);
    EXPECT_DOUBLE_EQ(out[0].delta1[k], 0.0);
    EXPECT_DOUBLE_EQ(out[0].delta2[k], 0.0);
  }
}

TEST(Deltas, OperatorIsLinear) {
  Rng rng(15);
  std::vector<FbankVector> a(12), b(12), sum(12);
  for (int t = 0; t < 12; ++t)
    for (int k = 0; k < kNumMel; ++k) {
      a[t].values[k] = rng.uniform(-5.0, 5.0);
      b[t].values[k] = rng.uniform(-5.0, 5.0);
      sum[t].values[k] = a[t].values[k] + b[t].values[k];
    }
  const auto da = compute_deltas(a);
  const auto db = compute_deltas(b);
  const auto ds = compute_deltas(sum);
  for (int t = 0; t < 12; ++t)
    for (int k = 0; k < kNumMel; ++k) {
      EXPECT_NEAR(ds[t].delta1[k], da[t].delta1[k] + db[t].delta1[k], 1e-12);
      EXPECT_NEAR(ds[t].delta2[k], da[t].delta2[k] + db[t].delta2[k], 1e-12);
    }
}

TEST(Cmn, BatchOutputHasZeroMean) {
  Rng rng(16);
  std::vector<FeatureFrame> seq(50);
  for (auto& f : seq)
    for (int i = 0; i < kFeatureDim; ++i) f.set(i, rng.uniform(-20.0, 5.0));
  const auto out = cmn_batch(seq);
  for (int i = 0; i < kFeatureDim; ++i) {
    double mean = 0.0;
    for (const auto& f : out) mean += f.get(i);
    mean /= static_cast<double>(out.size());
    EXPECT_NEAR(mean, 0.0, 1e-9);
  }
}

TEST(Cmn, FirstStreamingFrameIsZero) {
  CmnState state;
  FeatureFrame f;
  for (int i = 0; i < kFeatureDim; ++i) f.set(i, 7.0 + i);
  const FeatureFrame out = cmn_apply(state, f);
  for (int i = 0; i < kFeatureDim; ++i) EXPECT_DOUBLE_EQ(out.get(i), 0.0);
}

TEST(Cmn, StreamingConstantConvergesToZero) {
  CmnState state;
  FeatureFrame f;
  for (int i = 0; i < kFeatureDim; ++i) f.set(i, -3.0);
  FeatureFrame out;
  for (int t = 0; t < 2000; ++t) out = cmn_apply(state, f);
  double norm = 0.0;
  for (int i = 0; i < kFeatureDim; ++i) norm += out.get(i) * out.get(i);
  EXPECT_LT(std::sqrt(norm), 1e-3);
}

TEST(Cmn, StreamingTracksLevelChange) {
  CmnState state;
  FeatureFrame lo, hi;
  for (int i = 0; i < kFeatureDim; ++i) {
    lo.set(i, 1.0);
    hi.set(i, 4.0);
  }
  for (int t = 0; t < 100; ++t) cmn_apply(state, lo);
  FeatureFrame out;
  for (int t = 0; t < 3000; ++t) out = cmn_apply(state, hi);
  EXPECT_NEAR(out.get(0), 0.0, 1e-3);
}

TEST(Splice, DimensionFollowsContext) {
  EXPECT_EQ(spliced_dim(5, 5), 957);
  EXPECT_EQ(spliced_dim(0, 0), kFeatureDim);
  std::vector<FeatureFrame> seq(9);
  const auto out = splice(seq, 5, 5);
  ASSERT_EQ(out.size(), seq.size());
  for (const auto& s : out) EXPECT_EQ(s.values.size(), 957u);
}

TEST(Splice, ZeroContextIsIdentity) {
  Rng rng(17);
  std::vector<FeatureFrame> seq(4);
  for (auto& f : seq)
    for (int i = 0; i < kFeatureDim; ++i) f.set(i, rng.uniform(-1.0, 1.0));
  const auto out = splice(seq, 0, 0);
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (int i = 0; i < kFeatureDim; ++i)
      EXPECT_DOUBLE_EQ(out[t].values[static_cast<std::size_t>(i)],
                       seq[t].get(i));
}

TEST(Splice, LeadingFramesReplicateEdge) {
  Rng rng(18);
  std::vector<FeatureFrame> seq(8);
  for (auto& f : seq)
    for (int i = 0; i < kFeatureDim; ++i) f.set(i, rng.uniform(-1.0, 1.0));
  const SplicedFeature first = splice_at(seq, 0, 5, 0);
  for (int block = 0; block < 5; ++block)
    for (int i = 0; i < kFeatureDim; ++i)
      EXPECT_DOUBLE_EQ(
          first.values[static_cast<std::size_t>(block * kFeatureDim + i)],
          seq[0].get(i))
          << "block " << block;
}

TEST(StreamingStack, MatchesBatchDeltas) {
  Rng rng(19);
  for (const int n : {1, 2, 3, 4, 5, 6, 17, 100}) {
    std::vector<FbankVector> seq(static_cast<std::size_t>(n));
    for (auto& f : seq)
      for (int k = 0; k < kNumMel; ++k) f.values[k] = rng.uniform(-5.0, 5.0);
    const auto batch = compute_deltas(seq);

    StreamingFeatureStack stack;
    std::vector<FeatureFrame> streamed;
    for (const auto& f : seq)
      stack.push(f, [&](const FeatureFrame& ff) { streamed.push_back(ff); });
    stack.finish([&](const FeatureFrame& ff) { streamed.push_back(ff); });

    ASSERT_EQ(streamed.size(), batch.size()) << "n " << n;
    for (std::size_t t = 0; t < batch.size(); ++t)
      for (int i = 0; i < kFeatureDim; ++i)
        EXPECT_DOUBLE_EQ(streamed[t].get(i), batch[t].get(i))
            << "n " << n << " frame " << t << " dim " << i;
  }
}

}  // namespace
