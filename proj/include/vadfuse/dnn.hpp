#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "vadfuse/bytes.hpp"
#include "vadfuse/error.hpp"
#include "vadfuse/random.hpp"

namespace vadfuse {

inline constexpr int kDnnHidden = 32;
inline constexpr int kDnnOutput = 2;

enum class Activation { kRelu, kSigmoid };

// Weights are kept in 32-bit floats, matching the on-disk format bit for
// bit. Output 0 is the speech logit, output 1 the silence logit.
struct DnnWeights {
  int input_dim = 0;
  std::vector<float> w1;                        // kDnnHidden x input_dim
  std::array<float, kDnnHidden> b1{};
  std::array<float, kDnnOutput * kDnnHidden> w2{};
  std::array<float, kDnnOutput> b2{};
  Activation activation = Activation::kRelu;
};

struct DnnPosterior {
  double p_speech = 0.5;
  double p_silence = 0.5;
};

// Training target: 1 speech, 0 silence, 0.5 for transition frames.
struct SoftLabel {
  double target_speech = 0.0;
};

inline DnnWeights init_weights(int input_dim, Rng& rng) {
  DnnWeights w;
  w.input_dim = input_dim;
  w.w1.resize(static_cast<std::size_t>(kDnnHidden) * input_dim);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (auto& v : w.w1) v = static_cast<float>(rng.uniform(-s1, s1));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(kDnnHidden));
  for (auto& v : w.w2) v = static_cast<float>(rng.uniform(-s2, s2));
  return w;
}

namespace detail {

inline double activate(double z, Activation a) {
  if (a == Activation::kRelu) return z > 0.0 ? z : 0.0;
  return 1.0 / (1.0 + std::exp(-z));
}

inline double activate_grad(double z, double h, Activation a) {
  if (a == Activation::kRelu) return z > 0.0 ? 1.0 : 0.0;
  (void)z;
  return h * (1.0 - h);
}

struct DnnScratch {
  std::array<double, kDnnHidden> pre;
  std::array<double, kDnnHidden> hidden;
  std::array<double, kDnnOutput> logits;
};

inline void forward_raw(const DnnWeights& w, std::span<const double> x,
                        DnnScratch& s) {
  if (static_cast<int>(x.size()) != w.input_dim)
    throw Error(ErrorCode::kDimMismatch,
                "input has " + std::to_string(x.size()) + " dims, net wants " +
                    std::to_string(w.input_dim));
  for (int j = 0; j < kDnnHidden; ++j) {
    double acc = w.b1[j];
    const float* row = w.w1.data() + static_cast<std::size_t>(j) * w.input_dim;
    for (int i = 0; i < w.input_dim; ++i) acc += row[i] * x[i];
    s.pre[j] = acc;
    s.hidden[j] = activate(acc, w.activation);
  }
  for (int o = 0; o < kDnnOutput; ++o) {
    double acc = w.b2[o];
    for (int j = 0; j < kDnnHidden; ++j)
      acc += w.w2[o * kDnnHidden + j] * s.hidden[j];
    s.logits[o] = acc;
  }
}

}  // namespace detail

inline DnnPosterior forward(const DnnWeights& w, std::span<const double> x) {
  detail::DnnScratch s;
  detail::forward_raw(w, x, s);
  const double m = s.logits[0] > s.logits[1] ? s.logits[0] : s.logits[1];
  const double e0 = std::exp(s.logits[0] - m);
  const double e1 = std::exp(s.logits[1] - m);
  return DnnPosterior{e0 / (e0 + e1), e1 / (e0 + e1)};
}

// Strict comparison: a posterior exactly at the threshold is not speech.
inline int dnn_flag(const DnnPosterior& p, double threshold = 0.5) {
  return p.p_speech > threshold ? 1 : 0;
}

struct DnnGradients {
  std::vector<double> w1;
  std::array<double, kDnnHidden> b1{};
  std::array<double, kDnnOutput * kDnnHidden> w2{};
  std::array<double, kDnnOutput> b2{};
};

using TrainSample = std::pair<std::span<const double>, SoftLabel>;

// Average cross-entropy over the batch and its gradient. Loss uses
// log-softmax directly so large logits stay finite.
inline double dnn_loss_and_gradients(const DnnWeights& w,
                                     std::span<const TrainSample> batch,
                                     DnnGradients* grads) {
  if (batch.empty())
    throw Error(ErrorCode::kDimMismatch, "empty training batch");
  if (grads) {
    grads->w1.assign(w.w1.size(), 0.0);
    grads->b1.fill(0.0);
    grads->w2.fill(0.0);
    grads->b2.fill(0.0);
  }
  detail::DnnScratch s;
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& [x, label] : batch) {
    detail::forward_raw(w, x, s);
    const double m = s.logits[0] > s.logits[1] ? s.logits[0] : s.logits[1];
    const double lse =
        m + std::log(std::exp(s.logits[0] - m) + std::exp(s.logits[1] - m));
    const double t = label.target_speech;
    loss += -(t * (s.logits[0] - lse) + (1.0 - t) * (s.logits[1] - lse));
    if (!grads) continue;
    const double p0 = std::exp(s.logits[0] - lse);
    const double p1 = std::exp(s.logits[1] - lse);
    const std::array<double, kDnnOutput> dlogit = {(p0 - t) * inv_n,
                                                   (p1 - (1.0 - t)) * inv_n};
    std::array<double, kDnnHidden> dhidden{};
    for (int o = 0; o < kDnnOutput; ++o) {
      grads->b2[o] += dlogit[o];
      for (int j = 0; j < kDnnHidden; ++j) {
        grads->w2[o * kDnnHidden + j] += dlogit[o] * s.hidden[j];
        dhidden[j] += w.w2[o * kDnnHidden + j] * dlogit[o];
      }
    }
    for (int j = 0; j < kDnnHidden; ++j) {
      const double dz =
          dhidden[j] * detail::activate_grad(s.pre[j], s.hidden[j],
                                             w.activation);
      if (dz == 0.0) continue;
      grads->b1[j] += dz;
      double* grow = grads->w1.data() + static_cast<std::size_t>(j) * w.input_dim;
      for (int i = 0; i < w.input_dim; ++i) grow[i] += dz * x[i];
    }
  }
  return loss * inv_n;
}

// One plain gradient-descent step. Returns the pre-update batch loss.
inline double train_step(DnnWeights& w, std::span<const TrainSample> batch,
                         double lr) {
  DnnGradients g;
  const double loss = dnn_loss_and_gradients(w, batch, &g);
  if (!std::isfinite(loss))
    throw Error(ErrorCode::kNonFiniteLoss, "training diverged");
  for (std::size_t i = 0; i < w.w1.size(); ++i)
    w.w1[i] = static_cast<float>(w.w1[i] - lr * g.w1[i]);
  for (int j = 0; j < kDnnHidden; ++j)
    w.b1[j] = static_cast<float>(w.b1[j] - lr * g.b1[j]);
  for (int i = 0; i < kDnnOutput * kDnnHidden; ++i)
    w.w2[i] = static_cast<float>(w.w2[i] - lr * g.w2[i]);
  for (int o = 0; o < kDnnOutput; ++o)
    w.b2[o] = static_cast<float>(w.b2[o] - lr * g.b2[o]);
  return loss;
}

// Weight file: magic "VADW", version 0x01, four LE u32 of
// (input_dim, hidden, output, reserved), then W1, b1, W2, b2 as LE f32
// row-major.
inline void save_weights(const DnnWeights& w, const std::string& path) {
  std::string blob;
  blob.reserve(21 + 4 * (w.w1.size() + kDnnHidden + 2 * kDnnHidden + 2));
  blob += "VADW";
  blob.push_back(0x01);
  detail::put_u32le(blob, static_cast<std::uint32_t>(w.input_dim));
  detail::put_u32le(blob, kDnnHidden);
  detail::put_u32le(blob, kDnnOutput);
  detail::put_u32le(blob, 0);
  for (float v : w.w1) detail::put_f32le(blob, v);
  for (float v : w.b1) detail::put_f32le(blob, v);
  for (float v : w.w2) detail::put_f32le(blob, v);
  for (float v : w.b2) detail::put_f32le(blob, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

inline DnnWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (blob.size() < 21) throw Error(ErrorCode::kTruncatedFile, path);
  if (blob.compare(0, 4, "VADW") != 0 || blob[4] != 0x01)
    throw Error(ErrorCode::kBadMagic, path);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data());
  const std::uint32_t input_dim = detail::read_u32le(p + 5);
  const std::uint32_t hidden = detail::read_u32le(p + 9);
  const std::uint32_t output = detail::read_u32le(p + 13);
  const std::uint32_t reserved = detail::read_u32le(p + 17);
  if (hidden != kDnnHidden || output != kDnnOutput || reserved != 0 ||
      input_dim == 0)
    throw Error(ErrorCode::kDimHeaderMismatch,
                path + ": " + std::to_string(input_dim) + "x" +
                    std::to_string(hidden) + "x" + std::to_string(output));
  DnnWeights w;
  w.input_dim = static_cast<int>(input_dim);
  const std::size_t n1 = static_cast<std::size_t>(kDnnHidden) * input_dim;
  const std::size_t total_floats = n1 + kDnnHidden + kDnnOutput * kDnnHidden +
                                   kDnnOutput;
  if (blob.size() != 21 + 4 * total_floats)
    throw Error(ErrorCode::kTruncatedFile,
                path + ": expected " + std::to_string(21 + 4 * total_floats) +
                    " bytes, got " + std::to_string(blob.size()));
  std::size_t off = 21;
  w.w1.resize(n1);
  for (auto& v : w.w1) { v = detail::get_f32le(p + off); off += 4; }
  for (auto& v : w.b1) { v = detail::get_f32le(p + off); off += 4; }
  for (auto& v : w.w2) { v = detail::get_f32le(p + off); off += 4; }
  for (auto& v : w.b2) { v = detail::get_f32le(p + off); off += 4; }
  return w;
}

}  // namespace vadfuse
