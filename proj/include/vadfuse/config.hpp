#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vadfuse/error.hpp"
#include "vadfuse/pipeline.hpp"

namespace vadfuse {

struct HarnessConfig {
  double label_threshold_ratio = 0.1;  // of the 95th-percentile frame energy
  int label_boundary_frames = 3;       // transition frames relabeled 0.5
  int utterance_tolerance_frames = 20; // endpoint match tolerance
};

struct TrainConfig {
  double lr = 0.01;
  int batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 1;
};

struct VadConfig {
  PipelineConfig pipeline;
  HarnessConfig harness;
  TrainConfig train;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kBadConfig, key + ": not a number: " + v);
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kBadConfig, key + ": not an integer: " + v);
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::kBadConfig, key + ": not a boolean: " + v);
}

inline std::vector<double> parse_list(const std::string& key,
                                      const std::string& v, std::size_t n) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.size() != n)
    throw Error(ErrorCode::kBadConfig,
                key + ": expected " + std::to_string(n) + " values, got " +
                    std::to_string(out.size()));
  return out;
}

}  // namespace detail

inline void apply_config_entry(VadConfig& c, const std::string& key,
                               const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  auto& feat = c.pipeline.features;
  auto& gmm = c.pipeline.gmm;
  auto& fus = c.pipeline.fusion;
  auto& ep = c.pipeline.endpoint;
  if (key == "features.preemphasis") feat.preemphasis = parse_double(key, value);
  else if (key == "features.energy_floor") feat.energy_floor = parse_double(key, value);
  else if (key == "features.cmn_decay") feat.cmn_decay = parse_double(key, value);
  else if (key == "features.cmn_warmup_frames") feat.cmn_warmup_frames = static_cast<int>(parse_int(key, value));
  else if (key == "features.context_left") feat.context_left = static_cast<int>(parse_int(key, value));
  else if (key == "features.context_right") feat.context_right = static_cast<int>(parse_int(key, value));
  else if (key == "features.band_edges_hz") {
    const auto v = detail::parse_list(key, value, 2 * kNumSubbands);
    for (int i = 0; i < kNumSubbands; ++i) {
      if (v[2 * i] >= v[2 * i + 1] || v[2 * i] < 0 || v[2 * i + 1] > kSampleRate / 2.0)
        throw Error(ErrorCode::kBadConfig, key + ": bad band " + std::to_string(i));
      feat.band_edges[i] = {v[2 * i], v[2 * i + 1]};
    }
  }
  else if (key == "dnn.activation") {
    if (value == "relu") c.pipeline.dnn_activation = Activation::kRelu;
    else if (value == "sigmoid") c.pipeline.dnn_activation = Activation::kSigmoid;
    else throw Error(ErrorCode::kBadConfig, key + ": want relu or sigmoid");
  }
  else if (key == "fusion.alpha") fus.alpha = parse_double(key, value);
  else if (key == "fusion.beta") fus.beta = parse_double(key, value);
  else if (key == "fusion.dnn_threshold") fus.dnn_threshold = parse_double(key, value);
  else if (key == "gmm.t_tau") gmm.t_tau = parse_double(key, value);
  else if (key == "gmm.t_a") gmm.t_a = parse_double(key, value);
  else if (key == "gmm.k_delta_n") gmm.coeffs.k_delta_n = parse_double(key, value);
  else if (key == "gmm.k_delta_s") gmm.coeffs.k_delta_s = parse_double(key, value);
  else if (key == "gmm.c_delta_n") gmm.coeffs.c_delta_n = parse_double(key, value);
  else if (key == "gmm.c_delta_s") gmm.coeffs.c_delta_s = parse_double(key, value);
  else if (key == "gmm.k_l") gmm.coeffs.k_l = parse_double(key, value);
  else if (key == "gmm.bootstrap_frames") gmm.bootstrap_frames = static_cast<int>(parse_int(key, value));
  else if (key == "gmm.component_offset") gmm.component_offset = parse_double(key, value);
  else if (key == "gmm.speech_offset") gmm.speech_offset = parse_double(key, value);
  else if (key == "gmm.init_var") gmm.init_var = parse_double(key, value);
  else if (key == "gmm.var_floor") gmm.var_floor = parse_double(key, value);
  else if (key == "gmm.approx_llr") gmm.approx_llr = parse_bool(key, value);
  else if (key == "gmm.band_weights") {
    const auto v = detail::parse_list(key, value, kNumSubbands);
    for (int i = 0; i < kNumSubbands; ++i) gmm.band_weights[i] = v[i];
  }
  else if (key == "endpoint.window") ep.window = static_cast<int>(parse_int(key, value));
  else if (key == "endpoint.rho") ep.rho = parse_double(key, value);
  else if (key == "endpoint.traceback") ep.traceback = static_cast<int>(parse_int(key, value));
  else if (key == "endpoint.end_window") ep.end_window = static_cast<int>(parse_int(key, value));
  else if (key == "endpoint.rho_end") ep.rho_end = parse_double(key, value);
  else if (key == "endpoint.end_traceback") ep.end_traceback = static_cast<int>(parse_int(key, value));
  else if (key == "buffer.frames") c.pipeline.buffer_frames = parse_int(key, value);
  else if (key == "harness.label_threshold_ratio") c.harness.label_threshold_ratio = parse_double(key, value);
  else if (key == "harness.label_boundary_frames") c.harness.label_boundary_frames = static_cast<int>(parse_int(key, value));
  else if (key == "harness.utterance_tolerance_frames") c.harness.utterance_tolerance_frames = static_cast<int>(parse_int(key, value));
  else if (key == "train.lr") c.train.lr = parse_double(key, value);
  else if (key == "train.batch_size") c.train.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "train.epochs") c.train.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "train.seed") c.train.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else throw Error(ErrorCode::kBadConfig, "unknown key: " + key);
}

// `key = value` lines; '#' starts a comment, blank lines are skipped.
inline VadConfig parse_config(std::istream& in) {
  VadConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kBadConfig,
                  "line " + std::to_string(lineno) + ": missing '='");
    apply_config_entry(c, detail::trim(line.substr(0, eq)),
                       detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline VadConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_config(in);
}

}  // namespace vadfuse
