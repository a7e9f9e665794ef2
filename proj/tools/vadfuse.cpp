// Command-line front end: run the detector over audio, train the net,
// synthesize evaluation corpora, score them, and calibrate thresholds.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vadfuse/vadfuse.hpp"

namespace fs = std::filesystem;
using namespace vadfuse;

namespace {

VadConfig load_config_opt(const std::string& path) {
  if (path.empty()) return VadConfig{};
  return load_config(path);
}

std::vector<double> parse_csv_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(std::stod(item));
  return out;
}

std::vector<NoiseKind> parse_csv_noises(const std::string& s) {
  std::vector<NoiseKind> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_noise_kind(item));
  return out;
}

int cmd_run(const std::string& input, const std::string& config_path,
            const std::string& weights_path, const std::string& segments_dir,
            const std::string& decisions_path, const std::string& report_path,
            const std::string& features_path, const std::string& state_path,
            bool raw) {
  const VadConfig cfg = load_config_opt(config_path);
  std::optional<DnnWeights> weights;
  if (!weights_path.empty()) weights = load_weights(weights_path);

  SampleStream audio;
  if (input == "-") {
    if (!raw) {
      std::cerr << "reading from stdin requires --raw\n";
      return 2;
    }
    audio = read_raw_pcm(std::cin);
  } else if (raw) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + input);
    audio = read_raw_pcm(in);
  } else {
    audio = read_wav(input);
  }

  StreamingVad vad(cfg.pipeline, std::move(weights));
  std::ofstream decisions_out;
  if (!decisions_path.empty()) {
    decisions_out.open(decisions_path);
    if (!decisions_out)
      throw Error(ErrorCode::kIoError, "cannot open " + decisions_path);
  }
  if (!segments_dir.empty()) fs::create_directories(segments_dir);

  std::vector<ExtractedSegment> segments;
  int segment_no = 0;
  auto consume = [&](StreamingVad::Output out) {
    for (const auto& d : out.decisions)
      if (decisions_out.is_open()) write_decision_line(decisions_out, d);
    for (auto& seg : out.segments) {
      if (!segments_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof(name), "segment_%04d.wav", segment_no);
        write_wav((fs::path(segments_dir) / name).string(),
                  SampleStream{seg.samples, kSampleRate});
      }
      ++segment_no;
      segments.push_back(std::move(seg));
    }
  };

  constexpr std::size_t kChunk = 4096;
  for (std::size_t pos = 0; pos < audio.samples.size(); pos += kChunk) {
    const std::size_t take = std::min(kChunk, audio.samples.size() - pos);
    consume(vad.push(
        std::span<const double>(audio.samples.data() + pos, take)));
  }
  consume(vad.finish());

  std::ofstream report_file;
  std::ostream* report = &std::cout;
  if (!report_path.empty()) {
    report_file.open(report_path);
    if (!report_file)
      throw Error(ErrorCode::kIoError, "cannot open " + report_path);
    report = &report_file;
  }
  write_segment_report_header(*report);
  for (const auto& seg : segments) write_segment_report_row(*report, seg);

  if (!features_path.empty()) {
    // Debug dump of the normalized feature stack, recomputed offline.
    FrameStream frames(audio);
    FeatureExtractor ex(cfg.pipeline.features);
    std::vector<FbankVector> fbanks;
    for (std::int64_t i = 0; i < frames.size(); ++i)
      fbanks.push_back(ex.fbank(frames[i].window));
    auto feats = compute_deltas(fbanks);
    CmnState cmn;
    cmn.decay = cfg.pipeline.features.cmn_decay;
    cmn.warmup_frames = cfg.pipeline.features.cmn_warmup_frames;
    for (auto& f : feats) f = cmn_apply(cmn, f);
    std::ofstream out(features_path);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + features_path);
    write_feature_dump(out, feats);
  }
  if (!state_path.empty()) {
    std::ofstream out(state_path);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + state_path);
    dump_state(out, vad.engine().gmm_state());
  }
  return 0;
}

int cmd_train(const std::string& list_path, const std::string& out_path,
              const std::string& config_path) {
  const VadConfig cfg = load_config_opt(config_path);
  std::ifstream list(list_path);
  if (!list) throw Error(ErrorCode::kIoError, "cannot open " + list_path);
  std::vector<TrainUtterance> data;
  std::string line;
  while (std::getline(list, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string wav_path, label_path;
    if (!(ss >> wav_path >> label_path))
      throw Error(ErrorCode::kIoError, "bad list line: " + line);
    const SampleStream audio = read_wav(wav_path);
    std::vector<double> labels;
    if (label_path.ends_with(".segments.tsv")) {
      const auto segs = read_segments_tsv(label_path);
      labels = refine_segment_labels(
          segs, frame_count(static_cast<std::int64_t>(audio.samples.size())),
          cfg.harness.label_boundary_frames);
    } else {
      labels = read_labels_tsv(label_path);
    }
    data.push_back(
        prepare_train_utterance(audio, labels, cfg.pipeline.features));
  }
  if (data.empty()) {
    std::cerr << "no training utterances in " << list_path << "\n";
    return 2;
  }
  const DnnWeights w = train_dnn(data, cfg.pipeline.features, cfg.train,
                                 cfg.pipeline.dnn_activation, &std::cerr);
  save_weights(w, out_path);
  std::cerr << "wrote " << out_path << " (input_dim " << w.input_dim << ")\n";
  return 0;
}

int cmd_simulate(const std::string& out_dir, const std::string& snr_csv,
                 const std::string& noise_csv, std::uint64_t seed,
                 int utterances, const std::string& config_path) {
  const VadConfig cfg = load_config_opt(config_path);
  const auto snrs = parse_csv_doubles(snr_csv);
  const auto kinds = parse_csv_noises(noise_csv);
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> manifest;
  for (const NoiseKind kind : kinds) {
    for (const double snr : snrs) {
      for (int u = 0; u < utterances; ++u) {
        const SimUtterance sim = make_sim_utterance(
            kind, snr, condition_seed(seed, kind, snr, u), cfg.harness);
        char stem[128];
        std::snprintf(stem, sizeof(stem), "%s_%gdb_%03d",
                      noise_kind_name(kind), snr, u);
        ManifestEntry e;
        e.wav = std::string(stem) + ".wav";
        e.labels = std::string(stem) + ".labels.tsv";
        e.kind = kind;
        e.snr_db = snr;
        write_wav((fs::path(out_dir) / e.wav).string(), sim.noisy);
        write_labels_tsv((fs::path(out_dir) / e.labels).string(), sim.labels);
        manifest.push_back(e);
      }
    }
  }
  write_manifest((fs::path(out_dir) / "corpus.tsv").string(), manifest);
  std::cerr << "wrote " << manifest.size() << " utterances to " << out_dir
            << "\n";
  return 0;
}

int cmd_eval(const std::string& dir, const std::string& report_path,
             const std::string& weights_path, const std::string& config_path) {
  const VadConfig cfg = load_config_opt(config_path);
  std::optional<DnnWeights> weights;
  if (!weights_path.empty()) weights = load_weights(weights_path);
  const auto manifest = read_manifest((fs::path(dir) / "corpus.tsv").string());

  std::map<std::pair<double, int>, ConditionAccuracy> rows;
  for (const auto& e : manifest) {
    const SampleStream audio = read_wav((fs::path(dir) / e.wav).string());
    const auto labels = read_labels_tsv((fs::path(dir) / e.labels).string());
    const DetectorRun run =
        run_detectors(audio, cfg.pipeline, weights ? &*weights : nullptr);
    const auto truth = label_runs(labels);
    const int tol = cfg.harness.utterance_tolerance_frames;
    const auto buf = cfg.pipeline.buffer_frames;
    auto& row = rows[{e.snr_db, static_cast<int>(e.kind)}];
    row.kind = e.kind;
    row.snr_db = e.snr_db;
    row.gmm += evaluate(run.gmm, labels,
                        detect_ranges(run.gmm, cfg.pipeline.endpoint, buf),
                        truth, tol);
    row.dnn += evaluate(run.dnn, labels,
                        detect_ranges(run.dnn, cfg.pipeline.endpoint, buf),
                        truth, tol);
    row.fused += evaluate(run.fused, labels,
                          detect_ranges(run.fused, cfg.pipeline.endpoint, buf),
                          truth, tol);
  }
  std::vector<ConditionAccuracy> ordered;
  for (const auto& [key, row] : rows) ordered.push_back(row);

  std::ofstream report_file;
  std::ostream* report = &std::cout;
  if (!report_path.empty()) {
    report_file.open(report_path);
    if (!report_file)
      throw Error(ErrorCode::kIoError, "cannot open " + report_path);
    report = &report_file;
  }
  write_eval_report(*report, ordered);
  return 0;
}

int cmd_calibrate(const std::string& dir, const std::string& weights_path,
                  const std::string& config_path, const std::string& tau_csv,
                  const std::string& ta_csv, const std::string& thr_csv) {
  const VadConfig cfg = load_config_opt(config_path);
  std::optional<DnnWeights> weights;
  if (!weights_path.empty()) weights = load_weights(weights_path);
  const auto manifest = read_manifest((fs::path(dir) / "corpus.tsv").string());

  std::vector<CalibrationUtterance> corpus;
  for (const auto& e : manifest) {
    const SampleStream audio = read_wav((fs::path(dir) / e.wav).string());
    const auto labels = read_labels_tsv((fs::path(dir) / e.labels).string());
    const DetectorRun run =
        run_detectors(audio, cfg.pipeline, weights ? &*weights : nullptr);
    CalibrationUtterance u;
    u.subbands = run.subbands;
    u.labels = labels;
    if (weights) u.dnn_p_speech = run.p_speech;
    corpus.push_back(std::move(u));
  }

  ThresholdGrid grid;
  grid.t_tau = parse_csv_doubles(tau_csv);
  grid.t_a = parse_csv_doubles(ta_csv);
  grid.dnn_threshold = parse_csv_doubles(thr_csv);
  const CalibrationResult r =
      calibrate_thresholds(corpus, grid, cfg.pipeline.gmm);
  std::printf("gmm.t_tau = %g\n", r.t_tau);
  std::printf("gmm.t_a = %g\n", r.t_a);
  std::printf("# gmm frame accuracy %.4f\n", r.gmm_frame_accuracy);
  if (weights) {
    std::printf("fusion.dnn_threshold = %g\n", r.dnn_threshold);
    std::printf("# dnn frame accuracy %.4f\n", r.dnn_frame_accuracy);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DNN+GMM voice activity detector with endpointing"};
  app.require_subcommand(1);

  std::string input, config_path, weights_path, segments_dir, decisions_path,
      report_path, features_path, state_path;
  bool raw = false;
  auto* run = app.add_subcommand("run", "detect speech segments in audio");
  run->add_option("wav", input, "input WAV path, or - for stdin")->required();
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--weights", weights_path, "net weight file (omit for GMM-only)");
  run->add_option("--segments-out", segments_dir, "write segment WAVs here");
  run->add_option("--decisions-out", decisions_path, "per-frame JSONL log");
  run->add_option("--report", report_path, "segment report TSV (default stdout)");
  run->add_option("--features-out", features_path, "feature dump TSV");
  run->add_option("--gmm-state-out", state_path, "final model state dump");
  run->add_flag("--raw", raw, "input is headerless 16-bit PCM at 16 kHz");

  std::string list_path, out_path;
  auto* train = app.add_subcommand("train", "train the net on labeled audio");
  train->add_option("list", list_path,
                    "TSV of wav<TAB>labels (use *.segments.tsv for segment "
                    "annotations)")
      ->required();
  train->add_option("--out", out_path, "weight file to write")->required();
  train->add_option("--config", config_path, "key = value config file");

  std::string sim_dir, snr_csv = "5,10,15",
              noise_csv = "wind,water,babble,television";
  std::uint64_t seed = 1;
  int utterances = 50;
  auto* simulate = app.add_subcommand("simulate", "write a synthetic corpus");
  simulate->add_option("--out", sim_dir, "output directory")->required();
  simulate->add_option("--snr", snr_csv, "comma-separated SNR list, dB");
  simulate->add_option("--noise", noise_csv, "comma-separated noise kinds");
  simulate->add_option("--seed", seed, "corpus seed");
  simulate->add_option("--utterances", utterances, "utterances per condition");
  simulate->add_option("--config", config_path, "key = value config file");

  std::string eval_dir;
  auto* eval = app.add_subcommand("eval", "score detectors on a corpus");
  eval->add_option("dir", eval_dir, "corpus directory")->required();
  eval->add_option("--report", report_path, "report TSV (default stdout)");
  eval->add_option("--weights", weights_path, "net weight file");
  eval->add_option("--config", config_path, "key = value config file");

  std::string cal_dir, tau_csv = "0.5,1,1.5,2,2.5,3,3.5,4,5,6",
              ta_csv = "0.25,0.5,0.75,1,1.25,1.5,2,2.5,3",
              thr_csv = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  auto* calibrate = app.add_subcommand("calibrate", "grid-search thresholds");
  calibrate->add_option("dir", cal_dir, "corpus directory")->required();
  calibrate->add_option("--weights", weights_path, "net weight file");
  calibrate->add_option("--config", config_path, "key = value config file");
  calibrate->add_option("--t-tau-grid", tau_csv, "per-band threshold grid");
  calibrate->add_option("--t-a-grid", ta_csv, "total threshold grid");
  calibrate->add_option("--dnn-threshold-grid", thr_csv, "net threshold grid");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(input, config_path, weights_path, segments_dir,
                     decisions_path, report_path, features_path, state_path,
                     raw);
    if (train->parsed()) return cmd_train(list_path, out_path, config_path);
    if (simulate->parsed())
      return cmd_simulate(sim_dir, snr_csv, noise_csv, seed, utterances,
                          config_path);
    if (eval->parsed())
      return cmd_eval(eval_dir, report_path, weights_path, config_path);
    if (calibrate->parsed())
      return cmd_calibrate(cal_dir, weights_path, config_path, tau_csv, ta_csv,
                           thr_csv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
