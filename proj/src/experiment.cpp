// Copyright 2026 The otalc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "otalc/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

namespace otalc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInvalidConfig: return 2;
    case ErrorCode::kNumericalDivergence: return 3;
    default: return 1;
  }
}

json matrix_json(const ComplexMatrix& h) {
  json rows = json::array();
  for (Index i = 0; i < h.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < h.cols(); ++j) row.push_back({h(i, j).real(), h(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string metrics_csv(const RunLedger& ledger, CompressorKind compressor, std::uint64_t seed) {
  std::string out(kMetricsHeader);
  out += "\r\n";
  for (const auto& r : ledger.records) {
    out += std::to_string(r.round) + "," + std::to_string(r.cumulative_channel_uses) + "," +
           format_real(r.train_loss) + "," + format_real(r.test_accuracy) + "," +
           std::string(to_string(compressor)) + "," + std::to_string(seed) + "\r\n";
  }
  return out;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kIoError, path + ": empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) fail(ErrorCode::kIoError, path + ":1: unexpected metrics header");
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": expected 6 fields");
    try {
      MetricsRow row;
      row.round = std::stoi(f[0]);
      row.cumulative_channel_uses = std::stoll(f[1]);
      row.train_loss = std::stod(f[2]);
      row.test_accuracy = std::stod(f[3]);
      row.compressor = f[4];
      row.seed = std::stoull(f[5]);
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

std::string channel_trace_line(int round, const std::vector<std::size_t>& active,
                               const ota::ChannelRealization& channels) {
  json j;
  j["round"] = round;
  j["active"] = active;
  j["n0"] = channels.n0;
  j["tau"] = channels.tau;
  j["p0"] = channels.p0;
  json hs = json::array();
  for (const auto& h : channels.h) hs.push_back(matrix_json(h));
  j["h"] = std::move(hs);
  return j.dump();
}

std::vector<ota::ChannelRealization> load_channel_trace(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<ota::ChannelRealization> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ota::ChannelRealization c;
      c.n0 = j.at("n0").get<double>();
      c.tau = j.at("tau").get<Index>();
      c.p0 = j.at("p0").get<double>();
      for (const auto& hj : j.at("h")) {
        const auto rows = static_cast<Index>(hj.size());
        const auto cols = rows > 0 ? static_cast<Index>(hj[0].size()) : 0;
        ComplexMatrix h(rows, cols);
        for (Index r = 0; r < rows; ++r)
          for (Index s = 0; s < cols; ++s)
            h(r, s) = Complex(hj[r][s][0].get<double>(), hj[r][s][1].get<double>());
        c.h.push_back(std::move(h));
      }
      c.validate();
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

RunResult run_in_memory(const RunConfig& cfg) {
  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  std::optional<Engine> engine;
  try {
    engine.emplace(cfg);
    engine->run();
  } catch (const Error& e) {
    result.status = e.code() == ErrorCode::kNumericalDivergence ? RunStatus::kDiverged : RunStatus::kFailed;
    result.error = e.what();
  }
  if (engine) result.ledger = engine->ledger();
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

RunResult run_experiment(const RunConfig& cfg, const RunOutputs& outputs) {
  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(outputs.directory.empty() ? "." : outputs.directory);
  const std::string stem = outputs.stem.empty()
                               ? std::string(to_string(cfg.compressor)) + "_seed" + std::to_string(cfg.seed)
                               : outputs.stem;
  const fs::path dir = outputs.directory.empty() ? fs::path(".") : fs::path(outputs.directory);
  result.metrics_path = (dir / (stem + ".csv")).string();
  result.manifest_path = (dir / (stem + ".manifest.json")).string();

  std::optional<Engine> engine;
  std::ofstream trace;
  if (!outputs.trace_path.empty()) {
    trace.open(outputs.trace_path, std::ios::binary | std::ios::trunc);
    if (!trace) fail(ErrorCode::kIoError, "cannot write '" + outputs.trace_path + "'");
  }
  try {
    engine.emplace(cfg);
    if (trace.is_open()) {
      engine->set_hook([&trace](RoundEvent e, const Engine& eng) {
        if (e == RoundEvent::kBeamformersDesigned && eng.channels()) {
          trace << channel_trace_line(eng.round(), eng.last_active(), *eng.channels()) << '\n';
        }
      });
    }
    engine->run();
  } catch (const Error& e) {
    if (!engine && e.code() == ErrorCode::kInvalidConfig) throw;
    result.status = e.code() == ErrorCode::kNumericalDivergence ? RunStatus::kDiverged : RunStatus::kFailed;
    result.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  if (engine) result.ledger = engine->ledger();
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_text(result.metrics_path, metrics_csv(result.ledger, cfg.compressor, cfg.seed));
  json manifest;
  manifest["config"] = to_json(cfg);
  manifest["library_version"] = std::string(kLibraryVersion);
  manifest["wall_time_seconds"] = result.wall_seconds;
  manifest["metrics_file"] = fs::path(result.metrics_path).filename().string();
  manifest["rounds_completed"] = result.ledger.records.size();
  manifest["status"] = result.status == RunStatus::kOk ? "ok"
                       : result.status == RunStatus::kDiverged ? "diverged"
                                                               : "failed";
  if (!result.error.empty()) manifest["error"] = result.error;
  if (engine) {
    manifest["channel_uses_per_round"] = engine->channel_uses_per_round();
    manifest["coherence_length"] = engine->coherence_length();
  }
  write_text(result.manifest_path, manifest.dump(2) + "\n");
  return result;
}

std::optional<Index> uses_to_target(const std::vector<MetricsRow>& rows, double target) {
  for (const auto& r : rows) {
    if (r.test_accuracy >= target) return r.cumulative_channel_uses;
  }
  return std::nullopt;
}

Index rank_for_channel_budget(const RunConfig& cfg, Index budget) {
  if (budget < 1) fail(ErrorCode::kInvalidConfig, "channel-use budget must be >= 1");
  RunConfig probe = cfg;
  probe.compressor = CompressorKind::kOtaLc;
  probe.rank = 1;
  Index best = 1;
  const Engine first(probe);
  Index limit = 1;
  for (const auto& b : first.parameters().blocks) {
    limit = std::max(limit, std::min(b.data.rows(), b.data.cols()));
  }
  for (Index r = 2; r <= limit; ++r) {
    probe.rank = r;
    if (Engine(probe).channel_uses_per_round() > budget) break;
    best = r;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Overrides {
  CLI::Option* seed = nullptr;
  CLI::Option* rank = nullptr;
  CLI::Option* snr = nullptr;
  CLI::Option* compressor = nullptr;
  CLI::Option* rounds = nullptr;
  CLI::Option* error_feedback = nullptr;
  CLI::Option* channel_mode = nullptr;
  CLI::Option* backend = nullptr;
  CLI::Option* threads = nullptr;
  std::uint64_t seed_v = 0;
  Index rank_v = 0;
  double snr_v = 0.0;
  std::string compressor_v;
  int rounds_v = 0;
  bool error_feedback_v = true;
  std::string channel_mode_v;
  std::string backend_v;
  int threads_v = 0;
  std::string out_dir;

  void attach(CLI::App* app) {
    seed = app->add_option("--seed", seed_v, "random seed");
    rank = app->add_option("--rank", rank_v, "factorization rank r");
    snr = app->add_option("--snr-db", snr_v, "transmit SNR in dB");
    compressor = app->add_option("--compressor", compressor_v,
                                 "ota-lc | powersgd | topk | randk | rlc | none");
    rounds = app->add_option("--rounds", rounds_v, "number of rounds T");
    error_feedback = app->add_option("--error-feedback", error_feedback_v, "true | false");
    channel_mode = app->add_option("--channel-mode", channel_mode_v,
                                   "fading | noiseless | ideal-aggregation");
    backend = app->add_option("--backend", backend_v, "serial | openmp (results are identical)");
    threads = app->add_option("--threads", threads_v, "OpenMP threads, 0 for the default");
    app->add_option("--out", out_dir, "output directory");
  }

  void apply(RunConfig& cfg) const {
    try {
      if (seed->count()) cfg.seed = seed_v;
      if (rank->count()) cfg.rank = rank_v;
      if (snr->count()) cfg.snr_db = snr_v;
      if (compressor->count()) cfg.compressor = compressor_from_string(compressor_v);
      if (rounds->count()) cfg.rounds = rounds_v;
      if (error_feedback->count()) cfg.error_feedback = error_feedback_v;
      if (channel_mode->count()) cfg.channel_mode = channel_mode_from_string(channel_mode_v);
      if (backend->count()) cfg.runtime.backend = backend_from_string(backend_v);
      if (threads->count()) cfg.runtime.threads = threads_v;
    } catch (const ConfigError& e) {
      fail(ErrorCode::kInvalidConfig, "command line: " + e.key() + ": " + e.what());
    }
    validate_overrides(cfg);
  }

  std::string output_directory() const {
    if (!out_dir.empty()) return out_dir;
    if (const char* env = std::getenv("OTALC_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return "results";
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != s.size()) fail(ErrorCode::kInvalidConfig, what + ": '" + s + "' is not a number");
  return v;
}

std::string value_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int cmd_run(const std::string& config_path, const Overrides& ov, const std::string& trace,
            std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(config_path);
  ov.apply(cfg);
  RunOutputs outputs;
  outputs.directory = ov.output_directory();
  outputs.trace_path = trace;
  const RunResult r = run_experiment(cfg, outputs);
  out << "metrics: " << r.metrics_path << "\nmanifest: " << r.manifest_path << "\n";
  if (!r.ledger.records.empty()) {
    const auto& last = r.ledger.records.back();
    out << "rounds: " << last.round << "  cumulative channel uses: " << last.cumulative_channel_uses
        << "  final test accuracy: " << format_real(last.test_accuracy) << "\n";
  }
  if (r.status == RunStatus::kDiverged) {
    err << "error: " << r.error << " (partial metrics kept)\n";
    return 3;
  }
  if (r.status == RunStatus::kFailed) {
    err << "error: " << r.error << " (partial metrics kept)\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const Overrides& ov, const std::string& axis,
              const std::string& values_text, const std::string& compressors_text,
              const std::string& seeds_text, std::ostream& out, std::ostream& err) {
  if (axis != "rank" && axis != "snr" && axis != "channel-uses") {
    fail(ErrorCode::kInvalidConfig, "--axis must be rank, snr or channel-uses");
  }
  const auto value_items = split_list(values_text);
  if (value_items.empty()) fail(ErrorCode::kInvalidConfig, "--values: empty list");
  std::vector<double> values;
  for (const auto& v : value_items) values.push_back(parse_number(v, "--values"));

  RunConfig base = load_config(config_path);
  ov.apply(base);
  std::vector<CompressorKind> compressors;
  if (compressors_text.empty()) {
    compressors.push_back(base.compressor);
  } else {
    for (const auto& c : split_list(compressors_text)) {
      try {
        compressors.push_back(compressor_from_string(c));
      } catch (const ConfigError& e) {
        fail(ErrorCode::kInvalidConfig, std::string("--compressors: ") + e.what());
      }
    }
  }
  std::vector<std::uint64_t> seeds;
  if (seeds_text.empty()) {
    seeds.push_back(base.seed);
  } else {
    for (const auto& s : split_list(seeds_text)) {
      const double v = parse_number(s, "--seeds");
      if (v < 0 || v != std::floor(v)) fail(ErrorCode::kInvalidConfig, "--seeds: need non-negative integers");
      seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }

  for (double v : values) {
    if ((axis == "rank" || axis == "channel-uses") && (v < 1 || v != std::floor(v))) {
      fail(ErrorCode::kInvalidConfig, "--values: " + axis + " values must be positive integers");
    }
  }

  const fs::path root = fs::path(ov.output_directory()) / ("sweep_" + axis);
  fs::create_directories(root);
  std::string summary = "compressor," + axis + ",runs,mean_final_accuracy,mean_cumulative_channel_uses\r\n";
  std::string detail = "compressor," + axis + ",seed,status,final_accuracy,cumulative_channel_uses\r\n";
  int worst = 0;
  for (CompressorKind comp : compressors) {
    for (double v : values) {
      double acc_sum = 0.0;
      double uses_sum = 0.0;
      int runs = 0;
      for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.compressor = comp;
        cfg.seed = seed;
        if (axis == "rank") cfg.rank = static_cast<Index>(v);
        if (axis == "snr") cfg.snr_db = v;
        if (axis == "channel-uses") cfg.rank = rank_for_channel_budget(cfg, static_cast<Index>(v));
        validate_overrides(cfg);
        RunOutputs outputs;
        outputs.directory = (root / (axis + "_" + value_label(v))).string();
        const RunResult r = run_experiment(cfg, outputs);
        const char* status = r.status == RunStatus::kOk ? "ok" : r.status == RunStatus::kDiverged ? "diverged" : "failed";
        double acc = 0.0;
        Index uses = 0;
        if (!r.ledger.records.empty()) {
          acc = r.ledger.records.back().test_accuracy;
          uses = r.ledger.records.back().cumulative_channel_uses;
        }
        if (r.status != RunStatus::kOk) {
          err << "warning: " << to_string(comp) << " " << axis << "=" << value_label(v) << " seed "
              << seed << ": " << r.error << "\n";
          worst = std::max(worst, r.status == RunStatus::kDiverged ? 3 : 1);
        }
        acc_sum += acc;
        uses_sum += static_cast<double>(uses);
        ++runs;
        detail += std::string(to_string(comp)) + "," + value_label(v) + "," + std::to_string(seed) + "," +
                  status + "," + format_real(acc) + "," + std::to_string(uses) + "\r\n";
      }
      summary += std::string(to_string(comp)) + "," + value_label(v) + "," + std::to_string(runs) + "," +
                 format_real(acc_sum / runs) + "," + format_real(uses_sum / runs) + "\r\n";
      out << std::left << std::setw(10) << to_string(comp) << " " << axis << "=" << std::setw(8)
          << value_label(v) << " mean final accuracy " << format_real(acc_sum / runs) << "\n";
    }
  }
  write_text((root / "sweep_summary.csv").string(), summary);
  write_text((root / "sweep_runs.csv").string(), detail);
  out << "summary: " << (root / "sweep_summary.csv").string() << "\n";
  return worst;
}

int cmd_compare(const std::vector<std::string>& files, const CLI::Option* target_opt, double target,
                const CLI::Option* fraction_opt, double fraction, std::ostream& out) {
  if (files.size() < 2) fail(ErrorCode::kInvalidConfig, "compare needs at least two metrics files");
  if (target_opt->count() == fraction_opt->count()) {
    fail(ErrorCode::kInvalidConfig, "give exactly one of --target-accuracy or --target-fraction");
  }
  if (fraction_opt->count() && !(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "--target-fraction must be in (0, 1]");
  }
  std::vector<std::vector<MetricsRow>> data;
  for (const auto& f : files) {
    data.push_back(read_metrics_csv(f));
    if (data.back().empty()) fail(ErrorCode::kIoError, f + ": no metric rows");
  }
  // Relative targets use the final accuracy of the uncompressed run with the
  // same seed.
  std::map<std::uint64_t, double> reference;
  for (const auto& rows : data) {
    if (rows.front().compressor == "none") reference[rows.front().seed] = rows.back().test_accuracy;
  }
  std::vector<std::optional<Index>> reached(files.size());
  std::vector<double> targets(files.size(), target);
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (fraction_opt->count()) {
      const auto it = reference.find(data[i].front().seed);
      if (it == reference.end()) {
        fail(ErrorCode::kInvalidConfig,
             "--target-fraction needs a 'none' run with seed " + std::to_string(data[i].front().seed));
      }
      targets[i] = fraction * it->second;
    }
    reached[i] = uses_to_target(data[i], targets[i]);
  }
  out << "file,compressor,seed,target_accuracy,channel_uses_to_target\n";
  for (std::size_t i = 0; i < files.size(); ++i) {
    out << files[i] << "," << data[i].front().compressor << "," << data[i].front().seed << ","
        << format_real(targets[i]) << ","
        << (reached[i] ? std::to_string(*reached[i]) : std::string("not reached")) << "\n";
  }
  out << "\nfile_a,file_b,ratio_a_over_b\n";
  for (std::size_t a = 0; a < files.size(); ++a) {
    for (std::size_t b = 0; b < files.size(); ++b) {
      if (a == b) continue;
      out << files[a] << "," << files[b] << ",";
      if (reached[a] && reached[b] && *reached[b] > 0) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f",
                      static_cast<double>(*reached[a]) / static_cast<double>(*reached[b]));
        out << buf << "\n";
      } else {
        out << "n/a\n";
      }
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning with over-the-air low-rank gradient compression", "otalc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  std::string run_config;
  std::string trace_path;
  Overrides run_ov;
  CLI::App* run = app.add_subcommand("run", "run one experiment from a TOML or JSON config");
  run->add_option("config", run_config, "config file or run manifest")->required();
  run->add_option("--trace", trace_path, "write per-round channel realizations (JSON lines)");
  run_ov.attach(run);

  std::string sweep_config;
  std::string axis;
  std::string values;
  std::string compressors;
  std::string seeds;
  Overrides sweep_ov;
  CLI::App* sweep = app.add_subcommand("sweep", "repeat a run over one axis");
  sweep->add_option("config", sweep_config, "base config")->required();
  sweep->add_option("--axis", axis, "rank | snr | channel-uses")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();
  sweep->add_option("--compressors", compressors, "comma-separated compressors (default: config)");
  sweep->add_option("--seeds", seeds, "comma-separated seeds (default: config)");
  sweep_ov.attach(sweep);

  std::vector<std::string> files;
  double target = 0.0;
  double fraction = 0.0;
  CLI::App* compare = app.add_subcommand("compare", "channel uses needed to reach a target accuracy");
  compare->add_option("files", files, "metrics CSV files")->required();
  CLI::Option* target_opt = compare->add_option("--target-accuracy", target, "absolute test accuracy");
  CLI::Option* fraction_opt =
      compare->add_option("--target-fraction", fraction, "fraction of the 'none' run's final accuracy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kLibraryVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_ov, trace_path, out, err);
    if (sweep->parsed()) {
      return cmd_sweep(sweep_config, sweep_ov, axis, values, compressors, seeds, out, err);
    }
    if (compare->parsed()) return cmd_compare(files, target_opt, target, fraction_opt, fraction, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace otalc
