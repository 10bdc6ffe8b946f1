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

#include "otalc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <toml.hpp>

namespace otalc {

using nlohmann::json;

namespace {

template <class E>
struct NamedValue {
  E value;
  std::string_view name;
};

constexpr NamedValue<CompressorKind> kCompressors[] = {
    {CompressorKind::kOtaLc, "ota-lc"}, {CompressorKind::kPowerSgd, "powersgd"},
    {CompressorKind::kTopK, "topk"},    {CompressorKind::kRandK, "randk"},
    {CompressorKind::kRlc, "rlc"},      {CompressorKind::kNone, "none"},
};
constexpr NamedValue<ChannelMode> kChannelModes[] = {
    {ChannelMode::kFading, "fading"},
    {ChannelMode::kNoiseless, "noiseless"},
    {ChannelMode::kIdealAggregation, "ideal-aggregation"},
};
constexpr NamedValue<DigitalCost> kDigitalCosts[] = {
    {DigitalCost::kOrthogonal, "orthogonal"},
    {DigitalCost::kShared, "shared"},
};
constexpr NamedValue<PartitionKind> kPartitions[] = {
    {PartitionKind::kIid, "iid"},
    {PartitionKind::kDirichlet, "dirichlet"},
};
constexpr NamedValue<DatasetKind> kDatasets[] = {
    {DatasetKind::kSynthetic, "synthetic"},
    {DatasetKind::kCsv, "csv"},
};
constexpr NamedValue<Backend> kBackends[] = {
    {Backend::kSerial, "serial"},
    {Backend::kOpenMP, "openmp"},
};

template <class E, std::size_t N>
std::string_view name_of(const NamedValue<E> (&table)[N], E v) {
  for (const auto& entry : table)
    if (entry.value == v) return entry.name;
  return "?";
}

template <class E, std::size_t N>
E value_of(const NamedValue<E> (&table)[N], std::string_view s, const std::string& key) {
  for (const auto& entry : table)
    if (entry.name == s) return entry.value;
  std::string choices;
  for (const auto& entry : table) {
    if (!choices.empty()) choices += " | ";
    choices += entry.name;
  }
  throw ConfigError(key, "unknown value '" + std::string(s) + "' (expected " + choices + ")");
}

// --- typed readers --------------------------------------------------------

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw ConfigError(key, "expected an integer");
}

std::int64_t as_nonneg_int(const json& v, const std::string& key) {
  const auto i = as_int(v, key);
  if (i < 0) throw ConfigError(key, "must be >= 0");
  return i;
}

int as_int32(const json& v, const std::string& key) {
  const auto i = as_int(v, key);
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "integer out of range");
  }
  return static_cast<int>(i);
}

int as_nonneg_int32(const json& v, const std::string& key) {
  const int i = as_int32(v, key);
  if (i < 0) throw ConfigError(key, "must be >= 0");
  return i;
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_doubles(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_double(e, key));
  return out;
}

struct Field {
  std::string key;  // "section.name" or "name"
  std::function<void(RunConfig&, const json&, const std::string&)> set;
  std::function<json(const RunConfig&)> get;
};

#define OTALC_FIELD(KEY, MEMBER, READ)                                                     \
  Field {                                                                                  \
    KEY, [](RunConfig& c, const json& v, const std::string& k) { c.MEMBER = READ(v, k); }, \
        [](const RunConfig& c) { return json(c.MEMBER); }                                  \
  }

#define OTALC_ENUM_FIELD(KEY, MEMBER, TABLE)                                                  \
  Field {                                                                                     \
    KEY,                                                                                      \
        [](RunConfig& c, const json& v, const std::string& k) {                               \
          c.MEMBER = value_of(TABLE, as_string(v, k), k);                                     \
        },                                                                                    \
        [](const RunConfig& c) { return json(std::string(name_of(TABLE, c.MEMBER))); }       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(Field{"seed",
                      [](RunConfig& c, const json& v, const std::string& k) {
                        c.seed = static_cast<std::uint64_t>(as_nonneg_int(v, k));
                      },
                      [](const RunConfig& c) { return json(c.seed); }});
    f.push_back(Field{"devices",
                      [](RunConfig& c, const json& v, const std::string& k) {
                        const auto n = as_int(v, k);
                        if (n < 1) throw ConfigError(k, "need at least one device (K >= 1)");
                        c.devices = static_cast<std::size_t>(n);
                      },
                      [](const RunConfig& c) { return json(c.devices); }});
    f.push_back(OTALC_FIELD("rounds", rounds, as_int32));
    f.push_back(OTALC_FIELD("fraction", fraction, as_double));
    f.push_back(OTALC_FIELD("eta", eta, as_double));
    f.push_back(OTALC_ENUM_FIELD("compressor", compressor, kCompressors));
    f.push_back(OTALC_FIELD("error_feedback", error_feedback, as_bool));
    f.push_back(OTALC_FIELD("stop_epsilon", stop_epsilon, as_double));

    f.push_back(OTALC_FIELD("compressor_options.rank", rank, as_int));
    f.push_back(OTALC_FIELD("compressor_options.lambda", lambda, as_double));
    f.push_back(OTALC_FIELD("compressor_options.beta", beta, as_double));
    f.push_back(OTALC_FIELD("compressor_options.block_lambda", block_lambda, as_doubles));
    f.push_back(OTALC_FIELD("compressor_options.block_beta", block_beta, as_doubles));
    f.push_back(OTALC_FIELD("compressor_options.init_scale", init_scale, as_double));
    f.push_back(OTALC_FIELD("compressor_options.inner_iterations", inner_iterations,
                            as_int32));
    f.push_back(OTALC_FIELD("compressor_options.sparse_k", sparse_k, as_nonneg_int));
    f.push_back(OTALC_FIELD("compressor_options.randk_rescale", randk_rescale, as_bool));

    f.push_back(OTALC_ENUM_FIELD("channel.mode", channel_mode, kChannelModes));
    f.push_back(OTALC_FIELD("channel.snr_db", snr_db, as_double));
    f.push_back(OTALC_FIELD("channel.p0", p0, as_double));
    f.push_back(OTALC_FIELD("channel.n_t", n_t, as_int));
    f.push_back(OTALC_FIELD("channel.n_r", n_r, as_int));
    f.push_back(OTALC_FIELD("channel.tau", tau, as_nonneg_int));
    f.push_back(OTALC_ENUM_FIELD("channel.digital_cost", digital_cost, kDigitalCosts));
    f.push_back(OTALC_FIELD("channel.receive_shrinkage", receive_shrinkage, as_bool));

    f.push_back(OTALC_ENUM_FIELD("partition.kind", partition, kPartitions));
    f.push_back(OTALC_FIELD("partition.alpha", alpha, as_double));

    f.push_back(Field{"model.kind",
                      [](RunConfig& c, const json& v, const std::string& k) {
                        const auto s = as_string(v, k);
                        if (s != "logistic" && s != "mlp") {
                          throw ConfigError(k, "unknown value '" + s + "' (expected logistic | mlp)");
                        }
                        c.model = model_kind_from_string(s);
                      },
                      [](const RunConfig& c) { return json(std::string(to_string(c.model))); }});
    f.push_back(OTALC_FIELD("model.hidden", hidden, as_int));

    f.push_back(OTALC_ENUM_FIELD("dataset.kind", dataset, kDatasets));
    f.push_back(OTALC_FIELD("dataset.classes", mixture.classes, as_int32));
    f.push_back(OTALC_FIELD("dataset.features", mixture.dim, as_int));
    f.push_back(OTALC_FIELD("dataset.train_samples", mixture.train_samples, as_int));
    f.push_back(OTALC_FIELD("dataset.test_samples", mixture.test_samples, as_int));
    f.push_back(OTALC_FIELD("dataset.separation", mixture.separation, as_double));
    f.push_back(OTALC_FIELD("dataset.noise", mixture.noise, as_double));
    f.push_back(OTALC_FIELD("dataset.latent_dim", mixture.latent_dim, as_nonneg_int));
    f.push_back(OTALC_FIELD("dataset.path", csv_path, as_string));
    f.push_back(OTALC_FIELD("dataset.test_fraction", test_fraction, as_double));

    f.push_back(OTALC_ENUM_FIELD("runtime.backend", runtime.backend, kBackends));
    f.push_back(OTALC_FIELD("runtime.threads", runtime.threads, as_nonneg_int32));
    return f;
  }();
  return table;
}

#undef OTALC_FIELD
#undef OTALC_ENUM_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

void walk(RunConfig& cfg, const json& node, const std::string& prefix) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (const Field* f = find_field(key)) {
      f->set(cfg, it.value(), key);
    } else if (it.value().is_object() && prefix.empty()) {
      walk(cfg, it.value(), key);
    } else {
      throw ConfigError(key, "unknown configuration key");
    }
  }
}

// --- TOML -> json with per-key line numbers ---------------------------------

json toml_to_json(const toml::node& node, const std::string& key,
                  std::map<std::string, int>& lines) {
  if (!key.empty()) lines.emplace(key, static_cast<int>(node.source().begin.line));
  if (const auto* t = node.as_table()) {
    json obj = json::object();
    for (const auto& [k, v] : *t) {
      const std::string sub = key.empty() ? std::string(k.str()) : key + "." + std::string(k.str());
      obj[std::string(k.str())] = toml_to_json(v, sub, lines);
    }
    return obj;
  }
  if (const auto* a = node.as_array()) {
    json arr = json::array();
    for (const auto& e : *a) arr.push_back(toml_to_json(e, "", lines));
    return arr;
  }
  if (const auto* v = node.as_integer()) return json(v->get());
  if (const auto* v = node.as_floating_point()) return json(v->get());
  if (const auto* v = node.as_boolean()) return json(v->get());
  if (const auto* v = node.as_string()) return json(v->get());
  throw ConfigError(key, "unsupported TOML value type");
}

// nlohmann/json keeps no source positions, so look the key up in the text:
// the first line holding "name": after the line of its section, if any.
int json_line_of(const std::string& text, const std::string& key) {
  const auto dot = key.rfind('.');
  const std::string leaf = "\"" + (dot == std::string::npos ? key : key.substr(dot + 1)) + "\"";
  std::size_t from = 0;
  if (dot != std::string::npos) {
    const std::string section = "\"" + key.substr(0, dot) + "\"";
    const auto s = text.find(section);
    if (s != std::string::npos) from = s;
  }
  auto pos = text.find(leaf, from);
  if (pos == std::string::npos) pos = text.find(leaf);
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

[[noreturn]] void fail_at(const std::string& name, int line, const std::string& key,
                          const std::string& what) {
  std::string msg = name;
  if (line > 0) msg += ":" + std::to_string(line);
  msg += ": ";
  if (!key.empty()) msg += key + ": ";
  msg += what;
  fail(ErrorCode::kInvalidConfig, msg);
}

}  // namespace

ConfigError::ConfigError(std::string key, const std::string& what)
    : Error(ErrorCode::kInvalidConfig, what), key_(std::move(key)) {}

std::string_view to_string(CompressorKind c) { return name_of(kCompressors, c); }
std::string_view to_string(ChannelMode c) { return name_of(kChannelModes, c); }
std::string_view to_string(DigitalCost c) { return name_of(kDigitalCosts, c); }
std::string_view to_string(PartitionKind c) { return name_of(kPartitions, c); }
std::string_view to_string(DatasetKind c) { return name_of(kDatasets, c); }
std::string_view to_string(Backend b) { return name_of(kBackends, b); }

CompressorKind compressor_from_string(std::string_view s) {
  return value_of(kCompressors, s, "compressor");
}
ChannelMode channel_mode_from_string(std::string_view s) {
  return value_of(kChannelModes, s, "channel.mode");
}
Backend backend_from_string(std::string_view s) {
  return value_of(kBackends, s, "runtime.backend");
}

bool is_analog(CompressorKind c) {
  return c == CompressorKind::kOtaLc || c == CompressorKind::kRlc;
}

double RunConfig::n0() const {
  if (channel_mode != ChannelMode::kFading) return 0.0;
  return p0 * std::pow(10.0, -snr_db / 10.0);
}

double RunConfig::lambda_for(std::size_t block) const {
  return block < block_lambda.size() ? block_lambda[block] : lambda;
}

double RunConfig::beta_for(std::size_t block) const {
  return block < block_beta.size() ? block_beta[block] : beta;
}

void RunConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (devices < 1) throw ConfigError("devices", "need at least one device (K >= 1)");
  if (rounds < 1) throw ConfigError("rounds", "need at least one round");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction", "participation fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  if (!positive(eta)) throw ConfigError("eta", "learning rate must be > 0");
  if (!(stop_epsilon >= 0.0)) throw ConfigError("stop_epsilon", "must be >= 0");
  if (rank < 1) throw ConfigError("compressor_options.rank", "rank must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("compressor_options.lambda", "lambda must be >= 0");
  }
  auto check_beta = [](double b, const std::string& key) {
    if (!(b > 0.0 && b <= 1.0)) {
      throw ConfigError(key, "beta must be in (0, 1], got " + std::to_string(b));
    }
  };
  check_beta(beta, "compressor_options.beta");
  for (double b : block_beta) check_beta(b, "compressor_options.block_beta");
  for (double l : block_lambda) {
    if (!(l >= 0.0)) throw ConfigError("compressor_options.block_lambda", "lambda must be >= 0");
  }
  if (!positive(init_scale)) throw ConfigError("compressor_options.init_scale", "must be > 0");
  if (inner_iterations < 1) {
    throw ConfigError("compressor_options.inner_iterations", "must be >= 1");
  }
  if (!std::isfinite(snr_db)) throw ConfigError("channel.snr_db", "must be finite");
  if (!positive(p0)) throw ConfigError("channel.p0", "power budget must be > 0");
  if (n_t < 1) throw ConfigError("channel.n_t", "need at least one transmit antenna");
  if (n_r < 1) throw ConfigError("channel.n_r", "need at least one receive antenna");
  if (n_r < n_t) {
    throw ConfigError("channel.n_r", "zero-forcing needs n_r >= n_t");
  }
  if (partition == PartitionKind::kDirichlet && !positive(alpha)) {
    throw ConfigError("partition.alpha", "Dirichlet concentration must be > 0");
  }
  if (model == ModelKind::kMlp && hidden < 1) throw ConfigError("model.hidden", "must be >= 1");
  if (dataset == DatasetKind::kSynthetic) {
    if (mixture.classes < 2) throw ConfigError("dataset.classes", "need at least two classes");
    if (mixture.dim < 1) throw ConfigError("dataset.features", "must be >= 1");
    if (mixture.train_samples < 1) throw ConfigError("dataset.train_samples", "must be >= 1");
    if (mixture.test_samples < 1) throw ConfigError("dataset.test_samples", "must be >= 1");
    if (!(mixture.separation >= 0.0)) throw ConfigError("dataset.separation", "must be >= 0");
    if (!(mixture.noise >= 0.0)) throw ConfigError("dataset.noise", "must be >= 0");
  } else {
    if (csv_path.empty()) throw ConfigError("dataset.path", "csv dataset needs a path");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ConfigError("dataset.test_fraction", "must be in (0, 1)");
    }
  }
}

RunConfig default_config() { return RunConfig{}; }

json to_json(const RunConfig& cfg) {
  json out = json::object();
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    if (dot == std::string::npos) {
      out[f.key] = f.get(cfg);
    } else {
      out[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(cfg);
    }
  }
  return out;
}

void apply_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "configuration must be a table/object");
  walk(cfg, doc, "");
}

RunConfig parse_config(const std::string& text, const std::string& name) {
  RunConfig cfg = default_config();
  std::map<std::string, int> lines;
  const bool is_json = ends_with(name, ".json");
  try {
    json doc;
    if (is_json) {
      try {
        doc = json::parse(text);
      } catch (const json::parse_error& e) {
        const auto byte = static_cast<long>(std::min<std::size_t>(e.byte, text.size()));
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte, '\n'));
        fail_at(name, line, "", std::string("JSON syntax error: ") + e.what());
      }
      // A run manifest carries the resolved configuration under "config".
      if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) {
        doc = doc["config"];
      }
    } else {
      toml::table table;
      try {
        table = toml::parse(text, std::string_view(name));
      } catch (const toml::parse_error& e) {
        fail_at(name, static_cast<int>(e.source().begin.line), "",
                std::string("TOML syntax error: ") + std::string(e.description()));
      }
      doc = toml_to_json(table, "", lines);
    }
    apply_json(cfg, doc);
    cfg.validate();
  } catch (const ConfigError& e) {
    int line = 0;
    if (is_json) {
      line = e.key().empty() ? 0 : json_line_of(text, e.key());
    } else if (const auto it = lines.find(e.key()); it != lines.end()) {
      line = it->second;
    }
    fail_at(name, line, e.key(), e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kInvalidConfig, path + ": cannot open configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

void validate_overrides(const RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    fail(ErrorCode::kInvalidConfig, "command line: " + e.key() + ": " + e.what());
  }
}

}  // namespace otalc
