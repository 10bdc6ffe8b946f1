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

#ifndef OTALC_CONFIG_HPP_
#define OTALC_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "otalc/data.hpp"
#include "otalc/kernels.hpp"
#include "otalc/model.hpp"

namespace otalc {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

enum class CompressorKind { kOtaLc, kPowerSgd, kTopK, kRandK, kRlc, kNone };
enum class ChannelMode { kFading, kNoiseless, kIdealAggregation };
enum class DigitalCost { kOrthogonal, kShared };
enum class PartitionKind { kIid, kDirichlet };
enum class DatasetKind { kSynthetic, kCsv };

std::string_view to_string(CompressorKind c);
std::string_view to_string(ChannelMode c);
std::string_view to_string(DigitalCost c);
std::string_view to_string(PartitionKind c);
std::string_view to_string(DatasetKind c);
CompressorKind compressor_from_string(std::string_view s);
ChannelMode channel_mode_from_string(std::string_view s);

// Analog schemes share the channel over the air; digital schemes are
// error-free and pay per-device channel uses.
bool is_analog(CompressorKind c);

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t devices = 10;
  int rounds = 80;
  double fraction = 0.5;
  double eta = 0.2;
  CompressorKind compressor = CompressorKind::kOtaLc;
  bool error_feedback = true;
  double stop_epsilon = 0.0;  // early stop on ||G_hat||_F <= eps; 0 disables

  // compressor_options
  Index rank = 4;
  double lambda = 1.0;
  double beta = 0.5;
  std::vector<double> block_lambda;  // per-block overrides, may be empty
  std::vector<double> block_beta;
  double init_scale = 1.0;  // factor init entries ~ N(0, init_scale^2 / r)
  int inner_iterations = 1;
  Index sparse_k = 0;  // 0: (m + n) r / 2 per block
  bool randk_rescale = false;

  // channel
  ChannelMode channel_mode = ChannelMode::kFading;
  double snr_db = 20.0;
  double p0 = 1.0;
  Index n_t = 8;
  Index n_r = 8;
  Index tau = 0;  // 0: the largest packet's channel uses
  DigitalCost digital_cost = DigitalCost::kOrthogonal;
  bool receive_shrinkage = true;  // scale OTA estimates by their signal fraction

  // partition
  PartitionKind partition = PartitionKind::kDirichlet;
  double alpha = 0.9;

  // model
  ModelKind model = ModelKind::kLogistic;
  Index hidden = 16;

  // dataset
  DatasetKind dataset = DatasetKind::kSynthetic;
  MixtureSpec mixture{16, 64, 2000, 1000, 1.0, 1.0, 8};
  std::string csv_path;
  double test_fraction = 0.25;

  // runtime; never changes results
  ExecutionPolicy runtime{};

  double n0() const;
  double lambda_for(std::size_t block) const;
  double beta_for(std::size_t block) const;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// A validation failure tied to a key such as "channel.snr_db".
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Default experiment: a scaled-down version of the reference setting.
RunConfig default_config();

nlohmann::json to_json(const RunConfig& cfg);

// Overlays the keys of `doc` (nested by section) onto `cfg`. Unknown keys and
// type mismatches raise ConfigError.
void apply_json(RunConfig& cfg, const nlohmann::json& doc);

// Reads TOML, JSON, or a run manifest (JSON object with a "config" member).
// Every problem is reported as kInvalidConfig with "path:line: key: reason".
RunConfig load_config(const std::string& path);

// Same, from in-memory text; `name` is used in messages and to pick the
// format (".json" suffix selects JSON, anything else TOML).
RunConfig parse_config(const std::string& text, const std::string& name);

// Re-validates after command-line overrides; messages cite the flag.
void validate_overrides(const RunConfig& cfg);

}  // namespace otalc

#endif  // OTALC_CONFIG_HPP_
