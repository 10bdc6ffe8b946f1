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

// Experiment harness: metrics CSV, run manifests, channel traces, sweeps,
// and the target-accuracy comparison behind the `otalc` command.

#ifndef OTALC_EXPERIMENT_HPP_
#define OTALC_EXPERIMENT_HPP_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "otalc/channel.hpp"
#include "otalc/config.hpp"
#include "otalc/engine.hpp"

namespace otalc {

inline constexpr std::string_view kMetricsHeader =
    "round,cumulative_channel_uses,train_loss,test_accuracy,compressor,seed";

// One line per round after the header; numbers are printed with a fixed
// format so identical ledgers give identical bytes.
std::string metrics_csv(const RunLedger& ledger, CompressorKind compressor, std::uint64_t seed);

struct MetricsRow {
  int round = 0;
  Index cumulative_channel_uses = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::string compressor;
  std::uint64_t seed = 0;
};

// Throws kIoError on a missing file or malformed row.
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

enum class RunStatus { kOk, kDiverged, kFailed };

struct RunResult {
  RunLedger ledger;
  RunStatus status = RunStatus::kOk;
  std::string error;
  std::string metrics_path;
  std::string manifest_path;
  double wall_seconds = 0.0;
};

struct RunOutputs {
  std::string directory;       // created if missing
  std::string stem;            // defaults to "<compressor>_seed<seed>"
  std::string trace_path;      // optional JSON-lines channel trace
};

// Runs to completion and writes the metrics CSV and manifest. Runtime
// errors are captured in the result; the rows completed so far are kept.
RunResult run_experiment(const RunConfig& cfg, const RunOutputs& outputs);

// Same without touching the filesystem.
RunResult run_in_memory(const RunConfig& cfg);

// Channel-trace records: one JSON object per round with the active set and
// every device's channel matrix.
std::string channel_trace_line(int round, const std::vector<std::size_t>& active,
                               const ota::ChannelRealization& channels);
std::vector<ota::ChannelRealization> load_channel_trace(const std::string& path);

// First cumulative channel-use count at which test accuracy reaches target.
std::optional<Index> uses_to_target(const std::vector<MetricsRow>& rows, double target);

// Largest rank whose Ota-LC per-round channel uses fit the budget (at least 1).
Index rank_for_channel_budget(const RunConfig& cfg, Index budget);

// Entry point of the command-line tool. Exit codes: 0 success, 1 runtime
// failure, 2 invalid configuration or usage, 3 numerical divergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace otalc

#endif  // OTALC_EXPERIMENT_HPP_
