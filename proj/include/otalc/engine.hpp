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

// Federated training loop.
//
// One round t, for the Ota-LC compressor:
//   1. sample the active devices and draw the round's channels
//   2. design the beamformers for the active set
//   3. every device applies W <- W - eta P Q^T with the previous factors
//   4. active devices compute G_k, add their residual Delta_k, and run the
//      warm-started local factor update from the broadcast (P, Q)
//   5. the factor pairs are packed, precoded and summed over the air
//   6. the server unpacks the estimate and takes the beta step
//   7. active devices set Delta_k = G~_k - P Q^T / |active|
// The baselines follow the same skeleton with their own steps 4 to 7.

#ifndef OTALC_ENGINE_HPP_
#define OTALC_ENGINE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "otalc/baselines.hpp"
#include "otalc/channel.hpp"
#include "otalc/compression.hpp"
#include "otalc/config.hpp"
#include "otalc/data.hpp"
#include "otalc/model.hpp"

namespace otalc {

// round(fraction K) devices, at least one, uniform without replacement from
// the round's sampling stream. Sorted ascending.
std::vector<std::size_t> select_devices(std::uint64_t round, std::size_t devices,
                                        double fraction, std::uint64_t seed);

struct RoundRecord {
  int round = 0;
  std::vector<std::size_t> active;
  Index channel_uses = 0;             // this round
  Index cumulative_channel_uses = 0;  // through this round
  double train_loss = 0.0;            // of the model after this round's update
  double test_accuracy = 0.0;
  std::vector<double> residual_norms;  // ||sum_k Delta_k||_F per block
  double max_transmit_power = 0.0;     // largest per-device power audit value
  bool power_violation = false;
};

struct RunLedger {
  std::vector<RoundRecord> records;
};

enum class RoundEvent {
  kBeamformersDesigned,
  kModelUpdated,
  kGradientsComputed,
  kFactorsAggregated,
  kResidualsUpdated,
  kRoundFinished,
};

class Engine;
using RoundHook = std::function<void(RoundEvent, const Engine&)>;

class Engine {
 public:
  // Builds the datasets and partition from the configuration.
  explicit Engine(RunConfig cfg);
  Engine(RunConfig cfg, Dataset train, Dataset test);

  // Runs round t + 1. On error the ledger keeps every completed round.
  const RoundRecord& run_round();
  // Runs the configured number of rounds or until the early-stop test passes.
  const RunLedger& run();

  void set_hook(RoundHook hook) { hook_ = std::move(hook); }

  const RunConfig& config() const { return cfg_; }
  const RunLedger& ledger() const { return ledger_; }
  int round() const { return round_; }
  bool stopped() const { return stopped_; }
  const ModelSpec& model_spec() const { return spec_; }
  const ParameterSet& parameters() const { return w_; }
  const std::vector<DeviceShard>& shards() const { return shards_; }
  const Dataset& train_set() const { return train_; }
  const Dataset& test_set() const { return test_; }

  // Ota-LC server factors per gradient block (after the latest round).
  const std::vector<FactorPair>& factors() const { return factors_; }
  // Delta_k per device and block.
  const std::vector<std::vector<RealMatrix>>& residuals() const { return residual_; }
  // G~_k of the latest round, parallel to last_active().
  const std::vector<ParameterSet>& last_compensated() const { return compensated_; }
  const std::vector<std::size_t>& last_active() const { return active_; }
  // Aggregate gradient estimate of the latest round.
  const ParameterSet& last_aggregate() const { return g_hat_; }
  const std::optional<ota::BeamformingSet>& beamformers() const { return beamformers_; }
  const std::optional<ota::ChannelRealization>& channels() const { return channels_; }

  // Per-round channel uses for the configured shapes.
  Index channel_uses_per_round() const;
  // Coherence length actually used (configured or automatic).
  Index coherence_length() const { return tau_; }

 private:
  struct Payload {
    std::vector<RealMatrix> stacked;  // per active device
    Index split = 0;                  // rows of the first part
  };

  void setup();
  void emit(RoundEvent e) const {
    if (hook_) hook_(e, *this);
  }
  Index packet_uses(Index m, Index n, Index r) const;
  Index digital_uses(Index reals_per_device, std::size_t active) const;

  // Sums the per-device payloads, over the air for analog schemes.
  RealMatrix aggregate(const Payload& payload, std::size_t gamma_slot, std::uint32_t lane,
                       RoundRecord& record);
  double gamma_for(std::size_t slot) const;
  void update_gamma(std::size_t slot, const RealMatrix& aggregate, Index half_rows, Index r,
                    double noise_energy = 0.0);

  void round_ota_lc(RoundRecord& record);
  void round_powersgd(RoundRecord& record);
  void round_sparse(RoundRecord& record, bool random);
  void round_rlc(RoundRecord& record);
  void round_none(RoundRecord& record);
  void aggregate_vectors(RoundRecord& record, bool analog, std::uint32_t lane);

  RunConfig cfg_;
  ModelSpec spec_;
  Dataset train_;
  Dataset test_;
  std::vector<DeviceShard> shards_;
  ParameterSet w_;
  ParameterSet g_hat_;
  bool has_g_hat_ = false;
  int round_ = 0;
  bool stopped_ = false;
  Index cumulative_uses_ = 0;
  Index tau_ = 1;
  RunLedger ledger_;
  RoundHook hook_;

  std::vector<FactorPair> factors_;               // ota-lc
  std::vector<RealMatrix> power_q_;               // powersgd
  std::vector<baselines::ProjectionOperator> projections_;  // rlc
  std::vector<std::vector<RealMatrix>> residual_;  // [device][block]
  std::vector<double> gamma_;                      // per gamma slot
  std::vector<bool> gamma_set_;

  std::vector<std::size_t> active_;
  std::vector<ParameterSet> compensated_;
  std::vector<ParameterSet> transmitted_;  // per active device, for residual bookkeeping
  std::optional<ota::ChannelRealization> channels_;
  std::optional<ota::BeamformingSet> beamformers_;
};

// Datasets described by the configuration.
SplitDataset build_datasets(const RunConfig& cfg);

}  // namespace otalc

#endif  // OTALC_ENGINE_HPP_
