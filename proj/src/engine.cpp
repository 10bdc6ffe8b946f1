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

#include "otalc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "otalc/kernels.hpp"

namespace otalc {

std::vector<std::size_t> select_devices(std::uint64_t round, std::size_t devices,
                                        double fraction, std::uint64_t seed) {
  if (devices == 0) fail(ErrorCode::kInvalidConfig, "select_devices: no devices");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "select_devices: fraction must be in (0, 1]");
  }
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(devices))), 1, devices);
  std::vector<std::size_t> pool(devices);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (count < devices) {
    RngStream stream(seed, StreamId{round, kServerDevice, Purpose::kSampling, 0});
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(stream.below(devices - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
  }
  return pool;
}

SplitDataset build_datasets(const RunConfig& cfg) {
  if (cfg.dataset == DatasetKind::kSynthetic) return make_gaussian_mixture(cfg.mixture, cfg.seed);
  return split_dataset(load_csv(cfg.csv_path), cfg.test_fraction, cfg.seed);
}

namespace {

RealMatrix stack(const RealMatrix& top, const RealMatrix& bottom) {
  RealMatrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Index block_rank(const RunConfig& cfg, const RealMatrix& block) {
  return std::min<Index>(cfg.rank, std::min(block.rows(), block.cols()));
}

Index default_sparse_k(const RunConfig& cfg, const RealMatrix& block) {
  const Index total = block.size();
  if (cfg.sparse_k > 0) return std::min(cfg.sparse_k, total);
  const Index k = (block.rows() + block.cols()) * block_rank(cfg, block) / 2;
  return std::clamp<Index>(k, 1, total);
}

}  // namespace

Engine::Engine(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  SplitDataset data = build_datasets(cfg_);
  train_ = std::move(data.train);
  test_ = std::move(data.test);
  setup();
}

Engine::Engine(RunConfig cfg, Dataset train, Dataset test)
    : cfg_(std::move(cfg)), train_(std::move(train)), test_(std::move(test)) {
  cfg_.validate();
  setup();
}

void Engine::setup() {
  train_.validate();
  test_.validate();
  require_shape(train_.dim() == test_.dim(), "train and test features differ in dimension");
  spec_.kind = cfg_.model;
  spec_.classes = std::max(train_.classes, test_.classes);
  spec_.dim = train_.dim();
  spec_.hidden = cfg_.hidden;
  train_.classes = test_.classes = spec_.classes;

  RngStream part(cfg_.seed, StreamId{0, kServerDevice, Purpose::kData, 10});
  shards_ = cfg_.partition == PartitionKind::kIid
                ? partition_iid(train_, cfg_.devices, part)
                : partition_dirichlet(train_, cfg_.devices, cfg_.alpha, part);

  w_ = init_model(spec_, cfg_.seed);
  g_hat_ = ParameterSet::zeros_like(w_);
  const std::size_t nb = w_.blocks.size();
  residual_.assign(cfg_.devices, {});
  for (auto& per_device : residual_) {
    for (const auto& b : w_.blocks) per_device.push_back(RealMatrix::Zero(b.data.rows(), b.data.cols()));
  }
  gamma_.assign(nb + w_.vectors.size(), 1.0);
  gamma_set_.assign(gamma_.size(), false);

  Index largest_packet = 1;
  for (std::size_t b = 0; b < nb; ++b) {
    const RealMatrix& blk = w_.blocks[b].data;
    const Index m = blk.rows();
    const Index n = blk.cols();
    const Index r = block_rank(cfg_, blk);
    switch (cfg_.compressor) {
      case CompressorKind::kOtaLc: {
        RngStream init(cfg_.seed, StreamId{0, kServerDevice, Purpose::kInit, static_cast<std::uint32_t>(b)});
        factors_.push_back(init_factors(m, n, r, cfg_.init_scale, init, cfg_.lambda_for(b), cfg_.beta_for(b)));
        const ota::PacketMeta meta = ota::make_meta(m, n, r, cfg_.n_t);
        const double norm2 = factors_.back().p.squaredNorm() + factors_.back().q.squaredNorm();
        gamma_[b] = std::sqrt(norm2 / static_cast<double>(meta.half_rows() * r));
        if (!(gamma_[b] > 0.0) || !std::isfinite(gamma_[b])) gamma_[b] = 1.0;
        gamma_set_[b] = true;
        largest_packet = std::max(largest_packet, meta.n_cu);
        break;
      }
      case CompressorKind::kPowerSgd: {
        RngStream init(cfg_.seed,
                       StreamId{0, kServerDevice, Purpose::kInit, 50 + static_cast<std::uint32_t>(b)});
        power_q_.push_back(gaussian_matrix(n, r, init));
        break;
      }
      case CompressorKind::kRlc: {
        const std::uint64_t seed = mix_seed(
            cfg_.seed, StreamId{0, kServerDevice, Purpose::kInit, 200 + static_cast<std::uint32_t>(b)});
        projections_.push_back(baselines::make_projection((m + n) * r, m * n, seed));
        largest_packet = std::max(largest_packet, ota::channel_uses((m + n) * r, 0, 1, cfg_.n_t));
        break;
      }
      case CompressorKind::kTopK:
      case CompressorKind::kRandK:
      case CompressorKind::kNone:
        break;
    }
  }
  if (is_analog(cfg_.compressor)) {
    for (const auto& v : w_.vectors) {
      largest_packet = std::max(largest_packet, ota::channel_uses(v.size(), 0, 1, cfg_.n_t));
    }
  }
  tau_ = cfg_.tau > 0 ? cfg_.tau : largest_packet;
  if (is_analog(cfg_.compressor) && tau_ < largest_packet) {
    fail(ErrorCode::kCoherenceExceeded,
         "a packet needs " + std::to_string(largest_packet) +
             " channel uses but the coherence length is " + std::to_string(tau_));
  }
}

Index Engine::packet_uses(Index m, Index n, Index r) const {
  return ota::channel_uses(m, n, r, cfg_.n_t);
}

Index Engine::digital_uses(Index reals_per_device, std::size_t active) const {
  const Index per_device = (reals_per_device + 2 * cfg_.n_t - 1) / (2 * cfg_.n_t);
  return cfg_.digital_cost == DigitalCost::kOrthogonal
             ? per_device * static_cast<Index>(active)
             : per_device;
}

Index Engine::channel_uses_per_round() const {
  const std::size_t active =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(
                                  cfg_.fraction * static_cast<double>(cfg_.devices))),
                              1, cfg_.devices);
  Index uses = 0;
  for (const auto& blk : w_.blocks) {
    const Index m = blk.data.rows();
    const Index n = blk.data.cols();
    const Index r = block_rank(cfg_, blk.data);
    switch (cfg_.compressor) {
      case CompressorKind::kOtaLc:
        uses += cfg_.inner_iterations * packet_uses(m, n, r);
        break;
      case CompressorKind::kPowerSgd:
        uses += digital_uses(m * r, active) + digital_uses(n * r, active);
        break;
      case CompressorKind::kTopK:
      case CompressorKind::kRandK:
        uses += digital_uses(2 * default_sparse_k(cfg_, blk.data), active);
        break;
      case CompressorKind::kRlc:
        uses += packet_uses((m + n) * r, 0, 1);
        break;
      case CompressorKind::kNone:
        uses += digital_uses(m * n, active);
        break;
    }
  }
  for (const auto& v : w_.vectors) {
    uses += is_analog(cfg_.compressor) ? packet_uses(v.size(), 0, 1) : digital_uses(v.size(), active);
  }
  return uses;
}

double Engine::gamma_for(std::size_t slot) const { return gamma_[slot]; }

void Engine::update_gamma(std::size_t slot, const RealMatrix& agg, Index half_rows, Index r,
                          double noise_energy) {
  // Per-device symbol RMS, estimated from the aggregate as if every active
  // device contributed an equal share, after removing the expected receiver
  // noise. An estimate at or below the noise floor keeps the previous value.
  const double k = static_cast<double>(active_.size());
  const double signal = agg.squaredNorm() - noise_energy;
  const double g = std::sqrt(signal / (k * k * static_cast<double>(half_rows * r)));
  if (g > 0.0 && std::isfinite(g)) {
    gamma_[slot] = g;
  } else if (!gamma_set_[slot]) {
    gamma_[slot] = 1.0;
  }
  gamma_set_[slot] = true;
}

RealMatrix Engine::aggregate(const Payload& payload, std::size_t gamma_slot, std::uint32_t lane,
                             RoundRecord& record) {
  require_shape(payload.stacked.size() == active_.size(), "aggregate: one payload per active device");
  const bool over_air =
      is_analog(cfg_.compressor) && cfg_.channel_mode != ChannelMode::kIdealAggregation;
  if (!over_air) {
    RealMatrix sum = payload.stacked.front();
    for (std::size_t i = 1; i < payload.stacked.size(); ++i) sum += payload.stacked[i];
    if (is_analog(cfg_.compressor)) {
      const auto meta = ota::make_meta(payload.split, sum.rows() - payload.split, sum.cols(), cfg_.n_t);
      update_gamma(gamma_slot, sum, meta.half_rows(), meta.r);
    }
    return sum;
  }

  const ota::PowerScale gamma(gamma_for(gamma_slot));
  const ota::BeamformingSet& bf = *beamformers_;
  std::vector<ota::AirPacket> packets(active_.size());
  std::vector<ComplexMatrix> xs(active_.size());
  std::vector<ota::PowerReport> power(active_.size());
  kernels::for_each_index(cfg_.runtime, active_.size(), [&](std::size_t i) {
    packets[i] = ota::pack_stacked(payload.stacked[i], payload.split, cfg_.n_t, gamma, tau_);
    xs[i] = ota::transmit(packets[i], bf.b[i]);
    power[i] = ota::power_audit(xs[i], cfg_.p0);
  });
  for (const auto& p : power) {
    record.max_transmit_power = std::max(record.max_transmit_power, p.average_power);
    record.power_violation = record.power_violation || p.violation;
  }
  const RngStream noise(cfg_.seed,
                        StreamId{static_cast<std::uint64_t>(round_), kServerDevice, Purpose::kNoise, lane});
  const ComplexMatrix y = ota::channel_apply(xs, *channels_, active_, noise);
  const ComplexMatrix s_hat = ota::receive(y, bf.a);
  RealMatrix out = ota::unpack_stacked(s_hat, packets.front().meta, gamma);
  const ota::PacketMeta& meta = packets.front().meta;
  const double noise_energy = ota::expected_noise_energy(bf.a, channels_->n0, meta, gamma);
  update_gamma(gamma_slot, out, meta.half_rows(), meta.r, noise_energy);
  if (cfg_.receive_shrinkage) out = ota::shrink_to_signal(out, noise_energy);
  return out;
}

void Engine::aggregate_vectors(RoundRecord& record, bool analog, std::uint32_t lane) {
  const std::size_t nb = w_.blocks.size();
  for (std::size_t j = 0; j < w_.vectors.size(); ++j) {
    Payload payload;
    payload.split = w_.vectors[j].size();
    for (const auto& g : compensated_) payload.stacked.push_back(g.vectors[j]);
    g_hat_.vectors[j] = aggregate(payload, nb + j, lane + static_cast<std::uint32_t>(j), record).col(0);
    record.channel_uses += analog ? packet_uses(payload.split, 0, 1)
                                  : digital_uses(payload.split, active_.size());
    for (std::size_t i = 0; i < active_.size(); ++i) transmitted_[i].vectors[j] = compensated_[i].vectors[j];
  }
}

void Engine::round_ota_lc(RoundRecord& record) {
  const std::size_t nb = w_.blocks.size();
  const std::size_t slots = gamma_.size();
  for (std::size_t b = 0; b < nb; ++b) {
    const double beta = cfg_.beta_for(b);
    FactorPair current = factors_[b];
    const Index m = current.rows();
    const Index n = current.cols();
    for (int s = 0; s < cfg_.inner_iterations; ++s) {
      // Devices hold the broadcast factors and run the warm-started update.
      const WarmStart warm = prepare_warm_start(current);
      Payload payload;
      payload.split = m;
      payload.stacked = kernels::map_indices<RealMatrix>(cfg_.runtime, active_.size(), [&](std::size_t i) {
        const LocalFactors local = local_factor_update(compensated_[i].blocks[b].data, current, warm);
        return stack(local.p_bar, local.q_bar);
      });
      const auto lane = static_cast<std::uint32_t>(static_cast<std::size_t>(s) * slots + b);
      const RealMatrix sum = aggregate(payload, b, lane, record);
      const LocalFactors estimate{sum.topRows(m), sum.bottomRows(n)};
      record.channel_uses += packet_uses(m, n, current.rank());
      if (cfg_.inner_iterations == 1) {
        current = sca_step(current, estimate, beta);
      } else if (s == 0) {
        // Several exchanges per round: open with a best response of the
        // longer factor so that a full-rank pair reproduces G exactly.
        if (m <= n) {
          current.q = estimate.q_bar;
        } else {
          current.p = estimate.p_bar;
        }
      } else {
        current = sca_step(current, estimate, beta);
      }
    }
    current.lambda = cfg_.lambda_for(b);
    current.beta = beta;
    factors_[b] = std::move(current);
    g_hat_.blocks[b].data = decompress(factors_[b]);
  }
  aggregate_vectors(record, true, static_cast<std::uint32_t>(nb));
  emit(RoundEvent::kFactorsAggregated);
}

void Engine::round_powersgd(RoundRecord& record) {
  for (std::size_t b = 0; b < w_.blocks.size(); ++b) {
    const RealMatrix& q_prev = power_q_[b];
    auto lefts = kernels::map_indices<RealMatrix>(cfg_.runtime, active_.size(), [&](std::size_t i) {
      return baselines::powersgd_left(compensated_[i].blocks[b].data, q_prev);
    });
    RealMatrix p = lefts.front();
    for (std::size_t i = 1; i < lefts.size(); ++i) p += lefts[i];
    p = orthonormalize_columns(p);
    auto rights = kernels::map_indices<RealMatrix>(cfg_.runtime, active_.size(), [&](std::size_t i) {
      return baselines::powersgd_right(compensated_[i].blocks[b].data, p);
    });
    RealMatrix q = rights.front();
    for (std::size_t i = 1; i < rights.size(); ++i) q += rights[i];
    for (std::size_t i = 0; i < active_.size(); ++i) {
      transmitted_[i].blocks[b].data = p * rights[i].transpose();
    }
    g_hat_.blocks[b].data = p * q.transpose();
    record.channel_uses += digital_uses(p.size(), active_.size()) + digital_uses(q.size(), active_.size());
    power_q_[b] = std::move(q);
  }
  aggregate_vectors(record, false, 0);
  emit(RoundEvent::kFactorsAggregated);
}

void Engine::round_sparse(RoundRecord& record, bool random) {
  for (std::size_t b = 0; b < w_.blocks.size(); ++b) {
    const Index k = default_sparse_k(cfg_, w_.blocks[b].data);
    kernels::for_each_index(cfg_.runtime, active_.size(), [&](std::size_t i) {
      const RealMatrix& g = compensated_[i].blocks[b].data;
      baselines::SparsePayload sparse;
      if (random) {
        RngStream stream(cfg_.seed, StreamId{static_cast<std::uint64_t>(round_),
                                             static_cast<std::uint32_t>(active_[i]), Purpose::kSampling,
                                             static_cast<std::uint32_t>(b)});
        sparse = baselines::randk_compress(g, k, stream, cfg_.randk_rescale);
      } else {
        sparse = baselines::topk_compress(g, k);
      }
      transmitted_[i].blocks[b].data = baselines::sparse_decompress(sparse);
    });
    RealMatrix sum = transmitted_.front().blocks[b].data;
    for (std::size_t i = 1; i < active_.size(); ++i) sum += transmitted_[i].blocks[b].data;
    g_hat_.blocks[b].data = std::move(sum);
    record.channel_uses += digital_uses(2 * k, active_.size());
  }
  aggregate_vectors(record, false, 0);
  emit(RoundEvent::kFactorsAggregated);
}

void Engine::round_rlc(RoundRecord& record) {
  const std::size_t nb = w_.blocks.size();
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& op = projections_[b];
    const Index m = w_.blocks[b].data.rows();
    const Index n = w_.blocks[b].data.cols();
    Payload payload;
    payload.split = op.out_dim();
    payload.stacked = kernels::map_indices<RealMatrix>(cfg_.runtime, active_.size(), [&](std::size_t i) {
      RealMatrix y = baselines::rlc_compress(compensated_[i].blocks[b].data, op);
      transmitted_[i].blocks[b].data = baselines::rlc_decompress(y, op, m, n);
      return y;
    });
    const RealMatrix y_hat = aggregate(payload, b, static_cast<std::uint32_t>(b), record);
    g_hat_.blocks[b].data = baselines::rlc_decompress(y_hat, op, m, n);
    record.channel_uses += packet_uses(op.out_dim(), 0, 1);
  }
  aggregate_vectors(record, true, static_cast<std::uint32_t>(nb));
  emit(RoundEvent::kFactorsAggregated);
}

void Engine::round_none(RoundRecord& record) {
  for (std::size_t b = 0; b < w_.blocks.size(); ++b) {
    RealMatrix sum = compensated_.front().blocks[b].data;
    for (std::size_t i = 1; i < active_.size(); ++i) sum += compensated_[i].blocks[b].data;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      transmitted_[i].blocks[b].data = compensated_[i].blocks[b].data;
    }
    g_hat_.blocks[b].data = std::move(sum);
    record.channel_uses += digital_uses(w_.blocks[b].data.size(), active_.size());
  }
  aggregate_vectors(record, false, 0);
  emit(RoundEvent::kFactorsAggregated);
}

const RoundRecord& Engine::run_round() {
  if (stopped_) fail(ErrorCode::kInvalidConfig, "run_round: the run has already stopped");
  ++round_;
  RoundRecord record;
  record.round = round_;
  active_ = select_devices(static_cast<std::uint64_t>(round_), cfg_.devices, cfg_.fraction, cfg_.seed);
  record.active = active_;

  channels_.reset();
  beamformers_.reset();
  if (is_analog(cfg_.compressor) && cfg_.channel_mode != ChannelMode::kIdealAggregation) {
    channels_ = ota::draw_channels(cfg_.devices, cfg_.n_r, cfg_.n_t, cfg_.n0(), tau_, cfg_.p0, cfg_.seed,
                                   static_cast<std::uint64_t>(round_));
    beamformers_ = ota::design_beamformers(*channels_, active_);
    emit(RoundEvent::kBeamformersDesigned);
  }

  // Every device, active or not, applies the previous round's aggregate.
  if (has_g_hat_) w_ = global_step(w_, g_hat_, cfg_.eta);
  emit(RoundEvent::kModelUpdated);

  const Index d_total = train_.size();
  compensated_ = kernels::map_indices<ParameterSet>(cfg_.runtime, active_.size(), [&](std::size_t i) {
    const std::size_t k = active_[i];
    ParameterSet g = shards_[k].empty()
                         ? ParameterSet::zeros_like(w_)
                         : local_gradient(spec_, w_, shards_[k], d_total, ExecutionPolicy{Backend::kSerial, 1}).grad;
    if (cfg_.error_feedback) {
      for (std::size_t b = 0; b < g.blocks.size(); ++b) {
        g.blocks[b].data = apply_error_feedback(g.blocks[b].data, residual_[k][b]);
      }
    }
    return g;
  });
  transmitted_.assign(active_.size(), ParameterSet::zeros_like(w_));
  emit(RoundEvent::kGradientsComputed);

  switch (cfg_.compressor) {
    case CompressorKind::kOtaLc: round_ota_lc(record); break;
    case CompressorKind::kPowerSgd: round_powersgd(record); break;
    case CompressorKind::kTopK: round_sparse(record, false); break;
    case CompressorKind::kRandK: round_sparse(record, true); break;
    case CompressorKind::kRlc: round_rlc(record); break;
    case CompressorKind::kNone: round_none(record); break;
  }
  if (!g_hat_.finite()) fail(ErrorCode::kNumericalDivergence, "aggregate gradient is not finite");
  has_g_hat_ = true;

  if (cfg_.error_feedback) {
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const std::size_t k = active_[i];
      for (std::size_t b = 0; b < w_.blocks.size(); ++b) {
        const RealMatrix& g_tilde = compensated_[i].blocks[b].data;
        residual_[k][b] = cfg_.compressor == CompressorKind::kOtaLc
                              ? update_error(g_tilde, factors_[b], active_.size())
                              : RealMatrix(g_tilde - transmitted_[i].blocks[b].data);
      }
    }
  }
  emit(RoundEvent::kResidualsUpdated);

  for (std::size_t b = 0; b < w_.blocks.size(); ++b) {
    RealMatrix total = RealMatrix::Zero(w_.blocks[b].data.rows(), w_.blocks[b].data.cols());
    for (const auto& per_device : residual_) total += per_device[b];
    record.residual_norms.push_back(total.norm());
  }

  const ParameterSet next = global_step(w_, g_hat_, cfg_.eta);
  record.train_loss = mean_loss(spec_, next, train_.features, train_.labels, cfg_.runtime);
  if (!std::isfinite(record.train_loss)) fail(ErrorCode::kNumericalDivergence, "training loss is not finite");
  record.test_accuracy = accuracy(spec_, next, test_);
  cumulative_uses_ += record.channel_uses;
  record.cumulative_channel_uses = cumulative_uses_;
  ledger_.records.push_back(std::move(record));

  if (cfg_.stop_epsilon > 0.0 && std::sqrt(g_hat_.squared_norm()) <= cfg_.stop_epsilon) stopped_ = true;
  emit(RoundEvent::kRoundFinished);
  return ledger_.records.back();
}

const RunLedger& Engine::run() {
  while (round_ < cfg_.rounds && !stopped_) run_round();
  return ledger_;
}

}  // namespace otalc
