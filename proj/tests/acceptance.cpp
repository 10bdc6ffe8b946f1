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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits with status 1 if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "otalc/channel.hpp"
#include "otalc/compression.hpp"
#include "otalc/config.hpp"
#include "otalc/engine.hpp"
#include "otalc/experiment.hpp"
#include "otalc/model.hpp"

namespace fs = std::filesystem;
using namespace otalc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

RunConfig default_task() {
  return load_config(std::string(OTALC_SOURCE_DIR) + "/configs/default.toml");
}

std::vector<std::size_t> first_k(std::size_t k) {
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = i;
  return out;
}

// Summed per-device updates against the centralized ridge response.
Outcome ac1() {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> dim(1, 32), devices(1, 8);
  const double lambdas[] = {1e-4, 1e-2, 0.1, 1.0};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index m = dim(gen), n = dim(gen);
    const Index r = std::max<Index>(1, std::min<Index>({m, n, 1 + t % 6}));
    const int k = devices(gen);
    const double lambda = lambdas[t % 4];
    FactorPair prev;
    prev.p = oracle::random_real(m, r, 10'000 + static_cast<std::uint64_t>(t));
    prev.q = oracle::random_real(n, r, 20'000 + static_cast<std::uint64_t>(t));
    prev.lambda = lambda;
    std::vector<LocalFactors> parts;
    RealMatrix total = RealMatrix::Zero(m, n);
    for (int d = 0; d < k; ++d) {
      const RealMatrix gk = oracle::random_real(m, n, 30'000 + static_cast<std::uint64_t>(100 * t + d));
      total += gk;
      parts.push_back(local_factor_update(gk, prev));
    }
    const LocalFactors sum = aggregate_factors(parts);
    worst = std::max({worst, oracle::rel_err(sum.p_bar, oracle::ridge_response(total, prev.q, lambda)),
                      oracle::rel_err(sum.q_bar,
                                      oracle::ridge_response(oracle::naive_transpose(total), prev.p, lambda))});
  }
  return {worst < 1e-10, "worst relative error " + fmt("%.2e", worst)};
}

Outcome ac2() {
  double worst_ratio = 0.0;
  for (Index r : {Index{1}, Index{2}, Index{4}}) {
    for (int t = 0; t < 50; ++t) {
      const auto seed = static_cast<std::uint64_t>(1000 * r + t);
      const RealMatrix g = oracle::random_real(16, 12, seed);
      const FactorPair init = best_response_start(g, oracle::random_real(12, r, seed + 500'000), 1e-8, 1.0);
      const FactorPair out = jacobi_sca_reference(g, init, 200, 1.0);
      const double ratio = (decompress(out) - g).norm() / oracle::truncated_svd_error(g, r);
      worst_ratio = std::max(worst_ratio, ratio);
    }
  }
  return {worst_ratio <= 1.05, "worst error / truncated SVD " + fmt("%.4f", worst_ratio)};
}

Outcome ac3() {
  double worst_sum = 0.0, worst_zf = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const ota::ChannelRealization ch = ota::draw_channels(5, 8, 8, 0.0, 64, 1.0, 77, trial);
    const ota::BeamformingSet bf = ota::design_beamformers(ch, first_k(5));
    for (std::size_t i = 0; i < 5; ++i) {
      const ComplexMatrix e = bf.a.adjoint() * ch.h[bf.devices[i]] * bf.b[i];
      worst_zf = std::max(worst_zf, (e - ComplexMatrix::Identity(8, 8)).norm());
    }
    const Index m = 5 + static_cast<Index>(trial % 28);
    const Index n = 3 + static_cast<Index>((trial * 7) % 29);
    const Index r = 1 + static_cast<Index>(trial % 4);
    RealMatrix p_sum = RealMatrix::Zero(m, r), q_sum = RealMatrix::Zero(n, r);
    std::vector<ComplexMatrix> xs;
    ota::PacketMeta meta;
    for (std::size_t k = 0; k < 5; ++k) {
      const RealMatrix p = oracle::random_real(m, r, 40'000 + trial * 10 + k);
      const RealMatrix q = oracle::random_real(n, r, 50'000 + trial * 10 + k);
      p_sum += p;
      q_sum += q;
      const ota::AirPacket pk = ota::pack_factors(p, q, 8, ota::PowerScale(1.0), ch.tau);
      meta = pk.meta;
      xs.push_back(ota::transmit(pk, bf.transmit_for(k)));
    }
    const RngStream noise(77, StreamId{trial, kServerDevice, Purpose::kNoise, 0});
    const LocalFactors got =
        ota::unpack(ota::receive(ota::channel_apply(xs, ch, first_k(5), noise), bf.a), meta, ota::PowerScale(1.0));
    worst_sum = std::max({worst_sum, oracle::rel_err(got.p_bar, p_sum), oracle::rel_err(got.q_bar, q_sum)});
  }
  return {worst_sum < 1e-8 && worst_zf < 1e-8,
          "worst sum error " + fmt("%.2e", worst_sum) + ", worst zero-forcing residual " + fmt("%.2e", worst_zf)};
}

Outcome ac4() {
  int bad = 0, cases = 0;
  for (Index m = 1; m <= 40; ++m) {
    for (Index n = 1; n <= 40; n += 3) {
      for (Index r = 1; r <= 8; ++r) {
        for (Index nt : {Index{1}, Index{2}, Index{4}, Index{5}, Index{8}}) {
          ++cases;
          const Index pad = (m + n) % 2;
          const Index symbols = (m + pad + n) * r / 2;
          const Index expected = (symbols + nt - 1) / nt;
          const Index got = ota::channel_uses(m, n, r, nt);
          if (got != expected) ++bad;
          if ((m + n) % 2 == 0 && ((m + n) * r) % (2 * nt) == 0 && got != (m + n) * r / (2 * nt)) ++bad;
        }
      }
    }
  }
  const Index example = ota::channel_uses(64, 64, 8, 8);
  return {bad == 0 && example == 64,
          std::to_string(cases) + " shapes, " + std::to_string(bad) + " mismatches, 64x64 r=8 N_t=8 gives " +
              std::to_string(example)};
}

Outcome ac5() {
  RunConfig cfg = default_task();
  cfg.rounds = 20;
  Engine engine(cfg);
  double worst = 0.0;
  int checks = 0;
  engine.set_hook([&](RoundEvent e, const Engine& eng) {
    if (e != RoundEvent::kResidualsUpdated) return;
    for (std::size_t b = 0; b < eng.factors().size(); ++b) {
      RealMatrix lhs = RealMatrix::Zero(eng.factors()[b].rows(), eng.factors()[b].cols());
      RealMatrix rhs = -oracle::naive_multiply(eng.factors()[b].p, oracle::naive_transpose(eng.factors()[b].q));
      for (std::size_t i = 0; i < eng.last_active().size(); ++i) {
        lhs += eng.residuals()[eng.last_active()[i]][b];
        rhs += eng.last_compensated()[i].blocks[b].data;
      }
      worst = std::max(worst, (lhs - rhs).norm());
      ++checks;
    }
  });
  engine.run();
  return {checks == 20 && worst < 1e-9,
          std::to_string(checks) + " rounds checked, worst identity gap " + fmt("%.2e", worst)};
}

std::vector<double> flat(const ParameterSet& p) {
  std::vector<double> out;
  for (const auto& b : p.blocks) out.insert(out.end(), b.data.data(), b.data.data() + b.data.size());
  for (const auto& v : p.vectors) out.insert(out.end(), v.data(), v.data() + v.size());
  return out;
}

double rel(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, nrm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    nrm += b[i] * b[i];
  }
  return std::sqrt(d) / std::max(std::sqrt(nrm), 1e-300);
}

Outcome ac6() {
  double worst_fd = 0.0;
  for (ModelKind kind : {ModelKind::kLogistic, ModelKind::kMlp}) {
    const ModelSpec spec{kind, 5, 8, 6};
    for (int t = 0; t < 20; ++t) {
      ParameterSet w = init_model(spec, 1);
      std::uint64_t s = 60'000 + static_cast<std::uint64_t>(100 * t + (kind == ModelKind::kMlp ? 50 : 0));
      for (auto& b : w.blocks) b.data = 0.5 * oracle::random_real(b.data.rows(), b.data.cols(), ++s);
      for (auto& v : w.vectors) v = 0.5 * oracle::random_real(v.size(), 1, ++s).col(0);
      const RealMatrix x = oracle::random_real(1, 8, ++s);
      const std::vector<int> y{t % 5};
      const auto analytic = flat(loss_and_gradient(spec, w, x, y).grad);
      std::vector<double> numeric;
      const double h = 1e-5;
      auto probe = [&](double& slot) {
        const double keep = slot;
        slot = keep + h;
        const double up = mean_loss(spec, w, x, y);
        slot = keep - h;
        const double down = mean_loss(spec, w, x, y);
        slot = keep;
        numeric.push_back((up - down) / (2 * h));
      };
      for (auto& b : w.blocks)
        for (Index i = 0; i < b.data.size(); ++i) probe(b.data.data()[i]);
      for (auto& v : w.vectors)
        for (Index i = 0; i < v.size(); ++i) probe(v.data()[i]);
      worst_fd = std::max(worst_fd, rel(analytic, numeric));
    }
  }

  double worst_sum = 0.0;
  for (ModelKind kind : {ModelKind::kLogistic, ModelKind::kMlp}) {
    RunConfig cfg = default_task();
    cfg.partition = PartitionKind::kIid;
    cfg.fraction = 1.0;
    cfg.model = kind;
    Engine engine(cfg);
    const ParameterSet& w = engine.parameters();
    ParameterSet sum = ParameterSet::zeros_like(w);
    for (const auto& shard : engine.shards())
      sum.axpy(1.0, local_gradient(engine.model_spec(), w, shard, engine.train_set().size()).grad);
    const auto full =
        flat(loss_and_gradient(engine.model_spec(), w, engine.train_set().features, engine.train_set().labels).grad);
    worst_sum = std::max(worst_sum, rel(flat(sum), full));
  }
  return {worst_fd < 1e-5 && worst_sum < 1e-10,
          "worst finite-difference error " + fmt("%.2e", worst_fd) + ", iid sum error " + fmt("%.2e", worst_sum)};
}

Outcome ac7() {
  RunConfig cfg = default_task();
  cfg.rounds = 20;
  cfg.fraction = 1.0;
  cfg.channel_mode = ChannelMode::kNoiseless;
  cfg.rank = std::min(cfg.mixture.classes, static_cast<int>(cfg.mixture.dim));
  cfg.lambda = 1e-8;
  cfg.beta = 1.0;
  cfg.inner_iterations = 2;
  const RunResult ota = run_in_memory(cfg);
  cfg.compressor = CompressorKind::kNone;
  const RunResult plain = run_in_memory(cfg);
  if (ota.status != RunStatus::kOk || plain.status != RunStatus::kOk) return {false, "run failed: " + ota.error};
  double worst = 0.0;
  for (std::size_t t = 0; t < plain.ledger.records.size(); ++t) {
    worst = std::max(worst, std::abs(ota.ledger.records[t].train_loss - plain.ledger.records[t].train_loss));
  }
  return {ota.ledger.records.size() == 20 && worst < 1e-3, "worst loss gap over 20 rounds " + fmt("%.2e", worst)};
}

std::optional<Index> uses_to(const RunLedger& ledger, double target) {
  for (const auto& r : ledger.records)
    if (r.test_accuracy >= target) return r.cumulative_channel_uses;
  return std::nullopt;
}

Outcome ac8() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = default_task();
    cfg.seed = seed;
    std::map<CompressorKind, RunResult> runs;
    for (CompressorKind c : {CompressorKind::kNone, CompressorKind::kTopK, CompressorKind::kRandK, CompressorKind::kOtaLc}) {
      cfg.compressor = c;
      runs[c] = run_in_memory(cfg);
    }
    const double target = 0.9 * runs[CompressorKind::kNone].ledger.records.back().test_accuracy;
    const auto ota = uses_to(runs[CompressorKind::kOtaLc].ledger, target);
    const auto topk = uses_to(runs[CompressorKind::kTopK].ledger, target);
    const auto randk = uses_to(runs[CompressorKind::kRandK].ledger, target);
    auto beats = [&](const std::optional<Index>& other) { return ota && (!other || *ota < *other); };
    const bool win = beats(topk) && beats(randk);
    wins += win ? 1 : 0;
    auto show = [](const std::optional<Index>& v) { return v ? std::to_string(*v) : std::string("-"); };
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " ota-lc/topk/randk " +
              show(ota) + "/" + show(topk) + "/" + show(randk);
  }
  return {wins >= 4, std::to_string(wins) + "/5 wins (" + detail + ")"};
}

Outcome ac9() {
  const double snrs[] = {0.0, 10.0, 20.0};
  double mean[3] = {0, 0, 0};
  double no_ef = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = default_task();
    cfg.seed = seed;
    for (int i = 0; i < 3; ++i) {
      cfg.snr_db = snrs[i];
      mean[i] += run_in_memory(cfg).ledger.records.back().test_accuracy / 5.0;
    }
    cfg.snr_db = 0.0;
    cfg.error_feedback = false;
    const RunResult r = run_in_memory(cfg);
    no_ef += (r.ledger.records.empty() ? 0.0 : r.ledger.records.back().test_accuracy) / 5.0;
  }
  const bool trend = mean[0] <= mean[1] && mean[1] <= mean[2];
  return {trend && mean[0] > no_ef,
          "mean accuracy at 0/10/20 dB " + fmt("%.4f", mean[0]) + "/" + fmt("%.4f", mean[1]) + "/" +
              fmt("%.4f", mean[2]) + ", 0 dB without error feedback " + fmt("%.4f", no_ef)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome ac10() {
  const fs::path root = fs::temp_directory_path() / "otalc_acceptance_determinism";
  fs::remove_all(root);
  bool same = true;
  int runs = 0;
  for (CompressorKind c : {CompressorKind::kOtaLc, CompressorKind::kRlc, CompressorKind::kRandK}) {
    RunConfig cfg = default_task();
    cfg.compressor = c;
    cfg.rounds = 30;
    cfg.model = c == CompressorKind::kRlc ? ModelKind::kMlp : ModelKind::kLogistic;
    const std::string leaf = std::string(to_string(c));
    RunOutputs first{(root / leaf / "first").string(), "", ""};
    const RunResult a = run_experiment(cfg, first);
    const std::string reference = slurp(a.metrics_path);
    for (const auto& policy : {ExecutionPolicy{Backend::kSerial, 1}, ExecutionPolicy{Backend::kOpenMP, 2},
                               ExecutionPolicy{Backend::kOpenMP, 8}}) {
      RunConfig again = load_config(a.manifest_path);
      again.runtime = policy;
      RunOutputs out{(root / leaf / ("rerun" + std::to_string(runs))).string(), "", ""};
      const RunResult b = run_experiment(again, out);
      same = same && slurp(b.metrics_path) == reference && !reference.empty();
      ++runs;
    }
  }
  fs::remove_all(root);
  return {same, std::to_string(runs) + " manifest reruns across serial and OpenMP backends " +
                    (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1 distributed updates equal the centralized update", ac1},
      {"AC2 reference factorization within 1.05x of truncated SVD", ac2},
      {"AC3 noiseless over-the-air sums and zero-forcing identity", ac3},
      {"AC4 channel-use accounting", ac4},
      {"AC5 error-feedback identity over 20 rounds", ac5},
      {"AC6 gradient correctness", ac6},
      {"AC7 lossless limit matches uncompressed SGD", ac7},
      {"AC8 fewer channel uses to target than Top-K and Rand-K", ac8},
      {"AC9 accuracy non-decreasing in SNR, error feedback helps at 0 dB", ac9},
      {"AC10 byte-identical metrics from manifests", ac10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
