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

// Serial vs OpenMP timings for the three hot paths: the chunked gradient
// kernel, the per-device factor update, and a whole training round. Each
// pair is also checked for bit-identical output.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "otalc/compression.hpp"
#include "otalc/engine.hpp"
#include "otalc/experiment.hpp"
#include "otalc/kernels.hpp"
#include "otalc/model.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
double best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double omp_ms, bool identical) {
  std::printf("%-28s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
              omp_ms, serial_ms / omp_ms, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  const otalc::ExecutionPolicy serial{otalc::Backend::kSerial, 1};
  const otalc::ExecutionPolicy omp{otalc::Backend::kOpenMP, 0};
  std::printf("OpenMP available: %s, max threads: %d\n",
              otalc::kernels::openmp_available() ? "yes" : "no",
#ifdef _OPENMP
              omp_get_max_threads()
#else
              1
#endif
  );

  // Gradient kernel on an MLP.
  otalc::MixtureSpec mix;
  mix.classes = 10;
  mix.dim = 128;
  mix.train_samples = 20000;
  mix.test_samples = 10;
  const auto data = otalc::make_gaussian_mixture(mix, 7);
  otalc::ModelSpec spec{otalc::ModelKind::kMlp, mix.classes, mix.dim, 64};
  const auto w = otalc::init_model(spec, 7);
  otalc::LossGradient gs, go;
  const double g_serial = best_of(reps, [&] {
    gs = otalc::loss_and_gradient(spec, w, data.train.features, data.train.labels, serial);
  });
  const double g_omp = best_of(reps, [&] {
    go = otalc::loss_and_gradient(spec, w, data.train.features, data.train.labels, omp);
  });
  bool same = gs.loss == go.loss;
  for (std::size_t b = 0; b < gs.grad.blocks.size(); ++b) same = same && gs.grad.blocks[b].data == go.grad.blocks[b].data;
  report("gradient (mlp, 20k samples)", g_serial, g_omp, same);

  // Per-device local factor updates.
  const std::size_t devices = 32;
  otalc::RngStream stream(3, otalc::StreamId{});
  std::vector<otalc::RealMatrix> grads;
  for (std::size_t k = 0; k < devices; ++k) grads.push_back(otalc::gaussian_matrix(256, 256, stream));
  const auto prev = otalc::init_factors(256, 256, 16, 1.0, stream);
  const auto warm = otalc::prepare_warm_start(prev);
  std::vector<otalc::LocalFactors> ls, lo;
  auto local = [&](const otalc::ExecutionPolicy& p) {
    return otalc::kernels::map_indices<otalc::LocalFactors>(
        p, devices, [&](std::size_t k) { return otalc::local_factor_update(grads[k], prev, warm); });
  };
  const double l_serial = best_of(reps, [&] { ls = local(serial); });
  const double l_omp = best_of(reps, [&] { lo = local(omp); });
  same = true;
  for (std::size_t k = 0; k < devices; ++k) same = same && ls[k].p_bar == lo[k].p_bar && ls[k].q_bar == lo[k].q_bar;
  report("local factor update x32", l_serial, l_omp, same);

  // Whole run of the Ota-LC engine.
  otalc::RunConfig cfg = otalc::default_config();
  cfg.rounds = 10;
  auto run = [&](const otalc::ExecutionPolicy& p) {
    otalc::RunConfig c = cfg;
    c.runtime = p;
    return otalc::metrics_csv(otalc::run_in_memory(c).ledger, c.compressor, c.seed);
  };
  std::string cs, co;
  const double r_serial = best_of(reps, [&] { cs = run(serial); });
  const double r_omp = best_of(reps, [&] { co = run(omp); });
  report("ota-lc run, 10 rounds", r_serial, r_omp, cs == co);
  return 0;
}
