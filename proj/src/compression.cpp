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

#include "otalc/compression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otalc {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    fail(ErrorCode::kInvalidStepSize,
         "beta must be in (0, 1], got " + std::to_string(beta));
  }
}

std::string shape_of(const RealMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void FactorPair::validate() const {
  require_shape(p.cols() == q.cols(),
                "factor ranks differ: P is " + shape_of(p) + ", Q is " + shape_of(q));
  require_shape(rank() >= 1 && rank() <= std::min(rows(), cols()),
                "rank " + std::to_string(rank()) + " exceeds min(m, n)");
  if (!(lambda >= 0.0)) fail(ErrorCode::kSingularGram, "lambda must be >= 0");
  check_beta(beta);
}

WarmStart prepare_warm_start(const FactorPair& prev) {
  return WarmStart{solve_regularized_gram(prev.q, prev.lambda),
                   solve_regularized_gram(prev.p, prev.lambda)};
}

LocalFactors local_factor_update(const RealMatrix& g_tilde,
                                 const FactorPair& prev) {
  return local_factor_update(g_tilde, prev, prepare_warm_start(prev));
}

LocalFactors local_factor_update(const RealMatrix& g_tilde,
                                 const FactorPair& prev,
                                 const WarmStart& warm) {
  require_shape(g_tilde.rows() == prev.p.rows() && g_tilde.cols() == prev.q.rows(),
                "gradient " + shape_of(g_tilde) + " does not match factors P " +
                    shape_of(prev.p) + ", Q " + shape_of(prev.q));
  LocalFactors out;
  out.p_bar = g_tilde * (prev.q * warm.q_gram_inv);
  out.q_bar = g_tilde.transpose() * (prev.p * warm.p_gram_inv);
  return out;
}

LocalFactors aggregate_factors(std::span<const LocalFactors> parts) {
  require_shape(!parts.empty(), "aggregate_factors: no parts");
  LocalFactors sum = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    require_shape(parts[k].p_bar.rows() == sum.p_bar.rows() &&
                      parts[k].p_bar.cols() == sum.p_bar.cols() &&
                      parts[k].q_bar.rows() == sum.q_bar.rows() &&
                      parts[k].q_bar.cols() == sum.q_bar.cols(),
                  "aggregate_factors: part " + std::to_string(k) + " has a different shape");
    sum.p_bar += parts[k].p_bar;
    sum.q_bar += parts[k].q_bar;
  }
  return sum;
}

FactorPair sca_step(const FactorPair& prev, const LocalFactors& aggregate,
                    double beta) {
  check_beta(beta);
  require_shape(aggregate.p_bar.rows() == prev.p.rows() &&
                    aggregate.p_bar.cols() == prev.p.cols() &&
                    aggregate.q_bar.rows() == prev.q.rows() &&
                    aggregate.q_bar.cols() == prev.q.cols(),
                "sca_step: aggregate shape does not match factors");
  FactorPair next;
  next.lambda = prev.lambda;
  next.beta = beta;
  if (beta == 1.0) {
    next.p = aggregate.p_bar;
    next.q = aggregate.q_bar;
  } else {
    next.p = prev.p + beta * (aggregate.p_bar - prev.p);
    next.q = prev.q + beta * (aggregate.q_bar - prev.q);
  }
  return next;
}

FactorPair jacobi_sca_reference(const RealMatrix& g, const FactorPair& init,
                                int iterations, const BetaSchedule& beta) {
  if (iterations < 1) {
    fail(ErrorCode::kInvalidConfig, "jacobi_sca_reference: iterations must be >= 1");
  }
  FactorPair current = init;
  for (int s = 1; s <= iterations; ++s) {
    const LocalFactors best = local_factor_update(g, current);
    current = sca_step(current, best, beta(s));
  }
  return current;
}

FactorPair jacobi_sca_reference(const RealMatrix& g, const FactorPair& init,
                                int iterations, double beta) {
  return jacobi_sca_reference(g, init, iterations, [beta](int) { return beta; });
}

FactorPair best_response_start(const RealMatrix& g, const RealMatrix& q0,
                               double lambda, double beta) {
  require_shape(g.cols() == q0.rows(), "best_response_start: Q does not match G");
  FactorPair out;
  out.lambda = lambda;
  out.beta = beta;
  out.q = q0;
  out.p = g * (q0 * solve_regularized_gram(q0, lambda));
  return out;
}

FactorPair init_factors(Index m, Index n, Index r, double scale,
                        RngStream& stream, double lambda, double beta) {
  require_shape(m >= 1 && n >= 1 && r >= 1 && r <= std::min(m, n),
                "init_factors: need 1 <= r <= min(m, n)");
  const double s = scale / std::sqrt(static_cast<double>(r));
  FactorPair out;
  out.lambda = lambda;
  out.beta = beta;
  out.p = s * gaussian_matrix(m, r, stream);
  out.q = s * gaussian_matrix(n, r, stream);
  return out;
}

RealMatrix apply_error_feedback(const RealMatrix& g_k, const RealMatrix& delta) {
  require_shape(g_k.rows() == delta.rows() && g_k.cols() == delta.cols(),
                "error residual " + shape_of(delta) + " does not match gradient " +
                    shape_of(g_k));
  return g_k + delta;
}

RealMatrix update_error(const RealMatrix& g_tilde_k, const FactorPair& global,
                        std::size_t k_active) {
  if (k_active == 0) {
    fail(ErrorCode::kInvalidActiveCount, "update_error: no active devices");
  }
  require_shape(g_tilde_k.rows() == global.p.rows() &&
                    g_tilde_k.cols() == global.q.rows(),
                "update_error: gradient does not match factors");
  return g_tilde_k - decompress(global) / static_cast<double>(k_active);
}

RealMatrix decompress(const FactorPair& f) {
  require_shape(f.p.cols() == f.q.cols(), "decompress: factor ranks differ");
  return f.p * f.q.transpose();
}

}  // namespace otalc
