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

// Low-rank gradient compression by warm-started Jacobi successive convex
// approximation (SCA) of
//
//   min_{P,Q} 1/2 ||P Q^T - G||_F^2 + lambda (||P||_F^2 + ||Q||_F^2).
//
// Each Jacobi step solves the two ridge sub-problems in parallel from the
// same reference point and blends the best responses with step size beta.
// Because the best responses are linear in G, a gradient split across
// devices as G = sum_k G_k can be factorized by summing per-device
// responses, which is what makes the update computable over the air.

#ifndef OTALC_COMPRESSION_HPP_
#define OTALC_COMPRESSION_HPP_

#include <cstddef>
#include <functional>
#include <span>

#include "otalc/numerics.hpp"

namespace otalc {

inline constexpr double kDefaultLambda = 0.01;
inline constexpr double kDefaultBeta = 0.5;

struct GradientBlock {
  std::size_t id = 0;
  RealMatrix data;  // m x n
};

struct FactorPair {
  RealMatrix p;  // m x r
  RealMatrix q;  // n x r
  double lambda = kDefaultLambda;
  double beta = kDefaultBeta;

  Index rows() const { return p.rows(); }
  Index cols() const { return q.rows(); }
  Index rank() const { return p.cols(); }

  // Throws kShapeError / kInvalidStepSize on a broken invariant.
  void validate() const;
};

// Per-device best responses (P_bar_k, Q_bar_k), or their sum.
struct LocalFactors {
  RealMatrix p_bar;  // m x r
  RealMatrix q_bar;  // n x r
};

// Ridge Gram inverses of the reference point, shared by every device in a
// round so they are computed once.
struct WarmStart {
  RealMatrix q_gram_inv;  // (Q^T Q + lambda I)^{-1}
  RealMatrix p_gram_inv;  // (P^T P + lambda I)^{-1}
};

WarmStart prepare_warm_start(const FactorPair& prev);

// P_bar_k = G~_k Q (Q^T Q + lambda I)^{-1},
// Q_bar_k = G~_k^T P (P^T P + lambda I)^{-1}.
LocalFactors local_factor_update(const RealMatrix& g_tilde,
                                 const FactorPair& prev);
LocalFactors local_factor_update(const RealMatrix& g_tilde,
                                 const FactorPair& prev,
                                 const WarmStart& warm);

// Elementwise sums over devices. Throws kShapeError on an empty or
// incongruent list.
LocalFactors aggregate_factors(std::span<const LocalFactors> parts);

// P <- P + beta (P_bar - P), Q <- Q + beta (Q_bar - Q).
// Throws kInvalidStepSize unless beta is in (0, 1].
FactorPair sca_step(const FactorPair& prev, const LocalFactors& aggregate,
                    double beta);

using BetaSchedule = std::function<double(int iteration)>;

// Centralized multi-iteration Jacobi SCA on a full gradient, s = 1..S.
FactorPair jacobi_sca_reference(const RealMatrix& g, const FactorPair& init,
                                int iterations, const BetaSchedule& beta);
FactorPair jacobi_sca_reference(const RealMatrix& g, const FactorPair& init,
                                int iterations, double beta);

// Reference point whose P is already the ridge best response to q0. From
// such a start the beta = 1 Jacobi iteration coincides with alternating
// least squares; from an unrelated (P, Q) pair it splits into two
// interleaved chains whose product need not converge.
FactorPair best_response_start(const RealMatrix& g, const RealMatrix& q0,
                               double lambda, double beta);

// P^(0), Q^(0): i.i.d. N(0, scale^2 / r) entries.
FactorPair init_factors(Index m, Index n, Index r, double scale,
                        RngStream& stream, double lambda = kDefaultLambda,
                        double beta = kDefaultBeta);

// Error feedback.
RealMatrix apply_error_feedback(const RealMatrix& g_k, const RealMatrix& delta);
// Delta_k = G~_k - (1 / k_active) P Q^T. Throws kInvalidActiveCount for 0.
RealMatrix update_error(const RealMatrix& g_tilde_k, const FactorPair& global,
                        std::size_t k_active);

// P Q^T.
RealMatrix decompress(const FactorPair& f);

// Reals uploaded per block: (m + n) r, against m n uncompressed.
inline Index compressed_payload_reals(Index m, Index n, Index r) {
  return (m + n) * r;
}

}  // namespace otalc

#endif  // OTALC_COMPRESSION_HPP_
