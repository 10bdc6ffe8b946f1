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

// Comparison compressors: Top-K and Rand-K sparsification, one-step
// PowerSGD, and random linear coding (RLC) with an orthogonal-row
// projection.

#ifndef OTALC_BASELINES_HPP_
#define OTALC_BASELINES_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "otalc/numerics.hpp"

namespace otalc::baselines {

struct SparsePayload {
  std::vector<std::pair<Index, Index>> indices;  // (row, col), row-major order
  std::vector<double> values;
  Index rows = 0;
  Index cols = 0;

  std::size_t size() const { return values.size(); }
  // Each (index, value) pair is charged as two real symbols.
  Index payload_reals() const { return 2 * static_cast<Index>(values.size()); }
};

// Keeps the k largest-magnitude entries; ties go to the lowest linear index.
SparsePayload topk_compress(const RealMatrix& g, Index k);

// k positions uniformly without replacement. With rescale, kept values are
// multiplied by m n / k (unbiased variant).
SparsePayload randk_compress(const RealMatrix& g, Index k, RngStream& stream,
                             bool rescale = false);

RealMatrix sparse_decompress(const SparsePayload& payload);

// PowerSGD, one power-iteration step split into its two aggregation halves.
RealMatrix powersgd_left(const RealMatrix& g, const RealMatrix& q_prev);  // G q
RealMatrix powersgd_right(const RealMatrix& g, const RealMatrix& p);      // G^T p

struct PowerSgdFactors {
  RealMatrix p;  // m x r, orthonormal columns
  RealMatrix q;  // n x r
};

// p = orthonormalize(G q_prev), q = G^T p.
PowerSgdFactors powersgd_step(const RealMatrix& g, const RealMatrix& q_prev);

// Rows of `matrix` are mutually orthogonal. For power-of-two shapes they are
// a seeded subset of Sylvester-Hadamard rows (entries +-1); otherwise a
// seeded Gaussian matrix with orthonormalized rows.
struct ProjectionOperator {
  RealMatrix matrix;  // out_dim x in_dim
  std::uint64_t seed = 0;
  bool hadamard = false;

  Index out_dim() const { return matrix.rows(); }
  Index in_dim() const { return matrix.cols(); }
};

// Throws kShapeError when out_dim > in_dim (orthogonal rows impossible).
ProjectionOperator make_projection(Index out_dim, Index in_dim,
                                   std::uint64_t seed);

// y = M vec(G), vec in row-major order.
RealMatrix rlc_compress(const RealMatrix& g, const ProjectionOperator& op);
// vec(G_hat) = M^T diag(1 / ||row_i||^2) y.
RealMatrix rlc_decompress(const RealMatrix& y, const ProjectionOperator& op,
                          Index rows, Index cols);

}  // namespace otalc::baselines

#endif  // OTALC_BASELINES_HPP_
