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

#include "otalc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace otalc::baselines {

namespace {

void check_k(const RealMatrix& g, Index k) {
  if (k < 1 || k > g.size()) {
    fail(ErrorCode::kInvalidK, "k=" + std::to_string(k) + " outside [1, " +
                                   std::to_string(g.size()) + "]");
  }
}

SparsePayload gather(const RealMatrix& g, std::vector<Index> linear, double scale) {
  std::sort(linear.begin(), linear.end());
  SparsePayload out;
  out.rows = g.rows();
  out.cols = g.cols();
  out.indices.reserve(linear.size());
  out.values.reserve(linear.size());
  for (Index idx : linear) {
    const Index r = idx / g.cols();
    const Index c = idx % g.cols();
    out.indices.emplace_back(r, c);
    out.values.push_back(scale * g(r, c));
  }
  return out;
}

bool is_power_of_two(Index x) { return x > 0 && (x & (x - 1)) == 0; }

// Sylvester construction: H(i, j) = (-1)^{popcount(i & j)}.
double hadamard_entry(Index i, Index j) {
  return (__builtin_popcountll(static_cast<unsigned long long>(i & j)) & 1) ? -1.0 : 1.0;
}

}  // namespace

SparsePayload topk_compress(const RealMatrix& g, Index k) {
  check_k(g, k);
  std::vector<Index> order(static_cast<std::size_t>(g.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const double* data = g.data();  // row-major: linear index = r * cols + c
  auto before = [data](Index a, Index b) {
    const double ma = std::abs(data[a]);
    const double mb = std::abs(data[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), before);
  order.resize(static_cast<std::size_t>(k));
  return gather(g, std::move(order), 1.0);
}

SparsePayload randk_compress(const RealMatrix& g, Index k, RngStream& stream,
                             bool rescale) {
  check_k(g, k);
  const Index total = g.size();
  std::vector<Index> pool(static_cast<std::size_t>(total));
  std::iota(pool.begin(), pool.end(), Index{0});
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (Index i = 0; i < k; ++i) {
    const Index j = i + static_cast<Index>(stream.below(static_cast<std::uint64_t>(total - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  const double scale =
      rescale ? static_cast<double>(total) / static_cast<double>(k) : 1.0;
  return gather(g, std::move(pool), scale);
}

RealMatrix sparse_decompress(const SparsePayload& payload) {
  require_shape(payload.indices.size() == payload.values.size(),
                "sparse payload: index/value count mismatch");
  RealMatrix out = RealMatrix::Zero(payload.rows, payload.cols);
  for (std::size_t i = 0; i < payload.values.size(); ++i) {
    const auto [r, c] = payload.indices[i];
    require_shape(r >= 0 && r < payload.rows && c >= 0 && c < payload.cols,
                  "sparse payload: index out of range");
    out(r, c) = payload.values[i];
  }
  return out;
}

RealMatrix powersgd_left(const RealMatrix& g, const RealMatrix& q_prev) {
  require_shape(g.cols() == q_prev.rows(), "powersgd: q does not match gradient");
  return g * q_prev;
}

RealMatrix powersgd_right(const RealMatrix& g, const RealMatrix& p) {
  require_shape(g.rows() == p.rows(), "powersgd: p does not match gradient");
  return g.transpose() * p;
}

PowerSgdFactors powersgd_step(const RealMatrix& g, const RealMatrix& q_prev) {
  PowerSgdFactors out;
  out.p = orthonormalize_columns(powersgd_left(g, q_prev));
  out.q = powersgd_right(g, out.p);
  return out;
}

ProjectionOperator make_projection(Index out_dim, Index in_dim,
                                   std::uint64_t seed) {
  require_shape(out_dim >= 1 && in_dim >= 1, "projection: empty shape");
  require_shape(out_dim <= in_dim,
                "projection: " + std::to_string(out_dim) + " orthogonal rows do not fit in dimension " +
                    std::to_string(in_dim));
  RngStream stream(seed, StreamId{0, kServerDevice, Purpose::kInit, 0});
  ProjectionOperator op;
  op.seed = seed;
  if (is_power_of_two(out_dim) && is_power_of_two(in_dim)) {
    op.hadamard = true;
    std::vector<Index> rows(static_cast<std::size_t>(in_dim));
    std::iota(rows.begin(), rows.end(), Index{0});
    for (Index i = 0; i < out_dim; ++i) {
      const Index j = i + static_cast<Index>(stream.below(static_cast<std::uint64_t>(in_dim - i)));
      std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
    }
    rows.resize(static_cast<std::size_t>(out_dim));
    std::sort(rows.begin(), rows.end());
    op.matrix.resize(out_dim, in_dim);
    for (Index i = 0; i < out_dim; ++i)
      for (Index j = 0; j < in_dim; ++j)
        op.matrix(i, j) = hadamard_entry(rows[static_cast<std::size_t>(i)], j);
  } else {
    const RealMatrix raw = gaussian_matrix(in_dim, out_dim, stream);
    op.matrix = orthonormalize_columns(raw).transpose();
  }
  return op;
}

RealMatrix rlc_compress(const RealMatrix& g, const ProjectionOperator& op) {
  require_shape(g.size() == op.in_dim(),
                "rlc: gradient has " + std::to_string(g.size()) + " entries, operator expects " +
                    std::to_string(op.in_dim()));
  const Eigen::Map<const RealVector> vec(g.data(), g.size());
  return op.matrix * vec;
}

RealMatrix rlc_decompress(const RealMatrix& y, const ProjectionOperator& op,
                          Index rows, Index cols) {
  require_shape(y.rows() == op.out_dim() && y.cols() == 1,
                "rlc: measurement length does not match operator");
  require_shape(rows * cols == op.in_dim(), "rlc: target shape does not match operator");
  const RealVector row_norm2 = op.matrix.rowwise().squaredNorm();
  const RealVector weighted = y.col(0).cwiseQuotient(row_norm2);
  const RealVector vec = op.matrix.transpose() * weighted;
  RealMatrix out(rows, cols);
  Eigen::Map<RealVector>(out.data(), out.size()) = vec;
  return out;
}

}  // namespace otalc::baselines
