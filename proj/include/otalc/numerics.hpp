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

#ifndef OTALC_NUMERICS_HPP_
#define OTALC_NUMERICS_HPP_

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "otalc/error.hpp"

namespace otalc {

using Index = Eigen::Index;
using Complex = std::complex<double>;

// Dense row-major storage. Every matrix in this library is small (factor
// ranks up to a few dozen, 8x8 channels), so no sparse formats.
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;

// Singular values below this fraction of the largest one are treated as zero.
inline constexpr double kSvdRankTolerance = 1e-12;

struct CompactSvd {
  ComplexMatrix u;            // N_r x d, orthonormal columns
  std::vector<double> sigma;  // length d, descending, all > 0
  ComplexMatrix v;            // N_t x d, orthonormal columns
  Index rank = 0;             // d

  ComplexMatrix reconstruct() const;
};

// Thin SVD of h truncated to its numerical rank.
// Throws kDegenerateMatrix for an all-zero or non-finite input.
CompactSvd compact_svd(const ComplexMatrix& h);

// (M^T M + lambda I)^{-1} via Cholesky. Throws kSingularGram when the
// regularized Gram matrix is not numerically positive definite.
RealMatrix solve_regularized_gram(const RealMatrix& m, double lambda);

// Inverse of a Hermitian positive-definite matrix; the complex-valued twin
// of the Gram solve, used by the beamformer design. Throws kSingularGram.
ComplexMatrix hermitian_inverse(const ComplexMatrix& a);

// Modified Gram-Schmidt with one re-orthogonalization pass.
// Throws kRankDeficient when a column is (numerically) in the span of the
// previous ones.
RealMatrix orthonormalize_columns(const RealMatrix& m);

bool all_finite(const RealMatrix& m);
bool all_finite(const ComplexMatrix& m);

// ---------------------------------------------------------------------------
// Reproducible random streams.
//
// A stream is addressed by (seed, round, device, purpose[, lane]). Two streams
// with the same address produce the same sequence no matter how many other
// streams were created or consumed in between, which is what makes per-device
// parallel execution bit-reproducible.

enum class Purpose : std::uint8_t {
  kChannel = 1,
  kNoise = 2,
  kData = 3,
  kSampling = 4,
  kInit = 5,
};

// Device slot used for draws owned by the server.
inline constexpr std::uint32_t kServerDevice = 0xFFFFFFFFu;

struct StreamId {
  std::uint64_t round = 0;
  std::uint32_t device = kServerDevice;
  Purpose purpose = Purpose::kInit;
  // Sub-address for several independent draws sharing the triple above,
  // e.g. one noise stream per gradient block within a round.
  std::uint32_t lane = 0;
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamId id);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, const StreamId& id);

// i.i.d. N(0, 1) entries.
RealMatrix gaussian_matrix(Index rows, Index cols, RngStream& stream);
// i.i.d. CN(0, 1) entries: real and imaginary parts each N(0, 1/2).
ComplexMatrix gaussian_complex_matrix(Index rows, Index cols,
                                      RngStream& stream);

}  // namespace otalc

#endif  // OTALC_NUMERICS_HPP_
