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

#include "otalc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otalc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::kSingularGram: return "SingularGram";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kInvalidStepSize: return "InvalidStepSize";
    case ErrorCode::kInvalidActiveCount: return "InvalidActiveCount";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kCoherenceExceeded: return "CoherenceExceeded";
    case ErrorCode::kChannelDegenerate: return "ChannelDegenerate";
    case ErrorCode::kBeamformerSingular: return "BeamformerSingular";
    case ErrorCode::kEmptyData: return "EmptyData";
    case ErrorCode::kNumericalDivergence: return "NumericalDivergence";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

// Relative pivot floor for the Cholesky factorizations below.
constexpr double kPivotTolerance = 1e-13;

double real_part(double x) { return x; }
double real_part(const Complex& x) { return x.real(); }
double conj_of(double x) { return x; }
Complex conj_of(const Complex& x) { return std::conj(x); }

// In-place lower Cholesky of a Hermitian matrix followed by the inverse
// L^{-H} L^{-1}. Returns false when a pivot falls below the tolerance.
template <typename Matrix>
bool cholesky_inverse(const Matrix& a, Matrix& out) {
  using Scalar = typename Matrix::Scalar;
  const Index n = a.rows();
  double scale = 0.0;
  for (Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(real_part(a(i, i))));
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;

  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = real_part(a(j, j));
    for (Index k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > kPivotTolerance * scale)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      Scalar s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * conj_of(l(j, k));
      l(i, j) = s / ljj;
    }
  }

  // Solve L Y = I column by column, then out = Y^H Y.
  Matrix y = Matrix::Zero(n, n);
  for (Index c = 0; c < n; ++c) {
    for (Index i = c; i < n; ++i) {
      Scalar s = (i == c) ? Scalar(1) : Scalar(0);
      for (Index k = c; k < i; ++k) s -= l(i, k) * y(k, c);
      y(i, c) = s / l(i, i);
    }
  }
  out = y.adjoint() * y;
  return true;
}

}  // namespace

bool all_finite(const RealMatrix& m) { return m.allFinite(); }

bool all_finite(const ComplexMatrix& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

ComplexMatrix CompactSvd::reconstruct() const {
  ComplexMatrix scaled = u;
  for (Index j = 0; j < rank; ++j) scaled.col(j) *= sigma[static_cast<std::size_t>(j)];
  return scaled * v.adjoint();
}

CompactSvd compact_svd(const ComplexMatrix& h) {
  if (h.size() == 0 || !all_finite(h)) {
    fail(ErrorCode::kDegenerateMatrix, "compact_svd: empty or non-finite input");
  }
  if (h.cwiseAbs().maxCoeff() == 0.0) {
    fail(ErrorCode::kDegenerateMatrix, "compact_svd: all-zero input");
  }
  using ColMajor = Eigen::MatrixXcd;
  const ColMajor a = h;
  Eigen::JacobiSVD<ColMajor> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = kSvdRankTolerance * s(0);
  Index d = 0;
  while (d < s.size() && s(d) > cutoff) ++d;

  CompactSvd out;
  out.rank = d;
  out.u = svd.matrixU().leftCols(d);
  out.v = svd.matrixV().leftCols(d);
  out.sigma.assign(s.data(), s.data() + d);
  return out;
}

RealMatrix solve_regularized_gram(const RealMatrix& m, double lambda) {
  if (!(lambda >= 0.0)) {
    fail(ErrorCode::kSingularGram, "solve_regularized_gram: lambda must be >= 0");
  }
  const Index r = m.cols();
  RealMatrix gram = m.transpose() * m;
  gram.diagonal().array() += lambda;
  RealMatrix inv;
  if (!cholesky_inverse(gram, inv)) {
    fail(ErrorCode::kSingularGram,
         "regularized Gram matrix of size " + std::to_string(r) +
             " is not positive definite (lambda=" + std::to_string(lambda) + ")");
  }
  return inv;
}

ComplexMatrix hermitian_inverse(const ComplexMatrix& a) {
  require_shape(a.rows() == a.cols(), "hermitian_inverse: matrix must be square");
  ComplexMatrix inv;
  if (!cholesky_inverse(a, inv)) {
    fail(ErrorCode::kSingularGram, "hermitian_inverse: matrix is not positive definite");
  }
  return inv;
}

RealMatrix orthonormalize_columns(const RealMatrix& m) {
  constexpr double kDependenceTolerance = 1e-10;
  RealMatrix q = m;
  for (Index j = 0; j < q.cols(); ++j) {
    const double original = q.col(j).norm();
    if (!(original > 0.0) || !std::isfinite(original)) {
      fail(ErrorCode::kRankDeficient,
           "orthonormalize_columns: column " + std::to_string(j) + " is zero");
    }
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < j; ++k) {
        q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
      }
    }
    const double remaining = q.col(j).norm();
    if (remaining <= kDependenceTolerance * original) {
      fail(ErrorCode::kRankDeficient,
           "orthonormalize_columns: column " + std::to_string(j) +
               " is linearly dependent on earlier columns");
    }
    q.col(j) /= remaining;
  }
  return q;
}

// SplitMix64 finalizer.
static std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, const StreamId& id) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ id.round);
  h = splitmix(h ^ id.device);
  h = splitmix(h ^ static_cast<std::uint64_t>(id.purpose));
  h = splitmix(h ^ id.lane);
  return h;
}

RngStream::RngStream(std::uint64_t seed, StreamId id)
    : engine_(mix_seed(seed, id)) {}

std::uint64_t RngStream::below(std::uint64_t bound) {
  std::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
  return dist(engine_);
}

RealMatrix gaussian_matrix(Index rows, Index cols, RngStream& stream) {
  RealMatrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = stream.normal();
  return out;
}

ComplexMatrix gaussian_complex_matrix(Index rows, Index cols,
                                      RngStream& stream) {
  const double s = std::sqrt(0.5);
  ComplexMatrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double re = stream.normal();
      const double im = stream.normal();
      out(i, j) = Complex(s * re, s * im);
    }
  }
  return out;
}

}  // namespace otalc
