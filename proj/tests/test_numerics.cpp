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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "otalc/error.hpp"
#include "otalc/numerics.hpp"

using namespace otalc;

namespace {

double orthonormality_gap(const ComplexMatrix& u) {
  const ComplexMatrix g = u.adjoint() * u;
  return (g - ComplexMatrix::Identity(g.rows(), g.cols())).norm();
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an otalc::Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("compact_svd of the identity") {
  const CompactSvd s = compact_svd(ComplexMatrix::Identity(2, 2));
  REQUIRE(s.rank == 2);
  CHECK(s.sigma[0] == doctest::Approx(1.0));
  CHECK(s.sigma[1] == doctest::Approx(1.0));
  CHECK(orthonormality_gap(s.u) < 1e-12);
  CHECK((s.reconstruct() - ComplexMatrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("compact_svd drops a zero singular value") {
  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = 3.0;
  const CompactSvd s = compact_svd(d);
  REQUIRE(s.rank == 1);
  REQUIRE(s.sigma.size() == 1);
  CHECK(s.sigma[0] == doctest::Approx(3.0));
  CHECK(s.u.cols() == 1);
  CHECK(s.v.cols() == 1);
}

TEST_CASE("compact_svd reconstructs a random 8x8 channel") {
  RngStream stream(7, StreamId{});
  const ComplexMatrix h = gaussian_complex_matrix(8, 8, stream);
  const CompactSvd s = compact_svd(h);
  CHECK(oracle::rel_err(s.reconstruct(), h) < 1e-10);
  for (std::size_t i = 1; i < s.sigma.size(); ++i) CHECK(s.sigma[i - 1] >= s.sigma[i]);
  CHECK(orthonormality_gap(s.u) < 1e-10);
  CHECK(orthonormality_gap(s.v) < 1e-10);
}

TEST_CASE("compact_svd reconstruction over many shapes") {
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Index rows = 1 + t % 16;
    const Index cols = 1 + (t * 7) % 16;
    const ComplexMatrix h = oracle::random_complex(rows, cols, 1000 + static_cast<std::uint64_t>(t));
    worst = std::max(worst, oracle::rel_err(compact_svd(h).reconstruct(), h));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("compact_svd rejects degenerate input") {
  CHECK(code_of([] { compact_svd(ComplexMatrix::Zero(3, 3)); }) == ErrorCode::kDegenerateMatrix);
  ComplexMatrix bad = ComplexMatrix::Identity(2, 2);
  bad(1, 0) = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK(code_of([&] { compact_svd(bad); }) == ErrorCode::kDegenerateMatrix);
}

TEST_CASE("solve_regularized_gram on small exact cases") {
  const RealMatrix eye = RealMatrix::Identity(2, 2);
  CHECK((solve_regularized_gram(eye, 0.0) - eye).norm() < 1e-15);
  CHECK((solve_regularized_gram(eye, 1.0) - 0.5 * eye).norm() < 1e-15);
}

TEST_CASE("solve_regularized_gram residual") {
  RngStream stream(3, StreamId{});
  const RealMatrix m = gaussian_matrix(6, 2, stream);
  const RealMatrix v = solve_regularized_gram(m, 0.01);
  const RealMatrix lhs = m.transpose() * m + 0.01 * RealMatrix::Identity(2, 2);
  CHECK((lhs * v - RealMatrix::Identity(2, 2)).norm() < 1e-9);

  for (double lambda : {0.0, 1e-4, 1e-2, 1.0}) {
    for (int t = 0; t < 20; ++t) {
      const RealMatrix a = oracle::random_real(12, 4, 50 + static_cast<std::uint64_t>(t));
      const RealMatrix x = solve_regularized_gram(a, lambda);
      const RealMatrix g = a.transpose() * a + lambda * RealMatrix::Identity(4, 4);
      CHECK((g * x - RealMatrix::Identity(4, 4)).norm() / 4.0 < 1e-9);
    }
  }
}

TEST_CASE("solve_regularized_gram needs lambda for a rank-deficient factor") {
  RealMatrix m = RealMatrix::Zero(4, 2);
  m.col(0).setOnes();
  m.col(1).setOnes();
  CHECK(code_of([&] { solve_regularized_gram(m, 0.0); }) == ErrorCode::kSingularGram);
  CHECK_NOTHROW(solve_regularized_gram(m, 0.1));
}

TEST_CASE("hermitian_inverse of a random positive definite matrix") {
  const ComplexMatrix b = oracle::random_complex(6, 6, 11);
  const ComplexMatrix a = b * b.adjoint() + ComplexMatrix::Identity(6, 6);
  const ComplexMatrix inv = hermitian_inverse(a);
  CHECK((a * inv - ComplexMatrix::Identity(6, 6)).norm() < 1e-10);
  CHECK(code_of([] { hermitian_inverse(ComplexMatrix::Zero(3, 3)); }) == ErrorCode::kSingularGram);
}

TEST_CASE("orthonormalize_columns") {
  SUBCASE("already orthonormal input is returned as is") {
    const RealMatrix q = oracle::gram_schmidt(oracle::random_real(7, 3, 5));
    CHECK((orthonormalize_columns(q) - q).norm() < 1e-12);
  }
  SUBCASE("matches classical Gram-Schmidt") {
    RealMatrix m(2, 2);
    m << 1, 1, 0, 1;
    CHECK((orthonormalize_columns(m) - oracle::gram_schmidt(m)).norm() < 1e-12);
  }
  SUBCASE("duplicated column") {
    RealMatrix m = oracle::random_real(5, 2, 9);
    m.col(1) = m.col(0);
    CHECK(code_of([&] { orthonormalize_columns(m); }) == ErrorCode::kRankDeficient);
  }
  SUBCASE("orthonormal and span preserving") {
    for (int t = 0; t < 50; ++t) {
      const RealMatrix m = oracle::random_real(10, 4, 300 + static_cast<std::uint64_t>(t));
      const RealMatrix q = orthonormalize_columns(m);
      CHECK((q.transpose() * q - RealMatrix::Identity(4, 4)).norm() < 1e-10);
      CHECK((q * (q.transpose() * m) - m).norm() < 1e-9 * m.norm());
    }
  }
}

TEST_CASE("gaussian_matrix is deterministic per stream") {
  RngStream a(42, StreamId{3, 1, Purpose::kNoise, 2});
  RngStream b(42, StreamId{3, 1, Purpose::kNoise, 2});
  CHECK(gaussian_matrix(4, 5, a) == gaussian_matrix(4, 5, b));
  RngStream c(42, StreamId{3, 1, Purpose::kNoise, 3});
  RngStream d(42, StreamId{3, 1, Purpose::kNoise, 2});
  CHECK(gaussian_matrix(4, 5, c) != gaussian_matrix(4, 5, d));
}

TEST_CASE("gaussian_matrix moments") {
  RngStream stream(1, StreamId{0, 0, Purpose::kData, 0});
  const RealMatrix x = gaussian_matrix(1000, 100, stream);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);

  RngStream cs(1, StreamId{0, 0, Purpose::kChannel, 0});
  const ComplexMatrix z = gaussian_complex_matrix(1000, 100, cs);
  CHECK(std::abs(z.cwiseAbs2().mean() - 1.0) < 0.05);
  CHECK(std::abs(z.real().cwiseAbs2().mean() - 0.5) < 0.03);
}

TEST_CASE("stream output does not depend on draw order") {
  const StreamId ids[] = {{0, 0, Purpose::kInit, 0}, {1, 4, Purpose::kNoise, 0}, {2, kServerDevice, Purpose::kData, 7}};
  std::vector<RealMatrix> forward, backward(3);
  for (const auto& id : ids) {
    RngStream s(99, id);
    forward.push_back(gaussian_matrix(3, 3, s));
  }
  for (int i = 2; i >= 0; --i) {
    RngStream s(99, ids[i]);
    backward[static_cast<std::size_t>(i)] = gaussian_matrix(3, 3, s);
  }
  for (int i = 0; i < 3; ++i) CHECK(forward[static_cast<std::size_t>(i)] == backward[static_cast<std::size_t>(i)]);
}

TEST_CASE("all_finite") {
  RealMatrix m = RealMatrix::Ones(2, 2);
  CHECK(all_finite(m));
  m(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(m));
}
