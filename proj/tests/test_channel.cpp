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

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "otalc/channel.hpp"
#include "otalc/error.hpp"

using namespace otalc;
using namespace otalc::ota;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an otalc::Error");
  return ErrorCode::kIoError;
}

double zf_residual(const BeamformingSet& bf, const ChannelRealization& ch) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bf.devices.size(); ++i) {
    const ComplexMatrix e = bf.a.adjoint() * ch.h[bf.devices[i]] * bf.b[i];
    worst = std::max(worst, (e - ComplexMatrix::Identity(e.rows(), e.cols())).norm());
  }
  return worst;
}

std::vector<std::size_t> first_k(std::size_t k) {
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = i;
  return out;
}

ChannelRealization identity_channel(Index n, double n0, Index tau) {
  ChannelRealization ch;
  ch.h.push_back(ComplexMatrix::Identity(n, n));
  ch.n0 = n0;
  ch.tau = tau;
  return ch;
}

}  // namespace

TEST_CASE("channel uses follow the packing arithmetic") {
  CHECK(channel_uses(64, 64, 8, 8) == 64);
  for (Index m = 1; m <= 13; ++m) {
    for (Index n = 0; n <= 11; ++n) {
      for (Index r = 1; r <= 5; ++r) {
        for (Index nt : {Index{1}, Index{2}, Index{3}, Index{8}}) {
          const Index pad = (m + n) % 2;
          const Index symbols = (m + pad + n) * r / 2;
          const Index expected = (symbols + nt - 1) / nt;
          const PacketMeta meta = make_meta(m, n, r, nt);
          CHECK(meta.n_cu == expected);
          CHECK(meta.row_pad == pad);
          CHECK(meta.tail_pad == expected * nt - symbols);
        }
      }
    }
  }
}

TEST_CASE("packing") {
  SUBCASE("zero factors give a zero packet") {
    const AirPacket p = pack_factors(RealMatrix::Zero(6, 2), RealMatrix::Zero(4, 2), 3, PowerScale(1.0), 100);
    CHECK(p.s.isZero(0.0));
    CHECK(p.s.rows() == 3);
  }
  SUBCASE("complex pairing of the stacked rows") {
    RealMatrix p(2, 1), q(2, 1);
    p << 1, 2;
    q << 3, 4;
    const AirPacket pk = pack_factors(p, q, 1, PowerScale(2.0), 10);
    REQUIRE(pk.s.cols() == 2);
    CHECK(pk.s(0, 0) == Complex(0.5, 1.5));
    CHECK(pk.s(0, 1) == Complex(1.0, 2.0));
  }
  SUBCASE("round trip with and without padding") {
    for (auto [m, n, r, nt] : {std::array<Index, 4>{8, 6, 3, 4}, std::array<Index, 4>{7, 6, 3, 4},
                               std::array<Index, 4>{5, 5, 2, 3}, std::array<Index, 4>{64, 64, 8, 8}}) {
      const RealMatrix p = oracle::random_real(m, r, static_cast<std::uint64_t>(m * 100 + n));
      const RealMatrix q = oracle::random_real(n, r, static_cast<std::uint64_t>(n * 100 + m));
      for (double gamma : {1.0, 0.37}) {
        const AirPacket pk = pack_factors(p, q, nt, PowerScale(gamma), 1000);
        const LocalFactors back = unpack(pk.s, pk.meta, PowerScale(gamma));
        CHECK((back.p_bar - p).norm() < 1e-12 * (1.0 + p.norm()));
        CHECK((back.q_bar - q).norm() < 1e-12 * (1.0 + q.norm()));
      }
    }
  }
  SUBCASE("zero signal unpacks to zero factors") {
    const PacketMeta meta = make_meta(5, 4, 2, 2);
    const LocalFactors z = unpack(ComplexMatrix::Zero(2, meta.n_cu), meta, PowerScale(1.0));
    CHECK(z.p_bar.isZero(0.0));
    CHECK(z.q_bar.isZero(0.0));
  }
  SUBCASE("errors") {
    const RealMatrix p = RealMatrix::Ones(64, 8);
    CHECK(code_of([&] { pack_factors(p, p, 8, PowerScale(1.0), 63); }) == ErrorCode::kCoherenceExceeded);
    const PacketMeta meta = make_meta(5, 4, 2, 2);
    CHECK(code_of([&] { unpack(ComplexMatrix::Zero(3, meta.n_cu), meta, PowerScale(1.0)); }) ==
          ErrorCode::kShapeError);
    CHECK(code_of([&] { unpack(ComplexMatrix::Zero(2, meta.n_cu - 1), meta, PowerScale(1.0)); }) ==
          ErrorCode::kShapeError);
    CHECK(code_of([] { PowerScale(0.0); }) == ErrorCode::kInvalidConfig);
  }
}

TEST_CASE("zero-forcing beamformers") {
  SUBCASE("identity channel") {
    const ChannelRealization ch = identity_channel(4, 0.0, 8);
    const BeamformingSet bf = design_beamformers(ch, first_k(1));
    CHECK(zf_residual(bf, ch) < 1e-12);
  }
  SUBCASE("random channels") {
    double worst = 0.0;
    for (std::uint64_t round = 0; round < 20; ++round) {
      const ChannelRealization ch = draw_channels(5, 8, 8, 0.0, 64, 1.0, 11, round);
      worst = std::max(worst, zf_residual(design_beamformers(ch, first_k(5)), ch));
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("more receive antennas than streams") {
    const ChannelRealization ch = draw_channels(4, 10, 6, 0.0, 64, 1.0, 12, 0);
    CHECK(zf_residual(design_beamformers(ch, first_k(4)), ch) < 1e-8);
  }
  SUBCASE("scaling every channel keeps the identity") {
    ChannelRealization ch = draw_channels(5, 8, 8, 0.0, 64, 1.0, 13, 0);
    for (auto& h : ch.h) h *= 2.0;
    CHECK(zf_residual(design_beamformers(ch, first_k(5)), ch) < 1e-8);
  }
  SUBCASE("subset of devices") {
    const ChannelRealization ch = draw_channels(6, 8, 8, 0.0, 64, 1.0, 14, 0);
    const std::vector<std::size_t> active{4, 1, 3};
    const BeamformingSet bf = design_beamformers(ch, active);
    CHECK(bf.devices == std::vector<std::size_t>{1, 3, 4});
    CHECK(zf_residual(bf, ch) < 1e-8);
    CHECK(code_of([&] { bf.transmit_for(0); }) == ErrorCode::kShapeError);
  }
  SUBCASE("degenerate channels") {
    ChannelRealization ch = draw_channels(2, 4, 4, 0.0, 8, 1.0, 15, 0);
    ch.h[1].col(3) = ch.h[1].col(2);
    CHECK(code_of([&] { design_beamformers(ch, first_k(2)); }) == ErrorCode::kChannelDegenerate);
    const ChannelRealization wide = draw_channels(2, 3, 4, 0.0, 8, 1.0, 15, 0);
    CHECK(code_of([&] { design_beamformers(wide, first_k(2)); }) == ErrorCode::kChannelDegenerate);
  }
}

TEST_CASE("transmit") {
  const AirPacket pk = pack_factors(oracle::random_real(6, 2, 1), oracle::random_real(5, 2, 2), 3, PowerScale(1.0), 10);
  CHECK(transmit(pk, ComplexMatrix::Identity(3, 3)) == pk.s);
  AirPacket zero = pk;
  zero.s.setZero();
  CHECK(transmit(zero, oracle::random_complex(3, 3, 3)).isZero(0.0));
  const ComplexMatrix b = oracle::random_complex(3, 3, 4);
  CHECK(oracle::rel_err(transmit(pk, b), oracle::naive_multiply(b, pk.s)) < 1e-12);
}

TEST_CASE("channel_apply") {
  const RngStream noise(5, StreamId{0, kServerDevice, Purpose::kNoise, 0});
  SUBCASE("noiseless identity passes the signal") {
    const ChannelRealization ch = identity_channel(4, 0.0, 6);
    const std::vector<ComplexMatrix> xs{oracle::random_complex(4, 6, 1)};
    CHECK(channel_apply(xs, ch, first_k(1), noise) == xs[0]);
  }
  SUBCASE("noise variance") {
    const ChannelRealization ch = identity_channel(10, 0.3, 1000);
    const std::vector<ComplexMatrix> xs{ComplexMatrix::Zero(10, 1000)};
    const ComplexMatrix y = channel_apply(xs, ch, first_k(1), noise);
    const double var = y.cwiseAbs2().mean();
    CHECK(std::abs(var - 0.3) < 0.05 * 0.3);
    CHECK(std::abs(y.mean()) < 0.02);
  }
  SUBCASE("superposition with pinned noise") {
    ChannelRealization ch = draw_channels(1, 4, 4, 0.1, 5, 1.0, 3, 0);
    const ComplexMatrix x1 = oracle::random_complex(4, 5, 6);
    const ComplexMatrix x2 = oracle::random_complex(4, 5, 7);
    const std::vector<ComplexMatrix> sum{x1 + x2}, a{x1}, b{x2}, z{ComplexMatrix::Zero(4, 5)};
    const ComplexMatrix lhs = channel_apply(sum, ch, first_k(1), noise);
    const ComplexMatrix rhs = channel_apply(a, ch, first_k(1), noise) + channel_apply(b, ch, first_k(1), noise) -
                              channel_apply(z, ch, first_k(1), noise);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
  SUBCASE("short signals are zero filled") {
    const ChannelRealization ch = identity_channel(3, 0.0, 7);
    const std::vector<ComplexMatrix> xs{oracle::random_complex(3, 4, 8)};
    const ComplexMatrix y = channel_apply(xs, ch, first_k(1), noise);
    CHECK(y.cols() == 7);
    CHECK(y.rightCols(3).isZero(0.0));
    const std::vector<ComplexMatrix> too_long{oracle::random_complex(3, 8, 8)};
    CHECK(code_of([&] { channel_apply(too_long, ch, first_k(1), noise); }) == ErrorCode::kShapeError);
  }
}

TEST_CASE("receive") {
  const ComplexMatrix a = oracle::random_complex(6, 4, 1);
  CHECK(receive(ComplexMatrix::Zero(6, 3), a).isZero(0.0));
  const RngStream noise(8, StreamId{0, kServerDevice, Purpose::kNoise, 0});
  const ChannelRealization ch = identity_channel(4, 0.2, 5);
  const ComplexMatrix s = oracle::random_complex(4, 5, 2);
  const std::vector<ComplexMatrix> xs{s}, z{ComplexMatrix::Zero(4, 5)};
  const ComplexMatrix eye = ComplexMatrix::Identity(4, 4);
  const ComplexMatrix out = receive(channel_apply(xs, ch, first_k(1), noise), eye);
  const ComplexMatrix noise_only = channel_apply(z, ch, first_k(1), noise);
  CHECK((out - (s + noise_only)).norm() < 1e-12);
}

TEST_CASE("noiseless over-the-air sum of factor packets") {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const ChannelRealization ch = draw_channels(5, 8, 8, 0.0, 64, 1.0, 21, trial);
    const BeamformingSet bf = design_beamformers(ch, first_k(5));
    std::vector<ComplexMatrix> xs;
    RealMatrix p_sum = RealMatrix::Zero(13, 3), q_sum = RealMatrix::Zero(9, 3);
    PacketMeta meta;
    for (std::size_t k = 0; k < 5; ++k) {
      const RealMatrix p = oracle::random_real(13, 3, trial * 10 + k);
      const RealMatrix q = oracle::random_real(9, 3, trial * 10 + k + 500);
      p_sum += p;
      q_sum += q;
      const AirPacket pk = pack_factors(p, q, 8, PowerScale(1.3), ch.tau);
      meta = pk.meta;
      xs.push_back(transmit(pk, bf.transmit_for(k)));
    }
    const RngStream noise(1, StreamId{trial, kServerDevice, Purpose::kNoise, 0});
    const LocalFactors out = unpack(receive(channel_apply(xs, ch, first_k(5), noise), bf.a), meta, PowerScale(1.3));
    worst = std::max({worst, oracle::rel_err(out.p_bar, p_sum), oracle::rel_err(out.q_bar, q_sum)});
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("received error scales with the noise variance") {
  const RealMatrix p = oracle::random_real(16, 2, 1);
  const RealMatrix q = oracle::random_real(12, 2, 2);
  const RngStream noise(4, StreamId{0, kServerDevice, Purpose::kNoise, 0});
  std::vector<double> mse;
  const std::vector<double> snr_db{0.0, 10.0, 20.0, 30.0};
  for (double snr : snr_db) {
    const double n0 = std::pow(10.0, -snr / 10.0);
    const ChannelRealization ch = draw_channels(3, 4, 4, n0, 64, 1.0, 9, 0);
    const BeamformingSet bf = design_beamformers(ch, first_k(3));
    std::vector<ComplexMatrix> xs;
    PacketMeta meta;
    for (std::size_t k = 0; k < 3; ++k) {
      const AirPacket pk = pack_factors(p, q, 4, PowerScale(1.0), ch.tau);
      meta = pk.meta;
      xs.push_back(transmit(pk, bf.transmit_for(k)));
    }
    const LocalFactors out = unpack(receive(channel_apply(xs, ch, first_k(3), noise), bf.a), meta, PowerScale(1.0));
    mse.push_back((out.p_bar - 3.0 * p).squaredNorm() + (out.q_bar - 3.0 * q).squaredNorm());
  }
  for (std::size_t i = 1; i < mse.size(); ++i) {
    CHECK(mse[i - 1] / mse[i] == doctest::Approx(10.0).epsilon(1e-6));
  }
}

TEST_CASE("expected noise energy matches the empirical receiver noise") {
  const ChannelRealization ch = draw_channels(3, 8, 8, 0.05, 64, 1.0, 31, 0);
  const BeamformingSet bf = design_beamformers(ch, first_k(3));
  const PacketMeta meta = make_meta(40, 24, 4, 8);
  const double expected = expected_noise_energy(bf.a, ch.n0, meta, PowerScale(0.8));
  double total = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    const RngStream noise(2, StreamId{static_cast<std::uint64_t>(t), kServerDevice, Purpose::kNoise, 0});
    const std::vector<ComplexMatrix> z(3, ComplexMatrix::Zero(8, meta.n_cu));
    const RealMatrix est = unpack_stacked(receive(channel_apply(z, ch, first_k(3), noise), bf.a), meta, PowerScale(0.8));
    total += est.squaredNorm();
  }
  CHECK(total / trials == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("shrink_to_signal") {
  const RealMatrix x = oracle::random_real(4, 3, 1);
  CHECK(shrink_to_signal(x, 0.0) == x);
  CHECK(oracle::rel_err(shrink_to_signal(x, 0.25 * x.squaredNorm()), 0.75 * x) < 1e-15);
  CHECK(shrink_to_signal(x, 2.0 * x.squaredNorm()).isZero(0.0));
  CHECK(shrink_to_signal(RealMatrix::Zero(2, 2), 1.0).isZero(0.0));
}

TEST_CASE("power_audit") {
  CHECK(power_audit(ComplexMatrix::Zero(4, 3), 1.0).average_power == 0.0);
  CHECK_FALSE(power_audit(ComplexMatrix::Zero(4, 3), 1.0).violation);
  const double p0 = 2.5;
  ComplexMatrix x(3, 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 5; ++j) x(i, j) = std::polar(std::sqrt(p0), 0.3 * static_cast<double>(i + 2 * j));
  const PowerReport at = power_audit(x, p0);
  CHECK(at.average_power == doctest::Approx(p0));
  CHECK_FALSE(at.violation);
  CHECK(power_audit(1.01 * x, p0).violation);
}
