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

// MIMO over-the-air aggregation.
//
// Device k stacks its real payload R_k (rows x r), pairs row i with row
// rows/2 + i into one complex symbol, vectorizes column-major and reshapes
// the symbols into S_k (N_t x N_cu). It precodes X_k = B_k S_k and all
// devices transmit at once; the server sees Y = sum_k H_k X_k + Z and the
// zero-forcing receiver gives A^H Y ~= sum_k S_k.

#ifndef OTALC_CHANNEL_HPP_
#define OTALC_CHANNEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "otalc/compression.hpp"
#include "otalc/numerics.hpp"

namespace otalc::ota {

struct ChannelRealization {
  std::vector<ComplexMatrix> h;  // one N_r x N_t matrix per device
  double n0 = 0.0;               // noise variance per complex dimension
  Index tau = 1;                 // coherence length in channel uses
  double p0 = 1.0;               // transmit power budget

  Index n_r() const { return h.empty() ? 0 : h.front().rows(); }
  Index n_t() const { return h.empty() ? 0 : h.front().cols(); }
  void validate() const;
};

// i.i.d. CN(0, 1) channels for `devices`, drawn from the per-device channel
// stream of `round`.
ChannelRealization draw_channels(std::size_t devices, Index n_r, Index n_t,
                                 double n0, Index tau, double p0,
                                 std::uint64_t seed, std::uint64_t round);

struct BeamformingSet {
  std::vector<std::size_t> devices;  // active devices, ascending
  ComplexMatrix a;                   // N_r x N_t receive beamformer
  std::vector<ComplexMatrix> b;      // N_t x N_t, parallel to `devices`
  ComplexMatrix kernel;              // F, N_r x N_t
  double scale = 0.0;                // A = scale * F

  const ComplexMatrix& transmit_for(std::size_t device) const;
};

// Zero-forcing transmit beamformers with the weighted-subspace receiver:
//   F = sum_k sigma_min(H_k)^2 U_k U_k^H
//   A = sqrt(max_k tr((F^H H_k H_k^H F)^{-1}) / P0) F
//   B_k = (A^H H_k)^H (A^H H_k H_k^H A)^{-1}
// so that A^H H_k B_k = I for every active k. When N_r > N_t, F keeps the
// N_t dominant eigenvectors of the sum, scaled by their eigenvalues.
// Throws kChannelDegenerate / kBeamformerSingular.
BeamformingSet design_beamformers(const ChannelRealization& channels,
                                  std::span<const std::size_t> active);

struct PacketMeta {
  Index m = 0;         // rows of the first stacked part (P)
  Index n = 0;         // rows of the second stacked part (Q); 0 for a flat payload
  Index r = 0;         // columns of the stacked payload
  Index n_t = 0;
  Index n_cu = 0;
  Index row_pad = 0;   // 1 when m + n is odd
  Index tail_pad = 0;  // zero symbols appended so the symbols fill N_t x N_cu

  Index half_rows() const { return (m + n + row_pad) / 2; }
};

struct AirPacket {
  ComplexMatrix s;  // N_t x N_cu
  PacketMeta meta;
};

struct PowerScale {
  double gamma = 1.0;
  explicit PowerScale(double g = 1.0);
};

// ceil(((m + pad + n) r / 2) / N_t).
Index channel_uses(Index m, Index n, Index r, Index n_t);
PacketMeta make_meta(Index m, Index n, Index r, Index n_t);

// Generic real payload packing: `stacked` has m + n rows and r columns.
// Throws kCoherenceExceeded when N_cu > tau.
AirPacket pack_stacked(const RealMatrix& stacked, Index m, Index n_t,
                       PowerScale gamma, Index tau);
// Reads N_cu columns starting at `column` and undoes the packing.
RealMatrix unpack_stacked(const ComplexMatrix& s_hat, const PacketMeta& meta,
                          PowerScale gamma, Index column = 0);

AirPacket pack_factors(const RealMatrix& p_bar, const RealMatrix& q_bar,
                       Index n_t, PowerScale gamma, Index tau);
LocalFactors unpack(const ComplexMatrix& s_hat, const PacketMeta& meta,
                    PowerScale gamma, Index column = 0);

// X_k = B_k S_k.
ComplexMatrix transmit(const AirPacket& packet, const ComplexMatrix& b_k);

// Y = sum_k H_k X_k + Z over tau channel uses; xs is parallel to `active`,
// each X_k zero-filled to tau columns. Z ~ CN(0, N0) is drawn from a copy of
// `noise`, so the same stream always yields the same Z.
ComplexMatrix channel_apply(std::span<const ComplexMatrix> xs,
                            const ChannelRealization& channels,
                            std::span<const std::size_t> active,
                            const RngStream& noise);

// S_hat = A^H Y.
ComplexMatrix receive(const ComplexMatrix& y, const ComplexMatrix& a);

struct PowerReport {
  double average_power = 0.0;  // ||X||_F^2 / (N_t N_cu)
  bool violation = false;
};

PowerReport power_audit(const ComplexMatrix& x, double p0);

// Expected ||unpack(A^H Z)||_F^2 for one packet: each complex symbol picks up
// N0 ||A||_F^2 / N_t of noise, and unpacking multiplies by gamma.
double expected_noise_energy(const ComplexMatrix& a, double n0, const PacketMeta& meta,
                             PowerScale gamma);

// Scales a received estimate by max(0, 1 - noise_energy / ||estimate||^2),
// its estimated signal fraction. A zero estimate is returned unchanged.
RealMatrix shrink_to_signal(const RealMatrix& estimate, double noise_energy);

}  // namespace otalc::ota

#endif  // OTALC_CHANNEL_HPP_
