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

#include "otalc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otalc::ota {

void ChannelRealization::validate() const {
  require_shape(!h.empty(), "channel realization has no devices");
  for (const auto& hk : h) {
    require_shape(hk.rows() == n_r() && hk.cols() == n_t(),
                  "channel matrices must share one N_r x N_t shape");
    if (!all_finite(hk)) fail(ErrorCode::kChannelDegenerate, "non-finite channel entry");
  }
  if (!(n0 >= 0.0)) fail(ErrorCode::kInvalidConfig, "noise variance must be >= 0");
  if (tau < 1) fail(ErrorCode::kInvalidConfig, "coherence length must be >= 1");
  if (!(p0 > 0.0)) fail(ErrorCode::kInvalidConfig, "power budget must be > 0");
}

ChannelRealization draw_channels(std::size_t devices, Index n_r, Index n_t,
                                 double n0, Index tau, double p0,
                                 std::uint64_t seed, std::uint64_t round) {
  ChannelRealization out;
  out.n0 = n0;
  out.tau = tau;
  out.p0 = p0;
  out.h.reserve(devices);
  for (std::size_t k = 0; k < devices; ++k) {
    RngStream stream(seed, StreamId{round, static_cast<std::uint32_t>(k), Purpose::kChannel, 0});
    out.h.push_back(gaussian_complex_matrix(n_r, n_t, stream));
  }
  return out;
}

const ComplexMatrix& BeamformingSet::transmit_for(std::size_t device) const {
  const auto it = std::lower_bound(devices.begin(), devices.end(), device);
  require_shape(it != devices.end() && *it == device,
                "device " + std::to_string(device) + " has no transmit beamformer this round");
  return b[static_cast<std::size_t>(it - devices.begin())];
}

BeamformingSet design_beamformers(const ChannelRealization& channels,
                                  std::span<const std::size_t> active) {
  channels.validate();
  require_shape(!active.empty(), "design_beamformers: no active devices");
  const Index n_r = channels.n_r();
  const Index n_t = channels.n_t();
  if (n_r < n_t) {
    fail(ErrorCode::kChannelDegenerate,
         "N_r=" + std::to_string(n_r) + " < N_t=" + std::to_string(n_t) +
             ": cannot zero-force N_t streams");
  }

  ComplexMatrix weighted = ComplexMatrix::Zero(n_r, n_r);
  for (std::size_t k : active) {
    require_shape(k < channels.h.size(), "active device without a channel");
    const CompactSvd svd = compact_svd(channels.h[k]);
    if (svd.rank < n_t) {
      fail(ErrorCode::kChannelDegenerate,
           "channel of device " + std::to_string(k) + " has rank " +
               std::to_string(svd.rank) + " < N_t");
    }
    const double smin = svd.sigma.back();
    weighted += (smin * smin) * (svd.u * svd.u.adjoint());
  }

  BeamformingSet out;
  out.devices.assign(active.begin(), active.end());
  std::sort(out.devices.begin(), out.devices.end());
  if (n_r == n_t) {
    out.kernel = weighted;
  } else {
    const Eigen::MatrixXcd herm = weighted;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(herm);
    // Eigenvalues come back ascending; keep the N_t largest.
    out.kernel.resize(n_r, n_t);
    for (Index j = 0; j < n_t; ++j) {
      const Index src = n_r - 1 - j;
      out.kernel.col(j) = eig.eigenvectors().col(src) * eig.eigenvalues()(src);
    }
  }

  double worst = 0.0;
  std::vector<ComplexMatrix> hh(out.devices.size());
  for (std::size_t i = 0; i < out.devices.size(); ++i) {
    const ComplexMatrix& hk = channels.h[out.devices[i]];
    hh[i] = hk * hk.adjoint();
    const ComplexMatrix gram = out.kernel.adjoint() * hh[i] * out.kernel;
    ComplexMatrix inv;
    try {
      inv = hermitian_inverse(gram);
    } catch (const Error&) {
      fail(ErrorCode::kBeamformerSingular,
           "F^H H H^H F is singular for device " + std::to_string(out.devices[i]));
    }
    worst = std::max(worst, inv.trace().real() / channels.p0);
  }
  out.scale = std::sqrt(worst);
  out.a = out.scale * out.kernel;

  out.b.reserve(out.devices.size());
  for (std::size_t i = 0; i < out.devices.size(); ++i) {
    const ComplexMatrix& hk = channels.h[out.devices[i]];
    const ComplexMatrix effective = out.a.adjoint() * hk;  // N_t x N_t
    ComplexMatrix inv;
    try {
      inv = hermitian_inverse(out.a.adjoint() * hh[i] * out.a);
    } catch (const Error&) {
      fail(ErrorCode::kBeamformerSingular,
           "A^H H H^H A is singular for device " + std::to_string(out.devices[i]));
    }
    out.b.push_back(effective.adjoint() * inv);
  }
  return out;
}

PowerScale::PowerScale(double g) : gamma(g) {
  if (!(g > 0.0) || !std::isfinite(g)) {
    fail(ErrorCode::kInvalidConfig, "power scale must be a positive finite number");
  }
}

PacketMeta make_meta(Index m, Index n, Index r, Index n_t) {
  require_shape(m >= 1 && n >= 0 && r >= 1 && n_t >= 1, "packet: invalid dimensions");
  PacketMeta meta;
  meta.m = m;
  meta.n = n;
  meta.r = r;
  meta.n_t = n_t;
  meta.row_pad = (m + n) % 2;
  const Index symbols = meta.half_rows() * r;
  meta.n_cu = (symbols + n_t - 1) / n_t;
  meta.tail_pad = meta.n_cu * n_t - symbols;
  return meta;
}

Index channel_uses(Index m, Index n, Index r, Index n_t) {
  return make_meta(m, n, r, n_t).n_cu;
}

AirPacket pack_stacked(const RealMatrix& stacked, Index m, Index n_t,
                       PowerScale gamma, Index tau) {
  require_shape(m >= 1 && m <= stacked.rows(), "packet: split row out of range");
  const PacketMeta meta = make_meta(m, stacked.rows() - m, stacked.cols(), n_t);
  if (meta.n_cu > tau) {
    fail(ErrorCode::kCoherenceExceeded,
         "payload needs " + std::to_string(meta.n_cu) + " channel uses, coherence length is " +
             std::to_string(tau));
  }
  const Index half = meta.half_rows();
  const Index rows = stacked.rows();
  const double inv_gamma = 1.0 / gamma.gamma;
  auto real_at = [&](Index i, Index j) { return i < rows ? stacked(i, j) : 0.0; };

  AirPacket packet;
  packet.meta = meta;
  packet.s = ComplexMatrix::Zero(n_t, meta.n_cu);
  // Column-major vectorization of C: symbol index = j * half + i.
  for (Index j = 0; j < meta.r; ++j) {
    for (Index i = 0; i < half; ++i) {
      const Index idx = j * half + i;
      packet.s(idx % n_t, idx / n_t) =
          Complex(real_at(i, j), real_at(half + i, j)) * inv_gamma;
    }
  }
  return packet;
}

RealMatrix unpack_stacked(const ComplexMatrix& s_hat, const PacketMeta& meta,
                          PowerScale gamma, Index column) {
  require_shape(s_hat.rows() == meta.n_t,
                "unpack: signal has " + std::to_string(s_hat.rows()) + " streams, packet expects " +
                    std::to_string(meta.n_t));
  require_shape(column >= 0 && column + meta.n_cu <= s_hat.cols(),
                "unpack: signal too short for packet");
  require_shape(meta.n_cu * meta.n_t - meta.half_rows() * meta.r == meta.tail_pad,
                "unpack: inconsistent packet metadata");
  const Index half = meta.half_rows();
  const Index rows = meta.m + meta.n;
  RealMatrix out(rows, meta.r);
  for (Index j = 0; j < meta.r; ++j) {
    for (Index i = 0; i < half; ++i) {
      const Index idx = j * half + i;
      const Complex c = s_hat(idx % meta.n_t, column + idx / meta.n_t) * gamma.gamma;
      out(i, j) = c.real();
      if (half + i < rows) out(half + i, j) = c.imag();
    }
  }
  return out;
}

AirPacket pack_factors(const RealMatrix& p_bar, const RealMatrix& q_bar,
                       Index n_t, PowerScale gamma, Index tau) {
  require_shape(p_bar.cols() == q_bar.cols(), "pack_factors: factor ranks differ");
  RealMatrix stacked(p_bar.rows() + q_bar.rows(), p_bar.cols());
  stacked << p_bar, q_bar;
  return pack_stacked(stacked, p_bar.rows(), n_t, gamma, tau);
}

LocalFactors unpack(const ComplexMatrix& s_hat, const PacketMeta& meta,
                    PowerScale gamma, Index column) {
  const RealMatrix stacked = unpack_stacked(s_hat, meta, gamma, column);
  // The first m rows are P, the remaining n rows are Q.
  return LocalFactors{stacked.topRows(meta.m), stacked.bottomRows(meta.n)};
}

ComplexMatrix transmit(const AirPacket& packet, const ComplexMatrix& b_k) {
  require_shape(b_k.cols() == packet.s.rows(), "transmit: beamformer does not match packet");
  return b_k * packet.s;
}

ComplexMatrix channel_apply(std::span<const ComplexMatrix> xs,
                            const ChannelRealization& channels,
                            std::span<const std::size_t> active,
                            const RngStream& noise) {
  require_shape(xs.size() == active.size(), "channel_apply: one signal per active device");
  const Index n_r = channels.n_r();
  const Index tau = channels.tau;
  ComplexMatrix y = ComplexMatrix::Zero(n_r, tau);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const ComplexMatrix& x = xs[i];
    require_shape(active[i] < channels.h.size(), "channel_apply: device without channel");
    require_shape(x.rows() == channels.n_t() && x.cols() <= tau,
                  "channel_apply: signal exceeds coherence block");
    y.leftCols(x.cols()).noalias() += channels.h[active[i]] * x;
  }
  if (channels.n0 > 0.0) {
    RngStream z = noise;
    y += std::sqrt(channels.n0) * gaussian_complex_matrix(n_r, tau, z);
  }
  return y;
}

ComplexMatrix receive(const ComplexMatrix& y, const ComplexMatrix& a) {
  require_shape(a.rows() == y.rows(), "receive: beamformer does not match signal");
  return a.adjoint() * y;
}

PowerReport power_audit(const ComplexMatrix& x, double p0) {
  PowerReport report;
  if (x.size() > 0) {
    report.average_power = x.squaredNorm() / static_cast<double>(x.size());
  }
  report.violation = report.average_power > p0 * (1.0 + 1e-12);
  return report;
}

double expected_noise_energy(const ComplexMatrix& a, double n0, const PacketMeta& meta,
                             PowerScale gamma) {
  const double symbols = static_cast<double>(meta.half_rows() * meta.r);
  return gamma.gamma * gamma.gamma * n0 * a.squaredNorm() * symbols / static_cast<double>(meta.n_t);
}

RealMatrix shrink_to_signal(const RealMatrix& estimate, double noise_energy) {
  const double total = estimate.squaredNorm();
  if (!(total > 0.0)) return estimate;
  return std::max(0.0, 1.0 - noise_energy / total) * estimate;
}

}  // namespace otalc::ota
