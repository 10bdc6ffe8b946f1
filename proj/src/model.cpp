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

#include "otalc/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otalc {

std::string_view to_string(ModelKind k) {
  return k == ModelKind::kLogistic ? "logistic" : "mlp";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "logistic") return ModelKind::kLogistic;
  if (s == "mlp") return ModelKind::kMlp;
  fail(ErrorCode::kInvalidConfig, "unknown model kind '" + std::string(s) + "' (logistic | mlp)");
}

ParameterSet ParameterSet::zeros_like(const ParameterSet& other) {
  ParameterSet out;
  for (const auto& b : other.blocks) {
    out.blocks.push_back(GradientBlock{b.id, RealMatrix::Zero(b.data.rows(), b.data.cols())});
  }
  for (const auto& v : other.vectors) out.vectors.push_back(RealVector::Zero(v.size()));
  return out;
}

bool ParameterSet::same_shape(const ParameterSet& other) const {
  if (blocks.size() != other.blocks.size() || vectors.size() != other.vectors.size()) return false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].data.rows() != other.blocks[i].data.rows() ||
        blocks[i].data.cols() != other.blocks[i].data.cols()) {
      return false;
    }
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != other.vectors[i].size()) return false;
  }
  return true;
}

void ParameterSet::axpy(double alpha, const ParameterSet& other) {
  require_shape(same_shape(other), "parameter sets have different shapes");
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].data += alpha * other.blocks[i].data;
  for (std::size_t i = 0; i < vectors.size(); ++i) vectors[i] += alpha * other.vectors[i];
}

void ParameterSet::scale(double alpha) {
  for (auto& b : blocks) b.data *= alpha;
  for (auto& v : vectors) v *= alpha;
}

double ParameterSet::squared_norm() const {
  double s = 0.0;
  for (const auto& b : blocks) s += b.data.squaredNorm();
  for (const auto& v : vectors) s += v.squaredNorm();
  return s;
}

bool ParameterSet::finite() const {
  for (const auto& b : blocks)
    if (!all_finite(b.data)) return false;
  for (const auto& v : vectors)
    if (!v.allFinite()) return false;
  return true;
}

Index ParameterSet::scalar_count() const {
  Index n = 0;
  for (const auto& b : blocks) n += b.data.size();
  for (const auto& v : vectors) n += v.size();
  return n;
}

std::vector<BlockShape> block_schema(const ModelSpec& spec) {
  if (spec.kind == ModelKind::kLogistic) return {{spec.classes, spec.dim}};
  return {{spec.hidden, spec.dim}, {spec.classes, spec.hidden}};
}

std::vector<Index> vector_schema(const ModelSpec& spec) {
  if (spec.kind == ModelKind::kLogistic) return {};
  return {spec.hidden, spec.classes};
}

ParameterSet init_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2 || spec.dim < 1 || (spec.kind == ModelKind::kMlp && spec.hidden < 1)) {
    fail(ErrorCode::kInvalidConfig, "model: classes >= 2, dim >= 1 and hidden >= 1 required");
  }
  ParameterSet w;
  const auto shapes = block_schema(spec);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    GradientBlock b{i, RealMatrix::Zero(shapes[i].rows, shapes[i].cols)};
    if (spec.kind == ModelKind::kMlp) {
      RngStream stream(seed, StreamId{0, kServerDevice, Purpose::kInit, 100 + static_cast<std::uint32_t>(i)});
      b.data = gaussian_matrix(shapes[i].rows, shapes[i].cols, stream) /
               std::sqrt(static_cast<double>(shapes[i].cols));
    }
    w.blocks.push_back(std::move(b));
  }
  for (Index len : vector_schema(spec)) w.vectors.push_back(RealVector::Zero(len));
  return w;
}

namespace {

void check_model(const ModelSpec& spec, const ParameterSet& w, const RealMatrix& x,
                 const std::vector<int>& y) {
  require_shape(static_cast<Index>(y.size()) == x.rows(), "labels do not match samples");
  require_shape(x.cols() == spec.dim, "feature dimension does not match the model");
  const auto shapes = block_schema(spec);
  require_shape(w.blocks.size() == shapes.size() && w.vectors.size() == vector_schema(spec).size(),
                "parameters do not match the model schema");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    require_shape(w.blocks[i].data.rows() == shapes[i].rows && w.blocks[i].data.cols() == shapes[i].cols,
                  "parameter block " + std::to_string(i) + " has the wrong shape");
  }
  for (int label : y) {
    if (label < 0 || label >= spec.classes) fail(ErrorCode::kShapeError, "label out of range");
  }
}

// Row-wise softmax in place; returns the summed cross-entropy.
double softmax_xent(RealMatrix& logits, const int* labels) {
  double loss = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double mx = row.maxCoeff();
    row.array() -= mx;
    const double log_z = std::log(row.array().exp().sum());
    loss += log_z - row(labels[i]);
    row = (row.array() - log_z).exp().matrix();
  }
  return loss;
}

struct ChunkResult {
  double loss = 0.0;
  ParameterSet grad;  // summed (not averaged) over the chunk
};

ChunkResult chunk_gradient(const ModelSpec& spec, const ParameterSet& w,
                           const RealMatrix& x, const int* y, bool want_grad) {
  ChunkResult out;
  if (spec.kind == ModelKind::kLogistic) {
    const RealMatrix& wm = w.blocks[0].data;
    RealMatrix probs = x * wm.transpose();
    out.loss = softmax_xent(probs, y);
    if (want_grad) {
      for (Index i = 0; i < probs.rows(); ++i) probs(i, y[i]) -= 1.0;
      out.grad.blocks.push_back(GradientBlock{0, probs.transpose() * x});
    }
    return out;
  }
  const RealMatrix& w1 = w.blocks[0].data;
  const RealMatrix& w2 = w.blocks[1].data;
  RealMatrix h = x * w1.transpose();
  h.rowwise() += w.vectors[0].transpose();
  h = h.array().tanh().matrix();
  RealMatrix probs = h * w2.transpose();
  probs.rowwise() += w.vectors[1].transpose();
  out.loss = softmax_xent(probs, y);
  if (want_grad) {
    for (Index i = 0; i < probs.rows(); ++i) probs(i, y[i]) -= 1.0;
    const RealMatrix dh = (probs * w2).array() * (1.0 - h.array().square());
    out.grad.blocks.push_back(GradientBlock{0, dh.transpose() * x});
    out.grad.blocks.push_back(GradientBlock{1, probs.transpose() * h});
    out.grad.vectors.push_back(dh.colwise().sum().transpose());
    out.grad.vectors.push_back(probs.colwise().sum().transpose());
  }
  return out;
}

LossGradient evaluate(const ModelSpec& spec, const ParameterSet& w, const RealMatrix& x,
                      const std::vector<int>& y, const ExecutionPolicy& policy, bool want_grad) {
  check_model(spec, w, x, y);
  const Index n = x.rows();
  if (n == 0) fail(ErrorCode::kEmptyData, "loss over zero samples");
  const auto chunks = static_cast<std::size_t>((n + kGradientChunk - 1) / kGradientChunk);
  auto parts = kernels::map_indices<ChunkResult>(policy, chunks, [&](std::size_t c) {
    const Index begin = static_cast<Index>(c) * kGradientChunk;
    const Index len = std::min(kGradientChunk, n - begin);
    return chunk_gradient(spec, w, x.middleRows(begin, len), y.data() + begin, want_grad);
  });
  LossGradient out;
  out.grad = want_grad ? std::move(parts[0].grad) : ParameterSet{};
  out.loss = parts[0].loss;
  for (std::size_t c = 1; c < parts.size(); ++c) {
    out.loss += parts[c].loss;
    if (want_grad) out.grad.axpy(1.0, parts[c].grad);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss *= inv_n;
  if (want_grad) out.grad.scale(inv_n);
  return out;
}

}  // namespace

LossGradient loss_and_gradient(const ModelSpec& spec, const ParameterSet& w,
                               const RealMatrix& x, const std::vector<int>& y,
                               const ExecutionPolicy& policy) {
  return evaluate(spec, w, x, y, policy, true);
}

double mean_loss(const ModelSpec& spec, const ParameterSet& w, const RealMatrix& x,
                 const std::vector<int>& y, const ExecutionPolicy& policy) {
  return evaluate(spec, w, x, y, policy, false).loss;
}

LossGradient local_gradient(const ModelSpec& spec, const ParameterSet& w,
                            const DeviceShard& shard, Index d_total,
                            const ExecutionPolicy& policy) {
  if (shard.empty()) fail(ErrorCode::kEmptyData, "local_gradient: empty shard");
  require_shape(d_total >= shard.size(), "local_gradient: total sample count below shard size");
  LossGradient out = loss_and_gradient(spec, w, shard.features, shard.labels, policy);
  if (!std::isfinite(out.loss) || !out.grad.finite()) {
    fail(ErrorCode::kNumericalDivergence, "local loss is not finite");
  }
  out.grad.scale(static_cast<double>(shard.size()) / static_cast<double>(d_total));
  return out;
}

double accuracy(const ModelSpec& spec, const ParameterSet& w, const Dataset& data) {
  check_model(spec, w, data.features, data.labels);
  if (data.size() == 0) fail(ErrorCode::kEmptyData, "accuracy over zero samples");
  RealMatrix logits;
  if (spec.kind == ModelKind::kLogistic) {
    logits = data.features * w.blocks[0].data.transpose();
  } else {
    RealMatrix h = data.features * w.blocks[0].data.transpose();
    h.rowwise() += w.vectors[0].transpose();
    h = h.array().tanh().matrix();
    logits = h * w.blocks[1].data.transpose();
    logits.rowwise() += w.vectors[1].transpose();
  }
  Index correct = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    logits.row(i).maxCoeff(&best);
    if (best == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ParameterSet global_step(const ParameterSet& w, const ParameterSet& g_hat, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    fail(ErrorCode::kInvalidStepSize, "learning rate must be a positive finite number");
  }
  ParameterSet out = w;
  out.axpy(-eta, g_hat);
  return out;
}

}  // namespace otalc
