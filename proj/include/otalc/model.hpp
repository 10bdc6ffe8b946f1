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

// Desk-scale classifiers trained with mean multiclass cross-entropy.
//
//   logistic: logits = x W^T                      blocks {W (C x d)}
//   mlp:      h = tanh(x W1^T + b1)
//             logits = h W2^T + b2                blocks {W1 (H x d), W2 (C x H)}
//                                                 vectors {b1 (H), b2 (C)}
//
// Matrix parameters are the compressible gradient blocks; bias vectors are
// sent uncompressed.

#ifndef OTALC_MODEL_HPP_
#define OTALC_MODEL_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "otalc/compression.hpp"
#include "otalc/data.hpp"
#include "otalc/kernels.hpp"

namespace otalc {

enum class ModelKind { kLogistic, kMlp };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  int classes = 2;
  Index dim = 1;
  Index hidden = 32;  // mlp only
};

struct BlockShape {
  Index rows = 0;
  Index cols = 0;
};

struct ParameterSet {
  std::vector<GradientBlock> blocks;
  std::vector<RealVector> vectors;

  static ParameterSet zeros_like(const ParameterSet& other);
  // this += alpha * other; shapes must match.
  void axpy(double alpha, const ParameterSet& other);
  void scale(double alpha);
  double squared_norm() const;
  bool finite() const;
  bool same_shape(const ParameterSet& other) const;
  Index scalar_count() const;
};

std::vector<BlockShape> block_schema(const ModelSpec& spec);
std::vector<Index> vector_schema(const ModelSpec& spec);

// Logistic weights start at zero. MLP weights are N(0, 1/fan_in) from the
// seeded init stream, biases zero.
ParameterSet init_model(const ModelSpec& spec, std::uint64_t seed);

struct LossGradient {
  double loss = 0.0;  // mean cross-entropy
  ParameterSet grad;  // gradient of the mean loss
};

// Samples are processed in fixed chunks whose partial sums are combined in
// chunk order, so every backend returns bit-identical results.
inline constexpr Index kGradientChunk = 64;

LossGradient loss_and_gradient(const ModelSpec& spec, const ParameterSet& w,
                               const RealMatrix& x, const std::vector<int>& y,
                               const ExecutionPolicy& policy = {});

double mean_loss(const ModelSpec& spec, const ParameterSet& w,
                 const RealMatrix& x, const std::vector<int>& y,
                 const ExecutionPolicy& policy = {});

// (D_k / D) times the gradient of the shard's mean loss.
// Throws kEmptyData for an empty shard and kNumericalDivergence when the
// loss is not finite.
LossGradient local_gradient(const ModelSpec& spec, const ParameterSet& w,
                            const DeviceShard& shard, Index d_total,
                            const ExecutionPolicy& policy = {});

double accuracy(const ModelSpec& spec, const ParameterSet& w, const Dataset& data);

// W - eta * g_hat. Throws kInvalidStepSize / kShapeError.
ParameterSet global_step(const ParameterSet& w, const ParameterSet& g_hat, double eta);

}  // namespace otalc

#endif  // OTALC_MODEL_HPP_
