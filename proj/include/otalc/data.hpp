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

#ifndef OTALC_DATA_HPP_
#define OTALC_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "otalc/numerics.hpp"

namespace otalc {

struct Dataset {
  RealMatrix features;      // one sample per row
  std::vector<int> labels;  // in [0, classes)
  int classes = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  void validate() const;
  Dataset subset(const std::vector<Index>& rows) const;
};

struct DeviceShard {
  RealMatrix features;
  std::vector<int> labels;
  std::vector<Index> source_index;  // row of each sample in the parent dataset

  Index size() const { return features.rows(); }
  bool empty() const { return features.rows() == 0; }
};

struct MixtureSpec {
  int classes = 10;
  Index dim = 32;
  Index train_samples = 2000;
  Index test_samples = 1000;
  double separation = 1.0;  // std-dev of the class means
  double noise = 1.0;       // std-dev of within-class noise
  Index latent_dim = 0;     // 0 or >= dim: means span the full space
};

struct SplitDataset {
  Dataset train;
  Dataset test;
};

// Class means ~ N(0, separation^2 I); samples = mean + N(0, noise^2 I).
// With 0 < latent_dim < dim the means are restricted to a random
// latent_dim-dimensional subspace, rescaled to keep the same expected norm.
// Labels are assigned round-robin so every class is present.
SplitDataset make_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed);

// Comma-separated rows of numeric features ending in an integer label.
// A leading non-numeric row is treated as a header. Throws kIoError /
// kEmptyData.
Dataset load_csv(const std::string& path);

// Seeded shuffle then split off the last `test_fraction` of the samples.
SplitDataset split_dataset(const Dataset& all, double test_fraction,
                           std::uint64_t seed);

// Random disjoint shards whose sizes differ by at most one.
std::vector<DeviceShard> partition_iid(const Dataset& data, std::size_t devices,
                                       RngStream& stream);

// For each class, device proportions ~ Dirichlet(alpha 1_K); the class's
// shuffled samples are cut at the cumulative proportions. Shards may come
// out empty for small alpha.
std::vector<DeviceShard> partition_dirichlet(const Dataset& data,
                                             std::size_t devices, double alpha,
                                             RngStream& stream);

// Per-class proportions across devices that partition_dirichlet draws;
// exposed for tests. Rows are classes, columns devices.
RealMatrix dirichlet_proportions(int classes, std::size_t devices, double alpha,
                                 RngStream& stream);

DeviceShard make_shard(const Dataset& data, std::vector<Index> rows);

}  // namespace otalc

#endif  // OTALC_DATA_HPP_
