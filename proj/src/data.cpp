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

#include "otalc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace otalc {

namespace {

template <class T>
void shuffle_with(std::vector<T>& v, RngStream& stream) {
  // Explicit Fisher-Yates so the permutation does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

}  // namespace

void Dataset::validate() const {
  if (features.rows() == 0) fail(ErrorCode::kEmptyData, "dataset has no samples");
  require_shape(static_cast<Index>(labels.size()) == features.rows(),
                "dataset: label count does not match sample count");
  for (int y : labels) {
    if (y < 0 || y >= classes) fail(ErrorCode::kInvalidConfig, "dataset: label out of range");
  }
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.classes = classes;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

DeviceShard make_shard(const Dataset& data, std::vector<Index> rows) {
  std::sort(rows.begin(), rows.end());
  DeviceShard shard;
  shard.features.resize(static_cast<Index>(rows.size()), data.dim());
  shard.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    shard.features.row(static_cast<Index>(i)) = data.features.row(rows[i]);
    shard.labels.push_back(data.labels[static_cast<std::size_t>(rows[i])]);
  }
  shard.source_index = std::move(rows);
  return shard;
}

SplitDataset make_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) fail(ErrorCode::kInvalidConfig, "mixture needs at least two classes");
  if (spec.dim < 1 || spec.train_samples < 1 || spec.test_samples < 1) {
    fail(ErrorCode::kEmptyData, "mixture: dimension and sample counts must be positive");
  }
  RngStream mean_stream(seed, StreamId{0, kServerDevice, Purpose::kData, 0});
  RealMatrix means;
  if (spec.latent_dim > 0 && spec.latent_dim < spec.dim) {
    const RealMatrix z = gaussian_matrix(spec.classes, spec.latent_dim, mean_stream);
    const RealMatrix basis = orthonormalize_columns(gaussian_matrix(spec.dim, spec.latent_dim, mean_stream));
    const double gain = std::sqrt(static_cast<double>(spec.dim) / static_cast<double>(spec.latent_dim));
    means = (spec.separation * gain) * z * basis.transpose();
  } else {
    means = spec.separation * gaussian_matrix(spec.classes, spec.dim, mean_stream);
  }

  auto draw = [&](Index count, std::uint32_t lane) {
    RngStream stream(seed, StreamId{0, kServerDevice, Purpose::kData, lane});
    Dataset d;
    d.classes = spec.classes;
    d.features = spec.noise * gaussian_matrix(count, spec.dim, stream);
    d.labels.resize(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      const int y = static_cast<int>(i % spec.classes);
      d.labels[static_cast<std::size_t>(i)] = y;
      d.features.row(i) += means.row(y);
    }
    return d;
  };
  return SplitDataset{draw(spec.train_samples, 1), draw(spec.test_samples, 2)};
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open dataset file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && parse_double(fields[i], values[i]);
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = fields.size();
        continue;  // header
      }
      fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (fields.size() < 2) {
      fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": need features and a label");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": expected " +
                                    std::to_string(width) + " fields");
    }
    const double label = values.back();
    if (label < 0 || label != std::floor(label)) {
      fail(ErrorCode::kIoError, path + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    values.pop_back();
    rows.push_back(std::move(values));
    labels.push_back(static_cast<int>(label));
  }
  if (rows.empty()) fail(ErrorCode::kEmptyData, "dataset file '" + path + "' has no samples");

  Dataset d;
  d.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j + 1 < width; ++j)
      d.features(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  d.labels = std::move(labels);
  d.classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  return d;
}

SplitDataset split_dataset(const Dataset& all, double test_fraction, std::uint64_t seed) {
  all.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::kInvalidConfig, "test_fraction must be in (0, 1)");
  }
  std::vector<Index> order(static_cast<std::size_t>(all.size()));
  std::iota(order.begin(), order.end(), Index{0});
  RngStream stream(seed, StreamId{0, kServerDevice, Purpose::kData, 3});
  shuffle_with(order, stream);
  const auto n_test = static_cast<std::size_t>(
      std::max<Index>(1, std::llround(test_fraction * static_cast<double>(all.size()))));
  if (n_test >= order.size()) fail(ErrorCode::kEmptyData, "split leaves no training samples");
  const std::vector<Index> train(order.begin(), order.end() - static_cast<long>(n_test));
  const std::vector<Index> test(order.end() - static_cast<long>(n_test), order.end());
  return SplitDataset{all.subset(train), all.subset(test)};
}

std::vector<DeviceShard> partition_iid(const Dataset& data, std::size_t devices,
                                       RngStream& stream) {
  if (data.size() == 0) fail(ErrorCode::kEmptyData, "partition_iid: empty dataset");
  if (devices == 0) fail(ErrorCode::kInvalidConfig, "partition_iid: need at least one device");
  if (static_cast<std::size_t>(data.size()) < devices) {
    fail(ErrorCode::kEmptyData, "partition_iid: fewer samples than devices");
  }
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  shuffle_with(order, stream);
  std::vector<DeviceShard> shards;
  shards.reserve(devices);
  const std::size_t n = order.size();
  for (std::size_t k = 0; k < devices; ++k) {
    const std::size_t begin = k * n / devices;
    const std::size_t end = (k + 1) * n / devices;
    shards.push_back(make_shard(data, std::vector<Index>(order.begin() + static_cast<long>(begin),
                                                         order.begin() + static_cast<long>(end))));
  }
  return shards;
}

RealMatrix dirichlet_proportions(int classes, std::size_t devices, double alpha,
                                 RngStream& stream) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail(ErrorCode::kInvalidConfig, "dirichlet alpha must be a positive finite number");
  }
  RealMatrix p(classes, static_cast<Index>(devices));
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (int c = 0; c < classes; ++c) {
    double total = 0.0;
    for (std::size_t k = 0; k < devices; ++k) {
      const double g = gamma(stream.engine());
      p(c, static_cast<Index>(k)) = g;
      total += g;
    }
    if (!(total > 0.0)) {
      // Every gamma draw underflowed (tiny alpha); give the class to one device.
      p.row(c).setZero();
      p(c, static_cast<Index>(stream.below(devices))) = 1.0;
    } else {
      p.row(c) /= total;
    }
  }
  return p;
}

std::vector<DeviceShard> partition_dirichlet(const Dataset& data,
                                             std::size_t devices, double alpha,
                                             RngStream& stream) {
  if (data.size() == 0) fail(ErrorCode::kEmptyData, "partition_dirichlet: empty dataset");
  if (devices == 0) fail(ErrorCode::kInvalidConfig, "partition_dirichlet: need at least one device");
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(data.classes));
  for (Index i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
  }
  const RealMatrix props = dirichlet_proportions(data.classes, devices, alpha, stream);
  std::vector<std::vector<Index>> assigned(devices);
  for (int c = 0; c < data.classes; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) continue;
    shuffle_with(members, stream);
    const double n = static_cast<double>(members.size());
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < devices; ++k) {
      cumulative += props(c, static_cast<Index>(k));
      const std::size_t end =
          k + 1 == devices ? members.size()
                           : std::min(members.size(), static_cast<std::size_t>(std::llround(cumulative * n)));
      for (std::size_t i = begin; i < std::max(begin, end); ++i) assigned[k].push_back(members[i]);
      begin = std::max(begin, end);
    }
  }
  std::vector<DeviceShard> shards;
  shards.reserve(devices);
  for (auto& rows : assigned) shards.push_back(make_shard(data, std::move(rows)));
  return shards;
}

}  // namespace otalc
