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

// Execution backends. Every parallel loop in the library writes each
// iteration's result into its own slot and reduces the slots afterwards in
// index order, so the serial backend is the bit-exact reference for the
// OpenMP one.

#ifndef OTALC_KERNELS_HPP_
#define OTALC_KERNELS_HPP_

#include <cstddef>
#include <exception>
#include <string_view>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace otalc {

enum class Backend { kSerial, kOpenMP };

std::string_view to_string(Backend b);
Backend backend_from_string(std::string_view s);

struct ExecutionPolicy {
  Backend backend = Backend::kOpenMP;
  int threads = 0;  // 0: OpenMP default
};

namespace kernels {

inline bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

// Calls fn(i) for i in [0, n). Under the OpenMP backend iterations may run
// concurrently; if any throw, the exception of the lowest index is rethrown.
template <class Fn>
void for_each_index(const ExecutionPolicy& policy, std::size_t n, Fn&& fn) {
  if (policy.backend == Backend::kSerial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
#ifdef _OPENMP
  const int threads = policy.threads > 0 ? policy.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Evaluates fn(i) into a vector, one slot per index.
template <class T, class Fn>
std::vector<T> map_indices(const ExecutionPolicy& policy, std::size_t n, Fn&& fn) {
  std::vector<T> out(n);
  for_each_index(policy, n, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace kernels
}  // namespace otalc

#endif  // OTALC_KERNELS_HPP_
