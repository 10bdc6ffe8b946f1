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

#ifndef OTALC_ERROR_HPP_
#define OTALC_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace otalc {

enum class ErrorCode {
  kDegenerateMatrix,
  kSingularGram,
  kRankDeficient,
  kShapeError,
  kInvalidStepSize,
  kInvalidActiveCount,
  kInvalidK,
  kCoherenceExceeded,
  kChannelDegenerate,
  kBeamformerSingular,
  kEmptyData,
  kNumericalDivergence,
  kInvalidConfig,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kShapeError, what);
}

}  // namespace otalc

#endif  // OTALC_ERROR_HPP_
