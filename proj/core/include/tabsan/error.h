// Copyright 2026 The tabsan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TABSAN_ERROR_H_
#define TABSAN_ERROR_H_

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tabsan {

enum class ErrorCode {
  kInvalidArgument,
  kConfigError,
  kIoFailure,
  // dataset
  kMissingColumn,
  kUnknownCategory,
  kMalformedNumber,
  kDegenerateColumn,
  kMissingStats,
  kLayoutMismatch,
  // prompting
  kLabelsRequired,
  kLabelsForbidden,
  // llm_client
  kBudgetExhausted,
  kTransportFailure,
  kAuthFailure,
  kMockMiss,
  // adversarial / classifiers
  kDimensionMismatch,
  kNonFiniteGradient,
  kSchemaMismatch,
  kSingleClassTrainingSet,
  // metrics
  kLengthMismatch,
  kDegenerateBaseline,
  kUndefinedRate,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported as tabsan::Error. `row()` is set for
// errors that point at a specific input record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<size_t> row = std::nullopt);

  ErrorCode code() const { return code_; }
  std::optional<size_t> row() const { return row_; }

 private:
  ErrorCode code_;
  std::optional<size_t> row_;
};

}  // namespace tabsan

#endif  // TABSAN_ERROR_H_
