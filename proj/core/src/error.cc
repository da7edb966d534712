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

#include "tabsan/error.h"

namespace tabsan {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kMalformedNumber: return "MalformedNumber";
    case ErrorCode::kDegenerateColumn: return "DegenerateColumn";
    case ErrorCode::kMissingStats: return "MissingStats";
    case ErrorCode::kLayoutMismatch: return "LayoutMismatch";
    case ErrorCode::kLabelsRequired: return "LabelsRequired";
    case ErrorCode::kLabelsForbidden: return "LabelsForbidden";
    case ErrorCode::kBudgetExhausted: return "BudgetExhausted";
    case ErrorCode::kTransportFailure: return "TransportFailure";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kMockMiss: return "MockMiss";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kSingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kUndefinedRate: return "UndefinedRate";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<size_t> row)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code),
      row_(row) {}

}  // namespace tabsan
