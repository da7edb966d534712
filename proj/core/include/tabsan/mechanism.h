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


#ifndef TABSAN_MECHANISM_H_
#define TABSAN_MECHANISM_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "tabsan/dataset.h"
#include "tabsan/prompting.h"

namespace tabsan {

// A sanitized table aligned row-for-row with its input. Rows whose
// disposition is kDropped carry the original record and must be excluded
// from scoring.
struct MechanismOutput {
  RecordTable table;
  std::vector<Disposition> dispositions;
  std::string mechanism_id;
  nlohmann::json config;
  StatusCounts counts;

  size_t kept() const;
  // Indices of rows that were not dropped.
  std::vector<size_t> KeptIndices() const;
};

// The "none" mechanism.
MechanismOutput Passthrough(const RecordTable& table);

}  // namespace tabsan

#endif  // TABSAN_MECHANISM_H_
