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

#include "tabsan/mechanism.h"

namespace tabsan {

size_t MechanismOutput::kept() const {
  size_t n = 0;
  for (auto d : dispositions) n += d != Disposition::kDropped ? 1 : 0;
  return n;
}

std::vector<size_t> MechanismOutput::KeptIndices() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < dispositions.size(); ++i) {
    if (dispositions[i] != Disposition::kDropped) out.push_back(i);
  }
  return out;
}

MechanismOutput Passthrough(const RecordTable& table) {
  MechanismOutput out;
  out.table = table;
  out.dispositions.assign(table.size(), Disposition::kPassthrough);
  out.mechanism_id = "none";
  out.config = nlohmann::json::object();
  out.counts.passthrough = table.size();
  return out;
}

}  // namespace tabsan
