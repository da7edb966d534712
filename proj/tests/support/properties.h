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

// Random fixtures and the property checks shared by the unit tests and the
// acceptance runner.

#ifndef TABSAN_TESTS_SUPPORT_PROPERTIES_H_
#define TABSAN_TESTS_SUPPORT_PROPERTIES_H_

#include <cstdint>
#include <string>

#include "tabsan/dataset.h"
#include "tabsan/random.h"
#include "tabsan/report.h"

namespace tabsan::testing {

// A schema with 1-4 categorical and 1-3 continuous feature columns plus two
// binary label columns named "priv" and "util". Continuous columns carry
// normalization stats.
FeatureSchema RandomSchema(Rng& rng);
// Valid rows; integer-valued columns get nonnegative integers.
RecordTable RandomTable(const FeatureSchema& schema, size_t rows, Rng& rng);
EvaluationReport RandomReport(Rng& rng);

// Linearly separable-ish table: labels depend on the first continuous
// column (private) and the first categorical column (utility).
RecordTable SignalTable(size_t rows, uint64_t seed);

struct CheckResult {
  bool pass = true;
  size_t cases = 0;
  // Largest observed error for numeric checks.
  double worst = 0.0;
  std::string detail;  // first failure
};

// Analytic gradients of L for both update targets against central finite
// differences over random small models, batches and hyperparameters.
CheckResult CheckAdversarialGradients(size_t configs, uint64_t seed,
                                      double tolerance);

// Accuracy, macro F1, fairness, M_p/M_u clamping and flip counts against
// brute-force recomputation.
CheckResult CheckMetricOracles(size_t instances, uint64_t seed);

// decode(encode(t)) == t.
CheckResult CheckDatasetRoundTrip(size_t cases, uint64_t seed);
// Prompt built, answered by an oracle that echoes the requested format with
// randomized cosmetic noise, parsed back to the original record.
CheckResult CheckPromptRoundTrip(size_t cases, uint64_t seed);
// ParseReport(SerializeReport(r)) == r, and the text is a fixed point.
CheckResult CheckReportRoundTrip(size_t cases, uint64_t seed);

// Supervised prompts name both true labels exactly once (as "is <label>"
// statements); the unsupervised prompt names neither.
CheckResult CheckPromptLabels(size_t cases, uint64_t seed);
// Well-formed, malformed and refusal responses map to their statuses, and
// fallback policies resolve them as documented.
CheckResult CheckParserContract(size_t cases, uint64_t seed);

}  // namespace tabsan::testing

#endif  // TABSAN_TESTS_SUPPORT_PROPERTIES_H_
