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


#ifndef TABSAN_RUNNER_H_
#define TABSAN_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabsan/adversarial.h"
#include "tabsan/classifiers.h"
#include "tabsan/dataset.h"
#include "tabsan/llm_client.h"
#include "tabsan/mechanism.h"
#include "tabsan/prompting.h"
#include "tabsan/report.h"

namespace tabsan {

struct MechanismSpec {
  enum class Kind { kNone, kAlfr, kUaePupet, kLlm };
  Kind kind = Kind::kNone;
  VariantTag variant = VariantTag::kP1;  // kLlm only

  // "none", "alfr", "uae_pupet", "llm:p1", "llm:p2", "llm:combined",
  // "llm:unsupervised".
  static MechanismSpec Parse(std::string_view id);
  std::string id() const;
  std::string label() const;
};

// Rewrites one column of each record; the mock backend answers sanitization
// prompts with the rewritten record.
struct MockTransform {
  std::string column;
  std::map<std::string, std::string> replace;  // categorical
  double offset = 0.0;                         // continuous
};

struct BackendConfig {
  std::string kind = "mock";  // "mock" or "live"
  // Explicit mock entries; they take precedence over transforms.
  std::optional<std::filesystem::path> script;
  // Empty list with kind "mock" means echo the input record.
  std::vector<MockTransform> transforms;
  // Mock answers to zero-shot classification prompts: "none" (no entries),
  // "truth" or "majority".
  std::string classify = "none";
  LiveBackendConfig live;
};

struct BudgetConfig {
  int64_t limit = 500000;
  int64_t window_seconds = 86400;
  std::string policy = "reject";  // or "wait"
};

struct LlmConfig {
  std::string model_id = "gpt-4-1106-preview";
  double temperature = 0.1;
  int max_output_tokens = 512;
  std::string fallback = "retry:2";
  int parallelism = 4;
  std::optional<std::filesystem::path> templates_dir;
};

struct ExperimentConfig {
  // Optional when the data is passed to RunExperiment directly.
  std::filesystem::path data_path;
  std::filesystem::path schema_path;
  int task = 1;
  std::vector<MechanismSpec> mechanisms;
  std::vector<ClassifierKind> classifiers = {ClassifierKind::kLR, ClassifierKind::kRF,
                                             ClassifierKind::kGBT, ClassifierKind::kNN};
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  size_t test_size = 1000;
  // Cap on auxiliary rows; unset uses every non-test row.
  std::optional<size_t> aux_size;
  AdvConfig adversarial;
  ClassifierParams classifier_params;
  BackendConfig backend;
  BudgetConfig budget;
  LlmConfig llm;
  bool adaptive_attacker = false;
  int histogram_bins = 20;

  // Relative paths resolve against `base_dir`. "none" is always placed first.
  static ExperimentConfig FromJson(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {});
  static ExperimentConfig LoadFile(const std::filesystem::path& path);
  nlohmann::json ToJson() const;
  std::string Hash() const;
  void Validate() const;
};

// Task 1 keeps the schema roles (private gender, utility income); task 2
// swaps them.
FeatureSchema SchemaForTask(const FeatureSchema& base, int task);

// Dataset loaded and role-adjusted for the configured task.
RecordTable LoadExperimentData(const ExperimentConfig& config);

// Deterministic per-purpose seeds derived from an experiment seed.
uint64_t DeriveSeed(uint64_t seed, std::string_view purpose);

// The auxiliary/test split used for one experiment seed.
DatasetSplit SplitForSeed(const RecordTable& data, const ExperimentConfig& config,
                          uint64_t seed);

// Mock backend built from config for a given test table.
std::unique_ptr<MockBackend> BuildMockBackend(const BackendConfig& config,
                                              const RecordTable& test);
Record ApplyTransforms(const Record& record, const FeatureSchema& schema,
                       const std::vector<MockTransform>& transforms);

struct LlmSanitizeResult {
  MechanismOutput output;
  std::vector<std::string> fingerprints;
  std::vector<DispatchResult> dispatch;
};

LlmSanitizeResult SanitizeWithLlm(const RecordTable& table, VariantTag variant,
                                  const PromptConfig& prompts,
                                  const FallbackPolicy& policy, Backend& backend,
                                  TokenBudget& budget,
                                  const ChatRequest& request_template,
                                  int parallelism);

ChatRequest RequestTemplate(const LlmConfig& llm);
PromptConfig LoadPrompts(const LlmConfig& llm);
std::unique_ptr<TokenBudget> MakeBudget(const BudgetConfig& config);

struct RunHooks {
  // Overrides backend construction, e.g. to inject a test double. Called once
  // per (seed, mechanism) that needs a backend.
  std::function<std::unique_ptr<Backend>(uint64_t seed, const MechanismSpec&,
                                         const RecordTable& test)>
      backend_factory;
  std::function<void(std::string_view)> log;
};

// Runs every mechanism for every seed and aggregates. Stage failures are
// recorded in the report (which is then marked incomplete) instead of
// aborting the run.
EvaluationReport RunExperiment(const ExperimentConfig& config,
                               const RecordTable& data, const RunHooks& hooks = {});
EvaluationReport RunExperiment(const ExperimentConfig& config,
                               const RunHooks& hooks = {});

// Sanitizes `test` with one mechanism, training adversarial mechanisms on
// `aux`.
struct SanitizeRun {
  MechanismOutput output;
  std::vector<std::string> fingerprints;
};
SanitizeRun RunMechanism(const MechanismSpec& mechanism,
                         const ExperimentConfig& config, const RecordTable& aux,
                         const RecordTable& test, uint64_t seed,
                         const RunHooks& hooks = {});

struct FixtureCheck {
  std::string mechanism;
  int task = 1;
  std::string metric;  // "M_p" or "M_u"
  double computed = 0.0;
  double expected = 0.0;
  bool pass = false;
};

// Recomputes the reference tradeoff scores from the reference summary
// accuracies embedded in the library and checks each within ±0.01.
std::vector<FixtureCheck> VerifyReferenceFixtures();

}  // namespace tabsan

#endif  // TABSAN_RUNNER_H_
