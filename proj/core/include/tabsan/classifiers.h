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


#ifndef TABSAN_CLASSIFIERS_H_
#define TABSAN_CLASSIFIERS_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tabsan/dataset.h"
#include "tabsan/llm_client.h"
#include "tabsan/prompting.h"
#include "tabsan/trees.h"

namespace tabsan {

enum class ClassifierKind { kLR, kRF, kGBT, kNN, kLLMZeroShot };
std::string_view ClassifierKindName(ClassifierKind kind);     // "lr", ...
std::string_view ClassifierDisplayName(ClassifierKind kind);  // "LR", ...
ClassifierKind ParseClassifierKind(std::string_view name);

enum class Target { kPrivate, kUtility };
std::string_view TargetName(Target t);

struct LogisticParams {
  int iterations = 300;
  double l2 = 1e-4;

  nlohmann::json ToJson() const;
  static LogisticParams FromJson(const nlohmann::json& j);
};

struct NeuralParams {
  int hidden_dim = 64;
  int epochs = 20;
  int batch_size = 256;
  double learning_rate = 1e-3;

  nlohmann::json ToJson() const;
  static NeuralParams FromJson(const nlohmann::json& j);
};

struct ClassifierParams {
  LogisticParams lr;
  ForestParams rf;
  BoostingParams gbt;
  NeuralParams nn;

  nlohmann::json ToJson() const;
  static ClassifierParams FromJson(const nlohmann::json& j);
};

// Probability of class 1 from an encoded feature matrix.
class ProbabilityModel {
 public:
  virtual ~ProbabilityModel() = default;
  virtual std::vector<double> PredictProba(const Matrix& x) const = 0;
  virtual nlohmann::json ToJson() const = 0;
};

class TrainedClassifier {
 public:
  ClassifierKind kind() const { return kind_; }
  Target target() const { return target_; }
  uint64_t seed() const { return seed_; }
  // Schema holding the normalization stats fitted on the training table.
  const FeatureSchema& schema() const { return schema_; }
  int majority_class() const { return majority_class_; }
  const std::vector<Slice>& feature_layout() const { return layout_; }

  // Throws SchemaMismatch unless the table has the training structure.
  // LLM zero-shot classifiers cannot predict here; use LlmZeroShotPredict.
  std::vector<int> Predict(const RecordTable& table) const;
  std::vector<double> PredictProba(const RecordTable& table) const;

  nlohmann::json ToJson() const;
  static TrainedClassifier FromJson(const nlohmann::json& j);

 private:
  friend TrainedClassifier Fit(ClassifierKind, Target, const RecordTable&,
                               uint64_t, const ClassifierParams&);

  Matrix EncodeFor(const RecordTable& table) const;

  ClassifierKind kind_ = ClassifierKind::kLR;
  Target target_ = Target::kPrivate;
  uint64_t seed_ = 0;
  FeatureSchema schema_;
  std::vector<Slice> layout_;
  int majority_class_ = 0;
  std::shared_ptr<const ProbabilityModel> model_;
};

// Trains on the encoded sanitize columns only. The label columns never enter
// the feature matrix. Throws SingleClassTrainingSet.
TrainedClassifier Fit(ClassifierKind kind, Target target,
                      const RecordTable& train, uint64_t seed,
                      const ClassifierParams& params = {});

std::vector<int> TargetLabels(const RecordTable& table, Target target);
const ColumnSpec& TargetColumn(const FeatureSchema& schema, Target target);

struct ZeroShotResult {
  std::vector<int> predictions;
  // Rows whose answer could not be parsed (or whose request failed) and
  // fell back to `fallback_class`.
  std::vector<bool> fallback;
  size_t fallback_count = 0;
  std::vector<DispatchResult> dispatch;
};

// Asks the backend for each row's target class. Requests use channel
// "classify:<target column>" and the row position as index.
ZeroShotResult LlmZeroShotPredict(const RecordTable& table, Target target,
                                  Backend& backend, TokenBudget& budget,
                                  const PromptConfig& prompts,
                                  const ChatRequest& request_template,
                                  int fallback_class, int parallelism = 1);

// Building blocks, exposed for tests and benchmarks.
class LogisticRegression : public ProbabilityModel {
 public:
  static std::shared_ptr<LogisticRegression> Fit(const Matrix& x,
                                                 std::span<const int> y,
                                                 const LogisticParams& params);
  std::vector<double> PredictProba(const Matrix& x) const override;
  nlohmann::json ToJson() const override;
  static std::shared_ptr<LogisticRegression> FromJson(const nlohmann::json& j);

  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Eigen::VectorXd w_;
  double b_ = 0.0;
};

}  // namespace tabsan

#endif  // TABSAN_CLASSIFIERS_H_
