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

#include "tabsan/classifiers.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabsan/error.h"
#include "tabsan/nn.h"
#include "tabsan/random.h"

namespace tabsan {

namespace {

double Sigmoid(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

class ForestModel : public ProbabilityModel {
 public:
  explicit ForestModel(RandomForest f) : forest_(std::move(f)) {}
  std::vector<double> PredictProba(const Matrix& x) const override {
    return forest_.PredictProba(x);
  }
  nlohmann::json ToJson() const override { return forest_.ToJson(); }

 private:
  RandomForest forest_;
};

class BoostModel : public ProbabilityModel {
 public:
  explicit BoostModel(GradientBoosting g) : boost_(std::move(g)) {}
  std::vector<double> PredictProba(const Matrix& x) const override {
    return boost_.PredictProba(x);
  }
  nlohmann::json ToJson() const override { return boost_.ToJson(); }

 private:
  GradientBoosting boost_;
};

class NeuralModel : public ProbabilityModel {
 public:
  explicit NeuralModel(Mlp mlp) : mlp_(std::move(mlp)) {}

  static std::shared_ptr<NeuralModel> Fit(const Matrix& x, std::span<const int> y,
                                          const NeuralParams& p, uint64_t seed) {
    Rng init = Rng(seed).Fork(1);
    Rng order_rng = Rng(seed).Fork(2);
    const int dims[] = {static_cast<int>(x.cols()), p.hidden_dim, 2};
    Mlp mlp(dims, Activation::kRelu, Activation::kIdentity, init);
    Adam adam({p.learning_rate});
    const auto n = static_cast<size_t>(x.rows());
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    MlpTape tape;
    MlpGrads grads = mlp.ZeroGrads();
    std::vector<ParamBlock> blocks;
    AppendBlocks(mlp, grads, &blocks);
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
      order_rng.Shuffle(std::span<size_t>(order));
      for (size_t start = 0; start < n; start += static_cast<size_t>(p.batch_size)) {
        const size_t end = std::min(n, start + static_cast<size_t>(p.batch_size));
        Matrix batch(static_cast<Eigen::Index>(end - start), x.cols());
        std::vector<int> labels(end - start);
        for (size_t i = start; i < end; ++i) {
          batch.row(static_cast<Eigen::Index>(i - start)) =
              x.row(static_cast<Eigen::Index>(order[i]));
          labels[i - start] = y[order[i]];
        }
        const Matrix logits = mlp.Forward(batch, &tape);
        grads.SetZero();
        mlp.Backward(tape, CrossEntropyGrad(logits, labels), &grads);
        if (!grads.AllFinite()) {
          throw Error(ErrorCode::kNonFiniteGradient, "neural classifier diverged");
        }
        adam.Step(blocks, -1.0);
      }
    }
    return std::make_shared<NeuralModel>(std::move(mlp));
  }

  std::vector<double> PredictProba(const Matrix& x) const override {
    const Matrix p = LogSoftmax(mlp_.Forward(x)).array().exp().matrix();
    std::vector<double> out(static_cast<size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) out[static_cast<size_t>(r)] = p(r, 1);
    return out;
  }
  nlohmann::json ToJson() const override { return mlp_.ToJson(); }

 private:
  Mlp mlp_;
};

std::vector<int> Threshold(const std::vector<double>& proba) {
  std::vector<int> out(proba.size());
  for (size_t i = 0; i < proba.size(); ++i) out[i] = proba[i] > 0.5 ? 1 : 0;
  return out;
}

}  // namespace

std::string_view ClassifierKindName(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLR: return "lr";
    case ClassifierKind::kRF: return "rf";
    case ClassifierKind::kGBT: return "gbt";
    case ClassifierKind::kNN: return "nn";
    case ClassifierKind::kLLMZeroShot: return "llm_zero_shot";
  }
  return "lr";
}

std::string_view ClassifierDisplayName(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLR: return "LR";
    case ClassifierKind::kRF: return "RF";
    case ClassifierKind::kGBT: return "GBT (xgboost-family)";
    case ClassifierKind::kNN: return "NN";
    case ClassifierKind::kLLMZeroShot: return "LLM zero-shot";
  }
  return "LR";
}

ClassifierKind ParseClassifierKind(std::string_view name) {
  for (auto k : {ClassifierKind::kLR, ClassifierKind::kRF, ClassifierKind::kGBT,
                 ClassifierKind::kNN, ClassifierKind::kLLMZeroShot}) {
    if (ClassifierKindName(k) == name) return k;
  }
  throw Error(ErrorCode::kConfigError, "unknown classifier " + std::string(name));
}

std::string_view TargetName(Target t) {
  return t == Target::kPrivate ? "private" : "utility";
}

nlohmann::json LogisticParams::ToJson() const {
  return {{"iterations", iterations}, {"l2", l2}};
}

LogisticParams LogisticParams::FromJson(const nlohmann::json& j) {
  LogisticParams p;
  p.iterations = j.value("iterations", p.iterations);
  p.l2 = j.value("l2", p.l2);
  if (p.iterations < 0 || !(p.l2 >= 0)) {
    throw Error(ErrorCode::kConfigError, "invalid logistic regression parameters");
  }
  return p;
}

nlohmann::json NeuralParams::ToJson() const {
  return {{"hidden_dim", hidden_dim}, {"epochs", epochs},
          {"batch_size", batch_size}, {"learning_rate", learning_rate}};
}

NeuralParams NeuralParams::FromJson(const nlohmann::json& j) {
  NeuralParams p;
  p.hidden_dim = j.value("hidden_dim", p.hidden_dim);
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  if (p.hidden_dim < 1 || p.epochs < 0 || p.batch_size < 1 ||
      !(p.learning_rate > 0)) {
    throw Error(ErrorCode::kConfigError, "invalid neural classifier parameters");
  }
  return p;
}

nlohmann::json ClassifierParams::ToJson() const {
  return {{"lr", lr.ToJson()}, {"rf", rf.ToJson()}, {"gbt", gbt.ToJson()},
          {"nn", nn.ToJson()}};
}

ClassifierParams ClassifierParams::FromJson(const nlohmann::json& j) {
  ClassifierParams p;
  const auto empty = nlohmann::json::object();
  try {
    p.lr = LogisticParams::FromJson(j.value("lr", empty));
    p.rf = ForestParams::FromJson(j.value("rf", empty));
    p.gbt = BoostingParams::FromJson(j.value("gbt", empty));
    p.nn = NeuralParams::FromJson(j.value("nn", empty));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("classifier params: ") + e.what());
  }
  return p;
}

std::shared_ptr<LogisticRegression> LogisticRegression::Fit(
    const Matrix& x, std::span<const int> y, const LogisticParams& params) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<size_t>(i)];

  // Step 1/L with L bounding the Hessian: largest eigenvalue of [X 1]'[X 1]/n
  // (power iteration, padded) over 4, plus the ridge term.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1) / std::sqrt(double(d + 1));
  double eig = 1.0;
  for (int it = 0; it < 30; ++it) {
    const Eigen::VectorXd xv = x * v.head(d) + Eigen::VectorXd::Constant(n, v[d]);
    Eigen::VectorXd next(d + 1);
    next.head(d) = x.transpose() * xv;
    next[d] = xv.sum();
    next /= static_cast<double>(n);
    eig = next.norm();
    if (eig == 0) break;
    v = next / eig;
  }
  const double lipschitz = 1.1 * eig / 4.0 + params.l2 + 1e-12;
  const double step = 1.0 / lipschitz;

  auto model = std::make_shared<LogisticRegression>();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0;
  Eigen::VectorXd w_prev = w;
  double b_prev = b;
  for (int k = 1; k <= params.iterations; ++k) {
    const double momentum = static_cast<double>(k - 1) / static_cast<double>(k + 2);
    const Eigen::VectorXd wy = w + momentum * (w - w_prev);
    const double by = b + momentum * (b - b_prev);
    Eigen::VectorXd residual = (x * wy).array() + by;
    residual = residual.unaryExpr([](double m) { return Sigmoid(m); }) - yv;
    const Eigen::VectorXd gw =
        x.transpose() * residual / static_cast<double>(n) + params.l2 * wy;
    const double gb = residual.mean();
    w_prev = w;
    b_prev = b;
    w = wy - step * gw;
    b = by - step * gb;
  }
  if (!w.allFinite() || !std::isfinite(b)) {
    throw Error(ErrorCode::kNonFiniteGradient, "logistic regression diverged");
  }
  model->w_ = std::move(w);
  model->b_ = b;
  return model;
}

std::vector<double> LogisticRegression::PredictProba(const Matrix& x) const {
  if (x.cols() != w_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "logistic regression width");
  }
  const Eigen::VectorXd m = (x * w_).array() + b_;
  std::vector<double> out(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) out[static_cast<size_t>(i)] = Sigmoid(m[i]);
  return out;
}

nlohmann::json LogisticRegression::ToJson() const {
  return {{"weights", std::vector<double>(w_.data(), w_.data() + w_.size())},
          {"bias", b_}};
}

std::shared_ptr<LogisticRegression> LogisticRegression::FromJson(
    const nlohmann::json& j) {
  auto m = std::make_shared<LogisticRegression>();
  const auto w = j.at("weights").get<std::vector<double>>();
  m->w_ = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  m->b_ = j.at("bias").get<double>();
  return m;
}

const ColumnSpec& TargetColumn(const FeatureSchema& schema, Target target) {
  return target == Target::kPrivate ? schema.private_column()
                                    : schema.utility_column();
}

std::vector<int> TargetLabels(const RecordTable& table, Target target) {
  return target == Target::kPrivate ? table.private_labels()
                                    : table.utility_labels();
}

TrainedClassifier Fit(ClassifierKind kind, Target target,
                      const RecordTable& train, uint64_t seed,
                      const ClassifierParams& params) {
  if (train.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty training table");
  }
  const std::vector<int> y = TargetLabels(train, target);
  if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); })) {
    throw Error(ErrorCode::kSingleClassTrainingSet,
                std::string(ClassifierKindName(kind)) + " on " +
                    std::string(TargetName(target)) + ": only class " +
                    std::to_string(y.front()) + " present");
  }

  TrainedClassifier c;
  c.kind_ = kind;
  c.target_ = target;
  c.seed_ = seed;
  c.majority_class_ = MajorityClass(y);
  c.schema_ = FitNormalization(train);
  c.layout_ = EncodingLayout(c.schema_);
  const auto& roles = c.schema_.roles();
  for (const auto& s : c.layout_) {
    if (s.column == roles.private_feature || s.column == roles.utility_feature) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label column " + s.column + " in the feature layout");
    }
  }
  if (kind == ClassifierKind::kLLMZeroShot) return c;

  const Matrix x = c.EncodeFor(train);
  switch (kind) {
    case ClassifierKind::kLR:
      c.model_ = LogisticRegression::Fit(x, y, params.lr);
      break;
    case ClassifierKind::kRF:
      c.model_ = std::make_shared<ForestModel>(RandomForest::Fit(x, y, params.rf, seed));
      break;
    case ClassifierKind::kGBT:
      c.model_ = std::make_shared<BoostModel>(GradientBoosting::Fit(x, y, params.gbt));
      break;
    case ClassifierKind::kNN:
      c.model_ = NeuralModel::Fit(x, y, params.nn, seed);
      break;
    case ClassifierKind::kLLMZeroShot:
      break;
  }
  return c;
}

Matrix TrainedClassifier::EncodeFor(const RecordTable& table) const {
  if (table.schema.StructureFingerprint() != schema_.StructureFingerprint()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "table schema differs from the classifier's training schema");
  }
  RecordTable normalized;
  normalized.schema = schema_;
  normalized.rows = table.rows;
  normalized.labels = table.labels;
  return Encode(normalized).values;
}

std::vector<double> TrainedClassifier::PredictProba(const RecordTable& table) const {
  if (!model_) {
    throw Error(ErrorCode::kInvalidArgument,
                "zero-shot classifiers predict through LlmZeroShotPredict");
  }
  return model_->PredictProba(EncodeFor(table));
}

std::vector<int> TrainedClassifier::Predict(const RecordTable& table) const {
  return Threshold(PredictProba(table));
}

nlohmann::json TrainedClassifier::ToJson() const {
  return {{"kind", ClassifierKindName(kind_)},
          {"target", TargetName(target_)},
          {"seed", seed_},
          {"majority_class", majority_class_},
          {"schema", schema_.ToJson()},
          {"schema_fingerprint", schema_.Fingerprint()},
          {"model", model_ ? model_->ToJson() : nlohmann::json()}};
}

TrainedClassifier TrainedClassifier::FromJson(const nlohmann::json& j) {
  try {
    TrainedClassifier c;
    c.kind_ = ParseClassifierKind(j.at("kind").get<std::string>());
    const auto target = j.at("target").get<std::string>();
    if (target != "private" && target != "utility") {
      throw Error(ErrorCode::kConfigError, "unknown target " + target);
    }
    c.target_ = target == "private" ? Target::kPrivate : Target::kUtility;
    c.seed_ = j.at("seed").get<uint64_t>();
    c.majority_class_ = j.at("majority_class").get<int>();
    c.schema_ = FeatureSchema::FromJson(j.at("schema"));
    if (c.schema_.Fingerprint() != j.at("schema_fingerprint").get<std::string>()) {
      throw Error(ErrorCode::kSchemaMismatch, "classifier schema is corrupt");
    }
    c.layout_ = EncodingLayout(c.schema_);
    const auto& m = j.at("model");
    switch (c.kind_) {
      case ClassifierKind::kLR:
        c.model_ = LogisticRegression::FromJson(m);
        break;
      case ClassifierKind::kRF:
        c.model_ = std::make_shared<ForestModel>(RandomForest::FromJson(m));
        break;
      case ClassifierKind::kGBT:
        c.model_ = std::make_shared<BoostModel>(GradientBoosting::FromJson(m));
        break;
      case ClassifierKind::kNN:
        c.model_ = std::make_shared<NeuralModel>(Mlp::FromJson(m));
        break;
      case ClassifierKind::kLLMZeroShot:
        break;
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("classifier: ") + e.what());
  }
}

ZeroShotResult LlmZeroShotPredict(const RecordTable& table, Target target,
                                  Backend& backend, TokenBudget& budget,
                                  const PromptConfig& prompts,
                                  const ChatRequest& request_template,
                                  int fallback_class, int parallelism) {
  const ColumnSpec& column = TargetColumn(table.schema, target);
  std::vector<BatchRequest> batch;
  batch.reserve(table.size());
  for (size_t i = 0; i < table.size(); ++i) {
    BatchRequest r;
    r.request = request_template;
    r.request.messages.push_back(
        {"user", BuildClassificationPrompt(table.rows[i], table.schema, column, prompts)});
    r.context = {"classify:" + column.name, i, 0};
    batch.push_back(std::move(r));
  }
  ZeroShotResult out;
  out.dispatch = DispatchBatch(batch, backend, budget, parallelism);
  out.predictions.resize(table.size());
  out.fallback.resize(table.size());
  for (size_t i = 0; i < table.size(); ++i) {
    std::optional<int> answer;
    if (out.dispatch[i].status == DispatchStatus::kOk) {
      answer = ParseClassAnswer(out.dispatch[i].completion.text, column);
    }
    if (answer) {
      out.predictions[i] = *answer;
    } else {
      out.predictions[i] = fallback_class;
      out.fallback[i] = true;
      ++out.fallback_count;
    }
  }
  return out;
}

}  // namespace tabsan
