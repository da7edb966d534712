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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "properties.h"
#include "tabsan/classifiers.h"
#include "tabsan/error.h"
#include "tabsan/metrics.h"
#include "tabsan/random.h"
#include "tabsan/trees.h"

namespace tabsan {
namespace {

// Two informative features, one decoy; label is x0 > 0 xor x1 > 0.5.
void XorData(size_t n, uint64_t seed, Matrix& x, std::vector<int>& y) {
  Rng rng(seed);
  x.resize(static_cast<Eigen::Index>(n), 3);
  y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = rng.Normal();
    x(r, 1) = rng.Uniform();
    x(r, 2) = rng.Normal();
    y[i] = (x(r, 0) > 0) != (x(r, 1) > 0.5) ? 1 : 0;
  }
}

double ProbAccuracy(const std::vector<double>& p, const std::vector<int>& y) {
  size_t hit = 0;
  for (size_t i = 0; i < y.size(); ++i) hit += (p[i] >= 0.5) == (y[i] == 1);
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

TEST(FeatureBinsTest, FewDistinctValuesCutAtMidpoints) {
  Matrix x(6, 1);
  x << 0, 1, 1, 3, 0, 3;
  const FeatureBins bins = FeatureBins::Fit(x, 255);
  ASSERT_EQ(bins.num_features(), 1u);
  EXPECT_EQ(bins.thresholds[0], (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(bins.Code(0, 0.0), 0);
  EXPECT_EQ(bins.Code(0, 0.5), 0);
  EXPECT_EQ(bins.Code(0, 1.0), 1);
  EXPECT_EQ(bins.Code(0, 3.0), 2);
  EXPECT_EQ(bins.Code(0, 100.0), 2);
}

TEST(FeatureBinsTest, CapsBinCount) {
  Matrix x(1000, 1);
  for (int i = 0; i < 1000; ++i) x(i, 0) = i;
  const FeatureBins bins = FeatureBins::Fit(x, 16);
  EXPECT_LE(bins.thresholds[0].size() + 1, 16u);
  EXPECT_TRUE(std::is_sorted(bins.thresholds[0].begin(), bins.thresholds[0].end()));
  const BinnedMatrix b = ApplyBins(bins, x);
  EXPECT_EQ(b.rows, 1000u);
  EXPECT_EQ(b.cols, 1u);
  EXPECT_TRUE(std::is_sorted(b.codes.begin(), b.codes.end()));
}

TEST(RandomForestTest, LearnsXor) {
  Matrix x, xt;
  std::vector<int> y, yt;
  XorData(2000, 1, x, y);
  XorData(500, 2, xt, yt);
  ForestParams p;
  p.n_trees = 30;
  const RandomForest f = RandomForest::Fit(x, y, p, 7);
  EXPECT_EQ(f.trees().size(), 30u);
  EXPECT_GE(ProbAccuracy(f.PredictProba(xt), yt), 0.93);
  for (const auto& t : f.trees()) EXPECT_LE(t.Depth(), p.max_depth);
}

TEST(RandomForestTest, DeterministicAndRoundTrips) {
  Matrix x;
  std::vector<int> y;
  XorData(400, 3, x, y);
  ForestParams p;
  p.n_trees = 5;
  const RandomForest a = RandomForest::Fit(x, y, p, 11);
  const RandomForest b = RandomForest::Fit(x, y, p, 11);
  EXPECT_EQ(a.trees(), b.trees());
  const RandomForest c = RandomForest::FromJson(a.ToJson());
  EXPECT_EQ(a.trees(), c.trees());
  EXPECT_EQ(a.PredictProba(x), c.PredictProba(x));
}

TEST(GradientBoostingTest, LearnsXor) {
  Matrix x, xt;
  std::vector<int> y, yt;
  XorData(2000, 4, x, y);
  XorData(500, 5, xt, yt);
  BoostingParams p;
  p.rounds = 100;
  const GradientBoosting g = GradientBoosting::Fit(x, y, p);
  EXPECT_GE(ProbAccuracy(g.PredictProba(xt), yt), 0.93);
  const GradientBoosting h = GradientBoosting::FromJson(g.ToJson());
  EXPECT_EQ(g.PredictMargin(xt), h.PredictMargin(xt));
}

TEST(GradientBoostingTest, BaseMarginIsLogOdds) {
  Matrix x(4, 1);
  x << 0, 1, 2, 3;
  const std::vector<int> y = {1, 1, 1, 0};
  BoostingParams p;
  p.rounds = 0;
  const GradientBoosting g = GradientBoosting::Fit(x, y, p);
  EXPECT_NEAR(g.base_margin(), std::log(3.0), 1e-12);
  for (double v : g.PredictProba(x)) EXPECT_NEAR(v, 0.75, 1e-12);
}

}  // namespace

void PrintTo(ClassifierKind kind, std::ostream* os) { *os << ClassifierKindName(kind); }

namespace {

class ClassifierKindTest : public ::testing::TestWithParam<ClassifierKind> {};

TEST_P(ClassifierKindTest, RecoversSignalPerTarget) {
  const RecordTable train = testing::SignalTable(3000, 1);
  const RecordTable test = testing::SignalTable(1000, 2);
  ClassifierParams params;
  params.rf.n_trees = 20;
  params.gbt.rounds = 50;
  params.nn.epochs = 30;
  for (Target target : {Target::kPrivate, Target::kUtility}) {
    const TrainedClassifier c = Fit(GetParam(), target, train, 3, params);
    const auto pred = c.Predict(test);
    const auto truth = TargetLabels(test, target);
    EXPECT_GE(Accuracy(pred, truth), 0.85)
        << ClassifierKindName(GetParam()) << " " << TargetName(target);
    for (const auto& s : c.feature_layout()) {
      EXPECT_NE(s.column, "group");
      EXPECT_NE(s.column, "outcome");
    }
  }
}

TEST_P(ClassifierKindTest, DeterministicAndSerializable) {
  const RecordTable train = testing::SignalTable(500, 5);
  ClassifierParams params;
  params.rf.n_trees = 5;
  params.gbt.rounds = 10;
  params.nn.epochs = 3;
  const TrainedClassifier a = Fit(GetParam(), Target::kPrivate, train, 9, params);
  const TrainedClassifier b = Fit(GetParam(), Target::kPrivate, train, 9, params);
  EXPECT_EQ(a.PredictProba(train), b.PredictProba(train));
  const TrainedClassifier c = TrainedClassifier::FromJson(a.ToJson());
  EXPECT_EQ(c.kind(), GetParam());
  EXPECT_EQ(c.majority_class(), a.majority_class());
  const auto pa = a.PredictProba(train);
  const auto pc = c.PredictProba(train);
  ASSERT_EQ(pa.size(), pc.size());
  for (size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pc[i], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Trainable, ClassifierKindTest,
                         ::testing::Values(ClassifierKind::kLR, ClassifierKind::kRF,
                                           ClassifierKind::kGBT, ClassifierKind::kNN),
                         [](const auto& info) {
                           return std::string(ClassifierKindName(info.param));
                         });

TEST(ClassifierTest, SingleClassTrainingSetThrows) {
  RecordTable t = testing::SignalTable(50, 1);
  for (auto& l : t.labels) l.private_label = 1;
  try {
    Fit(ClassifierKind::kLR, Target::kPrivate, t, 0);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClassTrainingSet);
  }
  EXPECT_NO_THROW(Fit(ClassifierKind::kLR, Target::kUtility, t, 0));
}

TEST(ClassifierTest, SchemaMismatchOnPredict) {
  const RecordTable train = testing::SignalTable(200, 1);
  const TrainedClassifier c = Fit(ClassifierKind::kLR, Target::kPrivate, train, 0);
  RecordTable other = train;
  other.schema = other.schema.Swapped();
  try {
    c.Predict(other);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

TEST(ClassifierTest, KindNames) {
  for (auto k : {ClassifierKind::kLR, ClassifierKind::kRF, ClassifierKind::kGBT,
                 ClassifierKind::kNN, ClassifierKind::kLLMZeroShot}) {
    EXPECT_EQ(ParseClassifierKind(ClassifierKindName(k)), k);
  }
  EXPECT_THROW(ParseClassifierKind("svm"), Error);
}

TEST(ZeroShotTest, ParsesAnswersAndFallsBack) {
  const RecordTable t = testing::SignalTable(5, 1);
  MockBackend m;
  m.Add("classify:outcome", 0, "hi");
  m.Add("classify:outcome", 1, "The answer is lo.");
  m.Add("classify:outcome", 2, "hi or lo");
  m.Add("classify:outcome", 3, "I cannot say");
  TokenBudget budget(1000000);
  const ZeroShotResult r =
      LlmZeroShotPredict(t, Target::kUtility, m, budget, PromptConfig::Defaults(),
                         ChatRequest{}, /*fallback_class=*/1, 2);
  EXPECT_EQ(r.predictions, (std::vector<int>{1, 0, 1, 1, 1}));
  EXPECT_EQ(r.fallback, (std::vector<bool>{false, false, true, true, true}));
  EXPECT_EQ(r.fallback_count, 3u);
  EXPECT_EQ(r.dispatch[4].status, DispatchStatus::kMockMiss);
  EXPECT_EQ(budget.reserved(), 0);
}

}  // namespace
}  // namespace tabsan
