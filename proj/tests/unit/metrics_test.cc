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

#include <cmath>

#include <gtest/gtest.h>

#include "properties.h"
#include "tabsan/error.h"
#include "tabsan/metrics.h"

namespace tabsan {
namespace {

TEST(ScoreTest, AccuracyAndMacroF1) {
  const std::vector<int> pred = {1, 0, 1, 1};
  const std::vector<int> label = {1, 0, 0, 1};
  const ScorePair s = Score(pred, label);
  EXPECT_DOUBLE_EQ(s.accuracy, 0.75);
  // class 1: tp 2 fp 1 fn 0 -> 0.8; class 0: tp 1 fp 0 fn 1 -> 2/3.
  EXPECT_NEAR(s.f1, (0.8 + 2.0 / 3.0) / 2, 1e-15);
  EXPECT_NEAR(ClassF1(pred, label, 1), 0.8, 1e-15);
}

TEST(ScoreTest, LengthMismatch) {
  const std::vector<int> a = {1, 0};
  const std::vector<int> b = {1};
  try {
    Score(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(TradeoffTest, TableExamples) {
  // Task 1 ALFR: (0.65 - 0.69) / (0.84 - 0.69) -> clamp 0.
  const Ratio mp = PrivacyLeakage(0.84, 0.65, 0.69);
  EXPECT_LT(mp.raw, 0.0);
  EXPECT_EQ(mp.clamped, 0.0);
  EXPECT_NEAR(UtilityPerformance(0.88, 0.81, 0.74).clamped, 0.50, 0.005);
  // Task 1 P1 utility: 1.07 -> clamp 1.
  const Ratio mu = UtilityPerformance(0.88, 0.89, 0.74);
  EXPECT_NEAR(mu.raw, 15.0 / 14.0, 1e-12);
  EXPECT_EQ(mu.clamped, 1.0);
  EXPECT_EQ(PrivacyLeakage(0.8, 0.8, 0.6).clamped, 1.0);
}

TEST(TradeoffTest, DegenerateBaseline) {
  try {
    PrivacyLeakage(0.7, 0.6, 0.7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateBaseline);
  }
}

TEST(FairnessTest, IdenticalGroupsScoreZero) {
  const std::vector<int> pred = {1, 0, 1, 0, 1, 0, 1, 0};
  const std::vector<int> label = {1, 1, 0, 0, 1, 1, 0, 0};
  const std::vector<int> group = {0, 0, 0, 0, 1, 1, 1, 1};
  const FairnessScores f = Fairness(pred, label, group);
  EXPECT_EQ(f.equalized_odds, 0.0);
  EXPECT_EQ(f.equal_opportunity, 0.0);
  EXPECT_EQ(f.demographic_parity, 0.0);
}

// Builds a group with the given counts of (label, prediction) pairs.
void AddGroup(int g, int tp, int fn, int fp, int tn, std::vector<int>* pred,
              std::vector<int>* label, std::vector<int>* group) {
  auto add = [&](int n, int l, int p) {
    for (int i = 0; i < n; ++i) {
      label->push_back(l);
      pred->push_back(p);
      group->push_back(g);
    }
  };
  add(tp, 1, 1);
  add(fn, 1, 0);
  add(fp, 0, 1);
  add(tn, 0, 0);
}

TEST(FairnessTest, RateExamples) {
  std::vector<int> pred, label, group;
  AddGroup(0, 9, 1, 4, 16, &pred, &label, &group);   // TPR 0.9, FPR 0.2
  AddGroup(1, 6, 4, 5, 15, &pred, &label, &group);   // TPR 0.6, FPR 0.25
  const FairnessScores f = Fairness(pred, label, group);
  EXPECT_NEAR(f.equal_opportunity, 0.30, 1e-12);
  EXPECT_NEAR(f.equalized_odds, 0.30, 1e-12);

  pred.clear(), label.clear(), group.clear();
  AddGroup(0, 3, 2, 2, 3, &pred, &label, &group);  // predicts positive at 0.5
  AddGroup(1, 1, 4, 1, 4, &pred, &label, &group);  // at 0.2
  EXPECT_NEAR(Fairness(pred, label, group).demographic_parity, 0.30, 1e-12);
}

TEST(FairnessTest, UndefinedRate) {
  const std::vector<int> pred = {1, 0, 1};
  const std::vector<int> label = {1, 1, 0};
  const std::vector<int> group = {0, 0, 1};
  try {
    Fairness(pred, label, group);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedRate);
  }
}

TEST(HistogramTest, FixedWidthAndConstantInput) {
  const std::vector<double> v = {0, 1, 2, 3, 4};
  const Histogram h = Histogram::Build(v, 4);
  ASSERT_EQ(h.edges.size(), 5u);
  EXPECT_EQ(h.edges.front(), 0.0);
  EXPECT_EQ(h.edges.back(), 4.0);
  EXPECT_EQ(h.counts, (std::vector<size_t>{1, 1, 1, 2}));
  const std::vector<double> c = {3, 3};
  const Histogram hc = Histogram::Build(c, 2);
  EXPECT_EQ(hc.edges.front(), 2.5);
  EXPECT_EQ(hc.edges.back(), 3.5);
  EXPECT_EQ(hc.counts[0] + hc.counts[1], 2u);
}

TEST(DistortionTest, IdentityIsZero) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const FeatureSchema s = testing::RandomSchema(rng);
    const RecordTable t = testing::RandomTable(s, 1 + rng.Below(20), rng);
    const DistortionSummary d = Distortion(t, t);
    for (const auto& c : d.continuous) {
      for (double x : c.differences) EXPECT_EQ(x, 0.0);
    }
    for (const auto& c : d.categorical) EXPECT_EQ(c.flips, 0u);
  }
}

TEST(DistortionTest, AgeDifferenceAndOccupationFlips) {
  ColumnSpec age;
  age.name = "age";
  age.integer_valued = true;
  ColumnSpec occ;
  occ.name = "occupation";
  occ.kind = ColumnKind::kCategorical;
  occ.categories = {"Sales", "Tech-support"};
  ColumnSpec p = occ, u = occ;
  p.name = "p";
  u.name = "u";
  const FeatureSchema s({age, occ, p, u}, Roles{"p", "u", {}});
  RecordTable a{s, {{39.0, "Sales"}}, {{0, 0}}};
  RecordTable b{s, {{42.0, "Sales"}}, {{0, 0}}};
  EXPECT_EQ(Distortion(a, b).continuous[0].differences, std::vector<double>{3.0});

  RecordTable x{s, {}, {}}, y{s, {}, {}};
  for (int i = 0; i < 10; ++i) {
    x.rows.push_back({30.0, "Sales"});
    y.rows.push_back({30.0, i < 4 ? "Tech-support" : "Sales"});
    x.labels.push_back({0, 0});
    y.labels.push_back({0, 0});
  }
  const DistortionSummary d = Distortion(x, y);
  EXPECT_EQ(d.categorical[0].flips, 4u);
  EXPECT_DOUBLE_EQ(d.categorical[0].rate, 0.4);
}

TEST(DistortionTest, SchemaMismatch) {
  Rng rng(2);
  const FeatureSchema s1 = testing::RandomSchema(rng);
  FeatureSchema s2 = testing::RandomSchema(rng);
  while (s2.StructureFingerprint() == s1.StructureFingerprint()) s2 = testing::RandomSchema(rng);
  try {
    Distortion(testing::RandomTable(s1, 2, rng), testing::RandomTable(s2, 2, rng));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

TEST(SummarizeTest, SampleStddev) {
  const std::vector<double> v = {1, 2, 3, 4};
  const MeanStd s = Summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<double> one = {7};
  EXPECT_EQ(Summarize(one).stddev, 0.0);
}

TEST(MetricOracleProperty, MatchesBruteForce) {
  const auto r = testing::CheckMetricOracles(1000, 5);
  EXPECT_TRUE(r.pass) << r.detail;
}

}  // namespace
}  // namespace tabsan
