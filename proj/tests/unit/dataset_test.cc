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
#include <set>

#include <gtest/gtest.h>

#include "properties.h"
#include "tabsan/dataset.h"
#include "tabsan/error.h"

namespace tabsan {
namespace {

ColumnSpec Cat(std::string name, std::vector<std::string> cats) {
  ColumnSpec c;
  c.name = std::move(name);
  c.kind = ColumnKind::kCategorical;
  c.categories = std::move(cats);
  return c;
}

ColumnSpec Cont(std::string name, bool integer = false) {
  ColumnSpec c;
  c.name = std::move(name);
  c.integer_valued = integer;
  return c;
}

FeatureSchema ColorSchema() {
  return FeatureSchema({Cat("color", {"red", "blue"}), Cont("x"), Cat("p", {"n", "y"}),
                        Cat("u", {"lo", "hi"})},
                       Roles{"p", "u", {}});
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

constexpr char kAdultLike[] =
    "age,workclass,gender,income\n"
    "39,Private,Male,>50K\n"
    "50,?,Female,<=50K\n"
    "28,State-gov,Female,<=50K\n";

FeatureSchema AdultLike() {
  return FeatureSchema({Cont("age", true), Cat("workclass", {"Private", "State-gov"}),
                        Cat("gender", {"Female", "Male"}), Cat("income", {"<=50K", ">50K"})},
                       Roles{"gender", "income", {}});
}

TEST(SchemaTest, RejectsRoleOverlapAndBadVocabularies) {
  EXPECT_EQ(CodeOf([] {
              FeatureSchema({Cat("a", {"x", "y"}), Cat("b", {"x", "y"})}, Roles{"a", "a", {}});
            }),
            ErrorCode::kConfigError);
  EXPECT_EQ(CodeOf([] {
              FeatureSchema({Cat("a", {"x", "y"}), Cat("b", {"x", "y"}), Cont("c")},
                            Roles{"a", "b", {"a", "c"}});
            }),
            ErrorCode::kConfigError);
  EXPECT_EQ(CodeOf([] {
              FeatureSchema({Cat("a", {"x"}), Cat("b", {"x", "y"}), Cont("c")},
                            Roles{"a", "b", {}});
            }),
            ErrorCode::kConfigError);
  EXPECT_EQ(CodeOf([] {
              FeatureSchema({Cat("a", {"x", "x"}), Cat("b", {"x", "y"}), Cont("c")},
                            Roles{"a", "b", {}});
            }),
            ErrorCode::kConfigError);
}

TEST(SchemaTest, JsonRoundTripAndSwap) {
  const FeatureSchema s = AdultLike();
  EXPECT_EQ(FeatureSchema::FromJson(s.ToJson()), s);
  const FeatureSchema t = s.Swapped();
  EXPECT_EQ(t.roles().private_feature, "income");
  EXPECT_EQ(t.roles().utility_feature, "gender");
  EXPECT_EQ(t.Swapped(), s);
  EXPECT_EQ(s.StructureFingerprint(), FitNormalization(ParseCsv(kAdultLike, s).table)
                                          .StructureFingerprint());
}

TEST(LoadCsvTest, AdultRowLabelsFollowTaskRoles) {
  const auto loaded = ParseCsv(kAdultLike, AdultLike());
  ASSERT_EQ(loaded.table.size(), 2u);
  EXPECT_EQ(loaded.dropped_missing, 1u);
  const auto& s = loaded.table.schema;
  EXPECT_EQ(loaded.table.labels[0].private_label, s.private_column().CategoryIndex("Male"));
  EXPECT_EQ(loaded.table.labels[0].utility_label, s.utility_column().CategoryIndex(">50K"));
  EXPECT_EQ(std::get<std::string>(loaded.table.rows[0][1]), "Private");
}

TEST(LoadCsvTest, EmptyBodyGivesEmptyTable) {
  EXPECT_EQ(ParseCsv("age,workclass,gender,income\n", AdultLike()).table.size(), 0u);
}

TEST(LoadCsvTest, RejectsUnknownCategoryMalformedNumberAndMissingColumn) {
  EXPECT_EQ(CodeOf([] { ParseCsv("age,workclass,gender,income\n1,Selfemployed,Male,>50K\n",
                                 AdultLike()); }),
            ErrorCode::kUnknownCategory);
  EXPECT_EQ(CodeOf([] { ParseCsv("age,workclass,gender,income\nold,Private,Male,>50K\n",
                                 AdultLike()); }),
            ErrorCode::kMalformedNumber);
  EXPECT_EQ(CodeOf([] { ParseCsv("age,gender,income\n1,Male,>50K\n", AdultLike()); }),
            ErrorCode::kMissingColumn);
}

TEST(NormalizationTest, PopulationStddev) {
  FeatureSchema s({Cont("x"), Cat("p", {"a", "b"}), Cat("u", {"a", "b"})}, Roles{"p", "u", {}});
  RecordTable t{s, {{1.0}, {2.0}, {3.0}}, {{0, 0}, {1, 1}, {0, 1}}};
  const FeatureSchema fitted = FitNormalization(t);
  EXPECT_DOUBLE_EQ(*fitted.column("x").mean, 2.0);
  EXPECT_NEAR(*fitted.column("x").stddev, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(*fitted.column("x").stddev, 0.8165, 1e-4);
}

TEST(NormalizationTest, ConstantColumnIsDegenerate) {
  FeatureSchema s({Cont("x"), Cat("p", {"a", "b"}), Cat("u", {"a", "b"})}, Roles{"p", "u", {}});
  RecordTable t{s, {{5.0}, {5.0}, {5.0}}, {{0, 0}, {1, 1}, {0, 1}}};
  EXPECT_EQ(CodeOf([&] { FitNormalization(t); }), ErrorCode::kDegenerateColumn);
}

TEST(NormalizationTest, CategoricalColumnsUntouched) {
  FeatureSchema s = ColorSchema();
  RecordTable t{s, {{"red", 1.0}, {"blue", 3.0}}, {{0, 0}, {1, 1}}};
  const FeatureSchema fitted = FitNormalization(t);
  EXPECT_FALSE(fitted.column("color").mean.has_value());
  EXPECT_EQ(fitted.column("color").categories, s.column("color").categories);
}

FeatureSchema WithStats(double mean, double stddev) {
  return ColorSchema().WithStats({{"x", {mean, stddev}}});
}

TEST(EncodeTest, SpecExamples) {
  RecordTable a{WithStats(0, 1), {{"red", 0.5}}, {{0, 0}}};
  EncodedMatrix m = Encode(a);
  ASSERT_EQ(m.n_dims, 3);
  EXPECT_EQ(m.values(0, 0), 1.0);
  EXPECT_EQ(m.values(0, 1), 0.0);
  EXPECT_EQ(m.values(0, 2), 0.5);

  RecordTable b{WithStats(2, 2), {{"blue", 0.0}}, {{0, 0}}};
  m = Encode(b);
  EXPECT_EQ(m.values(0, 0), 0.0);
  EXPECT_EQ(m.values(0, 1), 1.0);
  EXPECT_EQ(m.values(0, 2), -1.0);
}

TEST(EncodeTest, MissingStats) {
  RecordTable a{ColorSchema(), {{"red", 0.5}}, {{0, 0}}};
  EXPECT_EQ(CodeOf([&] { Encode(a); }), ErrorCode::kMissingStats);
}

TEST(DecodeTest, ArgmaxTieBreakAndInverseZScore) {
  const FeatureSchema s = WithStats(2, 2);
  EncodedMatrix m;
  m.layout = EncodingLayout(s);
  m.n_dims = 3;
  m.values = Matrix(3, 3);
  m.values << 0.2, 0.9, -1.0,  //
      0.5, 0.5, 0.0,           //
      -3.0, -4.0, 1.0;
  const std::vector<RowLabels> labels(3);
  const RecordTable t = Decode(m, s, labels);
  EXPECT_EQ(std::get<std::string>(t.rows[0][0]), "blue");
  EXPECT_DOUBLE_EQ(std::get<double>(t.rows[0][1]), 0.0);
  EXPECT_EQ(std::get<std::string>(t.rows[1][0]), "red");
  EXPECT_EQ(std::get<std::string>(t.rows[2][0]), "red");
  EXPECT_DOUBLE_EQ(std::get<double>(t.rows[2][1]), 4.0);
}

TEST(DecodeTest, IntegerColumnsRoundAndClamp) {
  FeatureSchema s({Cont("age", true), Cat("p", {"a", "b"}), Cat("u", {"a", "b"})},
                  Roles{"p", "u", {}});
  s = s.WithStats({{"age", {10, 5}}});
  EncodedMatrix m;
  m.layout = EncodingLayout(s);
  m.n_dims = 1;
  m.values = Matrix(2, 1);
  m.values << 0.33, -3.0;  // 11.65 and -5
  const std::vector<RowLabels> labels(2);
  const RecordTable t = Decode(m, s, labels);
  EXPECT_EQ(std::get<double>(t.rows[0][0]), 12.0);
  EXPECT_EQ(std::get<double>(t.rows[1][0]), 0.0);
}

TEST(DecodeTest, LayoutMismatch) {
  EncodedMatrix m;
  m.layout = EncodingLayout(WithStats(0, 1));
  m.n_dims = 2;
  m.values = Matrix::Zero(1, 2);
  const std::vector<RowLabels> labels(1);
  EXPECT_EQ(CodeOf([&] { Decode(m, WithStats(0, 1), labels); }), ErrorCode::kLayoutMismatch);
}

TEST(RoundTripProperty, EncodeDecodeIdentity) {
  const auto r = testing::CheckDatasetRoundTrip(500, 3);
  EXPECT_TRUE(r.pass) << r.detail;
  EXPECT_EQ(r.cases, 500u);
}

TEST(CsvTest, WriteThenLoadIsIdentity) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const FeatureSchema s = testing::RandomSchema(rng);
    const RecordTable t = testing::RandomTable(s, 1 + rng.Below(10), rng);
    const auto path = std::filesystem::temp_directory_path() / "tabsan_csv_roundtrip.csv";
    WriteCsv(path, t);
    const RecordTable back = LoadCsv(path, s).table;
    EXPECT_EQ(back.rows, t.rows);
    EXPECT_EQ(back.labels, t.labels);
  }
}

RecordTable Numbered(size_t n) {
  FeatureSchema s({Cont("id"), Cat("p", {"a", "b"}), Cat("u", {"a", "b"})}, Roles{"p", "u", {}});
  RecordTable t{s, {}, {}};
  for (size_t i = 0; i < n; ++i) {
    t.rows.push_back({static_cast<double>(i)});
    t.labels.push_back({static_cast<int>(i % 2), 0});
  }
  return t;
}

std::set<double> Ids(const RecordTable& t) {
  std::set<double> ids;
  for (const auto& r : t.rows) ids.insert(std::get<double>(r[0]));
  return ids;
}

TEST(SplitTest, DeterministicUnderSeed) {
  const RecordTable t = Numbered(10);
  const DatasetSplit a = Split(t, 0.2, 7);
  const DatasetSplit b = Split(t, 0.2, 7);
  EXPECT_EQ(a.test.size(), 2u);
  EXPECT_EQ(a.test.rows, b.test.rows);
  EXPECT_EQ(a.test_indices, b.test_indices);
}

TEST(SplitTest, SeedsGiveDifferentPartitions) {
  const RecordTable t = Numbered(10000);
  EXPECT_NE(Split(t, 0.1, 7).test_indices, Split(t, 0.1, 8).test_indices);
}

TEST(SplitTest, PartitionProperty) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const size_t n = 2 + rng.Below(200);
    const RecordTable t = Numbered(n);
    const double f = rng.Uniform(0.01, 0.99);
    const auto want = static_cast<size_t>(std::llround(static_cast<double>(n) * f));
    if (want == 0 || want == n) {
      EXPECT_EQ(CodeOf([&] { Split(t, f, 1); }), ErrorCode::kInvalidArgument);
      continue;
    }
    const DatasetSplit s = Split(t, f, rng.NextU64());
    EXPECT_EQ(s.test.size(), want);
    EXPECT_EQ(s.train.size() + s.test.size(), n);
    std::set<double> all = Ids(s.train);
    const std::set<double> test = Ids(s.test);
    for (double id : test) EXPECT_TRUE(all.insert(id).second);
    EXPECT_EQ(all.size(), n);
  }
}

TEST(SplitTest, CountOnAdultSizedTable) {
  EXPECT_EQ(SplitByCount(Numbered(45222), 1000, 1).test.size(), 1000u);
}

TEST(MajorityRateTest, Examples) {
  const std::vector<int> balanced = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(MajorityRate(balanced), 0.5);
  const std::vector<int> skewed = {1, 1, 1, 0};
  EXPECT_DOUBLE_EQ(MajorityRate(skewed), 0.75);
  EXPECT_EQ(MajorityClass(skewed), 1);
}

TEST(MajorityRateTest, AtLeastOneOverClasses) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const int k = 2 + static_cast<int>(rng.Below(5));
    std::vector<int> labels(1 + rng.Below(50));
    for (auto& l : labels) l = static_cast<int>(rng.Below(k));
    EXPECT_GE(MajorityRate(labels), 1.0 / k);
  }
}

}  // namespace
}  // namespace tabsan
