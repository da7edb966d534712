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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "properties.h"
#include "tabsan/error.h"
#include "tabsan/prompting.h"

namespace tabsan {
namespace {

ColumnSpec Cat(std::string name, std::vector<std::string> cats) {
  ColumnSpec c;
  c.name = std::move(name);
  c.kind = ColumnKind::kCategorical;
  c.categories = std::move(cats);
  return c;
}

ColumnSpec Cont(std::string name) {
  ColumnSpec c;
  c.name = std::move(name);
  c.integer_valued = true;
  return c;
}

FeatureSchema Adultish() {
  return FeatureSchema(
      {Cont("age"), Cat("workclass", {"Private", "Self-emp-not-inc", "State-gov"}),
       Cat("occupation", {"Adm-clerical", "Exec-managerial", "Tech-support"}),
       Cont("hours-per-week"), Cat("gender", {"Female", "Male"}),
       Cat("income", {"<=50K", ">50K"})},
      Roles{"gender", "income", {}});
}

const Record kRecord = {39.0, "State-gov", "Adm-clerical", 40.0};
const RowLabels kLabels = {1, 0};  // Male, <=50K

TEST(PromptTest, SupervisedLayout) {
  const PromptConfig cfg = PromptConfig::Defaults();
  const PromptBundle b =
      BuildPrompt(kRecord, kLabels, Adultish(), cfg.Variant(VariantTag::kP1), cfg, 3);
  EXPECT_EQ(b.record_index, 3u);
  EXPECT_EQ(b.expected_columns,
            (std::vector<std::string>{"age", "workclass", "occupation", "hours-per-week"}));
  const std::string& t = b.text;
  const size_t record = t.find("My age is 39.");
  const size_t labels = t.find("My gender is Male. My income is <=50K.");
  const size_t instruction = t.find("Sanitize the data above");
  const size_t format = t.find("Return only the sanitized data");
  ASSERT_NE(record, std::string::npos) << t;
  ASSERT_NE(labels, std::string::npos) << t;
  ASSERT_NE(instruction, std::string::npos);
  ASSERT_NE(format, std::string::npos);
  EXPECT_LT(record, labels);
  EXPECT_LT(labels, instruction);
  EXPECT_LT(instruction, format);
  EXPECT_NE(t.find("hours-per-week: <value>"), std::string::npos) << t;
  EXPECT_EQ(t.find("{"), std::string::npos);
}

TEST(PromptTest, CombinedNamesCapitalizedFeatures) {
  const PromptConfig cfg = PromptConfig::Defaults();
  const std::string t =
      BuildPrompt(kRecord, kLabels, Adultish(), cfg.Variant(VariantTag::kCombined), cfg).text;
  EXPECT_NE(t.find("My Income category can be correctly inferred, but my Gender cannot"),
            std::string::npos)
      << t;
}

TEST(PromptTest, UnsupervisedOmitsLabels) {
  const PromptConfig cfg = PromptConfig::Defaults();
  const std::string t = BuildPrompt(kRecord, std::nullopt, Adultish(),
                                    cfg.Variant(VariantTag::kUnsupervised), cfg)
                            .text;
  EXPECT_EQ(t.find("Male"), std::string::npos);
  EXPECT_EQ(t.find("50K"), std::string::npos);
}

TEST(PromptTest, LabelPlacementProperty) {
  const auto r = testing::CheckPromptLabels(500, 31);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(TemplateTest, EscapesAndUnknownPlaceholders) {
  EXPECT_EQ(RenderTemplate("{{a}} {b}", {{"b", "x"}}), "{a} x");
  try {
    RenderTemplate("{nope}", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  }
}

TEST(TemplateTest, ShippedDirectoryMatchesDefaults) {
  const PromptConfig shipped =
      PromptConfig::LoadDirectory(std::filesystem::path(TABSAN_SOURCE_DIR) / "config" / "templates");
  const PromptConfig defaults = PromptConfig::Defaults();
  EXPECT_EQ(shipped.TemplateHashes(), defaults.TemplateHashes());
  EXPECT_EQ(shipped.refusal_phrases, defaults.refusal_phrases);
}

TEST(TemplateTest, DirectoryOverrides) {
  const auto dir = std::filesystem::temp_directory_path() / "tabsan_templates_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "p1.txt") << "Hide my {private_feature}.\n";
  const PromptConfig cfg = PromptConfig::LoadDirectory(dir);
  const std::string t =
      BuildPrompt(kRecord, kLabels, Adultish(), cfg.Variant(VariantTag::kP1), cfg).text;
  EXPECT_NE(t.find("Hide my gender.\n\n"), std::string::npos);
  EXPECT_NE(cfg.TemplateHashes(), PromptConfig::Defaults().TemplateHashes());
}

std::vector<std::string> Features() { return FeatureNames(Adultish()); }

TEST(ParseTest, TolerantFormatting) {
  const std::string text =
      "Here you go:\n"
      "- **Hours per week**: 45 hours\n"
      "* AGE: 1,039\n"
      "workclass: private\n"
      "Occupation: `Tech-support`\n";
  const ParsedResponse p = ParseResponse(text, Adultish(), Features());
  ASSERT_EQ(p.status, ParseStatus::kOk) << (p.diagnostics.empty() ? "" : p.diagnostics[0]);
  EXPECT_EQ(*p.record, (Record{1039.0, "Private", "Tech-support", 45.0}));
}

TEST(ParseTest, MissingAndInvalidAreMalformed) {
  EXPECT_EQ(ParseResponse("age: 30\nworkclass: Private", Adultish(), Features()).status,
            ParseStatus::kMalformed);
  EXPECT_EQ(ParseResponse("age: 30\nworkclass: Pirate\noccupation: Tech-support\n"
                          "hours-per-week: 4",
                          Adultish(), Features())
                .status,
            ParseStatus::kMalformed);
}

TEST(ParseTest, Refusal) {
  const PromptConfig cfg = PromptConfig::Defaults();
  const ParsedResponse p = ParseResponse("I'm sorry, but I can't share that.", Adultish(),
                                         Features(), cfg.refusal_phrases);
  EXPECT_EQ(p.status, ParseStatus::kRefusal);
  EXPECT_FALSE(p.record.has_value());
}

TEST(ParseTest, EchoRoundTripProperty) {
  const auto r = testing::CheckPromptRoundTrip(500, 32);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(ParseTest, ContractProperty) {
  const auto r = testing::CheckParserContract(300, 33);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(FallbackTest, PolicyParsing) {
  EXPECT_EQ(FallbackPolicy::Parse("drop").kind, FallbackPolicy::Kind::kDrop);
  EXPECT_EQ(FallbackPolicy::Parse("passthrough").kind, FallbackPolicy::Kind::kPassthrough);
  const FallbackPolicy r = FallbackPolicy::Parse("retry:4");
  EXPECT_EQ(r.kind, FallbackPolicy::Kind::kRetry);
  EXPECT_EQ(r.retries, 4);
  EXPECT_EQ(FallbackPolicy::Parse(r.ToString()).retries, 4);
  EXPECT_THROW(FallbackPolicy::Parse("sometimes"), Error);
}

TEST(ClassAnswerTest, ParsesOptionsAndRejectsAmbiguity) {
  const ColumnSpec gender = Adultish().column("gender");
  EXPECT_EQ(ParseClassAnswer("Male", gender), 1);
  EXPECT_EQ(ParseClassAnswer("female.", gender), 0);
  EXPECT_EQ(ParseClassAnswer("The person is most likely Female", gender), 0);
  EXPECT_EQ(ParseClassAnswer("Male or Female", gender), std::nullopt);
  EXPECT_EQ(ParseClassAnswer("unknown", gender), std::nullopt);
  const ColumnSpec income = Adultish().column("income");
  EXPECT_EQ(ParseClassAnswer(">50K", income), 1);
  EXPECT_EQ(ParseClassAnswer("<=50K", income), 0);
}

TEST(ClassAnswerTest, ClassificationPromptListsOptions) {
  const PromptConfig cfg = PromptConfig::Defaults();
  const std::string t =
      BuildClassificationPrompt(kRecord, Adultish(), Adultish().column("income"), cfg);
  EXPECT_NE(t.find("What is this person's income?"), std::string::npos) << t;
  EXPECT_NE(t.find("<=50K"), std::string::npos);
  EXPECT_EQ(t.find("Male"), std::string::npos);
}

}  // namespace
}  // namespace tabsan
