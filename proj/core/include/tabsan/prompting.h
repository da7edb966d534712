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

#ifndef TABSAN_PROMPTING_H_
#define TABSAN_PROMPTING_H_

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabsan/dataset.h"

namespace tabsan {

enum class VariantTag { kP1, kP2, kCombined, kUnsupervised };

std::string_view VariantName(VariantTag tag);
std::optional<VariantTag> ParseVariantName(std::string_view name);

struct PromptVariant {
  VariantTag tag = VariantTag::kP1;
  std::string instruction_text;

  bool supervised() const { return tag != VariantTag::kUnsupervised; }
};

// Every template the prompting layer renders. Defaults are compiled in and
// mirrored under config/templates/; LoadDirectory overrides any of them from
// files named record.txt, supervision.txt, p1.txt, p2.txt, combined.txt,
// unsupervised.txt, output_format.txt, classify.txt and refusals.txt (one
// phrase per line).
//
// Placeholders use {name}; "{{" and "}}" produce literal braces. Available
// everywhere: one placeholder per feature column ({age}, {workclass}, ...),
// {private_feature}, {utility_feature} and their capitalized forms
// {Private_feature}, {Utility_feature}. Supervised prompts add
// {private_label} and {utility_label}. output_format.txt gets
// {output_columns}; classify.txt gets {record_text}, {target_feature} and
// {class_list}. An unknown placeholder is a ConfigError.
struct PromptConfig {
  // Empty means "My <column> is {<column>}." for every feature column.
  std::string record_template;
  std::string supervision_template;
  std::string output_format_template;
  std::string classification_template;
  std::map<VariantTag, std::string> instructions;
  std::vector<std::string> refusal_phrases;

  static PromptConfig Defaults();
  static PromptConfig LoadDirectory(const std::filesystem::path& dir);

  PromptVariant Variant(VariantTag tag) const;
  // Hash of each template's text, for report provenance.
  std::map<std::string, std::string> TemplateHashes() const;
};

std::string RenderTemplate(std::string_view tmpl,
                           const std::map<std::string, std::string>& vars);
std::string DefaultRecordTemplate(const FeatureSchema& schema);
std::string RenderRecordText(const Record& record, const FeatureSchema& schema,
                             const PromptConfig& config);

struct PromptBundle {
  size_t record_index = 0;
  std::string text;
  std::vector<std::string> expected_columns;
  PromptVariant variant;
};

// Record text, then the label suffix (supervised variants only), then the
// sanitization instruction, then the output-format instruction. Supervised
// variants require `labels`; the unsupervised variant rejects them.
PromptBundle BuildPrompt(const Record& record,
                         const std::optional<RowLabels>& labels,
                         const FeatureSchema& schema,
                         const PromptVariant& variant,
                         const PromptConfig& config, size_t record_index = 0);

// "column: value" lines in feature order; the format the output instruction
// asks the model to use.
std::string FormatRecordLines(const Record& record, const FeatureSchema& schema);

enum class ParseStatus { kOk, kMalformed, kRefusal };
std::string_view ParseStatusName(ParseStatus status);

struct ParsedResponse {
  ParseStatus status = ParseStatus::kMalformed;
  std::optional<Record> record;
  std::string raw;
  std::vector<std::string> diagnostics;
};

// Tolerant "column: value" parser. Accepts bullets, bold markers, any
// column order, case-insensitive column names and categories, and
// spaces/underscores in place of hyphens. Ok iff every expected column
// yields a schema-valid value. A failed parse whose text contains a refusal
// phrase is reported as kRefusal.
ParsedResponse ParseResponse(std::string_view raw, const FeatureSchema& schema,
                             std::span<const std::string> expected_columns,
                             std::span<const std::string> refusal_phrases);
ParsedResponse ParseResponse(std::string_view raw, const FeatureSchema& schema,
                             std::span<const std::string> expected_columns);

std::vector<std::string> FeatureNames(const FeatureSchema& schema);

struct FallbackPolicy {
  enum class Kind { kDrop, kPassthrough, kRetry };
  Kind kind = Kind::kRetry;
  int retries = 2;

  // "drop", "passthrough", "retry" or "retry:<n>".
  static FallbackPolicy Parse(std::string_view text);
  std::string ToString() const;
};

enum class Disposition { kSanitized, kPassthrough, kDropped };
std::string_view DispositionName(Disposition d);

struct ResolvedRecord {
  Disposition disposition = Disposition::kDropped;
  Record record;
  ParseStatus final_status = ParseStatus::kMalformed;
  int attempts = 1;
};

// `retry(attempt)` re-issues the request (attempt counts from 1) and is only
// invoked under the retry policy. Retries that stay non-Ok end in a drop.
ResolvedRecord ApplyFallback(
    const ParsedResponse& parsed, const Record& original,
    const FallbackPolicy& policy,
    const std::function<ParsedResponse(int attempt)>& retry = {});

struct StatusCounts {
  size_t ok = 0;
  size_t malformed = 0;
  size_t refusal = 0;
  size_t sanitized = 0;
  size_t passthrough = 0;
  size_t dropped = 0;

  void Add(ParseStatus first_status, const ResolvedRecord& resolved);
};

std::string BuildClassificationPrompt(const Record& record,
                                      const FeatureSchema& schema,
                                      const ColumnSpec& target,
                                      const PromptConfig& config);
// Maps a zero-shot answer onto the target's category index, or nullopt when
// the answer names no category or more than one.
std::optional<int> ParseClassAnswer(std::string_view answer,
                                    const ColumnSpec& target);

}  // namespace tabsan

#endif  // TABSAN_PROMPTING_H_
