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

#include "tabsan/prompting.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tabsan/error.h"
#include "tabsan/hash.h"
#include "text.h"

namespace tabsan {
namespace {

constexpr std::string_view kSupervisionTemplate =
    "My {private_feature} is {private_label}. "
    "My {utility_feature} is {utility_label}.";

constexpr std::string_view kP1Template =
    "Sanitize the data above so that machine learning models can no longer "
    "correctly infer my {private_feature}, while my {utility_feature} can "
    "still be correctly inferred. Change the feature values as much as needed "
    "to achieve this.";

constexpr std::string_view kP2Template =
    "Sanitize the data above so that my {utility_feature} can still be "
    "correctly inferred by machine learning models, and so that models "
    "trained on such data satisfy the fairness metrics equalized odds, equal "
    "opportunity and demographic parity with respect to my {private_feature}. "
    "Change the feature values as much as needed to achieve this.";

constexpr std::string_view kCombinedTemplate =
    "Sanitize the data above so that: My {Utility_feature} category can be "
    "correctly inferred, but my {Private_feature} cannot be correctly "
    "inferred (to fulfill fairness metrics).";

constexpr std::string_view kOutputFormatTemplate =
    "Return only the sanitized data, one feature per line, in exactly this "
    "order and format, with no other text:\n"
    "{output_columns}";

constexpr std::string_view kClassificationTemplate =
    "Let us play a guessing game. The following are public facts about a "
    "person:\n"
    "{record_text}\n"
    "Question: What is this person's {target_feature}? Choose exactly one of "
    "the following options: {class_list}.\n"
    "Answer with the option only.";

const std::vector<std::string>& DefaultRefusalPhrases() {
  static const std::vector<std::string> phrases = {
      "i cannot", "i can't", "i can not", "i'm sorry", "i am sorry",
      "i apologize", "cannot assist", "can't assist", "unable to comply",
      "unable to assist", "as an ai"};
  return phrases;
}

std::string Capitalize(std::string s) {
  if (!s.empty()) {
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  }
  return s;
}

std::map<std::string, std::string> BaseVars(const Record& record,
                                            const FeatureSchema& schema) {
  std::map<std::string, std::string> vars;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    vars[schema.feature(i).name] = FormatValue(schema.feature(i), record.at(i));
  }
  const auto& roles = schema.roles();
  vars["private_feature"] = roles.private_feature;
  vars["utility_feature"] = roles.utility_feature;
  vars["Private_feature"] = Capitalize(roles.private_feature);
  vars["Utility_feature"] = Capitalize(roles.utility_feature);
  return vars;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  // A single trailing newline is an artifact of editors, not template content.
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// "Education_Num" / "education num" / "**education-num**" -> "education-num"
std::string NormalizeKey(std::string_view key) {
  std::string out;
  for (char c : key) {
    const auto u = static_cast<unsigned char>(c);
    if (c == '*' || c == '`' || c == '"' || c == '\'') continue;
    if (c == '_' || c == ' ') {
      out.push_back('-');
    } else {
      out.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  return std::string(text::Trim(out));
}

std::string_view StripListMarker(std::string_view line) {
  line = text::Trim(line);
  if (line.starts_with("- ") || line.starts_with("* ") ||
      line.starts_with("+ ")) {
    return text::Trim(line.substr(2));
  }
  if (line.starts_with("•")) return text::Trim(line.substr(3));
  size_t digits = 0;
  while (digits < line.size() &&
         std::isdigit(static_cast<unsigned char>(line[digits]))) {
    ++digits;
  }
  if (digits > 0 && digits + 1 < line.size() &&
      (line[digits] == '.' || line[digits] == ')') && line[digits + 1] == ' ') {
    return text::Trim(line.substr(digits + 2));
  }
  return line;
}

std::string CleanValue(std::string_view v) {
  std::string out;
  for (char c : text::Trim(v)) {
    if (c == '*' || c == '`') continue;
    out.push_back(c);
  }
  std::string_view s = text::Trim(out);
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) {
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') &&
      s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(text::Trim(s));
}

std::optional<double> ParseLeadingNumber(std::string_view v) {
  std::string digits;
  for (char c : v) {
    if (c == ',') continue;  // thousands separators: "2,174"
    digits.push_back(c);
  }
  std::string_view s = text::Trim(digits);
  if (s.starts_with("$")) s.remove_prefix(1);
  if (s.starts_with("+")) s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr == s.data() || !std::isfinite(value)) {
    return std::nullopt;
  }
  // Allow a trailing unit word ("40 hours"), not trailing digits or symbols.
  std::string_view rest = text::Trim(std::string_view(ptr, s.data() + s.size() - ptr));
  if (!rest.empty() && !std::isalpha(static_cast<unsigned char>(rest.front()))) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::string_view VariantName(VariantTag tag) {
  switch (tag) {
    case VariantTag::kP1: return "p1";
    case VariantTag::kP2: return "p2";
    case VariantTag::kCombined: return "combined";
    case VariantTag::kUnsupervised: return "unsupervised";
  }
  return "p1";
}

std::optional<VariantTag> ParseVariantName(std::string_view name) {
  const std::string n = text::ToLower(name);
  if (n == "p1") return VariantTag::kP1;
  if (n == "p2") return VariantTag::kP2;
  if (n == "combined") return VariantTag::kCombined;
  if (n == "unsupervised") return VariantTag::kUnsupervised;
  return std::nullopt;
}

PromptConfig PromptConfig::Defaults() {
  PromptConfig c;
  c.supervision_template = std::string(kSupervisionTemplate);
  c.output_format_template = std::string(kOutputFormatTemplate);
  c.classification_template = std::string(kClassificationTemplate);
  c.instructions[VariantTag::kP1] = std::string(kP1Template);
  c.instructions[VariantTag::kP2] = std::string(kP2Template);
  c.instructions[VariantTag::kCombined] = std::string(kCombinedTemplate);
  // Unsupervised reuses the P1 wording; only the label suffix is withheld.
  c.instructions[VariantTag::kUnsupervised] = std::string(kP1Template);
  c.refusal_phrases = DefaultRefusalPhrases();
  return c;
}

PromptConfig PromptConfig::LoadDirectory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIoFailure,
                "template directory not found: " + dir.string());
  }
  PromptConfig c = Defaults();
  auto load = [&](const char* file, std::string& slot) {
    const auto path = dir / file;
    if (std::filesystem::exists(path)) slot = ReadFile(path);
  };
  load("record.txt", c.record_template);
  load("supervision.txt", c.supervision_template);
  load("output_format.txt", c.output_format_template);
  load("classify.txt", c.classification_template);
  load("p1.txt", c.instructions[VariantTag::kP1]);
  load("p2.txt", c.instructions[VariantTag::kP2]);
  load("combined.txt", c.instructions[VariantTag::kCombined]);
  load("unsupervised.txt", c.instructions[VariantTag::kUnsupervised]);
  if (std::filesystem::exists(dir / "refusals.txt")) {
    c.refusal_phrases.clear();
    const std::string body = ReadFile(dir / "refusals.txt");
    for (auto line : text::SplitLines(body)) {
      line = text::Trim(line);
      if (!line.empty() && !line.starts_with("#")) {
        c.refusal_phrases.push_back(text::ToLower(line));
      }
    }
  }
  return c;
}

PromptVariant PromptConfig::Variant(VariantTag tag) const {
  auto it = instructions.find(tag);
  if (it == instructions.end()) {
    throw Error(ErrorCode::kConfigError,
                "no instruction template for " + std::string(VariantName(tag)));
  }
  return {tag, it->second};
}

std::map<std::string, std::string> PromptConfig::TemplateHashes() const {
  std::map<std::string, std::string> out;
  out["record"] = HashHex(record_template);
  out["supervision"] = HashHex(supervision_template);
  out["output_format"] = HashHex(output_format_template);
  out["classify"] = HashHex(classification_template);
  for (const auto& [tag, body] : instructions) {
    out[std::string(VariantName(tag))] = HashHex(body);
  }
  std::string refusals;
  for (const auto& p : refusal_phrases) refusals += p + "\n";
  out["refusals"] = HashHex(refusals);
  return out;
}

std::string RenderTemplate(std::string_view tmpl,
                           const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  for (size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      out.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
      out.push_back('}');
      ++i;
    } else if (c == '{') {
      const size_t close = tmpl.find('}', i + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::kConfigError, "unterminated placeholder");
      }
      const std::string name(tmpl.substr(i + 1, close - i - 1));
      auto it = vars.find(name);
      if (it == vars.end()) {
        throw Error(ErrorCode::kConfigError, "unknown placeholder {" + name + "}");
      }
      out += it->second;
      i = close;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string DefaultRecordTemplate(const FeatureSchema& schema) {
  std::string out;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    const auto& name = schema.feature(i).name;
    if (i > 0) out += ' ';
    out += "My " + name + " is {" + name + "}.";
  }
  return out;
}

std::string RenderRecordText(const Record& record, const FeatureSchema& schema,
                             const PromptConfig& config) {
  if (record.size() != schema.num_features()) {
    throw Error(ErrorCode::kLayoutMismatch, "record arity mismatch");
  }
  const std::string tmpl = config.record_template.empty()
                               ? DefaultRecordTemplate(schema)
                               : config.record_template;
  return RenderTemplate(tmpl, BaseVars(record, schema));
}

std::vector<std::string> FeatureNames(const FeatureSchema& schema) {
  std::vector<std::string> names;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    names.push_back(schema.feature(i).name);
  }
  return names;
}

PromptBundle BuildPrompt(const Record& record,
                         const std::optional<RowLabels>& labels,
                         const FeatureSchema& schema,
                         const PromptVariant& variant,
                         const PromptConfig& config, size_t record_index) {
  if (variant.supervised() && !labels) {
    throw Error(ErrorCode::kLabelsRequired,
                std::string(VariantName(variant.tag)) +
                    " prompts need the true private and utility labels");
  }
  if (!variant.supervised() && labels) {
    throw Error(ErrorCode::kLabelsForbidden,
                "unsupervised prompts must not carry labels");
  }
  auto vars = BaseVars(record, schema);
  if (labels) {
    vars["private_label"] =
        schema.private_column().categories.at(labels->private_label);
    vars["utility_label"] =
        schema.utility_column().categories.at(labels->utility_label);
  }
  std::string columns;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    if (i > 0) columns += '\n';
    columns += schema.feature(i).name + ": <value>";
  }
  vars["output_columns"] = columns;

  std::string prompt = RenderRecordText(record, schema, config);
  if (variant.supervised()) {
    prompt += '\n';
    prompt += RenderTemplate(config.supervision_template, vars);
  }
  prompt += "\n\n";
  prompt += RenderTemplate(variant.instruction_text, vars);
  prompt += "\n\n";
  prompt += RenderTemplate(config.output_format_template, vars);

  PromptBundle bundle;
  bundle.record_index = record_index;
  bundle.text = std::move(prompt);
  bundle.expected_columns = FeatureNames(schema);
  bundle.variant = variant;
  return bundle;
}

std::string FormatRecordLines(const Record& record, const FeatureSchema& schema) {
  std::string out;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    if (i > 0) out += '\n';
    out += schema.feature(i).name + ": " + FormatValue(schema.feature(i), record.at(i));
  }
  return out;
}

std::string_view ParseStatusName(ParseStatus status) {
  switch (status) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kMalformed: return "malformed";
    case ParseStatus::kRefusal: return "refusal";
  }
  return "malformed";
}

ParsedResponse ParseResponse(std::string_view raw, const FeatureSchema& schema,
                             std::span<const std::string> expected_columns) {
  return ParseResponse(raw, schema, expected_columns, DefaultRefusalPhrases());
}

ParsedResponse ParseResponse(std::string_view raw, const FeatureSchema& schema,
                             std::span<const std::string> expected_columns,
                             std::span<const std::string> refusal_phrases) {
  ParsedResponse out;
  out.raw = std::string(raw);

  std::map<std::string, std::string> found;
  for (auto line : text::SplitLines(raw)) {
    line = StripListMarker(line);
    const size_t colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const std::string key = NormalizeKey(line.substr(0, colon));
    if (key.empty() || found.count(key)) continue;
    found[key] = CleanValue(line.substr(colon + 1));
  }

  Record record(schema.num_features());
  std::vector<bool> filled(schema.num_features(), false);
  for (const auto& name : expected_columns) {
    const int idx = schema.FeatureIndex(name);
    if (idx < 0) {
      out.diagnostics.push_back("expected column " + name + " is not a feature");
      continue;
    }
    const auto& col = schema.feature(static_cast<size_t>(idx));
    auto it = found.find(NormalizeKey(name));
    if (it == found.end()) {
      out.diagnostics.push_back("missing " + name);
      continue;
    }
    const std::string& value = it->second;
    if (col.kind == ColumnKind::kCategorical) {
      int k = col.CategoryIndex(value);
      if (k < 0) {
        const std::string lower = text::ToLower(value);
        for (size_t c = 0; c < col.categories.size(); ++c) {
          if (text::ToLower(col.categories[c]) == lower) {
            k = static_cast<int>(c);
            break;
          }
        }
      }
      if (k < 0) {
        out.diagnostics.push_back("unknown category " + name + "=" + value);
        continue;
      }
      record[static_cast<size_t>(idx)] = col.categories[static_cast<size_t>(k)];
    } else {
      auto v = ParseLeadingNumber(value);
      if (!v) {
        out.diagnostics.push_back("not a number " + name + "=" + value);
        continue;
      }
      record[static_cast<size_t>(idx)] = *v;
    }
    filled[static_cast<size_t>(idx)] = true;
  }
  for (size_t i = 0; i < schema.num_features(); ++i) {
    if (!filled[i] &&
        std::find(expected_columns.begin(), expected_columns.end(),
                  schema.feature(i).name) == expected_columns.end()) {
      out.diagnostics.push_back("feature " + schema.feature(i).name +
                                " not among expected columns");
    }
  }

  if (out.diagnostics.empty()) {
    out.status = ParseStatus::kOk;
    out.record = std::move(record);
    return out;
  }
  const std::string lower = text::ToLower(raw);
  for (const auto& phrase : refusal_phrases) {
    if (!phrase.empty() && lower.find(text::ToLower(phrase)) != std::string::npos) {
      out.status = ParseStatus::kRefusal;
      return out;
    }
  }
  out.status = ParseStatus::kMalformed;
  return out;
}

FallbackPolicy FallbackPolicy::Parse(std::string_view spec) {
  const std::string s = text::ToLower(text::Trim(spec));
  FallbackPolicy p;
  if (s == "drop") {
    p.kind = Kind::kDrop;
    p.retries = 0;
  } else if (s == "passthrough") {
    p.kind = Kind::kPassthrough;
    p.retries = 0;
  } else if (s == "retry") {
    p.kind = Kind::kRetry;
    p.retries = 2;
  } else if (s.starts_with("retry:") || s.starts_with("retry(")) {
    std::string n = s.substr(6);
    if (!n.empty() && n.back() == ')') n.pop_back();
    int retries = -1;
    const auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), retries);
    if (ec != std::errc() || ptr != n.data() + n.size() || retries < 0) {
      throw Error(ErrorCode::kConfigError, "bad retry count in " + s);
    }
    p.kind = Kind::kRetry;
    p.retries = retries;
  } else {
    throw Error(ErrorCode::kConfigError, "unknown fallback policy " + s);
  }
  return p;
}

std::string FallbackPolicy::ToString() const {
  switch (kind) {
    case Kind::kDrop: return "drop";
    case Kind::kPassthrough: return "passthrough";
    case Kind::kRetry: return "retry:" + std::to_string(retries);
  }
  return "drop";
}

std::string_view DispositionName(Disposition d) {
  switch (d) {
    case Disposition::kSanitized: return "sanitized";
    case Disposition::kPassthrough: return "passthrough";
    case Disposition::kDropped: return "dropped";
  }
  return "dropped";
}

ResolvedRecord ApplyFallback(
    const ParsedResponse& parsed, const Record& original,
    const FallbackPolicy& policy,
    const std::function<ParsedResponse(int attempt)>& retry) {
  ResolvedRecord out;
  out.final_status = parsed.status;
  if (parsed.status == ParseStatus::kOk) {
    out.disposition = Disposition::kSanitized;
    out.record = *parsed.record;
    return out;
  }
  switch (policy.kind) {
    case FallbackPolicy::Kind::kDrop:
      out.disposition = Disposition::kDropped;
      out.record = original;
      return out;
    case FallbackPolicy::Kind::kPassthrough:
      out.disposition = Disposition::kPassthrough;
      out.record = original;
      return out;
    case FallbackPolicy::Kind::kRetry:
      for (int attempt = 1; attempt <= policy.retries && retry; ++attempt) {
        ParsedResponse again = retry(attempt);
        out.attempts = attempt + 1;
        out.final_status = again.status;
        if (again.status == ParseStatus::kOk) {
          out.disposition = Disposition::kSanitized;
          out.record = *again.record;
          return out;
        }
      }
      out.disposition = Disposition::kDropped;
      out.record = original;
      return out;
  }
  return out;
}

void StatusCounts::Add(ParseStatus first_status, const ResolvedRecord& resolved) {
  switch (first_status) {
    case ParseStatus::kOk: ++ok; break;
    case ParseStatus::kMalformed: ++malformed; break;
    case ParseStatus::kRefusal: ++refusal; break;
  }
  switch (resolved.disposition) {
    case Disposition::kSanitized: ++sanitized; break;
    case Disposition::kPassthrough: ++passthrough; break;
    case Disposition::kDropped: ++dropped; break;
  }
}

std::string BuildClassificationPrompt(const Record& record,
                                      const FeatureSchema& schema,
                                      const ColumnSpec& target,
                                      const PromptConfig& config) {
  auto vars = BaseVars(record, schema);
  vars["record_text"] = RenderRecordText(record, schema, config);
  vars["target_feature"] = target.name;
  std::string classes;
  for (size_t i = 0; i < target.categories.size(); ++i) {
    if (i > 0) classes += ", ";
    classes += "\"" + target.categories[i] + "\"";
  }
  vars["class_list"] = classes;
  return RenderTemplate(config.classification_template, vars);
}

std::optional<int> ParseClassAnswer(std::string_view answer,
                                    const ColumnSpec& target) {
  const std::string cleaned = text::ToLower(CleanValue(answer));
  for (size_t i = 0; i < target.categories.size(); ++i) {
    if (text::ToLower(target.categories[i]) == cleaned) return static_cast<int>(i);
  }
  // Otherwise look for category mentions, discarding any occurrence that sits
  // inside a longer matched category ("male" inside "female").
  const std::string lower = text::ToLower(answer);
  struct Hit { size_t begin, end; int category; };
  std::vector<Hit> hits;
  for (size_t i = 0; i < target.categories.size(); ++i) {
    const std::string needle = text::ToLower(target.categories[i]);
    if (needle.empty()) continue;
    for (size_t pos = lower.find(needle); pos != std::string::npos;
         pos = lower.find(needle, pos + 1)) {
      const bool alnum_before =
          pos > 0 && std::isalnum(static_cast<unsigned char>(lower[pos - 1])) &&
          std::isalnum(static_cast<unsigned char>(needle.front()));
      const size_t end = pos + needle.size();
      const bool alnum_after =
          end < lower.size() &&
          std::isalnum(static_cast<unsigned char>(lower[end])) &&
          std::isalnum(static_cast<unsigned char>(needle.back()));
      if (!alnum_before && !alnum_after) {
        hits.push_back({pos, end, static_cast<int>(i)});
      }
    }
  }
  std::optional<int> result;
  for (const auto& h : hits) {
    const bool nested = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
      return o.category != h.category && o.begin <= h.begin && h.end <= o.end &&
             (o.end - o.begin) > (h.end - h.begin);
    });
    if (nested) continue;
    if (result && *result != h.category) return std::nullopt;
    result = h.category;
  }
  return result;
}

}  // namespace tabsan
