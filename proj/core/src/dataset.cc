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

#include "tabsan/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tabsan/error.h"
#include "tabsan/hash.h"
#include "tabsan/random.h"
#include "text.h"

namespace tabsan {
namespace {

using nlohmann::json;
using text::Trim;

// Splits one CSV line. Double-quoted fields may contain commas and "" escapes;
// multi-line quoted fields are not supported.
std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(Trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.emplace_back(Trim(field));
  return fields;
}

std::optional<double> ParseDouble(std::string_view s) {
  s = Trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() ||
      !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::string QuoteCsv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

DatasetSplit SplitWithCount(const RecordTable& table, size_t test_size,
                            uint64_t seed) {
  const size_t n = table.size();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "split needs at least 2 rows");
  }
  if (test_size == 0 || test_size >= n) {
    throw Error(ErrorCode::kInvalidArgument,
                "test size " + std::to_string(test_size) +
                    " leaves an empty partition of " + std::to_string(n) +
                    " rows");
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.Shuffle(std::span<size_t>(order));

  DatasetSplit split;
  split.seed = seed;
  split.test_indices.assign(order.begin(), order.begin() + test_size);
  split.train_indices.assign(order.begin() + test_size, order.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  std::sort(split.train_indices.begin(), split.train_indices.end());
  split.train = table.Subset(split.train_indices);
  split.test = table.Subset(split.test_indices);
  return split;
}

}  // namespace

int ColumnSpec::CategoryIndex(std::string_view value) const {
  for (size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == value) return static_cast<int>(i);
  }
  return -1;
}

int ColumnSpec::PositiveIndex() const {
  if (positive) return CategoryIndex(*positive);
  return categories.size() > 1 ? 1 : 0;
}

FeatureSchema::FeatureSchema(std::vector<ColumnSpec> columns, Roles roles)
    : columns_(std::move(columns)), roles_(std::move(roles)) {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) {
      throw Error(ErrorCode::kConfigError, "column with empty name");
    }
    if (!names.insert(c.name).second) {
      throw Error(ErrorCode::kConfigError, "duplicate column " + c.name);
    }
    if (c.kind == ColumnKind::kCategorical) {
      if (c.categories.size() < 2) {
        throw Error(ErrorCode::kConfigError,
                    "categorical column " + c.name + " needs >= 2 categories");
      }
      std::set<std::string> seen(c.categories.begin(), c.categories.end());
      if (seen.size() != c.categories.size()) {
        throw Error(ErrorCode::kConfigError,
                    "duplicate category in column " + c.name);
      }
      if (c.positive && c.CategoryIndex(*c.positive) < 0) {
        throw Error(ErrorCode::kConfigError,
                    "positive category " + *c.positive + " not in " + c.name);
      }
    } else {
      if (c.mean.has_value() != c.stddev.has_value()) {
        throw Error(ErrorCode::kConfigError,
                    "column " + c.name + " has only one of mean/stddev");
      }
      if (c.stddev && !(*c.stddev > 0.0)) {
        throw Error(ErrorCode::kDegenerateColumn,
                    "column " + c.name + " has stddev <= 0");
      }
    }
  }
  if (roles_.private_feature == roles_.utility_feature) {
    throw Error(ErrorCode::kConfigError,
                "private and utility feature must differ");
  }
  for (const auto* label : {&roles_.private_feature, &roles_.utility_feature}) {
    if (!names.count(*label)) {
      throw Error(ErrorCode::kConfigError, "unknown label column " + *label);
    }
  }
  if (roles_.sanitize_features.empty()) {
    for (const auto& c : columns_) {
      if (c.name != roles_.private_feature && c.name != roles_.utility_feature) {
        roles_.sanitize_features.push_back(c.name);
      }
    }
  }
  std::set<std::string> sanitize;
  for (const auto& s : roles_.sanitize_features) {
    if (!names.count(s)) {
      throw Error(ErrorCode::kConfigError, "unknown sanitize column " + s);
    }
    if (s == roles_.private_feature || s == roles_.utility_feature) {
      throw Error(ErrorCode::kConfigError,
                  "label column " + s + " listed as a sanitize feature");
    }
    if (!sanitize.insert(s).second) {
      throw Error(ErrorCode::kConfigError, "duplicate sanitize column " + s);
    }
  }
  Index();
  for (const auto* label : {&private_column(), &utility_column()}) {
    if (label->kind != ColumnKind::kCategorical ||
        label->categories.size() != 2) {
      throw Error(ErrorCode::kConfigError,
                  "label column " + label->name + " must be binary categorical");
    }
  }
}

void FeatureSchema::Index() {
  feature_positions_.clear();
  std::set<std::string> sanitize(roles_.sanitize_features.begin(),
                                 roles_.sanitize_features.end());
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (sanitize.count(columns_[i].name)) feature_positions_.push_back(i);
  }
}

FeatureSchema FeatureSchema::FromJson(const json& j) {
  std::vector<ColumnSpec> columns;
  try {
    for (const auto& jc : j.at("columns")) {
      ColumnSpec c;
      c.name = jc.at("name").get<std::string>();
      const auto kind = jc.at("kind").get<std::string>();
      if (kind == "categorical") {
        c.kind = ColumnKind::kCategorical;
        c.categories = jc.at("categories").get<std::vector<std::string>>();
        if (jc.contains("positive")) {
          c.positive = jc.at("positive").get<std::string>();
        }
      } else if (kind == "continuous") {
        c.kind = ColumnKind::kContinuous;
        if (jc.contains("mean")) c.mean = jc.at("mean").get<double>();
        if (jc.contains("stddev")) c.stddev = jc.at("stddev").get<double>();
        c.integer_valued = jc.value("integer", false);
      } else {
        throw Error(ErrorCode::kConfigError, "unknown column kind " + kind);
      }
      columns.push_back(std::move(c));
    }
    Roles roles;
    const auto& jr = j.at("roles");
    roles.private_feature = jr.at("private").get<std::string>();
    roles.utility_feature = jr.at("utility").get<std::string>();
    if (jr.contains("sanitize")) {
      roles.sanitize_features = jr.at("sanitize").get<std::vector<std::string>>();
    } else {
      for (const auto& c : columns) {
        if (c.name != roles.private_feature && c.name != roles.utility_feature) {
          roles.sanitize_features.push_back(c.name);
        }
      }
    }
    return FeatureSchema(std::move(columns), std::move(roles));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("schema: ") + e.what());
  }
}

FeatureSchema FeatureSchema::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  try {
    return FromJson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

json FeatureSchema::ToJson() const {
  json cols = json::array();
  for (const auto& c : columns_) {
    json jc = {{"name", c.name}};
    if (c.kind == ColumnKind::kCategorical) {
      jc["kind"] = "categorical";
      jc["categories"] = c.categories;
      if (c.positive) jc["positive"] = *c.positive;
    } else {
      jc["kind"] = "continuous";
      if (c.integer_valued) jc["integer"] = true;
      if (c.mean) jc["mean"] = *c.mean;
      if (c.stddev) jc["stddev"] = *c.stddev;
    }
    cols.push_back(std::move(jc));
  }
  return {{"columns", std::move(cols)},
          {"roles",
           {{"private", roles_.private_feature},
            {"utility", roles_.utility_feature},
            {"sanitize", roles_.sanitize_features}}}};
}

const ColumnSpec& FeatureSchema::column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::kMissingColumn, "no column " + std::string(name));
}

bool FeatureSchema::has_column(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const ColumnSpec& c) { return c.name == name; });
}

int FeatureSchema::FeatureIndex(std::string_view name) const {
  for (size_t i = 0; i < feature_positions_.size(); ++i) {
    if (columns_[feature_positions_[i]].name == name) return static_cast<int>(i);
  }
  return -1;
}

const ColumnSpec& FeatureSchema::private_column() const {
  return column(roles_.private_feature);
}

const ColumnSpec& FeatureSchema::utility_column() const {
  return column(roles_.utility_feature);
}

FeatureSchema FeatureSchema::Swapped() const {
  Roles r = roles_;
  std::swap(r.private_feature, r.utility_feature);
  return FeatureSchema(columns_, std::move(r));
}

FeatureSchema FeatureSchema::WithStats(
    const std::vector<std::pair<std::string, std::pair<double, double>>>& stats)
    const {
  auto columns = columns_;
  for (const auto& [name, ms] : stats) {
    auto it = std::find_if(columns.begin(), columns.end(),
                           [&](const ColumnSpec& c) { return c.name == name; });
    if (it == columns.end()) {
      throw Error(ErrorCode::kMissingColumn, "no column " + name);
    }
    it->mean = ms.first;
    it->stddev = ms.second;
  }
  return FeatureSchema(std::move(columns), roles_);
}

bool FeatureSchema::has_stats() const {
  for (size_t i = 0; i < num_features(); ++i) {
    const auto& c = feature(i);
    if (c.kind == ColumnKind::kContinuous && !(c.mean && c.stddev)) return false;
  }
  return true;
}

std::string FeatureSchema::StructureFingerprint() const {
  json j = ToJson();
  for (auto& c : j["columns"]) {
    c.erase("mean");
    c.erase("stddev");
  }
  return HashHex(j.dump());
}

std::string FeatureSchema::Fingerprint() const {
  return HashHex(ToJson().dump());
}

std::vector<int> RecordTable::private_labels() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(l.private_label);
  return out;
}

std::vector<int> RecordTable::utility_labels() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(l.utility_label);
  return out;
}

RecordTable RecordTable::Subset(std::span<const size_t> indices) const {
  RecordTable out;
  out.schema = schema;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

void RecordTable::Validate() const {
  if (labels.size() != rows.size()) {
    throw Error(ErrorCode::kLengthMismatch, "labels and rows differ in length");
  }
  const size_t k = schema.num_features();
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != k) {
      throw Error(ErrorCode::kLayoutMismatch, "row arity mismatch", r);
    }
    for (size_t i = 0; i < k; ++i) {
      const auto& col = schema.feature(i);
      if (col.kind == ColumnKind::kCategorical) {
        const auto* s = std::get_if<std::string>(&rows[r][i]);
        if (!s || col.CategoryIndex(*s) < 0) {
          throw Error(ErrorCode::kUnknownCategory,
                      col.name + "=" + (s ? *s : std::string("<number>")) +
                          " at row " + std::to_string(r),
                      r);
        }
      } else if (!std::holds_alternative<double>(rows[r][i])) {
        throw Error(ErrorCode::kMalformedNumber,
                    col.name + " at row " + std::to_string(r), r);
      }
    }
    const auto& l = labels[r];
    if (l.private_label < 0 || l.private_label > 1 || l.utility_label < 0 ||
        l.utility_label > 1) {
      throw Error(ErrorCode::kInvalidArgument, "label out of range", r);
    }
  }
}

LoadedTable ParseCsv(std::string_view csv, const FeatureSchema& schema) {
  LoadedTable out;
  out.table.schema = schema;

  auto lines = text::SplitLines(csv);
  while (!lines.empty() && Trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) {
    throw Error(ErrorCode::kMissingColumn, "CSV has no header row");
  }

  const auto header = SplitCsvLine(lines[0]);
  auto find_col = [&](const std::string& name) -> size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::kMissingColumn, "CSV lacks column " + name);
    }
    return static_cast<size_t>(it - header.begin());
  };
  std::vector<size_t> feature_pos;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    feature_pos.push_back(find_col(schema.feature(i).name));
  }
  const size_t private_pos = find_col(schema.roles().private_feature);
  const size_t utility_pos = find_col(schema.roles().utility_feature);
  const auto& private_col = schema.private_column();
  const auto& utility_col = schema.utility_column();

  for (size_t li = 1; li < lines.size(); ++li) {
    const size_t row = li - 1;
    if (Trim(lines[li]).empty()) continue;
    const auto fields = SplitCsvLine(lines[li]);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kMalformedNumber,
                  "row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()),
                  row);
    }
    bool missing = fields[private_pos] == "?" || fields[utility_pos] == "?";
    for (size_t p : feature_pos) missing = missing || fields[p] == "?";
    if (missing) {
      ++out.dropped_missing;
      continue;
    }

    Record record;
    record.reserve(feature_pos.size());
    for (size_t i = 0; i < feature_pos.size(); ++i) {
      const auto& col = schema.feature(i);
      const std::string& raw = fields[feature_pos[i]];
      if (col.kind == ColumnKind::kCategorical) {
        if (col.CategoryIndex(raw) < 0) {
          throw Error(ErrorCode::kUnknownCategory,
                      col.name + "=\"" + raw + "\" at row " +
                          std::to_string(row),
                      row);
        }
        record.emplace_back(raw);
      } else {
        auto v = ParseDouble(raw);
        if (!v) {
          throw Error(ErrorCode::kMalformedNumber,
                      col.name + "=\"" + raw + "\" at row " +
                          std::to_string(row),
                      row);
        }
        record.emplace_back(*v);
      }
    }
    RowLabels labels;
    labels.private_label = private_col.CategoryIndex(fields[private_pos]);
    labels.utility_label = utility_col.CategoryIndex(fields[utility_pos]);
    if (labels.private_label < 0) {
      throw Error(ErrorCode::kUnknownCategory,
                  private_col.name + "=\"" + fields[private_pos] +
                      "\" at row " + std::to_string(row),
                  row);
    }
    if (labels.utility_label < 0) {
      throw Error(ErrorCode::kUnknownCategory,
                  utility_col.name + "=\"" + fields[utility_pos] +
                      "\" at row " + std::to_string(row),
                  row);
    }
    out.table.rows.push_back(std::move(record));
    out.table.labels.push_back(labels);
  }
  return out;
}

LoadedTable LoadCsv(const std::filesystem::path& path,
                    const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCsv(ss.str(), schema);
}

std::string FormatValue(const ColumnSpec& column, const Value& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  const double v = std::get<double>(value);
  if (column.integer_valued || (std::trunc(v) == v && std::fabs(v) < 1e15)) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteCsv(const std::filesystem::path& path, const RecordTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  const auto& schema = table.schema;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    out << QuoteCsv(schema.feature(i).name) << ',';
  }
  out << QuoteCsv(schema.roles().private_feature) << ','
      << QuoteCsv(schema.roles().utility_feature) << '\n';
  const auto& pc = schema.private_column();
  const auto& uc = schema.utility_column();
  for (size_t r = 0; r < table.size(); ++r) {
    for (size_t i = 0; i < schema.num_features(); ++i) {
      out << QuoteCsv(FormatValue(schema.feature(i), table.rows[r][i])) << ',';
    }
    out << QuoteCsv(pc.categories.at(table.labels[r].private_label)) << ','
        << QuoteCsv(uc.categories.at(table.labels[r].utility_label)) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed " + path.string());
}

FeatureSchema FitNormalization(const RecordTable& table) {
  if (table.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot fit normalization on an empty table");
  }
  const auto& schema = table.schema;
  std::vector<std::pair<std::string, std::pair<double, double>>> stats;
  const double n = static_cast<double>(table.size());
  for (size_t i = 0; i < schema.num_features(); ++i) {
    const auto& col = schema.feature(i);
    if (col.kind != ColumnKind::kContinuous) continue;
    double sum = 0.0;
    for (const auto& row : table.rows) sum += std::get<double>(row[i]);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& row : table.rows) {
      const double d = std::get<double>(row[i]) - mean;
      ss += d * d;
    }
    const double stddev = std::sqrt(ss / n);
    if (!(stddev > 0.0)) {
      throw Error(ErrorCode::kDegenerateColumn,
                  "column " + col.name + " is constant");
    }
    stats.push_back({col.name, {mean, stddev}});
  }
  return schema.WithStats(stats);
}

std::vector<Slice> EncodingLayout(const FeatureSchema& schema) {
  std::vector<Slice> layout;
  int offset = 0;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    const auto& col = schema.feature(i);
    const int len = col.kind == ColumnKind::kCategorical
                        ? static_cast<int>(col.categories.size())
                        : 1;
    layout.push_back({col.name, offset, len});
    offset += len;
  }
  return layout;
}

EncodedMatrix Encode(const RecordTable& table) {
  const auto& schema = table.schema;
  if (!schema.has_stats()) {
    throw Error(ErrorCode::kMissingStats,
                "schema has no normalization statistics; run FitNormalization");
  }
  EncodedMatrix m;
  m.layout = EncodingLayout(schema);
  m.n_dims = m.layout.empty() ? 0 : m.layout.back().start + m.layout.back().length;
  m.values = Matrix::Zero(static_cast<Eigen::Index>(table.size()), m.n_dims);
  for (size_t r = 0; r < table.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != schema.num_features()) {
      throw Error(ErrorCode::kLayoutMismatch, "row arity mismatch", r);
    }
    for (size_t i = 0; i < schema.num_features(); ++i) {
      const auto& col = schema.feature(i);
      const auto& slice = m.layout[i];
      if (col.kind == ColumnKind::kCategorical) {
        const int k = col.CategoryIndex(std::get<std::string>(row[i]));
        if (k < 0) {
          throw Error(ErrorCode::kUnknownCategory,
                      col.name + "=" + std::get<std::string>(row[i]), r);
        }
        m.values(static_cast<Eigen::Index>(r), slice.start + k) = 1.0;
      } else {
        m.values(static_cast<Eigen::Index>(r), slice.start) =
            (std::get<double>(row[i]) - *col.mean) / *col.stddev;
      }
    }
  }
  return m;
}

RecordTable Decode(const EncodedMatrix& matrix, const FeatureSchema& schema,
                   std::span<const RowLabels> labels) {
  const auto layout = EncodingLayout(schema);
  const int dims = layout.empty() ? 0 : layout.back().start + layout.back().length;
  if (matrix.layout != layout || matrix.n_dims != dims ||
      matrix.values.cols() != dims) {
    throw Error(ErrorCode::kLayoutMismatch,
                "encoded matrix layout does not match schema");
  }
  if (!schema.has_stats()) {
    throw Error(ErrorCode::kMissingStats, "schema has no normalization stats");
  }
  if (labels.size() != static_cast<size_t>(matrix.values.rows())) {
    throw Error(ErrorCode::kLengthMismatch, "labels and matrix rows differ");
  }
  RecordTable table;
  table.schema = schema;
  table.labels.assign(labels.begin(), labels.end());
  table.rows.reserve(labels.size());
  for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
    Record record;
    record.reserve(schema.num_features());
    for (size_t i = 0; i < schema.num_features(); ++i) {
      const auto& col = schema.feature(i);
      const auto& slice = layout[i];
      if (col.kind == ColumnKind::kCategorical) {
        int best = 0;
        double best_value = matrix.values(r, slice.start);
        for (int k = 1; k < slice.length; ++k) {
          const double v = matrix.values(r, slice.start + k);
          if (v > best_value) {
            best = k;
            best_value = v;
          }
        }
        record.emplace_back(col.categories[best]);
      } else {
        double v = matrix.values(r, slice.start) * *col.stddev + *col.mean;
        if (col.integer_valued) v = std::max(0.0, std::round(v));
        record.emplace_back(v);
      }
    }
    table.rows.push_back(std::move(record));
  }
  return table;
}

DatasetSplit Split(const RecordTable& table, double test_fraction,
                   uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test fraction must be in (0,1)");
  }
  const auto test_size = static_cast<size_t>(
      std::llround(static_cast<double>(table.size()) * test_fraction));
  return SplitWithCount(table, test_size, seed);
}

DatasetSplit SplitByCount(const RecordTable& table, size_t test_size,
                          uint64_t seed) {
  return SplitWithCount(table, test_size, seed);
}

double MajorityRate(std::span<const int> labels) {
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "majority rate of empty labels");
  }
  std::map<int, size_t> counts;
  size_t best = 0;
  for (int l : labels) best = std::max(best, ++counts[l]);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

int MajorityClass(std::span<const int> labels) {
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "majority class of empty labels");
  }
  std::map<int, size_t> counts;
  for (int l : labels) ++counts[l];
  int best = counts.begin()->first;
  for (const auto& [label, count] : counts) {
    if (count > counts[best]) best = label;
  }
  return best;
}

}  // namespace tabsan
