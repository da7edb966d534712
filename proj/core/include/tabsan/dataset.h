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

#ifndef TABSAN_DATASET_H_
#define TABSAN_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace tabsan {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

enum class ColumnKind { kContinuous, kCategorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  // Categorical only.
  std::vector<std::string> categories;
  // Category treated as the positive class when this column is a label
  // (fairness rates, zero-shot answers). Defaults to the second category.
  std::optional<std::string> positive;
  // Continuous only. Unset until FitNormalization.
  std::optional<double> mean;
  std::optional<double> stddev;
  // Count-like columns are rounded to the nearest integer and clamped to be
  // nonnegative when decoded.
  bool integer_valued = false;

  // Index of `value` in `categories`, or -1.
  int CategoryIndex(std::string_view value) const;
  int PositiveIndex() const;
};

struct Roles {
  std::string private_feature;
  std::string utility_feature;
  // Empty means every column other than the two labels.
  std::vector<std::string> sanitize_features;
};

// Column declarations plus the private / utility / sanitize role split.
// Construction validates every invariant; an existing FeatureSchema is
// always consistent.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<ColumnSpec> columns, Roles roles);

  static FeatureSchema FromJson(const nlohmann::json& j);
  static FeatureSchema LoadFile(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const Roles& roles() const { return roles_; }
  const ColumnSpec& column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  // Sanitize columns in schema column order; this is the Record layout.
  size_t num_features() const { return feature_positions_.size(); }
  const ColumnSpec& feature(size_t i) const {
    return columns_[feature_positions_[i]];
  }
  int FeatureIndex(std::string_view name) const;
  const ColumnSpec& private_column() const;
  const ColumnSpec& utility_column() const;

  // Copy with private and utility roles exchanged.
  FeatureSchema Swapped() const;
  // Copy with normalization stats replaced.
  FeatureSchema WithStats(
      const std::vector<std::pair<std::string, std::pair<double, double>>>&
          stats) const;

  bool has_stats() const;
  // Stable 64-bit hash (hex) over columns, vocabularies, stats and roles.
  std::string Fingerprint() const;
  // As Fingerprint, ignoring normalization stats.
  std::string StructureFingerprint() const;

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
    return a.ToJson() == b.ToJson();
  }

 private:
  void Index();

  std::vector<ColumnSpec> columns_;
  Roles roles_;
  std::vector<size_t> feature_positions_;
};

using Value = std::variant<double, std::string>;
// One value per feature column, in FeatureSchema::feature(i) order.
using Record = std::vector<Value>;

struct RowLabels {
  int private_label = 0;
  int utility_label = 0;
  friend bool operator==(const RowLabels&, const RowLabels&) = default;
};

struct RecordTable {
  FeatureSchema schema;
  std::vector<Record> rows;
  std::vector<RowLabels> labels;

  size_t size() const { return rows.size(); }
  std::vector<int> private_labels() const;
  std::vector<int> utility_labels() const;
  RecordTable Subset(std::span<const size_t> indices) const;
  // Throws on any invariant violation (vocabulary, arity, label ranges).
  void Validate() const;
};

struct Slice {
  std::string column;
  int start = 0;
  int length = 0;
  friend bool operator==(const Slice&, const Slice&) = default;
};

struct EncodedMatrix {
  Matrix values;
  std::vector<Slice> layout;
  int n_dims = 0;
};

struct DatasetSplit {
  RecordTable train;  // the attacker's auxiliary data
  RecordTable test;
  std::vector<size_t> train_indices;
  std::vector<size_t> test_indices;
  uint64_t seed = 0;
};

struct LoadedTable {
  RecordTable table;
  // Rows skipped because a required field was "?".
  size_t dropped_missing = 0;
};

LoadedTable LoadCsv(const std::filesystem::path& path,
                    const FeatureSchema& schema);
LoadedTable ParseCsv(std::string_view text, const FeatureSchema& schema);
void WriteCsv(const std::filesystem::path& path, const RecordTable& table);
std::string FormatValue(const ColumnSpec& column, const Value& value);

// Population mean / stddev of every continuous feature column.
FeatureSchema FitNormalization(const RecordTable& table);

EncodedMatrix Encode(const RecordTable& table);
std::vector<Slice> EncodingLayout(const FeatureSchema& schema);

// Inverse of Encode. Categorical slices decode by argmax (first index wins
// ties), continuous values are de-normalized, and integer-valued columns are
// rounded and clamped at zero.
RecordTable Decode(const EncodedMatrix& matrix, const FeatureSchema& schema,
                   std::span<const RowLabels> labels);

DatasetSplit Split(const RecordTable& table, double test_fraction,
                   uint64_t seed);
DatasetSplit SplitByCount(const RecordTable& table, size_t test_size,
                          uint64_t seed);

double MajorityRate(std::span<const int> labels);
int MajorityClass(std::span<const int> labels);

}  // namespace tabsan

#endif  // TABSAN_DATASET_H_
