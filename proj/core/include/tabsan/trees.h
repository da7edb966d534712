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


#ifndef TABSAN_TREES_H_
#define TABSAN_TREES_H_

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "tabsan/dataset.h"

namespace tabsan {

// Per-feature cut points. A value x falls in bin b when
// thresholds[b-1] < x <= thresholds[b].
struct FeatureBins {
  std::vector<std::vector<double>> thresholds;

  // At most max_bins bins per feature (2..256). Features with few distinct
  // values cut at midpoints; others at quantiles.
  static FeatureBins Fit(const Matrix& x, int max_bins = 255);
  uint8_t Code(size_t feature, double value) const;
  size_t num_features() const { return thresholds.size(); }
};

// Row-major bin codes.
struct BinnedMatrix {
  std::vector<uint8_t> codes;
  size_t rows = 0;
  size_t cols = 0;

  const uint8_t* row(size_t r) const { return codes.data() + r * cols; }
};

BinnedMatrix ApplyBins(const FeatureBins& bins, const Matrix& x);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double Predict(const double* row) const;
  int Depth() const;
  nlohmann::json ToJson() const;
  static Tree FromJson(const nlohmann::json& j);
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 1;
  int max_bins = 255;
  // Features tried per split; 0 means floor(sqrt(d)).
  int max_features = 0;

  nlohmann::json ToJson() const;
  static ForestParams FromJson(const nlohmann::json& j);
};

// Bagged CART classification trees with Gini splits. Leaves hold the
// fraction of class 1; the forest averages them.
class RandomForest {
 public:
  static RandomForest Fit(const Matrix& x, std::span<const int> y,
                          const ForestParams& params, uint64_t seed);

  std::vector<double> PredictProba(const Matrix& x) const;
  const std::vector<Tree>& trees() const { return trees_; }

  nlohmann::json ToJson() const;
  static RandomForest FromJson(const nlohmann::json& j);

 private:
  std::vector<Tree> trees_;
  int n_features_ = 0;
};

struct BoostingParams {
  int rounds = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  int max_bins = 255;

  nlohmann::json ToJson() const;
  static BoostingParams FromJson(const nlohmann::json& j);
};

// Second-order gradient boosting on logistic loss. Leaves hold additive
// log-odds contributions (already scaled by the learning rate).
class GradientBoosting {
 public:
  static GradientBoosting Fit(const Matrix& x, std::span<const int> y,
                              const BoostingParams& params);

  std::vector<double> PredictMargin(const Matrix& x) const;
  std::vector<double> PredictProba(const Matrix& x) const;
  double base_margin() const { return base_margin_; }
  const std::vector<Tree>& trees() const { return trees_; }

  nlohmann::json ToJson() const;
  static GradientBoosting FromJson(const nlohmann::json& j);

 private:
  double base_margin_ = 0.0;
  std::vector<Tree> trees_;
  int n_features_ = 0;
};

}  // namespace tabsan

#endif  // TABSAN_TREES_H_
