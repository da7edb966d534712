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

#include "tabsan/trees.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "tabsan/error.h"
#include "tabsan/random.h"

namespace tabsan {

namespace {

void CheckTrainingData(const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no training rows");
  if (static_cast<size_t>(x.rows()) != y.size()) {
    throw Error(ErrorCode::kLengthMismatch, "feature rows != labels");
  }
  for (int v : y) {
    if (v != 0 && v != 1) {
      throw Error(ErrorCode::kInvalidArgument, "tree labels must be 0 or 1");
    }
  }
}

void CheckWidth(const Matrix& x, int n_features) {
  if (x.cols() != n_features) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(n_features) + " features, got " +
                    std::to_string(x.cols()));
  }
}

class ForestTreeBuilder {
 public:
  ForestTreeBuilder(const BinnedMatrix& bx, const FeatureBins& bins,
                    std::span<const int> y, std::span<const double> weight,
                    const ForestParams& params, int mtry, Rng& rng)
      : bx_(bx), bins_(bins), y_(y), weight_(weight), params_(params),
        mtry_(mtry), rng_(rng), features_(bx.cols) {
    std::iota(features_.begin(), features_.end(), size_t{0});
  }

  Tree Build(std::vector<size_t> rows) {
    rows_ = std::move(rows);
    tree_ = Tree{};
    Grow(0, rows_.size(), 0);
    return std::move(tree_);
  }

 private:
  int Grow(size_t lo, size_t hi, int depth) {
    double w0 = 0, w1 = 0;
    for (size_t i = lo; i < hi; ++i) {
      (y_[rows_[i]] ? w1 : w0) += weight_[rows_[i]];
    }
    const double total = w0 + w1;
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({-1, 0.0, -1, -1, total > 0 ? w1 / total : 0.0});
    const double min_leaf = params_.min_samples_leaf;
    if (depth >= params_.max_depth || w0 == 0 || w1 == 0 ||
        total < 2 * min_leaf) {
      return id;
    }

    const double parent_score = (w0 * w0 + w1 * w1) / total;
    double best_score = parent_score * (1.0 + 1e-12);
    int best_feature = -1;
    size_t best_bin = 0;
    const size_t d = features_.size();
    for (size_t k = 0; k < static_cast<size_t>(mtry_); ++k) {
      std::swap(features_[k], features_[k + rng_.Below(d - k)]);
      const size_t f = features_[k];
      const size_t nb = bins_.thresholds[f].size() + 1;
      if (nb < 2) continue;
      std::array<double, 256> c0{};
      std::array<double, 256> c1{};
      for (size_t i = lo; i < hi; ++i) {
        const size_t r = rows_[i];
        (y_[r] ? c1 : c0)[bx_.row(r)[f]] += weight_[r];
      }
      double l0 = 0, l1 = 0;
      for (size_t b = 0; b + 1 < nb; ++b) {
        l0 += c0[b];
        l1 += c1[b];
        const double wl = l0 + l1;
        const double wr = total - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double r0 = w0 - l0;
        const double r1 = w1 - l1;
        const double score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr;
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto f = static_cast<size_t>(best_feature);
    const auto mid_it = std::stable_partition(
        rows_.begin() + static_cast<std::ptrdiff_t>(lo),
        rows_.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](size_t r) { return bx_.row(r)[f] <= best_bin; });
    const auto mid = static_cast<size_t>(mid_it - rows_.begin());
    const int left = Grow(lo, mid, depth + 1);
    const int right = Grow(mid, hi, depth + 1);
    auto& node = tree_.nodes[static_cast<size_t>(id)];
    node.feature = best_feature;
    node.threshold = bins_.thresholds[f][best_bin];
    node.left = left;
    node.right = right;
    return id;
  }

  const BinnedMatrix& bx_;
  const FeatureBins& bins_;
  std::span<const int> y_;
  std::span<const double> weight_;
  const ForestParams& params_;
  int mtry_;
  Rng& rng_;
  std::vector<size_t> features_;
  std::vector<size_t> rows_;
  Tree tree_;
};

class BoostTreeBuilder {
 public:
  BoostTreeBuilder(const BinnedMatrix& bx, const FeatureBins& bins,
                   std::span<const double> g, std::span<const double> h,
                   const BoostingParams& params)
      : bx_(bx), bins_(bins), g_(g), h_(h), params_(params) {}

  Tree Build(std::vector<size_t>& rows) {
    rows_ = &rows;
    tree_ = Tree{};
    std::vector<double> hist = Histogram(0, rows.size());
    Grow(0, rows.size(), 0, hist);
    return std::move(tree_);
  }

 private:
  std::vector<double> Histogram(size_t lo, size_t hi) const {
    const size_t d = bx_.cols;
    std::vector<double> hist(d * 512, 0.0);
    for (size_t i = lo; i < hi; ++i) {
      const size_t r = (*rows_)[i];
      const uint8_t* codes = bx_.row(r);
      const double g = g_[r];
      const double h = h_[r];
      double* base = hist.data();
      for (size_t f = 0; f < d; ++f) {
        double* cell = base + (f * 256 + codes[f]) * 2;
        cell[0] += g;
        cell[1] += h;
      }
    }
    return hist;
  }

  int Grow(size_t lo, size_t hi, int depth, const std::vector<double>& hist) {
    double G = 0, H = 0;
    for (size_t i = lo; i < hi; ++i) {
      G += g_[(*rows_)[i]];
      H += h_[(*rows_)[i]];
    }
    const double lambda = params_.lambda;
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(
        {-1, 0.0, -1, -1, -params_.learning_rate * G / (H + lambda)});
    if (depth >= params_.max_depth || hi - lo < 2) return id;

    const double parent = G * G / (H + lambda);
    double best_gain = 1e-12;
    int best_feature = -1;
    size_t best_bin = 0;
    for (size_t f = 0; f < bx_.cols; ++f) {
      const size_t nb = bins_.thresholds[f].size() + 1;
      const double* cells = hist.data() + f * 512;
      double gl = 0, hl = 0;
      for (size_t b = 0; b + 1 < nb; ++b) {
        gl += cells[b * 2];
        hl += cells[b * 2 + 1];
        const double gr = G - gl;
        const double hr = H - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain =
            gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto f = static_cast<size_t>(best_feature);
    auto& rows = *rows_;
    const auto mid_it = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(lo),
        rows.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](size_t r) { return bx_.row(r)[f] <= best_bin; });
    const auto mid = static_cast<size_t>(mid_it - rows.begin());

    int left = -1;
    int right = -1;
    if (depth + 1 >= params_.max_depth) {
      static const std::vector<double> kUnused;
      left = Grow(lo, mid, depth + 1, kUnused);
      right = Grow(mid, hi, depth + 1, kUnused);
    } else {
      // Histogram of the smaller child directly, the larger by subtraction.
      const bool left_smaller = mid - lo <= hi - mid;
      std::vector<double> small =
          left_smaller ? Histogram(lo, mid) : Histogram(mid, hi);
      std::vector<double> large(hist.size());
      for (size_t i = 0; i < hist.size(); ++i) large[i] = hist[i] - small[i];
      left = Grow(lo, mid, depth + 1, left_smaller ? small : large);
      right = Grow(mid, hi, depth + 1, left_smaller ? large : small);
    }
    auto& node = tree_.nodes[static_cast<size_t>(id)];
    node.feature = best_feature;
    node.threshold = bins_.thresholds[f][best_bin];
    node.left = left;
    node.right = right;
    return id;
  }

  const BinnedMatrix& bx_;
  const FeatureBins& bins_;
  std::span<const double> g_;
  std::span<const double> h_;
  const BoostingParams& params_;
  std::vector<size_t>* rows_ = nullptr;
  Tree tree_;
};

nlohmann::json TreesToJson(const std::vector<Tree>& trees) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trees) out.push_back(t.ToJson());
  return out;
}

std::vector<Tree> TreesFromJson(const nlohmann::json& j) {
  std::vector<Tree> trees;
  for (const auto& t : j) trees.push_back(Tree::FromJson(t));
  return trees;
}

}  // namespace

FeatureBins FeatureBins::Fit(const Matrix& x, int max_bins) {
  if (max_bins < 2 || max_bins > 256) {
    throw Error(ErrorCode::kInvalidArgument, "max_bins must be in [2, 256]");
  }
  FeatureBins bins;
  bins.thresholds.resize(static_cast<size_t>(x.cols()));
  std::vector<double> column(static_cast<size_t>(x.rows()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      column[static_cast<size_t>(r)] = x(r, f);
    }
    std::sort(column.begin(), column.end());
    std::vector<double> unique = column;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    auto& thr = bins.thresholds[static_cast<size_t>(f)];
    if (unique.size() <= static_cast<size_t>(max_bins)) {
      for (size_t i = 0; i + 1 < unique.size(); ++i) {
        thr.push_back(unique[i] + (unique[i + 1] - unique[i]) / 2.0);
      }
    } else {
      const size_t n = column.size();
      for (int k = 1; k < max_bins; ++k) {
        const double v = column[static_cast<size_t>(k) * n / static_cast<size_t>(max_bins)];
        if (v < column.back() && (thr.empty() || v > thr.back())) thr.push_back(v);
      }
    }
  }
  return bins;
}

uint8_t FeatureBins::Code(size_t feature, double value) const {
  const auto& thr = thresholds[feature];
  return static_cast<uint8_t>(std::lower_bound(thr.begin(), thr.end(), value) -
                              thr.begin());
}

BinnedMatrix ApplyBins(const FeatureBins& bins, const Matrix& x) {
  if (static_cast<size_t>(x.cols()) != bins.num_features()) {
    throw Error(ErrorCode::kDimensionMismatch, "bins/features width");
  }
  BinnedMatrix b;
  b.rows = static_cast<size_t>(x.rows());
  b.cols = static_cast<size_t>(x.cols());
  b.codes.resize(b.rows * b.cols);
  for (size_t r = 0; r < b.rows; ++r) {
    for (size_t f = 0; f < b.cols; ++f) {
      b.codes[r * b.cols + f] = bins.Code(
          f, x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)));
    }
  }
  return b;
}

double Tree::Predict(const double* row) const {
  size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<size_t>(row[nodes[i].feature] <= nodes[i].threshold
                                ? nodes[i].left
                                : nodes[i].right);
  }
  return nodes[i].value;
}

int Tree::Depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  int depth = 0;
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    depth = std::max(depth, d);
    const auto& n = nodes[static_cast<size_t>(i)];
    if (n.feature >= 0) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return depth;
}

nlohmann::json Tree::ToJson() const {
  std::vector<int> feature, left, right;
  std::vector<double> threshold, value;
  for (const auto& n : nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right}, {"value", value}};
}

Tree Tree::FromJson(const nlohmann::json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
      value.size() != n) {
    throw Error(ErrorCode::kConfigError, "malformed tree");
  }
  Tree t;
  for (size_t i = 0; i < n; ++i) {
    if (feature[i] >= 0) {
      const auto ok = [&](int c) {
        return c > static_cast<int>(i) && c < static_cast<int>(n);
      };
      if (!ok(left[i]) || !ok(right[i])) {
        throw Error(ErrorCode::kConfigError, "tree child index out of range");
      }
    }
    t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
  }
  return t;
}

nlohmann::json ForestParams::ToJson() const {
  return {{"n_trees", n_trees}, {"max_depth", max_depth},
          {"min_samples_leaf", min_samples_leaf}, {"max_bins", max_bins},
          {"max_features", max_features}};
}

ForestParams ForestParams::FromJson(const nlohmann::json& j) {
  ForestParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
  p.max_bins = j.value("max_bins", p.max_bins);
  p.max_features = j.value("max_features", p.max_features);
  if (p.n_trees < 1 || p.max_depth < 0 || p.min_samples_leaf < 1 ||
      p.max_features < 0) {
    throw Error(ErrorCode::kConfigError, "invalid random forest parameters");
  }
  return p;
}

RandomForest RandomForest::Fit(const Matrix& x, std::span<const int> y,
                               const ForestParams& params, uint64_t seed) {
  CheckTrainingData(x, y);
  const FeatureBins bins = FeatureBins::Fit(x, params.max_bins);
  const BinnedMatrix bx = ApplyBins(bins, x);
  const size_t n = bx.rows;
  const int d = static_cast<int>(bx.cols);
  const int mtry = params.max_features > 0
                       ? std::min(params.max_features, d)
                       : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
  RandomForest forest;
  forest.n_features_ = d;
  Rng root(seed);
  std::vector<double> weight(n);
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng = root.Fork(static_cast<uint64_t>(t));
    std::fill(weight.begin(), weight.end(), 0.0);
    for (size_t i = 0; i < n; ++i) weight[rng.Below(n)] += 1.0;
    std::vector<size_t> rows;
    rows.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      if (weight[i] > 0) rows.push_back(i);
    }
    ForestTreeBuilder builder(bx, bins, y, weight, params, mtry, rng);
    forest.trees_.push_back(builder.Build(std::move(rows)));
  }
  return forest;
}

std::vector<double> RandomForest::PredictProba(const Matrix& x) const {
  CheckWidth(x, n_features_);
  std::vector<double> out(static_cast<size_t>(x.rows()), 0.0);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double* row = x.data() + r * x.cols();
    double sum = 0;
    for (const auto& t : trees_) sum += t.Predict(row);
    out[static_cast<size_t>(r)] = sum / static_cast<double>(trees_.size());
  }
  return out;
}

nlohmann::json RandomForest::ToJson() const {
  return {{"n_features", n_features_}, {"trees", TreesToJson(trees_)}};
}

RandomForest RandomForest::FromJson(const nlohmann::json& j) {
  RandomForest f;
  f.n_features_ = j.at("n_features").get<int>();
  f.trees_ = TreesFromJson(j.at("trees"));
  if (f.trees_.empty()) throw Error(ErrorCode::kConfigError, "empty forest");
  return f;
}

nlohmann::json BoostingParams::ToJson() const {
  return {{"rounds", rounds}, {"max_depth", max_depth},
          {"learning_rate", learning_rate}, {"lambda", lambda},
          {"min_child_weight", min_child_weight}, {"max_bins", max_bins}};
}

BoostingParams BoostingParams::FromJson(const nlohmann::json& j) {
  BoostingParams p;
  p.rounds = j.value("rounds", p.rounds);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.lambda = j.value("lambda", p.lambda);
  p.min_child_weight = j.value("min_child_weight", p.min_child_weight);
  p.max_bins = j.value("max_bins", p.max_bins);
  if (p.rounds < 0 || p.max_depth < 0 || !(p.learning_rate > 0) ||
      !(p.lambda >= 0) || !(p.min_child_weight >= 0)) {
    throw Error(ErrorCode::kConfigError, "invalid boosting parameters");
  }
  return p;
}

GradientBoosting GradientBoosting::Fit(const Matrix& x, std::span<const int> y,
                                       const BoostingParams& params) {
  CheckTrainingData(x, y);
  GradientBoosting model;
  model.n_features_ = static_cast<int>(x.cols());
  const size_t n = y.size();
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double rate = std::clamp(pos / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  model.base_margin_ = std::log(rate / (1.0 - rate));
  if (params.rounds == 0) return model;

  const FeatureBins bins = FeatureBins::Fit(x, params.max_bins);
  const BinnedMatrix bx = ApplyBins(bins, x);
  std::vector<double> margin(n, model.base_margin_);
  std::vector<double> g(n), h(n);
  std::vector<size_t> rows(n);
  for (int round = 0; round < params.rounds; ++round) {
    for (size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-margin[i]));
      g[i] = p - y[i];
      h[i] = std::max(p * (1.0 - p), 1e-16);
    }
    std::iota(rows.begin(), rows.end(), size_t{0});
    BoostTreeBuilder builder(bx, bins, g, h, params);
    Tree tree = builder.Build(rows);
    for (size_t i = 0; i < n; ++i) {
      margin[i] += tree.Predict(x.data() + static_cast<Eigen::Index>(i) * x.cols());
    }
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

std::vector<double> GradientBoosting::PredictMargin(const Matrix& x) const {
  CheckWidth(x, n_features_);
  std::vector<double> out(static_cast<size_t>(x.rows()), base_margin_);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double* row = x.data() + r * x.cols();
    for (const auto& t : trees_) out[static_cast<size_t>(r)] += t.Predict(row);
  }
  return out;
}

std::vector<double> GradientBoosting::PredictProba(const Matrix& x) const {
  auto m = PredictMargin(x);
  for (auto& v : m) v = 1.0 / (1.0 + std::exp(-v));
  return m;
}

nlohmann::json GradientBoosting::ToJson() const {
  return {{"n_features", n_features_}, {"base_margin", base_margin_},
          {"trees", TreesToJson(trees_)}};
}

GradientBoosting GradientBoosting::FromJson(const nlohmann::json& j) {
  GradientBoosting m;
  m.n_features_ = j.at("n_features").get<int>();
  m.base_margin_ = j.at("base_margin").get<double>();
  m.trees_ = TreesFromJson(j.at("trees"));
  return m;
}

}  // namespace tabsan
