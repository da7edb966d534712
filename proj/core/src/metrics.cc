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

#include "tabsan/metrics.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "tabsan/error.h"

namespace tabsan {

namespace {

void CheckLengths(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(a.size()) + " predictions vs " +
                    std::to_string(b.size()) + " labels");
  }
  if (a.empty()) throw Error(ErrorCode::kInvalidArgument, "no predictions");
}

double F1FromCounts(size_t tp, size_t fp, size_t fn) {
  const size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

Ratio NormalizedRatio(double c_n, double c_a, double c_r) {
  if (c_n == c_r) {
    throw Error(ErrorCode::kDegenerateBaseline,
                "raw accuracy equals the constant-guess rate");
  }
  const double raw = (c_a - c_r) / (c_n - c_r);
  return {raw, Clamp01(raw)};
}

}  // namespace

double Accuracy(std::span<const int> predictions, std::span<const int> labels) {
  CheckLengths(predictions, labels);
  size_t hits = 0;
  for (size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double ClassF1(std::span<const int> predictions, std::span<const int> labels,
               int positive) {
  CheckLengths(predictions, labels);
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive;
    const bool l = labels[i] == positive;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  return F1FromCounts(tp, fp, fn);
}

double MacroF1(std::span<const int> predictions, std::span<const int> labels) {
  CheckLengths(predictions, labels);
  std::set<int> classes(labels.begin(), labels.end());
  classes.insert(predictions.begin(), predictions.end());
  double sum = 0;
  for (int c : classes) sum += ClassF1(predictions, labels, c);
  return sum / static_cast<double>(classes.size());
}

ScorePair Score(std::span<const int> predictions, std::span<const int> labels) {
  return {Accuracy(predictions, labels), MacroF1(predictions, labels)};
}

double Clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

Ratio PrivacyLeakage(double c_n, double c_a, double c_r) {
  return NormalizedRatio(c_n, c_a, c_r);
}

Ratio UtilityPerformance(double c_n, double c_a, double c_r) {
  return NormalizedRatio(c_n, c_a, c_r);
}

TradeoffScores ComputeTradeoff(const AttributeAccuracy& privacy,
                               const AttributeAccuracy& utility) {
  TradeoffScores t;
  t.privacy = privacy;
  t.utility = utility;
  t.m_p = PrivacyLeakage(privacy.c_n, privacy.c_a, privacy.c_r);
  t.m_u = UtilityPerformance(utility.c_n, utility.c_a, utility.c_r);
  return t;
}

FairnessScores Fairness(std::span<const int> predictions,
                        std::span<const int> labels, std::span<const int> groups,
                        int positive, std::string group_attribute) {
  CheckLengths(predictions, labels);
  if (groups.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "groups vs labels");
  }
  // [group][label positive?][prediction positive?]
  size_t counts[2][2][2] = {};
  for (size_t i = 0; i < labels.size(); ++i) {
    const int g = groups[i];
    if (g != 0 && g != 1) {
      throw Error(ErrorCode::kInvalidArgument, "group values must be 0 or 1");
    }
    ++counts[g][labels[i] == positive][predictions[i] == positive];
  }
  double tpr[2], fpr[2], ppr[2];
  for (int g = 0; g < 2; ++g) {
    const size_t pos = counts[g][1][0] + counts[g][1][1];
    const size_t neg = counts[g][0][0] + counts[g][0][1];
    if (pos == 0 || neg == 0) {
      throw Error(ErrorCode::kUndefinedRate,
                  "group " + std::to_string(g) + " has no " +
                      (pos == 0 ? "positive" : "negative") + " labels");
    }
    tpr[g] = static_cast<double>(counts[g][1][1]) / static_cast<double>(pos);
    fpr[g] = static_cast<double>(counts[g][0][1]) / static_cast<double>(neg);
    ppr[g] = static_cast<double>(counts[g][0][1] + counts[g][1][1]) /
             static_cast<double>(pos + neg);
  }
  FairnessScores f;
  f.equal_opportunity = std::abs(tpr[0] - tpr[1]);
  f.equalized_odds = std::max(f.equal_opportunity, std::abs(fpr[0] - fpr[1]));
  f.demographic_parity = std::abs(ppr[0] - ppr[1]);
  f.group_attribute = std::move(group_attribute);
  return f;
}

Histogram Histogram::Build(std::span<const double> values, int bins) {
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be >= 1");
  Histogram h;
  h.counts.assign(static_cast<size_t>(bins), 0);
  double lo = 0, hi = 0;
  if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + b * width);
  for (double v : values) {
    auto b = static_cast<long>(std::floor((v - lo) / width));
    b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<size_t>(b)];
  }
  return h;
}

DistortionSummary Distortion(const RecordTable& original,
                             const RecordTable& sanitized,
                             std::span<const bool> excluded, int histogram_bins) {
  if (original.schema.StructureFingerprint() !=
      sanitized.schema.StructureFingerprint()) {
    throw Error(ErrorCode::kSchemaMismatch, "distortion needs identical schemas");
  }
  if (original.size() != sanitized.size()) {
    throw Error(ErrorCode::kLengthMismatch, "tables are not row-aligned");
  }
  if (!excluded.empty() && excluded.size() != original.size()) {
    throw Error(ErrorCode::kLengthMismatch, "exclusion mask length");
  }
  const FeatureSchema& schema = original.schema;
  DistortionSummary out;
  std::vector<size_t> cont_slot(schema.num_features());
  std::vector<size_t> cat_slot(schema.num_features());
  for (size_t f = 0; f < schema.num_features(); ++f) {
    const auto& col = schema.feature(f);
    if (col.kind == ColumnKind::kContinuous) {
      cont_slot[f] = out.continuous.size();
      out.continuous.push_back({col.name, {}, {}});
    } else {
      cat_slot[f] = out.categorical.size();
      out.categorical.push_back({col.name, 0, 0, 0.0});
    }
  }
  for (size_t r = 0; r < original.size(); ++r) {
    if (!excluded.empty() && excluded[r]) {
      ++out.excluded_rows;
      continue;
    }
    ++out.compared_rows;
    const auto& a = original.rows[r];
    const auto& b = sanitized.rows[r];
    for (size_t f = 0; f < schema.num_features(); ++f) {
      if (schema.feature(f).kind == ColumnKind::kContinuous) {
        out.continuous[cont_slot[f]].differences.push_back(
            std::get<double>(b[f]) - std::get<double>(a[f]));
      } else {
        auto& c = out.categorical[cat_slot[f]];
        ++c.compared;
        c.flips += std::get<std::string>(a[f]) != std::get<std::string>(b[f]);
      }
    }
  }
  for (auto& c : out.continuous) {
    c.histogram = Histogram::Build(c.differences, histogram_bins);
  }
  for (auto& c : out.categorical) {
    c.rate = c.compared == 0 ? 0.0
                             : static_cast<double>(c.flips) / static_cast<double>(c.compared);
  }
  return out;
}

MeanStd Summarize(std::span<const double> values) {
  MeanStd s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace tabsan
