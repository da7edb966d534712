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


#ifndef TABSAN_METRICS_H_
#define TABSAN_METRICS_H_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabsan/dataset.h"

namespace tabsan {

// F1 is macro-averaged over the union of classes seen in labels and
// predictions.
inline constexpr const char* kF1Convention = "macro";

struct ScorePair {
  double accuracy = 0.0;
  double f1 = 0.0;
};

ScorePair Score(std::span<const int> predictions, std::span<const int> labels);
double Accuracy(std::span<const int> predictions, std::span<const int> labels);
double MacroF1(std::span<const int> predictions, std::span<const int> labels);
// F1 of one class treated as positive.
double ClassF1(std::span<const int> predictions, std::span<const int> labels,
               int positive);

struct Ratio {
  double raw = 0.0;
  double clamped = 0.0;
};

double Clamp01(double v);
// (c_a - c_r) / (c_n - c_r), clamped to [0, 1]. DegenerateBaseline when
// c_n == c_r.
Ratio PrivacyLeakage(double c_n, double c_a, double c_r);
Ratio UtilityPerformance(double c_n, double c_a, double c_r);

struct AttributeAccuracy {
  double c_n = 0.0;  // raw data
  double c_a = 0.0;  // sanitized data
  double c_r = 0.0;  // best constant guess
};

struct TradeoffScores {
  AttributeAccuracy privacy;
  AttributeAccuracy utility;
  Ratio m_p;
  Ratio m_u;
};

TradeoffScores ComputeTradeoff(const AttributeAccuracy& privacy,
                               const AttributeAccuracy& utility);

struct FairnessScores {
  double equalized_odds = 0.0;
  double equal_opportunity = 0.0;
  double demographic_parity = 0.0;
  std::string group_attribute;
};

// groups holds 0 or 1 per row. `positive` is the class counted as a positive
// prediction. Throws UndefinedRate when a group has no positive or no
// negative labels.
FairnessScores Fairness(std::span<const int> predictions,
                        std::span<const int> labels, std::span<const int> groups,
                        int positive = 1, std::string group_attribute = "");

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<size_t> counts;

  // Fixed-width bins spanning [min, max]; a constant input spans
  // [v - 0.5, v + 0.5]. The maximum lands in the last bin.
  static Histogram Build(std::span<const double> values, int bins);
};

struct ContinuousDistortion {
  std::string column;
  std::vector<double> differences;  // sanitized - original, raw units
  Histogram histogram;
};

struct CategoricalDistortion {
  std::string column;
  size_t flips = 0;
  size_t compared = 0;
  double rate = 0.0;
};

struct DistortionSummary {
  std::vector<ContinuousDistortion> continuous;
  std::vector<CategoricalDistortion> categorical;
  size_t compared_rows = 0;
  size_t excluded_rows = 0;
};

// Rows flagged in `excluded` (if given) are skipped and counted.
DistortionSummary Distortion(const RecordTable& original,
                             const RecordTable& sanitized,
                             std::span<const bool> excluded = {},
                             int histogram_bins = 20);

// Mean and sample standard deviation (n - 1; 0 for a single value).
struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  size_t n = 0;
};
MeanStd Summarize(std::span<const double> values);

}  // namespace tabsan

#endif  // TABSAN_METRICS_H_
