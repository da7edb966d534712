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


#ifndef TABSAN_REPORT_H_
#define TABSAN_REPORT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace tabsan {

// Per-seed values plus their mean and sample standard deviation.
struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> values;

  static Stat Of(std::vector<double> values);
  friend bool operator==(const Stat&, const Stat&) = default;
};

struct ClassifierScore {
  std::string classifier;
  std::string target;  // "private" or "utility"
  Stat accuracy;
  Stat f1;
  friend bool operator==(const ClassifierScore&, const ClassifierScore&) = default;
};

struct TargetSummary {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::string accuracy_from;  // classifier achieving the max
  std::string f1_from;
  friend bool operator==(const TargetSummary&, const TargetSummary&) = default;
};

struct TradeoffEntry {
  double c_n_private = 0.0;
  double c_a_private = 0.0;
  double c_r_private = 0.0;
  double c_n_utility = 0.0;
  double c_a_utility = 0.0;
  double c_r_utility = 0.0;
  double m_p_raw = 0.0;
  double m_p = 0.0;
  double m_u_raw = 0.0;
  double m_u = 0.0;
  friend bool operator==(const TradeoffEntry&, const TradeoffEntry&) = default;
};

struct FairnessEntry {
  std::string classifier;
  // "utility_by_private" (headline) or "private_by_utility".
  std::string grouping;
  std::string group_attribute;
  Stat equalized_odds;
  Stat equal_opportunity;
  Stat demographic_parity;
  size_t undefined_seeds = 0;
  friend bool operator==(const FairnessEntry&, const FairnessEntry&) = default;
};

struct NoiseEntry {
  std::string column;
  size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> edges;
  std::vector<size_t> counts;
  friend bool operator==(const NoiseEntry&, const NoiseEntry&) = default;
};

struct FlipEntry {
  std::string column;
  size_t flips = 0;
  size_t compared = 0;
  double rate = 0.0;
  friend bool operator==(const FlipEntry&, const FlipEntry&) = default;
};

struct StageError {
  uint64_t seed = 0;
  std::string stage;
  std::string message;
  friend bool operator==(const StageError&, const StageError&) = default;
};

struct DispositionTotals {
  size_t ok = 0;
  size_t malformed = 0;
  size_t refusal = 0;
  size_t sanitized = 0;
  size_t passthrough = 0;
  size_t dropped = 0;
  friend bool operator==(const DispositionTotals&, const DispositionTotals&) = default;
};

struct MechanismReport {
  std::string id;
  std::string label;
  nlohmann::json config = nlohmann::json::object();
  Stat coverage;
  DispositionTotals dispositions;
  std::vector<ClassifierScore> scores;
  std::optional<TargetSummary> summary_private;
  std::optional<TargetSummary> summary_utility;
  std::optional<TradeoffEntry> tradeoff;
  std::vector<FairnessEntry> fairness;
  std::vector<NoiseEntry> noise;
  std::vector<FlipEntry> flips;
  std::vector<StageError> errors;
  // Request fingerprints of LLM calls, per seed, for audit.
  std::vector<std::string> request_fingerprints;
  friend bool operator==(const MechanismReport&, const MechanismReport&) = default;
};

struct EvaluationReport {
  std::string task;
  std::string private_feature;
  std::string utility_feature;
  std::vector<uint64_t> seeds;
  size_t test_size = 0;
  size_t aux_size = 0;
  std::vector<std::string> classifiers;
  std::vector<MechanismReport> mechanisms;
  nlohmann::json conventions = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();
  bool complete = true;

  const MechanismReport* Find(std::string_view id) const;

  nlohmann::json ToJson() const;
  static EvaluationReport FromJson(const nlohmann::json& j);
  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

// Stable, sorted-key JSON text with a trailing newline.
std::string SerializeReport(const EvaluationReport& report);
EvaluationReport ParseReport(std::string_view text);

// Accuracy table by mechanism and classifier, plus tradeoff, fairness and
// distortion sections.
std::string RenderHumanReport(const EvaluationReport& report);

// report.json, report.txt, and plots/ (fairness.csv, hist_<mech>_<col>.csv,
// flips_<mech>.csv). Returns the files written.
std::vector<std::filesystem::path> EmitReport(const EvaluationReport& report,
                                              const std::filesystem::path& out_dir);

// File-name-safe form of a mechanism or column id.
std::string SafeName(std::string_view id);

}  // namespace tabsan

#endif  // TABSAN_REPORT_H_
