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

#include "tabsan/report.h"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tabsan/error.h"
#include "tabsan/metrics.h"

namespace tabsan {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Stat, mean, stddev, values)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ClassifierScore, classifier, target, accuracy, f1)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TargetSummary, accuracy, f1, accuracy_from, f1_from)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TradeoffEntry, c_n_private, c_a_private,
                                   c_r_private, c_n_utility, c_a_utility,
                                   c_r_utility, m_p_raw, m_p, m_u_raw, m_u)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FairnessEntry, classifier, grouping,
                                   group_attribute, equalized_odds,
                                   equal_opportunity, demographic_parity,
                                   undefined_seeds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NoiseEntry, column, n, mean, stddev, edges, counts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FlipEntry, column, flips, compared, rate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StageError, seed, stage, message)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DispositionTotals, ok, malformed, refusal,
                                   sanitized, passthrough, dropped)

namespace {

constexpr std::string_view kReportFormat = "tabsan-report";
constexpr int kReportVersion = 1;

template <typename T>
nlohmann::json OptionalToJson(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

template <typename T>
std::optional<T> OptionalFromJson(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

nlohmann::json MechanismToJson(const MechanismReport& m) {
  return {{"id", m.id},
          {"label", m.label},
          {"config", m.config},
          {"coverage", m.coverage},
          {"dispositions", m.dispositions},
          {"scores", m.scores},
          {"summary_private", OptionalToJson(m.summary_private)},
          {"summary_utility", OptionalToJson(m.summary_utility)},
          {"tradeoff", OptionalToJson(m.tradeoff)},
          {"fairness", m.fairness},
          {"noise", m.noise},
          {"flips", m.flips},
          {"errors", m.errors},
          {"request_fingerprints", m.request_fingerprints}};
}

MechanismReport MechanismFromJson(const nlohmann::json& j) {
  MechanismReport m;
  m.id = j.at("id").get<std::string>();
  m.label = j.at("label").get<std::string>();
  m.config = j.at("config");
  m.coverage = j.at("coverage").get<Stat>();
  m.dispositions = j.at("dispositions").get<DispositionTotals>();
  m.scores = j.at("scores").get<std::vector<ClassifierScore>>();
  m.summary_private = OptionalFromJson<TargetSummary>(j, "summary_private");
  m.summary_utility = OptionalFromJson<TargetSummary>(j, "summary_utility");
  m.tradeoff = OptionalFromJson<TradeoffEntry>(j, "tradeoff");
  m.fairness = j.at("fairness").get<std::vector<FairnessEntry>>();
  m.noise = j.at("noise").get<std::vector<NoiseEntry>>();
  m.flips = j.at("flips").get<std::vector<FlipEntry>>();
  m.errors = j.at("errors").get<std::vector<StageError>>();
  m.request_fingerprints = j.at("request_fingerprints").get<std::vector<std::string>>();
  return m;
}

std::string Fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string WithStd(const Stat& s) {
  return Fixed(s.mean) + " ± " + Fixed(s.stddev);
}

std::string Pad(std::string s, size_t width) {
  // Width in code points so "±" does not skew columns.
  size_t visible = 0;
  for (unsigned char c : s) visible += (c & 0xC0) != 0x80;
  if (visible < width) s.append(width - visible, ' ');
  return s;
}

void WriteFile(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << body;
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
}

std::string Csv(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Stat Stat::Of(std::vector<double> values) {
  const MeanStd s = Summarize(values);
  return {s.mean, s.stddev, std::move(values)};
}

const MechanismReport* EvaluationReport::Find(std::string_view id) const {
  for (const auto& m : mechanisms) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

nlohmann::json EvaluationReport::ToJson() const {
  nlohmann::json mechs = nlohmann::json::array();
  for (const auto& m : mechanisms) mechs.push_back(MechanismToJson(m));
  return {{"format", kReportFormat},
          {"version", kReportVersion},
          {"task", task},
          {"private_feature", private_feature},
          {"utility_feature", utility_feature},
          {"seeds", seeds},
          {"test_size", test_size},
          {"aux_size", aux_size},
          {"classifiers", classifiers},
          {"mechanisms", mechs},
          {"conventions", conventions},
          {"provenance", provenance},
          {"complete", complete}};
}

EvaluationReport EvaluationReport::FromJson(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != kReportFormat ||
        j.value("version", 0) != kReportVersion) {
      throw Error(ErrorCode::kConfigError, "not a version-1 report");
    }
    EvaluationReport r;
    r.task = j.at("task").get<std::string>();
    r.private_feature = j.at("private_feature").get<std::string>();
    r.utility_feature = j.at("utility_feature").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    r.test_size = j.at("test_size").get<size_t>();
    r.aux_size = j.at("aux_size").get<size_t>();
    r.classifiers = j.at("classifiers").get<std::vector<std::string>>();
    for (const auto& m : j.at("mechanisms")) r.mechanisms.push_back(MechanismFromJson(m));
    r.conventions = j.at("conventions");
    r.provenance = j.at("provenance");
    r.complete = j.at("complete").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("report: ") + e.what());
  }
}

std::string SerializeReport(const EvaluationReport& report) {
  return report.ToJson().dump(2) + "\n";
}

EvaluationReport ParseReport(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("report: ") + e.what());
  }
  return EvaluationReport::FromJson(j);
}

std::string RenderHumanReport(const EvaluationReport& r) {
  std::ostringstream out;
  out << r.task << " (private: " << r.private_feature
      << ", utility: " << r.utility_feature << ")\n";
  out << "seeds: " << r.seeds.size() << "   test rows: " << r.test_size
      << "   auxiliary rows: " << r.aux_size
      << "   F1: " << r.conventions.value("f1", std::string(kF1Convention))
      << "   values: mean ± sample std\n";
  if (!r.complete) out << "PARTIAL REPORT: some stages failed, see errors\n";
  out << "\n";

  const std::string p = r.private_feature;
  const std::string u = r.utility_feature;
  constexpr size_t kMechW = 20, kClsW = 22, kCellW = 14;
  out << Pad("Mechanism", kMechW) << Pad("Classifier", kClsW)
      << Pad(p + " acc", kCellW) << Pad(p + " F1", kCellW)
      << Pad(u + " acc", kCellW) << Pad(u + " F1", kCellW) << "\n";
  out << std::string(kMechW + kClsW + 4 * kCellW, '-') << "\n";
  for (const auto& m : r.mechanisms) {
    std::map<std::string, std::map<std::string, const ClassifierScore*>> by_cls;
    std::vector<std::string> order;
    for (const auto& s : m.scores) {
      if (!by_cls.count(s.classifier)) order.push_back(s.classifier);
      by_cls[s.classifier][s.target] = &s;
    }
    bool first = true;
    for (const auto& cls : order) {
      out << Pad(first ? m.label : "", kMechW) << Pad(cls, kClsW);
      first = false;
      for (const char* target : {"private", "utility"}) {
        const auto it = by_cls[cls].find(target);
        if (it == by_cls[cls].end()) {
          out << Pad("-", kCellW) << Pad("-", kCellW);
        } else {
          out << Pad(WithStd(it->second->accuracy), kCellW)
              << Pad(WithStd(it->second->f1), kCellW);
        }
      }
      out << "\n";
    }
    out << Pad(first ? m.label : "", kMechW) << Pad("Summary", kClsW);
    for (const auto& s : {m.summary_private, m.summary_utility}) {
      if (s) {
        out << Pad(Fixed(s->accuracy), kCellW) << Pad(Fixed(s->f1), kCellW);
      } else {
        out << Pad("-", kCellW) << Pad("-", kCellW);
      }
    }
    out << "\n";
    if (m.coverage.mean < 1.0) {
      out << Pad("", kMechW) << "coverage " << Fixed(m.coverage.mean * 100, 1)
          << "% (dropped " << m.dispositions.dropped << ", passthrough "
          << m.dispositions.passthrough << ")\n";
    }
  }

  out << "\nPrivacy leakage (M_p, lower is better) and utility performance "
         "(M_u, higher is better)\n";
  out << Pad("Mechanism", kMechW) << Pad("M_p", 8) << Pad("M_u", 8)
      << "c_a(p) c_n(p) c_r(p) | c_a(u) c_n(u) c_r(u)\n";
  for (const auto& m : r.mechanisms) {
    if (!m.tradeoff) continue;
    const auto& t = *m.tradeoff;
    out << Pad(m.label, kMechW) << Pad(Fixed(t.m_p), 8) << Pad(Fixed(t.m_u), 8)
        << Fixed(t.c_a_private) << "   " << Fixed(t.c_n_private) << "   "
        << Fixed(t.c_r_private) << "   | " << Fixed(t.c_a_utility) << "   "
        << Fixed(t.c_n_utility) << "   " << Fixed(t.c_r_utility) << "\n";
  }

  out << "\nFairness (" << u << " predictions grouped by " << p
      << "; lower is fairer)\n";
  out << Pad("Mechanism", kMechW) << Pad("Classifier", kClsW)
      << Pad("eq. odds", kCellW) << Pad("eq. opp.", kCellW)
      << Pad("dem. parity", kCellW) << "\n";
  for (const auto& m : r.mechanisms) {
    for (const auto& f : m.fairness) {
      if (f.grouping != "utility_by_private") continue;
      out << Pad(m.label, kMechW) << Pad(f.classifier, kClsW)
          << Pad(WithStd(f.equalized_odds), kCellW)
          << Pad(WithStd(f.equal_opportunity), kCellW)
          << Pad(WithStd(f.demographic_parity), kCellW);
      if (f.undefined_seeds > 0) out << "(" << f.undefined_seeds << " seeds undefined)";
      out << "\n";
    }
  }

  bool any_flips = false;
  for (const auto& m : r.mechanisms) {
    for (const auto& f : m.flips) any_flips |= f.flips > 0;
  }
  out << "\nCategorical label flips (all seeds pooled)\n";
  if (!any_flips) out << "none\n";
  for (const auto& m : r.mechanisms) {
    for (const auto& f : m.flips) {
      if (f.flips == 0) continue;
      out << Pad(m.label, kMechW) << Pad(f.column, kClsW) << f.flips << " / "
          << f.compared << " (" << Fixed(f.rate * 100, 1) << "%)\n";
    }
  }

  out << "\nContinuous distortion, sanitized minus original (all seeds pooled)\n";
  bool any_noise = false;
  for (const auto& m : r.mechanisms) {
    for (const auto& n : m.noise) any_noise |= n.mean != 0 || n.stddev != 0;
  }
  if (!any_noise) out << "none\n";
  for (const auto& m : r.mechanisms) {
    for (const auto& n : m.noise) {
      if (n.mean == 0 && n.stddev == 0) continue;
      out << Pad(m.label, kMechW) << Pad(n.column, kClsW) << "mean "
          << Fixed(n.mean, 3) << "  std " << Fixed(n.stddev, 3) << "\n";
    }
  }

  bool any_errors = false;
  for (const auto& m : r.mechanisms) {
    for (const auto& e : m.errors) {
      if (!any_errors) out << "\nErrors\n";
      any_errors = true;
      out << m.id << " seed " << e.seed << " [" << e.stage << "] " << e.message << "\n";
    }
  }
  return out.str();
}

std::string SafeName(std::string_view id) {
  std::string out;
  for (char c : id) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
  }
  return out;
}

std::vector<std::filesystem::path> EmitReport(const EvaluationReport& report,
                                              const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "plots", ec);
  if (ec) {
    throw Error(ErrorCode::kIoFailure,
                "cannot create " + (out_dir / "plots").string() + ": " + ec.message());
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& path, const std::string& body) {
    WriteFile(path, body);
    written.push_back(path);
  };
  emit(out_dir / "report.json", SerializeReport(report));
  emit(out_dir / "report.txt", RenderHumanReport(report));

  std::ostringstream fairness;
  fairness << "mechanism,classifier,grouping,group_attribute,metric,mean,stddev\n";
  for (const auto& m : report.mechanisms) {
    for (const auto& f : m.fairness) {
      for (const auto& [name, stat] :
           {std::pair{"equalized_odds", &f.equalized_odds},
            std::pair{"equal_opportunity", &f.equal_opportunity},
            std::pair{"demographic_parity", &f.demographic_parity}}) {
        fairness << m.id << "," << f.classifier << "," << f.grouping << ","
                 << f.group_attribute << "," << name << "," << Csv(stat->mean)
                 << "," << Csv(stat->stddev) << "\n";
      }
    }
  }
  emit(out_dir / "plots" / "fairness.csv", fairness.str());

  for (const auto& m : report.mechanisms) {
    for (const auto& n : m.noise) {
      std::ostringstream hist;
      hist << "bin_left,bin_right,count\n";
      for (size_t b = 0; b < n.counts.size(); ++b) {
        hist << Csv(n.edges[b]) << "," << Csv(n.edges[b + 1]) << "," << n.counts[b] << "\n";
      }
      emit(out_dir / "plots" /
               ("hist_" + SafeName(m.id) + "_" + SafeName(n.column) + ".csv"),
           hist.str());
    }
    std::ostringstream flips;
    flips << "column,flips,compared,rate\n";
    for (const auto& f : m.flips) {
      flips << f.column << "," << f.flips << "," << f.compared << "," << Csv(f.rate) << "\n";
    }
    emit(out_dir / "plots" / ("flips_" + SafeName(m.id) + ".csv"), flips.str());
  }
  return written;
}

}  // namespace tabsan
