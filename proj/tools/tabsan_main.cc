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

// Command line front end: prepare, train-adv, sanitize, attack, evaluate,
// verify-fixtures, report.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabsan/adversarial.h"
#include "tabsan/classifiers.h"
#include "tabsan/error.h"
#include "tabsan/metrics.h"
#include "tabsan/report.h"
#include "tabsan/runner.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::optional<int> task;
  std::optional<std::string> mechanism;
  std::optional<uint64_t> seed;
  std::optional<std::string> backend;
  std::string out = "out";
  std::string checkpoint;
  std::string input;
  bool quiet = false;
};

tabsan::ExperimentConfig LoadConfig(const Options& o) {
  if (o.config.empty()) {
    throw tabsan::Error(tabsan::ErrorCode::kConfigError, "--config is required");
  }
  auto c = tabsan::ExperimentConfig::LoadFile(o.config);
  if (o.task) c.task = *o.task;
  if (o.seed) c.seeds = {*o.seed};
  if (o.backend) c.backend.kind = *o.backend;
  if (o.mechanism) {
    const auto spec = tabsan::MechanismSpec::Parse(*o.mechanism);
    c.mechanisms = {tabsan::MechanismSpec{}};
    if (spec.kind != tabsan::MechanismSpec::Kind::kNone) c.mechanisms.push_back(spec);
  }
  c.Validate();
  return c;
}

tabsan::RunHooks Hooks(const Options& o) {
  tabsan::RunHooks hooks;
  if (!o.quiet) hooks.log = [](std::string_view m) { std::cerr << m << "\n"; };
  return hooks;
}

uint64_t FirstSeed(const tabsan::ExperimentConfig& c) { return c.seeds.front(); }

std::string Utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void WriteJson(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw tabsan::Error(tabsan::ErrorCode::kIoFailure, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::string SeedTag(const std::string& id, uint64_t seed) {
  return tabsan::SafeName(id) + "_seed" + std::to_string(seed);
}

int Prepare(const Options& o) {
  const auto c = LoadConfig(o);
  const auto schema =
      tabsan::SchemaForTask(tabsan::FeatureSchema::LoadFile(c.schema_path), c.task);
  const auto loaded = tabsan::LoadCsv(c.data_path, schema);
  const uint64_t seed = FirstSeed(c);
  const auto split = tabsan::SplitForSeed(loaded.table, c, seed);
  fs::create_directories(o.out);
  tabsan::WriteCsv(fs::path(o.out) / ("aux_seed" + std::to_string(seed) + ".csv"), split.train);
  tabsan::WriteCsv(fs::path(o.out) / ("test_seed" + std::to_string(seed) + ".csv"), split.test);
  WriteJson(fs::path(o.out) / ("schema_seed" + std::to_string(seed) + ".json"),
            tabsan::FitNormalization(split.train).ToJson());
  std::cout << "rows " << loaded.table.size() << " (dropped " << loaded.dropped_missing
            << " with missing values), aux " << split.train.size() << ", test "
            << split.test.size() << "\n";
  return 0;
}

int TrainAdv(const Options& o) {
  const auto c = LoadConfig(o);
  const auto mech = c.mechanisms.back();
  if (mech.kind != tabsan::MechanismSpec::Kind::kAlfr &&
      mech.kind != tabsan::MechanismSpec::Kind::kUaePupet) {
    throw tabsan::Error(tabsan::ErrorCode::kConfigError,
                        "train-adv needs --mechanism alfr or uae_pupet");
  }
  const uint64_t seed = FirstSeed(c);
  const auto split = tabsan::SplitForSeed(tabsan::LoadExperimentData(c), c, seed);
  auto cfg = c.adversarial;
  cfg.variant = mech.kind == tabsan::MechanismSpec::Kind::kUaePupet
                    ? tabsan::AdvVariant::kUaePupet
                    : tabsan::AdvVariant::kAlfr;
  cfg.seed = tabsan::DeriveSeed(seed, "adversarial");
  const auto sanitizer = tabsan::TrainSanitizer(split.train, cfg);
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / (SeedTag(mech.id(), seed) + ".json");
  sanitizer.Save(path);
  for (size_t i = 0; i < sanitizer.trace.epochs.size(); ++i) {
    const auto& e = sanitizer.trace.epochs[i];
    std::cout << "epoch " << i << " L " << e.L << " C " << e.C << " l_p " << e.l_p
              << " l_u " << e.l_u << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int Sanitize(const Options& o) {
  const auto c = LoadConfig(o);
  const auto mech = c.mechanisms.back();
  const uint64_t seed = FirstSeed(c);
  const auto split = tabsan::SplitForSeed(tabsan::LoadExperimentData(c), c, seed);
  tabsan::MechanismOutput output;
  if (!o.checkpoint.empty()) {
    const auto sanitizer = tabsan::TrainedSanitizer::Load(o.checkpoint);
    output = tabsan::SanitizeTable(sanitizer, split.test, tabsan::DeriveSeed(seed, "noise"));
  } else {
    output = tabsan::RunMechanism(mech, c, split.train, split.test, seed, Hooks(o)).output;
  }
  fs::create_directories(o.out);
  const std::string tag = SeedTag(mech.id(), seed);
  tabsan::WriteCsv(fs::path(o.out) / ("sanitized_" + tag + ".csv"), output.table);
  json dispositions = json::array();
  for (auto d : output.dispositions) dispositions.push_back(tabsan::DispositionName(d));
  WriteJson(fs::path(o.out) / ("sanitized_" + tag + ".meta.json"),
            {{"mechanism", output.mechanism_id},
             {"config", output.config},
             {"kept", output.kept()},
             {"rows", output.table.size()},
             {"dispositions", dispositions}});
  std::cout << "kept " << output.kept() << " of " << output.table.size() << " rows\n";
  return 0;
}

int Attack(const Options& o) {
  const auto c = LoadConfig(o);
  const uint64_t seed = FirstSeed(c);
  const auto split = tabsan::SplitForSeed(tabsan::LoadExperimentData(c), c, seed);
  tabsan::RecordTable target = split.test;
  if (!o.input.empty()) target = tabsan::LoadCsv(o.input, split.test.schema).table;
  json results = json::array();
  for (auto kind : c.classifiers) {
    if (kind == tabsan::ClassifierKind::kLLMZeroShot) continue;
    for (auto t : {tabsan::Target::kPrivate, tabsan::Target::kUtility}) {
      const auto model = tabsan::Fit(
          kind, t, split.train,
          tabsan::DeriveSeed(seed, "classifier:" + std::string(tabsan::ClassifierKindName(kind))),
          c.classifier_params);
      const auto s = tabsan::Score(model.Predict(target), tabsan::TargetLabels(target, t));
      std::cout << std::left << std::setw(8) << tabsan::ClassifierKindName(kind)
                << std::setw(10) << tabsan::TargetName(t) << " accuracy " << std::fixed
                << std::setprecision(4) << s.accuracy << "  f1 " << s.f1 << "\n";
      results.push_back({{"classifier", tabsan::ClassifierKindName(kind)},
                         {"target", tabsan::TargetName(t)},
                         {"accuracy", s.accuracy},
                         {"f1", s.f1}});
    }
  }
  fs::create_directories(o.out);
  WriteJson(fs::path(o.out) / ("attack_seed" + std::to_string(seed) + ".json"),
            {{"seed", seed}, {"rows", target.size()}, {"results", results}});
  return 0;
}

int Evaluate(const Options& o) {
  const auto c = LoadConfig(o);
  const std::string started = Utc();
  const auto report = tabsan::RunExperiment(c, Hooks(o));
  const auto files = tabsan::EmitReport(report, o.out);
  // Wall-clock times live apart from report.json so that file stays
  // byte-stable across runs.
  WriteJson(fs::path(o.out) / "provenance.json",
            {{"started", started},
             {"finished", Utc()},
             {"config_path", fs::absolute(o.config).string()},
             {"config_hash", c.Hash()}});
  std::cout << tabsan::RenderHumanReport(report);
  return report.complete ? 0 : 3;
}

int VerifyFixtures() {
  bool ok = true;
  for (const auto& f : tabsan::VerifyReferenceFixtures()) {
    std::cout << (f.pass ? "PASS " : "FAIL ") << "task" << f.task << " " << std::left
              << std::setw(12) << f.mechanism << " " << f.metric << " computed "
              << std::fixed << std::setprecision(4) << f.computed << " expected "
              << std::setprecision(2) << f.expected << "\n";
    ok = ok && f.pass;
  }
  return ok ? 0 : 1;
}

int Report(const Options& o) {
  if (o.input.empty()) {
    throw tabsan::Error(tabsan::ErrorCode::kConfigError, "report needs --in <report.json>");
  }
  std::ifstream in(o.input);
  if (!in) throw tabsan::Error(tabsan::ErrorCode::kIoFailure, "cannot open " + o.input);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto report = tabsan::ParseReport(buf.str());
  tabsan::EmitReport(report, o.out);
  std::cout << tabsan::RenderHumanReport(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular privacy sanitization and attack evaluation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--task", o.task, "1 (private gender) or 2 (private income)")
        ->check(CLI::IsMember({1, 2}));
    sub->add_option("--seed", o.seed, "Run a single seed");
    sub->add_option("--backend", o.backend, "LLM backend")->check(CLI::IsMember({"mock", "live"}));
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--quiet", o.quiet, "No progress log on stderr");
  };

  auto* prepare = app.add_subcommand("prepare", "Load, split and fit normalization");
  common(prepare);
  auto* train = app.add_subcommand("train-adv", "Train an ALFR or UAE-PUPET sanitizer");
  common(train);
  train->add_option("--mechanism", o.mechanism, "alfr or uae_pupet")->required();
  auto* sanitize = app.add_subcommand("sanitize", "Sanitize the test split");
  common(sanitize);
  sanitize->add_option("--mechanism", o.mechanism, "none, alfr, uae_pupet or llm:<variant>")
      ->required();
  sanitize->add_option("--checkpoint", o.checkpoint, "Use a trained adversarial sanitizer")
      ->check(CLI::ExistingFile);
  auto* attack = app.add_subcommand("attack", "Fit attack classifiers and score them");
  common(attack);
  attack->add_option("--input", o.input, "Score this CSV instead of the raw test split")
      ->check(CLI::ExistingFile);
  auto* evaluate = app.add_subcommand("evaluate", "Run the full pipeline and emit reports");
  common(evaluate);
  evaluate->add_option("--mechanism", o.mechanism, "Evaluate only this mechanism (plus none)");
  auto* verify = app.add_subcommand("verify-fixtures", "Recompute the reference tradeoff table");
  auto* report = app.add_subcommand("report", "Re-render a machine report");
  report->add_option("--in", o.input, "report.json")->required()->check(CLI::ExistingFile);
  report->add_option("--out", o.out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (prepare->parsed()) return Prepare(o);
    if (train->parsed()) return TrainAdv(o);
    if (sanitize->parsed()) return Sanitize(o);
    if (attack->parsed()) return Attack(o);
    if (evaluate->parsed()) return Evaluate(o);
    if (verify->parsed()) return VerifyFixtures();
    if (report->parsed()) return Report(o);
  } catch (const tabsan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
