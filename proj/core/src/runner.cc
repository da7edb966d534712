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

#include "tabsan/runner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "tabsan/error.h"
#include "tabsan/hash.h"
#include "tabsan/metrics.h"
#include "tabsan/random.h"

namespace tabsan {

namespace {

using json = nlohmann::json;

constexpr const char* kUaeLabel = "uae_pupet (fig2-variant)";

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

void Log(const RunHooks& hooks, const std::string& msg) {
  if (hooks.log) hooks.log(msg);
}

}  // namespace

MechanismSpec MechanismSpec::Parse(std::string_view id) {
  MechanismSpec m;
  if (id == "none") {
    m.kind = Kind::kNone;
  } else if (id == "alfr") {
    m.kind = Kind::kAlfr;
  } else if (id == "uae_pupet") {
    m.kind = Kind::kUaePupet;
  } else if (id.starts_with("llm:")) {
    const auto variant = ParseVariantName(id.substr(4));
    if (!variant) {
      throw Error(ErrorCode::kConfigError, "unknown prompt variant in " + std::string(id));
    }
    m.kind = Kind::kLlm;
    m.variant = *variant;
  } else {
    throw Error(ErrorCode::kConfigError, "unknown mechanism " + std::string(id));
  }
  return m;
}

std::string MechanismSpec::id() const {
  switch (kind) {
    case Kind::kNone: return "none";
    case Kind::kAlfr: return "alfr";
    case Kind::kUaePupet: return "uae_pupet";
    case Kind::kLlm: return "llm:" + std::string(VariantName(variant));
  }
  return "none";
}

std::string MechanismSpec::label() const {
  switch (kind) {
    case Kind::kNone: return "No PM";
    case Kind::kAlfr: return "ALFR";
    case Kind::kUaePupet: return kUaeLabel;
    case Kind::kLlm: {
      std::string v(VariantName(variant));
      if (variant == VariantTag::kP1 || variant == VariantTag::kP2) {
        std::transform(v.begin(), v.end(), v.begin(), ::toupper);
      }
      return "LLM (" + v + ")";
    }
  }
  return id();
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::FromJson(const json& j,
                                            const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    if (j.contains("data")) {
      c.data_path = Resolve(base_dir, j.at("data").get<std::string>());
    }
    if (j.contains("schema")) {
      c.schema_path = Resolve(base_dir, j.at("schema").get<std::string>());
    }
    if (j.contains("task")) {
      const auto& t = j.at("task");
      if (t.is_number_integer()) {
        c.task = t.get<int>();
      } else {
        const auto s = t.get<std::string>();
        if (s == "task1") {
          c.task = 1;
        } else if (s == "task2") {
          c.task = 2;
        } else {
          throw Error(ErrorCode::kConfigError, "task must be 1, 2, task1 or task2");
        }
      }
    }
    std::vector<MechanismSpec> mechs;
    for (const auto& m : j.value("mechanisms", json::array({"none"}))) {
      mechs.push_back(MechanismSpec::Parse(m.get<std::string>()));
    }
    // The baseline always runs, and runs first.
    c.mechanisms.push_back(MechanismSpec{});
    std::set<std::string> seen = {"none"};
    for (const auto& m : mechs) {
      if (seen.insert(m.id()).second) c.mechanisms.push_back(m);
    }
    if (j.contains("classifiers")) {
      c.classifiers.clear();
      for (const auto& k : j.at("classifiers")) {
        c.classifiers.push_back(ParseClassifierKind(k.get<std::string>()));
      }
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    c.test_size = j.value("test_size", c.test_size);
    if (j.contains("aux_size") && !j.at("aux_size").is_null()) {
      c.aux_size = j.at("aux_size").get<size_t>();
    }
    if (j.contains("adversarial")) c.adversarial = AdvConfig::FromJson(j.at("adversarial"));
    if (j.contains("classifier_params")) {
      c.classifier_params = ClassifierParams::FromJson(j.at("classifier_params"));
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      c.backend.kind = b.value("kind", c.backend.kind);
      if (b.contains("script") && !b.at("script").is_null()) {
        c.backend.script = Resolve(base_dir, b.at("script").get<std::string>());
      }
      for (const auto& t : b.value("transforms", json::array())) {
        MockTransform mt;
        mt.column = t.at("column").get<std::string>();
        mt.replace = t.value("replace", std::map<std::string, std::string>{});
        mt.offset = t.value("offset", 0.0);
        c.backend.transforms.push_back(std::move(mt));
      }
      c.backend.classify = b.value("classify", c.backend.classify);
      if (b.contains("live")) {
        const auto& l = b.at("live");
        c.backend.live.endpoint = l.value("endpoint", c.backend.live.endpoint);
        c.backend.live.credential_env =
            l.value("credential_env", c.backend.live.credential_env);
        c.backend.live.max_retries = l.value("max_retries", c.backend.live.max_retries);
      }
    }
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      c.budget.limit = b.value("limit", c.budget.limit);
      c.budget.window_seconds = b.value("window_seconds", c.budget.window_seconds);
      c.budget.policy = b.value("policy", c.budget.policy);
    }
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      c.llm.model_id = l.value("model", c.llm.model_id);
      c.llm.temperature = l.value("temperature", c.llm.temperature);
      c.llm.max_output_tokens = l.value("max_output_tokens", c.llm.max_output_tokens);
      c.llm.fallback = l.value("fallback", c.llm.fallback);
      c.llm.parallelism = l.value("parallelism", c.llm.parallelism);
      if (l.contains("templates_dir") && !l.at("templates_dir").is_null()) {
        c.llm.templates_dir = Resolve(base_dir, l.at("templates_dir").get<std::string>());
      }
    }
    c.adaptive_attacker = j.value("adaptive_attacker", c.adaptive_attacker);
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("experiment config: ") + e.what());
  }
  c.Validate();
  return c;
}

ExperimentConfig ExperimentConfig::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
  return FromJson(j, path.parent_path());
}

json ExperimentConfig::ToJson() const {
  // File names only, so the record does not depend on the checkout location.
  json mechs = json::array();
  for (const auto& m : mechanisms) mechs.push_back(m.id());
  json cls = json::array();
  for (auto k : classifiers) cls.push_back(ClassifierKindName(k));
  json transforms = json::array();
  for (const auto& t : backend.transforms) {
    transforms.push_back({{"column", t.column}, {"replace", t.replace}, {"offset", t.offset}});
  }
  return {
      {"data", data_path.filename().string()},
      {"schema", schema_path.filename().string()},
      {"task", task},
      {"mechanisms", mechs},
      {"classifiers", cls},
      {"seeds", seeds},
      {"test_size", test_size},
      {"aux_size", aux_size ? json(*aux_size) : json()},
      {"adversarial", adversarial.ToJson()},
      {"classifier_params", classifier_params.ToJson()},
      {"backend",
       {{"kind", backend.kind},
        {"script", backend.script ? json(backend.script->filename().string()) : json()},
        {"transforms", transforms},
        {"classify", backend.classify},
        {"live",
         {{"endpoint", backend.live.endpoint},
          {"credential_env", backend.live.credential_env},
          {"max_retries", backend.live.max_retries}}}}},
      {"budget",
       {{"limit", budget.limit},
        {"window_seconds", budget.window_seconds},
        {"policy", budget.policy}}},
      {"llm",
       {{"model", llm.model_id},
        {"temperature", llm.temperature},
        {"max_output_tokens", llm.max_output_tokens},
        {"fallback", llm.fallback},
        {"parallelism", llm.parallelism},
        {"templates_dir",
         llm.templates_dir ? json(llm.templates_dir->filename().string()) : json()}}},
      {"adaptive_attacker", adaptive_attacker},
      {"histogram_bins", histogram_bins}};
}

std::string ExperimentConfig::Hash() const { return HashHex(ToJson().dump()); }

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfigError, "experiment config: " + msg);
  };
  if (task != 1 && task != 2) fail("task must be 1 or 2");
  if (seeds.empty()) fail("at least one seed is required");
  if (classifiers.empty()) fail("at least one classifier is required");
  if (test_size < 1) fail("test_size must be >= 1");
  if (aux_size && *aux_size < 2) fail("aux_size must be >= 2");
  if (mechanisms.empty() || mechanisms.front().kind != MechanismSpec::Kind::kNone) {
    fail("the none mechanism must come first");
  }
  if (backend.kind != "mock" && backend.kind != "live") {
    fail("backend.kind must be mock or live");
  }
  if (backend.classify != "none" && backend.classify != "truth" &&
      backend.classify != "majority") {
    fail("backend.classify must be none, truth or majority");
  }
  if (budget.policy != "reject" && budget.policy != "wait") {
    fail("budget.policy must be reject or wait");
  }
  if (budget.limit < 1 || budget.window_seconds < 1) fail("budget must be positive");
  if (llm.parallelism < 1) fail("llm.parallelism must be >= 1");
  if (llm.temperature < 0) fail("llm.temperature must be >= 0");
  if (llm.max_output_tokens < 1) fail("llm.max_output_tokens must be >= 1");
  if (histogram_bins < 1) fail("histogram_bins must be >= 1");
  FallbackPolicy::Parse(llm.fallback);
  adversarial.Validate();
}

FeatureSchema SchemaForTask(const FeatureSchema& base, int task) {
  if (task == 1) return base;
  if (task == 2) return base.Swapped();
  throw Error(ErrorCode::kConfigError, "task must be 1 or 2");
}

RecordTable LoadExperimentData(const ExperimentConfig& config) {
  const FeatureSchema schema =
      SchemaForTask(FeatureSchema::LoadFile(config.schema_path), config.task);
  return LoadCsv(config.data_path, schema).table;
}

uint64_t DeriveSeed(uint64_t seed, std::string_view purpose) {
  return SplitMix64(seed ^ Fnv1a64(purpose));
}

DatasetSplit SplitForSeed(const RecordTable& data, const ExperimentConfig& config,
                          uint64_t seed) {
  DatasetSplit split = SplitByCount(data, config.test_size, seed);
  if (config.aux_size && *config.aux_size < split.train.size()) {
    std::vector<size_t> pick(split.train.size());
    std::iota(pick.begin(), pick.end(), size_t{0});
    Rng rng(DeriveSeed(seed, "aux"));
    rng.Shuffle(std::span<size_t>(pick));
    pick.resize(*config.aux_size);
    std::sort(pick.begin(), pick.end());
    std::vector<size_t> indices;
    for (size_t i : pick) indices.push_back(split.train_indices[i]);
    split.train = split.train.Subset(pick);
    split.train_indices = std::move(indices);
  }
  return split;
}

// ---------------------------------------------------------------------------
// LLM plumbing

Record ApplyTransforms(const Record& record, const FeatureSchema& schema,
                       const std::vector<MockTransform>& transforms) {
  Record out = record;
  for (const auto& t : transforms) {
    const int idx = schema.FeatureIndex(t.column);
    if (idx < 0) {
      throw Error(ErrorCode::kMissingColumn, "mock transform column " + t.column);
    }
    auto& v = out[static_cast<size_t>(idx)];
    if (auto* s = std::get_if<std::string>(&v)) {
      if (auto it = t.replace.find(*s); it != t.replace.end()) *s = it->second;
    } else {
      std::get<double>(v) += t.offset;
    }
  }
  return out;
}

std::unique_ptr<MockBackend> BuildMockBackend(const BackendConfig& config,
                                              const RecordTable& test) {
  auto mock = std::make_unique<MockBackend>();
  for (size_t i = 0; i < test.size(); ++i) {
    const Record r = ApplyTransforms(test.rows[i], test.schema, config.transforms);
    mock->Add("sanitize", i, FormatRecordLines(r, test.schema));
  }
  if (config.classify != "none") {
    for (Target target : {Target::kPrivate, Target::kUtility}) {
      const ColumnSpec& col = TargetColumn(test.schema, target);
      const auto labels = TargetLabels(test, target);
      const int majority = MajorityClass(labels);
      for (size_t i = 0; i < test.size(); ++i) {
        const int answer = config.classify == "truth" ? labels[i] : majority;
        mock->Add("classify:" + col.name, i,
                  col.categories[static_cast<size_t>(answer)]);
      }
    }
  }
  if (config.script) {
    const MockBackend scripted = MockBackend::LoadFile(*config.script);
    for (const auto& e : scripted.ToJson()) {
      const std::string response = e.at("response").get<std::string>();
      if (e.contains("fingerprint")) {
        mock->AddFingerprint(e.at("fingerprint").get<std::string>(), response);
      } else if (!e.contains("index")) {
        mock->SetDefault(response);
      } else if (e.contains("attempt")) {
        mock->AddAttempt(e.at("channel").get<std::string>(), e.at("index").get<size_t>(),
                         e.at("attempt").get<int>(), response);
      } else {
        mock->Add(e.at("channel").get<std::string>(), e.at("index").get<size_t>(),
                  response);
      }
    }
  }
  return mock;
}

ChatRequest RequestTemplate(const LlmConfig& llm) {
  ChatRequest r;
  r.model_id = llm.model_id;
  r.temperature = llm.temperature;
  r.max_output_tokens = llm.max_output_tokens;
  return r;
}

PromptConfig LoadPrompts(const LlmConfig& llm) {
  return llm.templates_dir ? PromptConfig::LoadDirectory(*llm.templates_dir)
                           : PromptConfig::Defaults();
}

std::unique_ptr<TokenBudget> MakeBudget(const BudgetConfig& config) {
  return std::make_unique<TokenBudget>(
      config.limit, std::chrono::seconds(config.window_seconds),
      config.policy == "wait" ? TokenBudget::Policy::kWait
                              : TokenBudget::Policy::kReject);
}

LlmSanitizeResult SanitizeWithLlm(const RecordTable& table, VariantTag variant,
                                  const PromptConfig& prompts,
                                  const FallbackPolicy& policy, Backend& backend,
                                  TokenBudget& budget,
                                  const ChatRequest& request_template,
                                  int parallelism) {
  const PromptVariant pv = prompts.Variant(variant);
  std::vector<PromptBundle> bundles;
  bundles.reserve(table.size());
  for (size_t i = 0; i < table.size(); ++i) {
    std::optional<RowLabels> labels;
    if (pv.supervised()) labels = table.labels[i];
    bundles.push_back(BuildPrompt(table.rows[i], labels, table.schema, pv, prompts, i));
  }
  auto items = RunBatch(bundles, table.schema, request_template, backend, budget,
                        parallelism, prompts.refusal_phrases, 0);

  LlmSanitizeResult result;
  auto& out = result.output;
  out.table = table;
  out.dispositions.resize(table.size());
  out.mechanism_id = "llm:" + std::string(VariantName(variant));
  out.config = {{"variant", VariantName(variant)},
                {"supervised", pv.supervised()},
                {"fallback", policy.ToString()},
                {"model", request_template.model_id},
                {"temperature", request_template.temperature}};
  for (size_t i = 0; i < table.size(); ++i) {
    ChatRequest req = request_template;
    req.messages.push_back({"user", bundles[i].text});
    result.fingerprints.push_back(req.Fingerprint());
    auto retry = [&, i, req](int attempt) {
      ParsedResponse parsed;
      try {
        const Completion c = Complete(req, backend, budget, {"sanitize", i, attempt});
        parsed = ParseResponse(c.text, table.schema, bundles[i].expected_columns,
                               prompts.refusal_phrases);
      } catch (const Error& e) {
        parsed.status = ParseStatus::kMalformed;
        parsed.diagnostics.push_back(e.what());
      }
      return parsed;
    };
    const ResolvedRecord resolved =
        ApplyFallback(items[i].parsed, table.rows[i], policy, retry);
    out.counts.Add(items[i].parsed.status, resolved);
    out.dispositions[i] = resolved.disposition;
    out.table.rows[i] = resolved.record;
    result.dispatch.push_back(std::move(items[i].dispatch));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::unique_ptr<Backend> MakeBackend(const ExperimentConfig& config, uint64_t seed,
                                     const MechanismSpec& mech,
                                     const RecordTable& test, const RunHooks& hooks) {
  if (hooks.backend_factory) return hooks.backend_factory(seed, mech, test);
  if (config.backend.kind == "live") {
    return std::make_unique<LiveBackend>(config.backend.live);
  }
  return BuildMockBackend(config.backend, test);
}

AdvConfig AdversarialFor(const ExperimentConfig& config, const MechanismSpec& mech,
                         uint64_t seed) {
  AdvConfig cfg = config.adversarial;
  cfg.variant = mech.kind == MechanismSpec::Kind::kUaePupet ? AdvVariant::kUaePupet
                                                            : AdvVariant::kAlfr;
  cfg.seed = DeriveSeed(seed, "adversarial");
  return cfg;
}

// Early-stop score: utility probe accuracy minus private probe accuracy on a
// held-out slice of the auxiliary data, both probes trained on raw rows.
EpochCallback EarlyStopProbe(const RecordTable& aux, const AdvConfig& cfg,
                             uint64_t seed) {
  if (cfg.early_stop_patience <= 0 || aux.size() < 20) return {};
  std::vector<size_t> order(aux.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(DeriveSeed(seed, "early-stop"));
  rng.Shuffle(std::span<size_t>(order));
  const size_t holdout = std::min<size_t>(2000, aux.size() / 5);
  const std::vector<size_t> val_idx(order.begin(),
                                    order.begin() + static_cast<std::ptrdiff_t>(holdout));
  const std::vector<size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(holdout),
                                    order.end());
  auto val = std::make_shared<RecordTable>(aux.Subset(val_idx));
  const RecordTable fit = aux.Subset(fit_idx);
  ClassifierParams params;
  params.lr.iterations = 100;
  auto probe_p = std::make_shared<TrainedClassifier>(
      Fit(ClassifierKind::kLR, Target::kPrivate, fit, seed, params));
  auto probe_u = std::make_shared<TrainedClassifier>(
      Fit(ClassifierKind::kLR, Target::kUtility, fit, seed, params));
  auto schema = std::make_shared<FeatureSchema>(FitNormalization(aux));
  return [=](int epoch, const AdversarialModel& model) -> std::optional<double> {
    TrainedSanitizer tmp;
    tmp.generator = model.generator;
    tmp.config = cfg;
    tmp.schema = *schema;
    const MechanismOutput out =
        SanitizeTable(tmp, *val, DeriveSeed(seed, "early-stop-noise") + epoch);
    const double acc_u =
        Accuracy(probe_u->Predict(out.table), TargetLabels(out.table, Target::kUtility));
    const double acc_p =
        Accuracy(probe_p->Predict(out.table), TargetLabels(out.table, Target::kPrivate));
    return acc_u - acc_p;
  };
}

struct MechanismResult {
  SanitizeRun run;
  std::optional<TrainedSanitizer> sanitizer;
};

MechanismResult RunMechanismImpl(const MechanismSpec& mech,
                                 const ExperimentConfig& config,
                                 const RecordTable& aux, const RecordTable& test,
                                 uint64_t seed, const RunHooks& hooks,
                                 TokenBudget* shared_budget) {
  MechanismResult result;
  switch (mech.kind) {
    case MechanismSpec::Kind::kNone:
      result.run.output = Passthrough(test);
      break;
    case MechanismSpec::Kind::kAlfr:
    case MechanismSpec::Kind::kUaePupet: {
      const AdvConfig cfg = AdversarialFor(config, mech, seed);
      Log(hooks, "seed " + std::to_string(seed) + ": training " + mech.id());
      TrainedSanitizer s = TrainSanitizer(aux, cfg, EarlyStopProbe(aux, cfg, seed));
      result.run.output = SanitizeTable(s, test, DeriveSeed(seed, "noise"));
      result.run.output.config["epochs_completed"] = s.trace.epochs.size();
      result.run.output.config["early_stopped"] = s.trace.early_stopped;
      result.sanitizer = std::move(s);
      break;
    }
    case MechanismSpec::Kind::kLlm: {
      Log(hooks, "seed " + std::to_string(seed) + ": querying " + mech.id());
      auto backend = MakeBackend(config, seed, mech, test, hooks);
      std::unique_ptr<TokenBudget> own_budget;
      TokenBudget* budget = shared_budget;
      if (!budget) {
        own_budget = MakeBudget(config.budget);
        budget = own_budget.get();
      }
      auto llm = SanitizeWithLlm(test, mech.variant, LoadPrompts(config.llm),
                                 FallbackPolicy::Parse(config.llm.fallback), *backend,
                                 *budget, RequestTemplate(config.llm),
                                 config.llm.parallelism);
      result.run.output = std::move(llm.output);
      result.run.fingerprints = std::move(llm.fingerprints);
      break;
    }
  }
  return result;
}

struct ClassifierSet {
  std::map<std::pair<ClassifierKind, Target>, TrainedClassifier> models;
  int majority[2] = {0, 0};  // by Target
};

ClassifierSet FitAll(const ExperimentConfig& config, const RecordTable& train,
                     uint64_t seed, std::vector<StageError>* errors,
                     const std::string& stage_prefix) {
  ClassifierSet set;
  set.majority[0] = MajorityClass(train.private_labels());
  set.majority[1] = MajorityClass(train.utility_labels());
  for (auto kind : config.classifiers) {
    for (Target target : {Target::kPrivate, Target::kUtility}) {
      try {
        set.models.emplace(
            std::pair{kind, target},
            Fit(kind, target, train,
                DeriveSeed(seed, "classifier:" + std::string(ClassifierKindName(kind))),
                config.classifier_params));
      } catch (const Error& e) {
        errors->push_back({seed,
                           stage_prefix + "fit:" + std::string(ClassifierKindName(kind)) +
                               ":" + std::string(TargetName(target)),
                           e.what()});
      }
    }
  }
  return set;
}

// Accumulates one mechanism's per-seed measurements.
struct MechanismAccumulator {
  MechanismSpec spec;
  json config = json::object();
  std::vector<double> coverage;
  DispositionTotals totals;
  // (classifier, target) -> per-seed accuracy / f1
  std::map<std::pair<std::string, std::string>, std::vector<double>> accuracy;
  std::map<std::pair<std::string, std::string>, std::vector<double>> f1;
  // (classifier, grouping) -> metric -> values
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>>
      fairness;
  std::map<std::pair<std::string, std::string>, size_t> fairness_undefined;
  std::map<std::string, std::vector<double>> differences;
  std::vector<std::string> continuous_order;
  std::map<std::string, FlipEntry> flips;
  std::vector<std::string> categorical_order;
  std::vector<StageError> errors;
  std::vector<std::string> fingerprints;
  std::vector<double> c_r_private;
  std::vector<double> c_r_utility;
};

std::string GroupingName(Target predicted) {
  return predicted == Target::kUtility ? "utility_by_private" : "private_by_utility";
}

void Evaluate(const ExperimentConfig& config, const ClassifierSet& attackers,
              const RecordTable& test, const MechanismOutput& output, uint64_t seed,
              const MechanismSpec& mech, const RunHooks& hooks, TokenBudget& budget,
              MechanismAccumulator* acc) {
  const auto kept = output.KeptIndices();
  acc->coverage.push_back(test.size() == 0 ? 0.0
                                           : static_cast<double>(kept.size()) /
                                                 static_cast<double>(test.size()));
  acc->totals.ok += output.counts.ok;
  acc->totals.malformed += output.counts.malformed;
  acc->totals.refusal += output.counts.refusal;
  acc->totals.sanitized += output.counts.sanitized;
  acc->totals.passthrough += output.counts.passthrough;
  acc->totals.dropped += output.counts.dropped;
  if (kept.empty()) {
    acc->errors.push_back({seed, "evaluate", "every row was dropped"});
    return;
  }
  const RecordTable evaluated = output.table.Subset(kept);
  const std::vector<int> truth[2] = {evaluated.private_labels(),
                                     evaluated.utility_labels()};

  std::unique_ptr<Backend> zero_shot_backend;
  std::map<std::pair<std::string, Target>, std::vector<int>> predictions;
  for (auto kind : config.classifiers) {
    const std::string name(ClassifierKindName(kind));
    for (Target target : {Target::kPrivate, Target::kUtility}) {
      const std::string tname(TargetName(target));
      const int t = target == Target::kPrivate ? 0 : 1;
      try {
        std::vector<int> pred;
        if (kind == ClassifierKind::kLLMZeroShot) {
          if (!zero_shot_backend) {
            zero_shot_backend = MakeBackend(config, seed, mech, evaluated, hooks);
          }
          auto zs = LlmZeroShotPredict(evaluated, target, *zero_shot_backend, budget,
                                       LoadPrompts(config.llm),
                                       RequestTemplate(config.llm), attackers.majority[t],
                                       config.llm.parallelism);
          if (zs.fallback_count > 0) {
            acc->errors.push_back({seed, "zero-shot:" + tname,
                                   std::to_string(zs.fallback_count) +
                                       " answers fell back to the majority class"});
          }
          pred = std::move(zs.predictions);
        } else {
          const auto it = attackers.models.find({kind, target});
          if (it == attackers.models.end()) continue;
          pred = it->second.Predict(evaluated);
        }
        const ScorePair s = Score(pred, truth[t]);
        acc->accuracy[{name, tname}].push_back(s.accuracy);
        acc->f1[{name, tname}].push_back(s.f1);
        predictions[{name, target}] = std::move(pred);
      } catch (const Error& e) {
        acc->errors.push_back({seed, "predict:" + name + ":" + tname, e.what()});
      }
    }
  }

  for (auto kind : config.classifiers) {
    const std::string name(ClassifierKindName(kind));
    for (Target predicted : {Target::kUtility, Target::kPrivate}) {
      const auto it = predictions.find({name, predicted});
      if (it == predictions.end()) continue;
      const int t = predicted == Target::kPrivate ? 0 : 1;
      const std::vector<int>& groups = truth[1 - t];
      const ColumnSpec& col = TargetColumn(evaluated.schema, predicted);
      const ColumnSpec& group_col =
          TargetColumn(evaluated.schema,
                       predicted == Target::kPrivate ? Target::kUtility : Target::kPrivate);
      const auto key = std::pair{name, GroupingName(predicted)};
      try {
        const FairnessScores f =
            Fairness(it->second, truth[t], groups, col.PositiveIndex(), group_col.name);
        auto& m = acc->fairness[key];
        m["equalized_odds"].push_back(f.equalized_odds);
        m["equal_opportunity"].push_back(f.equal_opportunity);
        m["demographic_parity"].push_back(f.demographic_parity);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUndefinedRate) throw;
        acc->fairness[key];
        ++acc->fairness_undefined[key];
      }
    }
  }

  std::unique_ptr<bool[]> excluded(new bool[test.size()]);
  for (size_t i = 0; i < test.size(); ++i) {
    excluded[i] = output.dispositions[i] == Disposition::kDropped;
  }
  const DistortionSummary d =
      Distortion(test, output.table, std::span<const bool>(excluded.get(), test.size()),
                 config.histogram_bins);
  for (const auto& c : d.continuous) {
    if (!acc->differences.count(c.column)) acc->continuous_order.push_back(c.column);
    auto& all = acc->differences[c.column];
    all.insert(all.end(), c.differences.begin(), c.differences.end());
  }
  for (const auto& c : d.categorical) {
    if (!acc->flips.count(c.column)) {
      acc->categorical_order.push_back(c.column);
      acc->flips[c.column].column = c.column;
    }
    auto& f = acc->flips[c.column];
    f.flips += c.flips;
    f.compared += c.compared;
  }
  acc->c_r_private.push_back(MajorityRate(test.private_labels()));
  acc->c_r_utility.push_back(MajorityRate(test.utility_labels()));
}

std::optional<TargetSummary> Summarize(const MechanismReport& m,
                                       const std::string& target) {
  std::optional<TargetSummary> s;
  for (const auto& score : m.scores) {
    if (score.target != target || score.accuracy.values.empty()) continue;
    if (!s) {
      s = TargetSummary{score.accuracy.mean, score.f1.mean, score.classifier,
                        score.classifier};
      continue;
    }
    if (score.accuracy.mean > s->accuracy) {
      s->accuracy = score.accuracy.mean;
      s->accuracy_from = score.classifier;
    }
    if (score.f1.mean > s->f1) {
      s->f1 = score.f1.mean;
      s->f1_from = score.classifier;
    }
  }
  return s;
}

MechanismReport Finish(const ExperimentConfig& config, MechanismAccumulator& acc) {
  MechanismReport m;
  m.id = acc.spec.id();
  m.label = acc.spec.label();
  m.config = acc.config;
  m.coverage = Stat::Of(acc.coverage);
  m.dispositions = acc.totals;
  for (auto kind : config.classifiers) {
    const std::string name(ClassifierKindName(kind));
    for (const char* target : {"private", "utility"}) {
      const auto key = std::pair{name, std::string(target)};
      if (!acc.accuracy.count(key)) continue;
      m.scores.push_back({name, target, Stat::Of(acc.accuracy[key]), Stat::Of(acc.f1[key])});
    }
  }
  m.summary_private = Summarize(m, "private");
  m.summary_utility = Summarize(m, "utility");
  for (auto kind : config.classifiers) {
    const std::string name(ClassifierKindName(kind));
    for (Target predicted : {Target::kUtility, Target::kPrivate}) {
      const auto key = std::pair{name, GroupingName(predicted)};
      if (!acc.fairness.count(key)) continue;
      auto& metrics = acc.fairness[key];
      FairnessEntry f;
      f.classifier = name;
      f.grouping = key.second;
      f.equalized_odds = Stat::Of(metrics["equalized_odds"]);
      f.equal_opportunity = Stat::Of(metrics["equal_opportunity"]);
      f.demographic_parity = Stat::Of(metrics["demographic_parity"]);
      f.undefined_seeds = acc.fairness_undefined[key];
      m.fairness.push_back(std::move(f));
    }
  }
  for (const auto& col : acc.continuous_order) {
    const auto& diffs = acc.differences[col];
    const MeanStd s = tabsan::Summarize(diffs);
    const Histogram h = Histogram::Build(diffs, config.histogram_bins);
    m.noise.push_back({col, diffs.size(), s.mean, s.stddev, h.edges, h.counts});
  }
  for (const auto& col : acc.categorical_order) {
    FlipEntry f = acc.flips[col];
    f.rate = f.compared == 0 ? 0.0
                             : static_cast<double>(f.flips) / static_cast<double>(f.compared);
    m.flips.push_back(f);
  }
  m.errors = acc.errors;
  m.request_fingerprints = acc.fingerprints;
  return m;
}

}  // namespace

SanitizeRun RunMechanism(const MechanismSpec& mechanism,
                         const ExperimentConfig& config, const RecordTable& aux,
                         const RecordTable& test, uint64_t seed,
                         const RunHooks& hooks) {
  return RunMechanismImpl(mechanism, config, aux, test, seed, hooks, nullptr).run;
}

EvaluationReport RunExperiment(const ExperimentConfig& config, const RunHooks& hooks) {
  const FeatureSchema schema =
      SchemaForTask(FeatureSchema::LoadFile(config.schema_path), config.task);
  const LoadedTable loaded = LoadCsv(config.data_path, schema);
  EvaluationReport report = RunExperiment(config, loaded.table, hooks);
  report.provenance["rows_loaded"] = loaded.table.size();
  report.provenance["rows_dropped_missing"] = loaded.dropped_missing;
  return report;
}

EvaluationReport RunExperiment(const ExperimentConfig& config,
                               const RecordTable& data, const RunHooks& hooks) {
  config.Validate();
  EvaluationReport report;
  report.task = "task" + std::to_string(config.task);
  report.private_feature = data.schema.roles().private_feature;
  report.utility_feature = data.schema.roles().utility_feature;
  report.seeds = config.seeds;
  report.test_size = config.test_size;
  for (auto k : config.classifiers) {
    report.classifiers.emplace_back(ClassifierKindName(k));
  }

  auto budget = MakeBudget(config.budget);
  std::vector<MechanismAccumulator> accs(config.mechanisms.size());
  for (size_t i = 0; i < accs.size(); ++i) accs[i].spec = config.mechanisms[i];

  for (uint64_t seed : config.seeds) {
    Log(hooks, "seed " + std::to_string(seed) + ": splitting");
    DatasetSplit split;
    try {
      split = SplitForSeed(data, config, seed);
    } catch (const Error& e) {
      for (auto& a : accs) a.errors.push_back({seed, "split", e.what()});
      continue;
    }
    report.aux_size = split.train.size();

    Log(hooks, "seed " + std::to_string(seed) + ": fitting attackers");
    std::vector<StageError> fit_errors;
    const ClassifierSet raw_attackers = FitAll(config, split.train, seed, &fit_errors, "");
    for (auto& a : accs) {
      a.errors.insert(a.errors.end(), fit_errors.begin(), fit_errors.end());
    }

    for (auto& acc : accs) {
      MechanismResult result;
      try {
        result = RunMechanismImpl(acc.spec, config, split.train, split.test, seed,
                                  hooks, budget.get());
      } catch (const Error& e) {
        acc.errors.push_back({seed, "sanitize", e.what()});
        continue;
      }
      if (acc.config.empty()) acc.config = result.run.output.config;
      if (!result.run.fingerprints.empty()) {
        std::string joined;
        for (const auto& f : result.run.fingerprints) joined += f;
        acc.fingerprints.push_back("seed=" + std::to_string(seed) + " requests=" +
                                   std::to_string(result.run.fingerprints.size()) +
                                   " digest=" + HashHex(joined));
      }

      const ClassifierSet* attackers = &raw_attackers;
      ClassifierSet adaptive;
      if (config.adaptive_attacker && result.sanitizer) {
        try {
          const MechanismOutput aux_out = SanitizeTable(
              *result.sanitizer, split.train, DeriveSeed(seed, "adaptive-noise"));
          adaptive = FitAll(config, aux_out.table, seed, &acc.errors, "adaptive:");
          attackers = &adaptive;
        } catch (const Error& e) {
          acc.errors.push_back({seed, "adaptive", e.what()});
        }
      }
      try {
        Evaluate(config, *attackers, split.test, result.run.output, seed, acc.spec,
                 hooks, *budget, &acc);
      } catch (const Error& e) {
        acc.errors.push_back({seed, "evaluate", e.what()});
      }
    }
  }

  for (auto& acc : accs) report.mechanisms.push_back(Finish(config, acc));

  // Tradeoff scores cite the baseline's summaries as c_n.
  const MechanismReport& baseline = report.mechanisms.front();
  for (size_t i = 0; i < report.mechanisms.size(); ++i) {
    auto& m = report.mechanisms[i];
    const auto& acc = accs[i];
    if (!baseline.summary_private || !baseline.summary_utility ||
        !m.summary_private || !m.summary_utility || acc.c_r_private.empty()) {
      continue;
    }
    TradeoffEntry t;
    t.c_n_private = baseline.summary_private->accuracy;
    t.c_n_utility = baseline.summary_utility->accuracy;
    t.c_a_private = m.summary_private->accuracy;
    t.c_a_utility = m.summary_utility->accuracy;
    t.c_r_private = tabsan::Summarize(acc.c_r_private).mean;
    t.c_r_utility = tabsan::Summarize(acc.c_r_utility).mean;
    try {
      const Ratio mp = PrivacyLeakage(t.c_n_private, t.c_a_private, t.c_r_private);
      const Ratio mu = UtilityPerformance(t.c_n_utility, t.c_a_utility, t.c_r_utility);
      t.m_p_raw = mp.raw;
      t.m_p = mp.clamped;
      t.m_u_raw = mu.raw;
      t.m_u = mu.clamped;
      m.tradeoff = t;
    } catch (const Error& e) {
      m.errors.push_back({0, "tradeoff", e.what()});
    }
  }

  for (auto& m : report.mechanisms) {
    for (const auto& e : m.errors) {
      if (e.stage.rfind("zero-shot:", 0) != 0) report.complete = false;
    }
    for (auto& f : m.fairness) {
      f.group_attribute = f.grouping == "utility_by_private" ? report.private_feature
                                                             : report.utility_feature;
    }
  }

  report.conventions = {
      {"f1", kF1Convention},
      {"summary", "max over classifier means"},
      {"c_r", "majority-class rate of the test split, averaged over seeds"},
      {"c_n", "summary accuracy of the none mechanism"},
      {"stddev", "sample (n-1) across seeds"},
      {"attacker", config.adaptive_attacker
                       ? "adaptive: retrained on sanitized auxiliary data (extension)"
                       : "trained on raw auxiliary data"},
      {"fairness_headline", "utility predictions grouped by the private label"},
      {"dropped_rows", "excluded from scoring; see coverage"}};

  const PromptConfig prompts = [&] {
    try {
      return LoadPrompts(config.llm);
    } catch (const Error&) {
      return PromptConfig::Defaults();
    }
  }();
  json backend_desc = {{"kind", config.backend.kind}};
  if (config.backend.kind == "live") {
    backend_desc["endpoint"] = config.backend.live.endpoint;
    backend_desc["credential_env"] = config.backend.live.credential_env;
  }
  report.provenance = {
      {"config_hash", config.Hash()},
      {"config", config.ToJson()},
      {"schema_fingerprint", data.schema.Fingerprint()},
      {"template_hashes", prompts.TemplateHashes()},
      {"model", config.llm.model_id},
      {"temperature", config.llm.temperature},
      {"system_message", "none"},
      {"backend", backend_desc},
      {"budget", {{"limit", budget->limit()}, {"spent", budget->spent()}}},
      {"uae_pupet_variant", kUaeLabel},
      {"classifier_labels",
       [&] {
         json labels = json::object();
         for (auto k : config.classifiers) {
           labels[std::string(ClassifierKindName(k))] = ClassifierDisplayName(k);
         }
         return labels;
       }()}};
  return report;
}

// ---------------------------------------------------------------------------
// Reference fixtures

std::vector<FixtureCheck> VerifyReferenceFixtures() {
  struct Row {
    const char* mechanism;
    int task;
    double private_acc;
    double utility_acc;
    double m_p;
    double m_u;
  };
  // Summary accuracies per task: task 1 private = gender, utility = income;
  // task 2 the reverse.
  static constexpr Row kRows[] = {
      {"ALFR", 1, 0.65, 0.81, 0.00, 0.50},
      {"UAE-PUPET", 1, 0.67, 0.80, 0.00, 0.42},
      {"GPT-4 (P1)", 1, 0.65, 0.89, 0.00, 1.00},
      {"GPT-4 (P2)", 1, 0.75, 0.88, 0.40, 1.00},
      {"ALFR", 2, 0.75, 0.81, 0.07, 0.80},
      {"UAE-PUPET", 2, 0.74, 0.82, 0.00, 0.87},
      {"GPT-4 (P1)", 2, 0.67, 0.81, 0.00, 0.80},
      {"GPT-4 (P2)", 2, 0.74, 0.79, 0.00, 0.67},
  };
  constexpr double kGenderRaw = 0.84, kGenderMajority = 0.69;
  constexpr double kIncomeRaw = 0.88, kIncomeMajority = 0.74;
  std::vector<FixtureCheck> out;
  for (const auto& r : kRows) {
    const bool t1 = r.task == 1;
    const double p_n = t1 ? kGenderRaw : kIncomeRaw;
    const double p_r = t1 ? kGenderMajority : kIncomeMajority;
    const double u_n = t1 ? kIncomeRaw : kGenderRaw;
    const double u_r = t1 ? kIncomeMajority : kGenderMajority;
    const double mp = PrivacyLeakage(p_n, r.private_acc, p_r).clamped;
    const double mu = UtilityPerformance(u_n, r.utility_acc, u_r).clamped;
    out.push_back({r.mechanism, r.task, "M_p", mp, r.m_p, std::abs(mp - r.m_p) <= 0.01 + 1e-9});
    out.push_back({r.mechanism, r.task, "M_u", mu, r.m_u, std::abs(mu - r.m_u) <= 0.01 + 1e-9});
  }
  return out;
}

}  // namespace tabsan
