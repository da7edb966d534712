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

#include "properties.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "tabsan/adversarial.h"
#include "tabsan/error.h"
#include "tabsan/metrics.h"
#include "tabsan/prompting.h"

namespace tabsan::testing {

namespace {

void Fail(CheckResult* r, const std::string& what) {
  if (r->pass) r->detail = what;
  r->pass = false;
}

std::string Num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

bool Near(double a, double b, double tol = 1e-12) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

// Occurrences of `needle` not embedded in a longer alphanumeric token.
size_t CountToken(std::string_view hay, std::string_view needle) {
  auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  size_t n = 0;
  for (size_t pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !word(hay[pos - 1]) || !word(needle.front());
    const size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !word(hay[end]) || !word(needle.back());
    if (left_ok && right_ok) ++n;
  }
  return n;
}

std::vector<double> Flatten(const MlpGrads& g) {
  std::vector<double> out;
  for (size_t i = 0; i < g.weight.size(); ++i) {
    out.insert(out.end(), g.weight[i].data(), g.weight[i].data() + g.weight[i].size());
    out.insert(out.end(), g.bias[i].data(), g.bias[i].data() + g.bias[i].size());
  }
  return out;
}

double* ParamAt(Mlp& mlp, size_t k) {
  for (auto& l : mlp.mutable_layers()) {
    const auto w = static_cast<size_t>(l.weight.size());
    if (k < w) return l.weight.data() + k;
    k -= w;
    const auto b = static_cast<size_t>(l.bias.size());
    if (k < b) return l.bias.data() + k;
    k -= b;
  }
  return nullptr;
}

ColumnSpec Cat(std::string name, std::vector<std::string> categories,
               std::optional<std::string> positive = std::nullopt) {
  ColumnSpec c;
  c.name = std::move(name);
  c.kind = ColumnKind::kCategorical;
  c.categories = std::move(categories);
  c.positive = std::move(positive);
  return c;
}

ColumnSpec Cont(std::string name) {
  ColumnSpec c;
  c.name = std::move(name);
  return c;
}

}  // namespace

FeatureSchema RandomSchema(Rng& rng) {
  std::vector<ColumnSpec> columns;
  const int n_cat = 1 + static_cast<int>(rng.Below(4));
  const int n_cont = 1 + static_cast<int>(rng.Below(3));
  for (int i = 0; i < n_cat; ++i) {
    ColumnSpec c;
    c.name = "cat-col-" + std::to_string(i);
    c.kind = ColumnKind::kCategorical;
    const int k = 2 + static_cast<int>(rng.Below(4));
    for (int j = 0; j < k; ++j) {
      c.categories.push_back("V" + std::to_string(i) + "-opt" + std::to_string(j));
    }
    columns.push_back(std::move(c));
  }
  for (int i = 0; i < n_cont; ++i) {
    ColumnSpec c;
    c.name = "num_col " + std::to_string(i);
    c.integer_valued = rng.Below(2) == 0;
    c.mean = rng.Uniform(-5, 50);
    c.stddev = rng.Uniform(0.5, 20);
    columns.push_back(std::move(c));
  }
  Rng order = rng.Fork(7);
  order.Shuffle(std::span<ColumnSpec>(columns));
  columns.push_back(Cat("priv", {"p_no", "p_yes"}, "p_yes"));
  columns.push_back(Cat("util", {"u_lo", "u_hi"}, "u_hi"));
  return FeatureSchema(std::move(columns), Roles{"priv", "util", {}});
}

RecordTable RandomTable(const FeatureSchema& schema, size_t rows, Rng& rng) {
  RecordTable t;
  t.schema = schema;
  for (size_t r = 0; r < rows; ++r) {
    Record rec;
    for (size_t i = 0; i < schema.num_features(); ++i) {
      const auto& c = schema.feature(i);
      if (c.kind == ColumnKind::kCategorical) {
        rec.emplace_back(c.categories[rng.Below(c.categories.size())]);
      } else if (c.integer_valued) {
        rec.emplace_back(static_cast<double>(rng.Below(90)));
      } else {
        rec.emplace_back(rng.Uniform(-100, 100));
      }
    }
    t.rows.push_back(std::move(rec));
    t.labels.push_back({static_cast<int>(rng.Below(2)), static_cast<int>(rng.Below(2))});
  }
  return t;
}

RecordTable SignalTable(size_t rows, uint64_t seed) {
  Rng rng(seed);
  const std::vector<ColumnSpec> columns = {
      Cat("shade", {"dark", "light", "mid"}), Cont("size"), Cont("noise"),
      Cat("group", {"a", "b"}, "b"), Cat("outcome", {"lo", "hi"}, "hi")};
  RecordTable t;
  t.schema = FeatureSchema(columns, Roles{"group", "outcome", {}});
  for (size_t r = 0; r < rows; ++r) {
    const double size = rng.Normal();
    const size_t shade = rng.Below(3);
    const int group = size + 0.3 * rng.Normal() > 0 ? 1 : 0;
    const int outcome = (shade == 1) != (rng.Uniform() < 0.1) ? 1 : 0;
    t.rows.push_back({columns[0].categories[shade], size, rng.Normal()});
    t.labels.push_back({group, outcome});
  }
  return t;
}

EvaluationReport RandomReport(Rng& rng) {
  auto word = [&](const char* prefix) {
    return std::string(prefix) + std::to_string(rng.Below(1000));
  };
  auto real = [&]() {
    switch (rng.Below(4)) {
      case 0: return 0.0;
      case 1: return static_cast<double>(rng.Below(100)) / 100.0;
      default: return rng.Uniform(-1e3, 1e3) * std::pow(10.0, rng.Uniform(-8, 8));
    }
  };
  auto stat = [&]() {
    std::vector<double> v(rng.Below(6));
    for (auto& x : v) x = real();
    Stat s;
    s.values = v;
    s.mean = real();
    s.stddev = std::fabs(real());
    return s;
  };
  EvaluationReport r;
  r.task = rng.Below(2) ? "task1" : "task2";
  r.private_feature = word("p");
  r.utility_feature = word("u");
  for (size_t i = rng.Below(6); i > 0; --i) r.seeds.push_back(rng.NextU64());
  r.test_size = rng.Below(5000);
  r.aux_size = rng.Below(50000);
  r.classifiers = {"lr", "rf"};
  r.complete = rng.Below(2) == 0;
  r.conventions = {{"f1", "macro"}, {"k", real()}};
  r.provenance = nlohmann::json::object();
  r.provenance["hash"] = word("h");
  r.provenance["nested"]["a"] = real();
  r.provenance["nested"]["b"] = nlohmann::json::array({real(), real()});
  for (size_t m = 1 + rng.Below(3); m > 0; --m) {
    MechanismReport mr;
    mr.id = word("mech");
    mr.label = word("Label \"quoted\" ");
    mr.config = {{"alpha", real()}, {"name", word("x")}};
    mr.coverage = stat();
    mr.dispositions = {rng.Below(9), rng.Below(9), rng.Below(9),
                       rng.Below(9), rng.Below(9), rng.Below(9)};
    for (size_t s = rng.Below(4); s > 0; --s) {
      mr.scores.push_back({word("c"), rng.Below(2) ? "private" : "utility", stat(), stat()});
    }
    if (rng.Below(2)) mr.summary_private = TargetSummary{real(), real(), word("c"), word("c")};
    if (rng.Below(2)) mr.summary_utility = TargetSummary{real(), real(), word("c"), word("c")};
    if (rng.Below(2)) {
      mr.tradeoff = TradeoffEntry{real(), real(), real(), real(), real(),
                                  real(), real(), real(), real(), real()};
    }
    for (size_t f = rng.Below(3); f > 0; --f) {
      mr.fairness.push_back({word("c"), "utility_by_private", word("g"), stat(), stat(),
                             stat(), rng.Below(3)});
    }
    for (size_t n = rng.Below(3); n > 0; --n) {
      NoiseEntry e{word("col"), rng.Below(100), real(), real(), {}, {}};
      for (size_t b = rng.Below(5); b > 0; --b) {
        e.edges.push_back(real());
        e.counts.push_back(rng.Below(100));
      }
      mr.noise.push_back(std::move(e));
    }
    for (size_t n = rng.Below(3); n > 0; --n) {
      mr.flips.push_back({word("col"), rng.Below(50), rng.Below(100), real()});
    }
    for (size_t n = rng.Below(2); n > 0; --n) {
      mr.errors.push_back({rng.NextU64(), word("stage"), word("line\nbreak ")});
    }
    for (size_t n = rng.Below(3); n > 0; --n) mr.request_fingerprints.push_back(word("fp"));
    r.mechanisms.push_back(std::move(mr));
  }
  return r;
}

// Smallest |pre-activation| feeding any ReLU in the four networks. Finite
// differences are meaningless when a step crosses one of these kinks.
double KinkMargin(const AdversarialModel& model, const Matrix& batch,
                  const Matrix& noise) {
  GeneratorTape gtape;
  const Matrix* noise_ptr = noise.size() > 0 ? &noise : nullptr;
  const Matrix out = ForwardGenerator(model.generator, batch, nullptr, &gtape, noise_ptr);
  MlpTape ptape, utape;
  model.private_disc.Forward(out, &ptape);
  model.utility_disc.Forward(out, &utape);
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&](const Mlp& mlp, const MlpTape& tape) {
    for (size_t l = 0; l < mlp.num_layers(); ++l) {
      const DenseLayer& layer = mlp.layers()[l];
      if (layer.activation != Activation::kRelu) continue;
      const Matrix pre = (tape.inputs[l] * layer.weight).rowwise() + layer.bias;
      margin = std::min(margin, pre.cwiseAbs().minCoeff());
    }
  };
  scan(model.generator.encoder, gtape.encoder);
  scan(model.generator.decoder, gtape.decoder);
  scan(model.private_disc, ptape);
  scan(model.utility_disc, utape);
  return margin;
}

CheckResult CheckAdversarialGradients(size_t configs, uint64_t seed, double tolerance) {
  CheckResult result;
  Rng rng(seed);
  constexpr double kStep = 1e-5;
  constexpr double kKinkMargin = 1e-3;
  for (size_t c = 0; c < configs; ++c) {
    AdvConfig cfg;
    cfg.alpha = rng.Uniform(0, 2);
    cfg.lambda_p = rng.Uniform(0, 2);
    cfg.lambda_u = rng.Uniform(0, 2);
    cfg.hidden_dim = 2 + static_cast<int>(rng.Below(4));
    cfg.latent_dim = 1 + static_cast<int>(rng.Below(4));
    cfg.variant = rng.Below(2) ? AdvVariant::kUaePupet : AdvVariant::kAlfr;
    cfg.noise_sigma = rng.Uniform(0.01, 0.5);
    const int d = 2 + static_cast<int>(rng.Below(5));
    const int n = 1 + static_cast<int>(rng.Below(6));

    AdversarialModel model;
    Matrix batch(n, d);
    Matrix noise = Matrix::Zero(n, cfg.latent_dim);
    // Redraw weights and inputs until no ReLU sits within kKinkMargin of its
    // kink.
    bool smooth = false;
    for (int attempt = 0; attempt < 1000 && !smooth; ++attempt) {
      model = {MakeGenerator(d, cfg, rng), MakeDiscriminator(d, cfg, rng),
               MakeDiscriminator(d, cfg, rng)};
      for (int i = 0; i < batch.size(); ++i) batch.data()[i] = rng.Normal();
      if (cfg.effective_sigma() > 0) {
        for (int i = 0; i < noise.size(); ++i) {
          noise.data()[i] = cfg.effective_sigma() * rng.Normal();
        }
      }
      smooth = KinkMargin(model, batch, noise) >= kKinkMargin;
    }
    if (!smooth) {
      Fail(&result, "config " + std::to_string(c) + ": no kink-free input found");
      ++result.cases;
      continue;
    }
    std::vector<int> p(n), u(n);
    for (int i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.Below(2));
      u[i] = static_cast<int>(rng.Below(2));
    }

    for (UpdateTarget target :
         {UpdateTarget::kPrivateDiscriminator, UpdateTarget::kGeneratorAndUtility}) {
      const GradientSet g = Backward(model, batch, p, u, cfg, target, noise);
      struct Net {
        Mlp* mlp;
        const std::optional<MlpGrads>* grads;
        const char* name;
      };
      std::vector<Net> nets;
      if (target == UpdateTarget::kPrivateDiscriminator) {
        nets = {{&model.private_disc, &g.private_disc, "private_disc"}};
      } else {
        nets = {{&model.generator.encoder, &g.encoder, "encoder"},
                {&model.generator.decoder, &g.decoder, "decoder"},
                {&model.utility_disc, &g.utility_disc, "utility_disc"}};
      }
      for (const Net& net : nets) {
        if (!net.grads->has_value()) {
          Fail(&result, std::string("missing gradient for ") + net.name);
          continue;
        }
        const std::vector<double> analytic = Flatten(**net.grads);
        for (size_t k = 0; k < analytic.size(); ++k) {
          double* w = ParamAt(*net.mlp, k);
          const double saved = *w;
          auto loss_at = [&](double offset) {
            *w = saved + offset;
            return EvaluateLoss(model, batch, p, u, cfg, noise).L;
          };
          // Fourth-order central stencil; truncation error is O(h^4).
          const double numeric = (8 * (loss_at(kStep) - loss_at(-kStep)) -
                                  (loss_at(2 * kStep) - loss_at(-2 * kStep))) /
                                 (12 * kStep);
          *w = saved;
          const double scale = std::max({std::fabs(analytic[k]), std::fabs(numeric), 1e-6});
          const double rel = std::fabs(analytic[k] - numeric) / scale;
          result.worst = std::max(result.worst, rel);
          if (rel >= tolerance) {
            Fail(&result, "config " + std::to_string(c) + " " + net.name + "[" +
                              std::to_string(k) + "] analytic " + Num(analytic[k]) +
                              " numeric " + Num(numeric));
          }
        }
      }
    }
    ++result.cases;
  }
  return result;
}

CheckResult CheckMetricOracles(size_t instances, uint64_t seed) {
  CheckResult result;
  Rng rng(seed);
  for (size_t it = 0; it < instances; ++it) {
    const size_t n = 1 + rng.Below(40);
    const int k = 2 + static_cast<int>(rng.Below(3));
    std::vector<int> pred(n), label(n);
    for (size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.Below(k));
      label[i] = static_cast<int>(rng.Below(k));
    }
    // Accuracy and macro F1 from full confusion counts.
    size_t hits = 0;
    for (size_t i = 0; i < n; ++i) hits += pred[i] == label[i];
    const double acc = static_cast<double>(hits) / static_cast<double>(n);
    std::set<int> classes(pred.begin(), pred.end());
    classes.insert(label.begin(), label.end());
    double f1_sum = 0;
    for (int c : classes) {
      double tp = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < n; ++i) {
        tp += pred[i] == c && label[i] == c;
        fp += pred[i] == c && label[i] != c;
        fn += pred[i] != c && label[i] == c;
      }
      f1_sum += 2 * tp / (2 * tp + fp + fn);
    }
    const double f1 = f1_sum / static_cast<double>(classes.size());
    const ScorePair s = Score(pred, label);
    if (!Near(s.accuracy, acc) || !Near(Accuracy(pred, label), acc)) {
      Fail(&result, "accuracy " + Num(s.accuracy) + " vs " + Num(acc));
    }
    if (!Near(s.f1, f1) || !Near(MacroF1(pred, label), f1)) {
      Fail(&result, "macro f1 " + Num(s.f1) + " vs " + Num(f1));
    }

    // Fairness over binary predictions and groups.
    std::vector<int> bp(n), bl(n), grp(n);
    for (size_t i = 0; i < n; ++i) {
      bp[i] = static_cast<int>(rng.Below(2));
      bl[i] = static_cast<int>(rng.Below(2));
      grp[i] = static_cast<int>(rng.Below(2));
    }
    const int positive = static_cast<int>(rng.Below(2));
    double tpr[2], fpr[2], ppr[2];
    bool defined = true;
    for (int g = 0; g < 2; ++g) {
      double pos = 0, neg = 0, tp = 0, fp = 0, members = 0, predicted = 0;
      for (size_t i = 0; i < n; ++i) {
        if (grp[i] != g) continue;
        ++members;
        predicted += bp[i] == positive;
        if (bl[i] == positive) {
          ++pos;
          tp += bp[i] == positive;
        } else {
          ++neg;
          fp += bp[i] == positive;
        }
      }
      if (pos == 0 || neg == 0) {
        defined = false;
        continue;
      }
      tpr[g] = tp / pos;
      fpr[g] = fp / neg;
      ppr[g] = predicted / members;
    }
    try {
      const FairnessScores f = Fairness(bp, bl, grp, positive);
      if (!defined) {
        Fail(&result, "fairness defined where a rate is undefined");
      } else {
        const double opp = std::fabs(tpr[0] - tpr[1]);
        const double odds = std::max(opp, std::fabs(fpr[0] - fpr[1]));
        const double dp = std::fabs(ppr[0] - ppr[1]);
        if (!Near(f.equal_opportunity, opp) || !Near(f.equalized_odds, odds) ||
            !Near(f.demographic_parity, dp)) {
          Fail(&result, "fairness mismatch at instance " + std::to_string(it));
        }
        // Swapping group labels leaves every metric unchanged.
        std::vector<int> swapped(grp);
        for (auto& g : swapped) g = 1 - g;
        const FairnessScores fs = Fairness(bp, bl, swapped, positive);
        if (fs.equal_opportunity != f.equal_opportunity ||
            fs.equalized_odds != f.equalized_odds ||
            fs.demographic_parity != f.demographic_parity) {
          Fail(&result, "fairness not symmetric under group swap");
        }
      }
    } catch (const Error& e) {
      if (defined || e.code() != ErrorCode::kUndefinedRate) {
        Fail(&result, std::string("fairness threw: ") + e.what());
      }
    }

    // Tradeoff ratios and clamping.
    const double c_n = rng.Uniform(), c_a = rng.Uniform();
    double c_r = rng.Uniform();
    if (c_r == c_n) c_r = c_n / 2;
    const double raw = (c_a - c_r) / (c_n - c_r);
    const double clamped = std::min(1.0, std::max(0.0, raw));
    for (const Ratio& r : {PrivacyLeakage(c_n, c_a, c_r), UtilityPerformance(c_n, c_a, c_r)}) {
      if (!Near(r.raw, raw) || r.clamped != Clamp01(r.raw) || !Near(r.clamped, clamped) ||
          r.clamped < 0 || r.clamped > 1) {
        Fail(&result, "tradeoff ratio mismatch");
      }
    }

    // Flip counts and continuous differences.
    const FeatureSchema schema = RandomSchema(rng);
    const size_t rows = 1 + rng.Below(12);
    const RecordTable original = RandomTable(schema, rows, rng);
    RecordTable sanitized = RandomTable(schema, rows, rng);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < schema.num_features(); ++c) {
        if (rng.Below(2)) sanitized.rows[r][c] = original.rows[r][c];
      }
    }
    std::unique_ptr<bool[]> excluded(new bool[rows]);
    for (size_t r = 0; r < rows; ++r) excluded[r] = rng.Below(5) == 0;
    const DistortionSummary d =
        Distortion(original, sanitized, std::span<const bool>(excluded.get(), rows), 5);
    size_t checked_cat = 0, checked_cont = 0;
    for (size_t c = 0; c < schema.num_features(); ++c) {
      const auto& col = schema.feature(c);
      size_t flips = 0, compared = 0;
      std::vector<double> diffs;
      for (size_t r = 0; r < rows; ++r) {
        if (excluded[r]) continue;
        ++compared;
        if (col.kind == ColumnKind::kCategorical) {
          flips += std::get<std::string>(original.rows[r][c]) !=
                   std::get<std::string>(sanitized.rows[r][c]);
        } else {
          diffs.push_back(std::get<double>(sanitized.rows[r][c]) -
                          std::get<double>(original.rows[r][c]));
        }
      }
      if (col.kind == ColumnKind::kCategorical) {
        for (const auto& cd : d.categorical) {
          if (cd.column != col.name) continue;
          ++checked_cat;
          const double rate = compared == 0 ? 0.0
                                            : static_cast<double>(flips) /
                                                  static_cast<double>(compared);
          if (cd.flips != flips || cd.compared != compared || !Near(cd.rate, rate)) {
            Fail(&result, "flip count mismatch on " + col.name);
          }
        }
      } else {
        for (const auto& cd : d.continuous) {
          if (cd.column != col.name) continue;
          ++checked_cont;
          if (cd.differences != diffs) Fail(&result, "difference mismatch on " + col.name);
        }
      }
    }
    if (checked_cat + checked_cont != schema.num_features()) {
      Fail(&result, "distortion skipped a column");
    }
    ++result.cases;
  }
  return result;
}

CheckResult CheckDatasetRoundTrip(size_t cases, uint64_t seed) {
  CheckResult result;
  Rng rng(seed);
  for (size_t it = 0; it < cases; ++it) {
    const FeatureSchema schema = RandomSchema(rng);
    const RecordTable t = RandomTable(schema, 1 + rng.Below(20), rng);
    const EncodedMatrix m = Encode(t);
    int width = 0;
    for (const auto& s : m.layout) {
      width += s.length;
      const auto& col = schema.column(s.column);
      if (col.kind != ColumnKind::kCategorical) continue;
      for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
        int ones = 0, zeros = 0;
        for (int j = 0; j < s.length; ++j) {
          const double v = m.values(r, s.start + j);
          ones += v == 1.0;
          zeros += v == 0.0;
        }
        if (ones != 1 || zeros != s.length - 1) Fail(&result, "slice is not one-hot");
      }
    }
    if (width != m.n_dims || m.values.cols() != m.n_dims) Fail(&result, "layout width");
    const RecordTable back = Decode(m, schema, t.labels);
    if (back.labels != t.labels || back.rows.size() != t.rows.size()) {
      Fail(&result, "labels or row count changed");
      continue;
    }
    for (size_t r = 0; r < t.rows.size(); ++r) {
      for (size_t c = 0; c < schema.num_features(); ++c) {
        const Value& a = t.rows[r][c];
        const Value& b = back.rows[r][c];
        const bool same = std::holds_alternative<std::string>(a)
                              ? a == b
                              : Near(std::get<double>(a), std::get<double>(b), 1e-12);
        if (!same) Fail(&result, "value changed in column " + schema.feature(c).name);
      }
    }
    ++result.cases;
  }
  return result;
}

namespace {

// Re-renders the requested lines with cosmetic variation the parser must
// tolerate: order, bullets, bold keys, key case and separators, category case.
std::string NoisyEcho(const Record& record, const FeatureSchema& schema, Rng& rng) {
  std::vector<std::string> lines;
  for (size_t i = 0; i < schema.num_features(); ++i) {
    const auto& col = schema.feature(i);
    std::string key = col.name;
    std::string value = FormatValue(col, record[i]);
    switch (rng.Below(4)) {
      case 0: std::transform(key.begin(), key.end(), key.begin(), ::toupper); break;
      case 1: std::replace(key.begin(), key.end(), '-', '_'); break;
      case 2: key = "**" + key + "**"; break;
      default: break;
    }
    if (col.kind == ColumnKind::kCategorical && rng.Below(3) == 0) {
      std::transform(value.begin(), value.end(), value.begin(), ::tolower);
    }
    const char* bullet = rng.Below(3) == 0 ? "- " : "";
    lines.push_back(bullet + key + ": " + value);
  }
  if (rng.Below(2)) rng.Shuffle(std::span<std::string>(lines));
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

VariantTag RandomVariant(Rng& rng) {
  constexpr VariantTag kAll[] = {VariantTag::kP1, VariantTag::kP2, VariantTag::kCombined,
                                 VariantTag::kUnsupervised};
  return kAll[rng.Below(4)];
}

}  // namespace

CheckResult CheckPromptRoundTrip(size_t cases, uint64_t seed) {
  CheckResult result;
  Rng rng(seed);
  const PromptConfig prompts = PromptConfig::Defaults();
  for (size_t it = 0; it < cases; ++it) {
    const FeatureSchema schema = RandomSchema(rng);
    const RecordTable t = RandomTable(schema, 1, rng);
    const PromptVariant v = prompts.Variant(RandomVariant(rng));
    std::optional<RowLabels> labels;
    if (v.supervised()) labels = t.labels[0];
    const PromptBundle b = BuildPrompt(t.rows[0], labels, schema, v, prompts, it);
    for (const auto& col : b.expected_columns) {
      if (b.text.find(col) == std::string::npos) Fail(&result, "prompt omits " + col);
    }
    const std::string response = NoisyEcho(t.rows[0], schema, rng);
    const ParsedResponse parsed =
        ParseResponse(response, schema, b.expected_columns, prompts.refusal_phrases);
    if (parsed.status != ParseStatus::kOk || !parsed.record) {
      Fail(&result, "echo did not parse: " + response);
      continue;
    }
    if (*parsed.record != t.rows[0]) Fail(&result, "echo parsed to a different record");
    ++result.cases;
  }
  return result;
}

CheckResult CheckReportRoundTrip(size_t cases, uint64_t seed) {
  CheckResult result;
  Rng rng(seed);
  for (size_t it = 0; it < cases; ++it) {
    const EvaluationReport r = RandomReport(rng);
    const std::string text = SerializeReport(r);
    const EvaluationReport back = ParseReport(text);
    if (!(back == r)) Fail(&result, "report changed after round trip");
    if (SerializeReport(back) != text) Fail(&result, "serialized text is not a fixed point");
    ++result.cases;
  }
  return result;
}

CheckResult CheckPromptLabels(size_t cases, uint64_t seed) {
  CheckResult result;
  Rng rng(seed);
  const PromptConfig prompts = PromptConfig::Defaults();
  for (size_t it = 0; it < cases; ++it) {
    const FeatureSchema schema = RandomSchema(rng);
    const RecordTable t = RandomTable(schema, 1, rng);
    const std::string& priv =
        schema.private_column().categories[static_cast<size_t>(t.labels[0].private_label)];
    const std::string& util =
        schema.utility_column().categories[static_cast<size_t>(t.labels[0].utility_label)];
    for (VariantTag tag : {VariantTag::kP1, VariantTag::kP2, VariantTag::kCombined,
                           VariantTag::kUnsupervised}) {
      const PromptVariant v = prompts.Variant(tag);
      std::optional<RowLabels> labels;
      if (v.supervised()) labels = t.labels[0];
      const std::string text = BuildPrompt(t.rows[0], labels, schema, v, prompts).text;
      const size_t want = v.supervised() ? 1 : 0;
      if (CountToken(text, priv) != want || CountToken(text, util) != want) {
        Fail(&result, std::string(VariantName(tag)) + " prompt label count wrong: " + text);
      }
      // The opposite-class labels never appear.
      for (const auto* col : {&schema.private_column(), &schema.utility_column()}) {
        for (const auto& cat : col->categories) {
          if (cat != priv && cat != util && CountToken(text, cat) != 0) {
            Fail(&result, "prompt leaks label " + cat);
          }
        }
      }
    }
    // Label placement contracts.
    try {
      BuildPrompt(t.rows[0], std::nullopt, schema, prompts.Variant(VariantTag::kP1), prompts);
      Fail(&result, "supervised prompt built without labels");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kLabelsRequired) Fail(&result, "wrong error without labels");
    }
    try {
      BuildPrompt(t.rows[0], t.labels[0], schema,
                  prompts.Variant(VariantTag::kUnsupervised), prompts);
      Fail(&result, "unsupervised prompt accepted labels");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kLabelsForbidden) Fail(&result, "wrong error with labels");
    }
    ++result.cases;
  }
  return result;
}

CheckResult CheckParserContract(size_t cases, uint64_t seed) {
  CheckResult result;
  Rng rng(seed);
  const PromptConfig prompts = PromptConfig::Defaults();
  const std::vector<std::string> refusals = {
      "I'm sorry, but I can't help with modifying personal data.",
      "I cannot assist with that request.",
      "As an AI, I am unable to comply.\nage: 40",
  };
  for (size_t it = 0; it < cases; ++it) {
    const FeatureSchema schema = RandomSchema(rng);
    const RecordTable t = RandomTable(schema, 1, rng);
    const Record& original = t.rows[0];
    const auto expected = FeatureNames(schema);
    auto parse = [&](const std::string& text) {
      return ParseResponse(text, schema, expected, prompts.refusal_phrases);
    };

    const ParsedResponse ok = parse(FormatRecordLines(original, schema));
    if (ok.status != ParseStatus::kOk || ok.record != original) {
      Fail(&result, "well-formed response rejected");
    }

    // Malformed: a missing line, an out-of-vocabulary category, a non-number,
    // or free text.
    std::vector<std::string> lines;
    std::istringstream in(FormatRecordLines(original, schema));
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    const size_t victim = rng.Below(lines.size());
    const auto& col = schema.feature(victim);
    std::vector<std::string> broken;
    {
      auto missing = lines;
      missing.erase(missing.begin() + static_cast<std::ptrdiff_t>(victim));
      std::string s;
      for (const auto& l : missing) s += l + "\n";
      broken.push_back(s);
    }
    {
      auto bad = lines;
      bad[victim] = col.name + (col.kind == ColumnKind::kCategorical ? ": Nowhere-Special"
                                                                     : ": about forty");
      std::string s;
      for (const auto& l : bad) s += l + "\n";
      broken.push_back(s);
    }
    broken.push_back("Sure! The record looks fine as it is.");
    broken.push_back("");
    for (const auto& text : broken) {
      const ParsedResponse r = parse(text);
      if (r.status != ParseStatus::kMalformed || r.record) {
        Fail(&result, "expected malformed for: " + text);
      }
    }
    for (const auto& text : refusals) {
      const ParsedResponse r = parse(text);
      if (r.status != ParseStatus::kRefusal || r.record) {
        Fail(&result, "expected refusal for: " + text);
      }
    }

    // Fallback resolution of a non-Ok response.
    const ParsedResponse failed = parse(broken[0]);
    const ResolvedRecord dropped =
        ApplyFallback(failed, original, FallbackPolicy::Parse("drop"));
    const ResolvedRecord passed =
        ApplyFallback(failed, original, FallbackPolicy::Parse("passthrough"));
    if (dropped.disposition != Disposition::kDropped ||
        passed.disposition != Disposition::kPassthrough || passed.record != original) {
      Fail(&result, "drop/passthrough fallback");
    }
    const int succeed_on = 1 + static_cast<int>(rng.Below(3));
    int calls = 0;
    const ResolvedRecord retried = ApplyFallback(
        failed, original, FallbackPolicy::Parse("retry:2"), [&](int attempt) {
          ++calls;
          return attempt == succeed_on ? ok : failed;
        });
    const bool should_succeed = succeed_on <= 2;
    if (should_succeed != (retried.disposition == Disposition::kSanitized) ||
        calls != std::min(succeed_on, 2) ||
        (!should_succeed && retried.disposition != Disposition::kDropped)) {
      Fail(&result, "retry fallback");
    }
    ++result.cases;
  }
  return result;
}

}  // namespace tabsan::testing
