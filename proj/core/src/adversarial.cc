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

#include "tabsan/adversarial.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "tabsan/error.h"

namespace tabsan {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr std::string_view kCheckpointFormat = "tabsan-adversarial";

std::vector<ParamBlock> Blocks(std::initializer_list<std::pair<Mlp*, const MlpGrads*>> nets) {
  std::vector<ParamBlock> blocks;
  for (const auto& [mlp, grads] : nets) AppendBlocks(*mlp, *grads, &blocks);
  return blocks;
}

Matrix GatherRows(const Matrix& m, std::span<const size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<int> GatherLabels(std::span<const int> labels,
                              std::span<const size_t> rows) {
  std::vector<int> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
  return out;
}

void CheckLabels(std::span<const int> labels, Eigen::Index rows,
                 std::string_view what) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw Error(ErrorCode::kLengthMismatch,
                std::string(what) + " labels do not match batch rows");
  }
  for (int y : labels) {
    if (y < 0 || y > 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(what) + " labels must be 0 or 1");
    }
  }
}

}  // namespace

std::string_view AdvVariantName(AdvVariant v) {
  return v == AdvVariant::kUaePupet ? "uae_pupet" : "alfr";
}

AdvVariant ParseAdvVariant(std::string_view name) {
  if (name == "alfr") return AdvVariant::kAlfr;
  if (name == "uae_pupet") return AdvVariant::kUaePupet;
  throw Error(ErrorCode::kConfigError,
              "unknown adversarial variant " + std::string(name));
}

void AdvConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfigError, "adversarial: " + msg);
  };
  if (!(alpha >= 0) || !(lambda_p >= 0) || !(lambda_u >= 0)) {
    fail("alpha, lambda_p and lambda_u must be >= 0");
  }
  if (!(learning_rate > 0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (latent_dim < 1 || hidden_dim < 1) fail("layer sizes must be >= 1");
  if (!(noise_sigma >= 0)) fail("noise_sigma must be >= 0");
  if (early_stop_patience < 0) fail("early_stop_patience must be >= 0");
}

nlohmann::json AdvConfig::ToJson() const {
  return {{"alpha", alpha},
          {"lambda_p", lambda_p},
          {"lambda_u", lambda_u},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"latent_dim", latent_dim},
          {"hidden_dim", hidden_dim},
          {"seed", seed},
          {"variant", AdvVariantName(variant)},
          {"noise_sigma", noise_sigma},
          {"early_stop_patience", early_stop_patience}};
}

AdvConfig AdvConfig::FromJson(const nlohmann::json& j) {
  AdvConfig c;
  try {
    c.alpha = j.value("alpha", c.alpha);
    c.lambda_p = j.value("lambda_p", c.lambda_p);
    c.lambda_u = j.value("lambda_u", c.lambda_u);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.seed = j.value("seed", c.seed);
    if (j.contains("variant")) {
      c.variant = ParseAdvVariant(j.at("variant").get<std::string>());
    }
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("adversarial: ") + e.what());
  }
  c.Validate();
  return c;
}

void GeneratorNet::Validate() const {
  if (encoder.out_dim() != decoder.in_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "encoder/decoder latent width");
  }
  if (decoder.out_dim() != encoder.in_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "generator output width != input width");
  }
  if (!(latent_noise_sigma >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "latent noise sigma must be >= 0");
  }
}

GeneratorNet MakeGenerator(int d, const AdvConfig& cfg, Rng& rng) {
  const int enc_dims[] = {d, cfg.hidden_dim, cfg.latent_dim};
  const int dec_dims[] = {cfg.latent_dim, cfg.hidden_dim, d};
  GeneratorNet g;
  g.encoder = Mlp(enc_dims, Activation::kRelu, Activation::kIdentity, rng);
  g.decoder = Mlp(dec_dims, Activation::kRelu, Activation::kIdentity, rng);
  g.latent_noise_sigma = cfg.effective_sigma();
  return g;
}

Mlp MakeDiscriminator(int d, const AdvConfig& cfg, Rng& rng) {
  const int dims[] = {d, cfg.hidden_dim, 2};
  return Mlp(dims, Activation::kRelu, Activation::kIdentity, rng);
}

Matrix ForwardGenerator(const GeneratorNet& gen, const Matrix& batch,
                        Rng* noise_rng, GeneratorTape* tape,
                        const Matrix* fixed_noise) {
  if (batch.cols() != gen.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "batch width " + std::to_string(batch.cols()) +
                    " != generator input " + std::to_string(gen.dim()));
  }
  Matrix z = gen.encoder.Forward(batch, tape ? &tape->encoder : nullptr);
  Matrix noise;
  if (fixed_noise) {
    if (fixed_noise->rows() != z.rows() || fixed_noise->cols() != z.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "noise shape");
    }
    noise = *fixed_noise;
  } else if (gen.latent_noise_sigma > 0) {
    if (!noise_rng) {
      throw Error(ErrorCode::kInvalidArgument, "noisy generator needs an rng");
    }
    noise.resize(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < noise.size(); ++i) {
      noise.data()[i] = gen.latent_noise_sigma * noise_rng->Normal();
    }
  }
  if (noise.size() > 0) z += noise;
  Matrix out = gen.decoder.Forward(z, tape ? &tape->decoder : nullptr);
  if (tape) tape->noise = std::move(noise);
  return out;
}

double CombineLoss(double C, double l_p, double l_u, const AdvConfig& cfg) {
  return cfg.alpha * C - cfg.lambda_p * l_p + cfg.lambda_u * l_u;
}

LossTerms ComputeLosses(const Matrix& sanitized, const Matrix& original,
                        const Matrix& p_logits, const Matrix& u_logits,
                        std::span<const int> p_labels,
                        std::span<const int> u_labels, const AdvConfig& cfg) {
  if (sanitized.rows() != original.rows() || sanitized.cols() != original.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "D̂ and D shapes differ");
  }
  LossTerms t;
  t.C = sanitized.size() == 0
            ? 0.0
            : (sanitized - original).squaredNorm() /
                  static_cast<double>(sanitized.size());
  t.l_p = CrossEntropy(p_logits, p_labels);
  t.l_u = CrossEntropy(u_logits, u_labels);
  t.L = CombineLoss(t.C, t.l_p, t.l_u, cfg);
  return t;
}

bool GradientSet::AllFinite() const {
  for (const auto* g : {&encoder, &decoder, &private_disc, &utility_disc}) {
    if (*g && !(*g)->AllFinite()) return false;
  }
  return true;
}

GradientSet Backward(const AdversarialModel& model, const Matrix& batch,
                     std::span<const int> p_labels,
                     std::span<const int> u_labels, const AdvConfig& cfg,
                     UpdateTarget target, const Matrix& noise) {
  CheckLabels(p_labels, batch.rows(), "private");
  CheckLabels(u_labels, batch.rows(), "utility");
  GeneratorTape gtape;
  const Matrix* noise_ptr = noise.size() > 0 ? &noise : nullptr;
  const Matrix out = ForwardGenerator(model.generator, batch, nullptr, &gtape, noise_ptr);
  MlpTape ptape;
  MlpTape utape;
  const Matrix p_logits = model.private_disc.Forward(out, &ptape);
  const Matrix u_logits = model.utility_disc.Forward(out, &utape);

  GradientSet g;
  g.losses = ComputeLosses(out, batch, p_logits, u_logits, p_labels, u_labels, cfg);

  const Matrix dl_p = -cfg.lambda_p * CrossEntropyGrad(p_logits, p_labels);
  if (target == UpdateTarget::kPrivateDiscriminator) {
    g.private_disc = model.private_disc.ZeroGrads();
    model.private_disc.Backward(ptape, dl_p, &*g.private_disc);
    return g;
  }

  g.utility_disc = model.utility_disc.ZeroGrads();
  const Matrix dl_u = cfg.lambda_u * CrossEntropyGrad(u_logits, u_labels);
  Matrix d_out = model.utility_disc.Backward(utape, dl_u, &*g.utility_disc);
  d_out += model.private_disc.Backward(ptape, dl_p, nullptr);
  if (out.size() > 0) {
    d_out += (2.0 * cfg.alpha / static_cast<double>(out.size())) * (out - batch);
  }
  g.decoder = model.generator.decoder.ZeroGrads();
  g.encoder = model.generator.encoder.ZeroGrads();
  const Matrix d_latent =
      model.generator.decoder.Backward(gtape.decoder, d_out, &*g.decoder);
  model.generator.encoder.Backward(gtape.encoder, d_latent, &*g.encoder);
  return g;
}

LossTerms EvaluateLoss(const AdversarialModel& model, const Matrix& batch,
                       std::span<const int> p_labels,
                       std::span<const int> u_labels, const AdvConfig& cfg,
                       const Matrix& noise) {
  const Matrix* noise_ptr = noise.size() > 0 ? &noise : nullptr;
  const Matrix out = ForwardGenerator(model.generator, batch, nullptr, nullptr, noise_ptr);
  return ComputeLosses(out, batch, model.private_disc.Forward(out),
                       model.utility_disc.Forward(out), p_labels, u_labels, cfg);
}

nlohmann::json TrainTrace::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"C", e.C}, {"l_p", e.l_p}, {"l_u", e.l_u}, {"L", e.L}});
  }
  return {{"epochs", rows}, {"early_stopped", early_stopped}};
}

AdversarialTrainer::AdversarialTrainer(int d, AdvConfig cfg)
    : cfg_(std::move(cfg)),
      noise_rng_(Rng(cfg_.seed).Fork(2)),
      shuffle_rng_(Rng(cfg_.seed).Fork(3)) {
  cfg_.Validate();
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "input width must be >= 1");
  Rng init = Rng(cfg_.seed).Fork(1);
  model_.generator = MakeGenerator(d, cfg_, init);
  model_.private_disc = MakeDiscriminator(d, cfg_, init);
  model_.utility_disc = MakeDiscriminator(d, cfg_, init);
  opt_p_ = Adam({cfg_.learning_rate});
  opt_g_ = Adam({cfg_.learning_rate});
}

AdversarialTrainer::AdversarialTrainer(AdversarialModel model, AdvConfig cfg)
    : cfg_(std::move(cfg)),
      model_(std::move(model)),
      opt_p_({cfg_.learning_rate}),
      opt_g_({cfg_.learning_rate}),
      noise_rng_(Rng(cfg_.seed).Fork(2)),
      shuffle_rng_(Rng(cfg_.seed).Fork(3)) {
  cfg_.Validate();
  model_.generator.Validate();
  const int d = model_.generator.dim();
  if (model_.private_disc.in_dim() != d || model_.utility_disc.in_dim() != d ||
      model_.private_disc.out_dim() != 2 || model_.utility_disc.out_dim() != 2) {
    throw Error(ErrorCode::kDimensionMismatch, "discriminator shapes");
  }
}

Matrix AdversarialTrainer::SampleNoise(Eigen::Index rows) {
  const double sigma = model_.generator.latent_noise_sigma;
  if (sigma <= 0) return {};
  Matrix noise(rows, model_.generator.encoder.out_dim());
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    noise.data()[i] = sigma * noise_rng_.Normal();
  }
  return noise;
}

LossTerms AdversarialTrainer::Step(const Matrix& batch,
                                   std::span<const int> p_labels,
                                   std::span<const int> u_labels) {
  // U = true: maximize L over the private discriminator.
  last_ascent_ = Backward(model_, batch, p_labels, u_labels, cfg_,
                          UpdateTarget::kPrivateDiscriminator,
                          SampleNoise(batch.rows()));
  if (!last_ascent_.AllFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient, "private discriminator gradient");
  }
  opt_p_.Step(Blocks({{&model_.private_disc, &*last_ascent_.private_disc}}), +1.0);

  // U = false: minimize L over generator and utility discriminator.
  last_descent_ = Backward(model_, batch, p_labels, u_labels, cfg_,
                           UpdateTarget::kGeneratorAndUtility,
                           SampleNoise(batch.rows()));
  if (!last_descent_.AllFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient, "generator/utility gradient");
  }
  opt_g_.Step(Blocks({{&model_.generator.encoder, &*last_descent_.encoder},
                      {&model_.generator.decoder, &*last_descent_.decoder},
                      {&model_.utility_disc, &*last_descent_.utility_disc}}),
              -1.0);
  return last_descent_.losses;
}

TrainTrace AdversarialTrainer::Train(const Matrix& data,
                                     std::span<const int> p_labels,
                                     std::span<const int> u_labels,
                                     const EpochCallback& cb) {
  if (data.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no training rows");
  CheckLabels(p_labels, data.rows(), "private");
  CheckLabels(u_labels, data.rows(), "utility");
  const auto n = static_cast<size_t>(data.rows());
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  TrainTrace trace;
  double best = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    shuffle_rng_.Shuffle(std::span<size_t>(order));
    double c = 0, lp = 0, lu = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(cfg_.batch_size)) {
      const size_t end = std::min(n, start + static_cast<size_t>(cfg_.batch_size));
      const std::span<const size_t> rows(order.data() + start, end - start);
      const Matrix batch = GatherRows(data, rows);
      const auto p = GatherLabels(p_labels, rows);
      const auto u = GatherLabels(u_labels, rows);
      const LossTerms t = Step(batch, p, u);
      const double w = static_cast<double>(rows.size());
      c += w * t.C;
      lp += w * t.l_p;
      lu += w * t.l_u;
    }
    LossTerms mean;
    mean.C = c / static_cast<double>(n);
    mean.l_p = lp / static_cast<double>(n);
    mean.l_u = lu / static_cast<double>(n);
    mean.L = CombineLoss(mean.C, mean.l_p, mean.l_u, cfg_);
    if (!std::isfinite(mean.L)) {
      throw Error(ErrorCode::kNonFiniteGradient,
                  "training diverged at epoch " + std::to_string(epoch));
    }
    trace.epochs.push_back(mean);
    if (cb) {
      const auto score = cb(epoch, model_);
      if (score && cfg_.early_stop_patience > 0) {
        if (*score > best) {
          best = *score;
          since_best = 0;
        } else if (++since_best >= cfg_.early_stop_patience) {
          trace.early_stopped = true;
          break;
        }
      }
    }
  }
  return trace;
}

std::string TrainedSanitizer::mechanism_id() const {
  return std::string(AdvVariantName(config.variant));
}

nlohmann::json TrainedSanitizer::ToJson() const {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"mechanism", mechanism_id()},
          {"config", config.ToJson()},
          {"schema_fingerprint", schema.Fingerprint()},
          {"schema", schema.ToJson()},
          {"latent_noise_sigma", generator.latent_noise_sigma},
          {"encoder", generator.encoder.ToJson()},
          {"decoder", generator.decoder.ToJson()},
          {"trace", trace.ToJson()}};
}

TrainedSanitizer TrainedSanitizer::FromJson(const nlohmann::json& j,
                                            const FeatureSchema* expected) {
  try {
    if (j.value("format", std::string()) != kCheckpointFormat) {
      throw Error(ErrorCode::kConfigError, "not an adversarial checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::kConfigError, "unsupported checkpoint version");
    }
    TrainedSanitizer s;
    s.config = AdvConfig::FromJson(j.at("config"));
    s.schema = FeatureSchema::FromJson(j.at("schema"));
    const auto fp = j.at("schema_fingerprint").get<std::string>();
    if (s.schema.Fingerprint() != fp) {
      throw Error(ErrorCode::kSchemaMismatch, "checkpoint schema is corrupt");
    }
    // Normalization stats come from the checkpoint, so only structure must
    // agree.
    if (expected &&
        expected->StructureFingerprint() != s.schema.StructureFingerprint()) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "checkpoint schema " + s.schema.StructureFingerprint() +
                      " != expected " + expected->StructureFingerprint());
    }
    s.generator.encoder = Mlp::FromJson(j.at("encoder"));
    s.generator.decoder = Mlp::FromJson(j.at("decoder"));
    s.generator.latent_noise_sigma = j.at("latent_noise_sigma").get<double>();
    s.generator.Validate();
    for (const auto& e : j.at("trace").at("epochs")) {
      s.trace.epochs.push_back({e.at("C").get<double>(), e.at("l_p").get<double>(),
                                e.at("l_u").get<double>(), e.at("L").get<double>()});
    }
    s.trace.early_stopped = j.at("trace").value("early_stopped", false);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("checkpoint: ") + e.what());
  }
}

void TrainedSanitizer::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << ToJson().dump() << "\n";
}

TrainedSanitizer TrainedSanitizer::Load(const std::filesystem::path& path,
                                        const FeatureSchema* expected) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
  return FromJson(j, expected);
}

TrainedSanitizer TrainSanitizer(const RecordTable& train, const AdvConfig& cfg,
                                const EpochCallback& cb) {
  cfg.Validate();
  TrainedSanitizer s;
  s.config = cfg;
  s.schema = FitNormalization(train);
  RecordTable normalized = train;
  normalized.schema = s.schema;
  const EncodedMatrix enc = Encode(normalized);
  AdversarialTrainer trainer(enc.n_dims, cfg);
  const auto p = train.private_labels();
  const auto u = train.utility_labels();
  s.trace = trainer.Train(enc.values, p, u, cb);
  s.generator = trainer.model().generator;
  return s;
}

MechanismOutput SanitizeTable(const TrainedSanitizer& sanitizer,
                              const RecordTable& table, uint64_t noise_seed) {
  if (table.schema.StructureFingerprint() !=
      sanitizer.schema.StructureFingerprint()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "table schema differs from the schema the generator was trained on");
  }
  RecordTable normalized = table;
  normalized.schema = sanitizer.schema;
  EncodedMatrix enc = Encode(normalized);
  if (enc.n_dims != sanitizer.generator.dim()) {
    throw Error(ErrorCode::kSchemaMismatch, "encoded width != generator width");
  }
  Rng noise(noise_seed);
  enc.values = ForwardGenerator(sanitizer.generator, enc.values, &noise);
  RecordTable decoded = Decode(enc, sanitizer.schema, table.labels);

  MechanismOutput out;
  out.table = std::move(decoded);
  out.table.schema = table.schema;
  out.dispositions.assign(table.size(), Disposition::kSanitized);
  out.mechanism_id = sanitizer.mechanism_id();
  out.config = sanitizer.config.ToJson();
  if (sanitizer.config.variant == AdvVariant::kUaePupet) {
    out.config["variant_label"] = "uae_pupet (fig2-variant)";
  }
  out.counts.sanitized = table.size();
  return out;
}

}  // namespace tabsan
