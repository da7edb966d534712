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


#ifndef TABSAN_ADVERSARIAL_H_
#define TABSAN_ADVERSARIAL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tabsan/dataset.h"
#include "tabsan/mechanism.h"
#include "tabsan/nn.h"
#include "tabsan/random.h"

namespace tabsan {

enum class AdvVariant { kAlfr, kUaePupet };
std::string_view AdvVariantName(AdvVariant v);  // "alfr", "uae_pupet"
AdvVariant ParseAdvVariant(std::string_view name);

struct AdvConfig {
  double alpha = 1.0;
  double lambda_p = 1.0;
  double lambda_u = 1.0;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 20;
  int latent_dim = 32;
  int hidden_dim = 64;
  uint64_t seed = 0;
  AdvVariant variant = AdvVariant::kAlfr;
  // Latent noise scale for uae_pupet; ALFR always uses 0.
  double noise_sigma = 0.1;
  // Stop after this many epochs without improvement reported by the epoch
  // callback. 0 disables early stopping.
  int early_stop_patience = 0;

  double effective_sigma() const {
    return variant == AdvVariant::kUaePupet ? noise_sigma : 0.0;
  }
  void Validate() const;
  nlohmann::json ToJson() const;
  static AdvConfig FromJson(const nlohmann::json& j);
};

struct GeneratorNet {
  Mlp encoder;
  Mlp decoder;
  double latent_noise_sigma = 0.0;

  int dim() const { return encoder.in_dim(); }
  void Validate() const;
};

// Builds d -> hidden -> latent -> hidden -> d with relu hidden layers and
// identity latent and output layers.
GeneratorNet MakeGenerator(int d, const AdvConfig& cfg, Rng& rng);
// d -> hidden -> 2, emitting logits.
Mlp MakeDiscriminator(int d, const AdvConfig& cfg, Rng& rng);

struct GeneratorTape {
  MlpTape encoder;
  MlpTape decoder;
  Matrix noise;
};

// D̂ = decoder(encoder(batch) + ε). ε is drawn from `noise_rng` when sigma > 0,
// or taken from `fixed_noise` when given.
Matrix ForwardGenerator(const GeneratorNet& gen, const Matrix& batch,
                        Rng* noise_rng, GeneratorTape* tape = nullptr,
                        const Matrix* fixed_noise = nullptr);

struct LossTerms {
  double C = 0.0;
  double l_p = 0.0;
  double l_u = 0.0;
  double L = 0.0;
  friend bool operator==(const LossTerms&, const LossTerms&) = default;
};

double CombineLoss(double C, double l_p, double l_u, const AdvConfig& cfg);

LossTerms ComputeLosses(const Matrix& sanitized, const Matrix& original,
                        const Matrix& p_logits, const Matrix& u_logits,
                        std::span<const int> p_labels,
                        std::span<const int> u_labels, const AdvConfig& cfg);

enum class UpdateTarget { kPrivateDiscriminator, kGeneratorAndUtility };

struct AdversarialModel {
  GeneratorNet generator;
  Mlp private_disc;
  Mlp utility_disc;
};

// Gradient of L with respect to one update target's parameters. Entries for
// networks outside the target are left empty.
struct GradientSet {
  std::optional<MlpGrads> encoder;
  std::optional<MlpGrads> decoder;
  std::optional<MlpGrads> private_disc;
  std::optional<MlpGrads> utility_disc;
  LossTerms losses;

  bool AllFinite() const;
};

// Forward pass plus exact reverse-mode gradient of L. With `fixed_noise`
// the pass is a deterministic function of the parameters.
GradientSet Backward(const AdversarialModel& model, const Matrix& batch,
                     std::span<const int> p_labels,
                     std::span<const int> u_labels, const AdvConfig& cfg,
                     UpdateTarget target, const Matrix& noise);

// L evaluated at the model's current parameters with fixed noise.
LossTerms EvaluateLoss(const AdversarialModel& model, const Matrix& batch,
                       std::span<const int> p_labels,
                       std::span<const int> u_labels, const AdvConfig& cfg,
                       const Matrix& noise);

struct TrainTrace {
  std::vector<LossTerms> epochs;
  bool early_stopped = false;
  nlohmann::json ToJson() const;
};

// Called after each epoch with (epoch index, model). Returns a score to
// maximize for early stopping, or nullopt to skip the check.
using EpochCallback =
    std::function<std::optional<double>(int epoch, const AdversarialModel&)>;

class AdversarialTrainer {
 public:
  AdversarialTrainer(int d, AdvConfig cfg);
  AdversarialTrainer(AdversarialModel model, AdvConfig cfg);

  // One ascent step on the private discriminator followed by one descent
  // step on generator and utility discriminator. Returns the losses seen by
  // the descent step.
  LossTerms Step(const Matrix& batch, std::span<const int> p_labels,
                 std::span<const int> u_labels);

  TrainTrace Train(const Matrix& data, std::span<const int> p_labels,
                   std::span<const int> u_labels, const EpochCallback& cb = {});

  const AdversarialModel& model() const { return model_; }
  const AdvConfig& config() const { return cfg_; }
  // Gradients used by the most recent Step, for replaying the optimizer.
  const GradientSet& last_ascent() const { return last_ascent_; }
  const GradientSet& last_descent() const { return last_descent_; }
  const Adam& private_optimizer() const { return opt_p_; }
  const Adam& generator_optimizer() const { return opt_g_; }

 private:
  Matrix SampleNoise(Eigen::Index rows);

  AdvConfig cfg_;
  AdversarialModel model_;
  Adam opt_p_;
  Adam opt_g_;
  Rng noise_rng_;
  Rng shuffle_rng_;
  GradientSet last_ascent_;
  GradientSet last_descent_;
};

struct TrainedSanitizer {
  GeneratorNet generator;
  AdvConfig config;
  FeatureSchema schema;  // with the normalization stats used in training
  TrainTrace trace;

  std::string mechanism_id() const;
  nlohmann::json ToJson() const;
  // Rejects a checkpoint whose schema structure differs from `expected`
  // when given.
  static TrainedSanitizer FromJson(const nlohmann::json& j,
                                   const FeatureSchema* expected = nullptr);
  void Save(const std::filesystem::path& path) const;
  static TrainedSanitizer Load(const std::filesystem::path& path,
                               const FeatureSchema* expected = nullptr);
};

// Fits normalization on `train`, trains, and returns the sanitizer.
TrainedSanitizer TrainSanitizer(const RecordTable& train, const AdvConfig& cfg,
                                const EpochCallback& cb = {});

// Encode, generate (noise active for uae_pupet), decode.
MechanismOutput SanitizeTable(const TrainedSanitizer& sanitizer,
                              const RecordTable& table, uint64_t noise_seed);

}  // namespace tabsan

#endif  // TABSAN_ADVERSARIAL_H_
