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


#ifndef TABSAN_NN_H_
#define TABSAN_NN_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tabsan/dataset.h"
#include "tabsan/random.h"

namespace tabsan {

enum class Activation { kIdentity, kRelu, kSigmoid, kSoftmax };
std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

struct DenseLayer {
  Matrix weight;  // in x out
  RowVector bias;
  Activation activation = Activation::kIdentity;
};

struct MlpGrads {
  std::vector<Matrix> weight;
  std::vector<RowVector> bias;

  void SetZero();
  bool AllFinite() const;
};

// Intermediate values of one forward pass, needed by Backward.
struct MlpTape {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> outputs;  // post-activation output of each layer
};

class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}. Weights and biases ~ U(-1/sqrt(in),
  // 1/sqrt(in)) per layer.
  Mlp(std::span<const int> dims, Activation hidden, Activation output, Rng& rng);
  // Validates chaining and that softmax/sigmoid appear only at the output.
  explicit Mlp(std::vector<DenseLayer> layers);

  int in_dim() const;
  int out_dim() const;
  size_t num_layers() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  size_t num_params() const;

  Matrix Forward(const Matrix& x) const;
  Matrix Forward(const Matrix& x, MlpTape* tape) const;
  // Accumulates dLoss/dparams into `grads` (which must be shaped by
  // ZeroGrads) and returns dLoss/dx.
  Matrix Backward(const MlpTape& tape, const Matrix& grad_output,
                  MlpGrads* grads) const;
  MlpGrads ZeroGrads() const;

  bool AllFinite() const;

  nlohmann::json ToJson() const;
  static Mlp FromJson(const nlohmann::json& j);

 private:
  void Validate() const;

  std::vector<DenseLayer> layers_;
};

// One contiguous parameter block and its gradient.
struct ParamBlock {
  double* values;
  const double* grads;
  size_t size;
};

void AppendBlocks(Mlp& mlp, const MlpGrads& grads, std::vector<ParamBlock>* out);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed sequence of parameter blocks. direction = -1 descends
// the gradient, +1 ascends it.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void Step(std::span<const ParamBlock> blocks, double direction);

  int64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  int64_t t_ = 0;
};

// Row-wise log-softmax.
Matrix LogSoftmax(const Matrix& logits);
// Mean cross-entropy of logits against integer labels.
double CrossEntropy(const Matrix& logits, std::span<const int> labels);
// d CrossEntropy / d logits.
Matrix CrossEntropyGrad(const Matrix& logits, std::span<const int> labels);

}  // namespace tabsan

#endif  // TABSAN_NN_H_
