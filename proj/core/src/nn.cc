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

#include "tabsan/nn.h"

#include <cmath>
#include <string>

#include "tabsan/error.h"

namespace tabsan {

std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  throw Error(ErrorCode::kConfigError, "unknown activation " + std::string(name));
}

void MlpGrads::SetZero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

bool MlpGrads::AllFinite() const {
  for (const auto& w : weight) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : bias) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Mlp::Mlp(std::span<const int> dims, Activation hidden, Activation output,
         Rng& rng) {
  if (dims.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "an MLP needs at least two dims");
  }
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (in <= 0 || out <= 0) {
      throw Error(ErrorCode::kInvalidArgument, "layer dims must be positive");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer;
    layer.weight.resize(in, out);
    layer.bias.resize(out);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = rng.Uniform(-bound, bound);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] = rng.Uniform(-bound, bound);
    }
    layer.activation = l + 2 == dims.size() ? output : hidden;
    layers_.push_back(std::move(layer));
  }
  Validate();
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  Validate();
}

void Mlp::Validate() const {
  if (layers_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty MLP");
  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "bias width != layer output");
    }
    if (l > 0 && layers_[l - 1].weight.cols() != layer.weight.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "layer " + std::to_string(l) + " input does not chain");
    }
    const bool squashing = layer.activation == Activation::kSoftmax ||
                           layer.activation == Activation::kSigmoid;
    if (squashing && l + 1 != layers_.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "softmax/sigmoid allowed only at the output layer");
    }
  }
  if (!AllFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite MLP parameters");
  }
}

int Mlp::in_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.rows());
}

int Mlp::out_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.cols());
}

size_t Mlp::num_params() const {
  size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

bool Mlp::AllFinite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

namespace {

void Activate(Activation a, Matrix& z) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSigmoid:
      z = z.unaryExpr([](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
      });
      break;
    case Activation::kSoftmax:
      z = LogSoftmax(z).array().exp().matrix();
      break;
  }
}

// Turns dLoss/d(output) into dLoss/d(pre-activation) in place.
void ActivationBackward(Activation a, const Matrix& out, Matrix& g) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      g = (out.array() > 0.0).select(g, 0.0);
      break;
    case Activation::kSigmoid:
      g = g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));
      break;
    case Activation::kSoftmax: {
      const Eigen::VectorXd dot = g.cwiseProduct(out).rowwise().sum();
      g = out.cwiseProduct((g.colwise() - dot));
      break;
    }
  }
}

}  // namespace

Matrix Mlp::Forward(const Matrix& x) const { return Forward(x, nullptr); }

Matrix Mlp::Forward(const Matrix& x, MlpTape* tape) const {
  if (x.cols() != in_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input width " + std::to_string(x.cols()) + " != " +
                    std::to_string(in_dim()));
  }
  if (tape) {
    tape->inputs.clear();
    tape->outputs.clear();
  }
  Matrix h = x;
  for (const auto& layer : layers_) {
    Matrix z = h * layer.weight;
    z.rowwise() += layer.bias;
    Activate(layer.activation, z);
    if (tape) {
      tape->inputs.push_back(std::move(h));
      tape->outputs.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

MlpGrads Mlp::ZeroGrads() const {
  MlpGrads g;
  for (const auto& l : layers_) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(RowVector::Zero(l.bias.size()));
  }
  return g;
}

Matrix Mlp::Backward(const MlpTape& tape, const Matrix& grad_output,
                     MlpGrads* grads) const {
  if (tape.outputs.size() != layers_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "tape does not match network");
  }
  Matrix g = grad_output;
  for (size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    ActivationBackward(layer.activation, tape.outputs[i], g);
    if (grads) {
      grads->weight[i].noalias() += tape.inputs[i].transpose() * g;
      grads->bias[i] += g.colwise().sum();
    }
    Matrix prev = g * layer.weight.transpose();
    g = std::move(prev);
  }
  return g;
}

nlohmann::json Mlp::ToJson() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"in", l.weight.rows()},
                      {"out", l.weight.cols()},
                      {"activation", ActivationName(l.activation)},
                      {"weight", w},
                      {"bias", b}});
  }
  return {{"layers", layers}};
}

Mlp Mlp::FromJson(const nlohmann::json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& lj : j.at("layers")) {
    const auto in = lj.at("in").get<Eigen::Index>();
    const auto out = lj.at("out").get<Eigen::Index>();
    const auto w = lj.at("weight").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != in * out ||
        static_cast<Eigen::Index>(b.size()) != out) {
      throw Error(ErrorCode::kDimensionMismatch, "checkpoint tensor sizes");
    }
    DenseLayer layer;
    layer.weight = Eigen::Map<const Matrix>(w.data(), in, out);
    layer.bias = Eigen::Map<const RowVector>(b.data(), out);
    layer.activation = ParseActivation(lj.at("activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

void AppendBlocks(Mlp& mlp, const MlpGrads& grads,
                  std::vector<ParamBlock>* out) {
  auto& layers = mlp.mutable_layers();
  if (grads.weight.size() != layers.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradients do not match network");
  }
  for (size_t i = 0; i < layers.size(); ++i) {
    out->push_back({layers[i].weight.data(), grads.weight[i].data(),
                    static_cast<size_t>(layers[i].weight.size())});
    out->push_back({layers[i].bias.data(), grads.bias[i].data(),
                    static_cast<size_t>(layers[i].bias.size())});
  }
}

void Adam::Step(std::span<const ParamBlock> blocks, double direction) {
  size_t total = 0;
  for (const auto& b : blocks) total += b.size;
  if (m_.empty()) {
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  } else if (m_.size() != total) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer parameter count changed");
  }
  ++t_;
  const auto& o = options_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  size_t k = 0;
  for (const auto& b : blocks) {
    for (size_t i = 0; i < b.size; ++i, ++k) {
      const double g = b.grads[i];
      m_[k] = o.beta1 * m_[k] + (1.0 - o.beta1) * g;
      v_[k] = o.beta2 * v_[k] + (1.0 - o.beta2) * g * g;
      const double m_hat = m_[k] / c1;
      const double v_hat = v_[k] / c2;
      b.values[i] += direction * o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

Matrix LogSoftmax(const Matrix& logits) {
  const Eigen::VectorXd max = logits.rowwise().maxCoeff();
  Matrix shifted = logits.colwise() - max;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  shifted.colwise() -= lse;
  return shifted;
}

double CrossEntropy(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<size_t>(logits.rows()) != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "logits/labels length");
  }
  if (labels.empty()) return 0.0;
  const Matrix log_p = LogSoftmax(logits);
  double sum = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    sum -= log_p(static_cast<Eigen::Index>(i), labels[i]);
  }
  return sum / static_cast<double>(labels.size());
}

Matrix CrossEntropyGrad(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<size_t>(logits.rows()) != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "logits/labels length");
  }
  Matrix g = LogSoftmax(logits).array().exp().matrix();
  for (size_t i = 0; i < labels.size(); ++i) {
    g(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  }
  if (!labels.empty()) g /= static_cast<double>(labels.size());
  return g;
}

}  // namespace tabsan
