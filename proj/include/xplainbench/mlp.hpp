/*
 * Copyright 2026 The XplainBench Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Fully connected network with ReLU hidden layers and either per-class
// sigmoid outputs (binary cross-entropy) or a softmax output (cross-entropy).
// Inputs are standardized with statistics of the training split. Training is
// mini-batch Adam.

#pragma once

#include "xplainbench/dataset.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace xplainbench {

enum class MlpOutput { kSigmoid, kSoftmax };

inline const char* to_string(MlpOutput o) { return o == MlpOutput::kSigmoid ? "sigmoid" : "softmax"; }

struct MlpParams {
  std::vector<int> hidden_sizes = {64};
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  MlpOutput output = MlpOutput::kSigmoid;
  bool zero_init_output = false;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct DenseLayer {
  Matrix weights;  // fan_in x fan_out
  Vector bias;     // fan_out
};

class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::vector<DenseLayer> layers, Vector mean, Vector stddev, MlpOutput output,
           int n_classes, MlpParams params)
      : layers_(std::move(layers)), mean_(std::move(mean)), stddev_(std::move(stddev)),
        output_(output), n_classes_(n_classes), params_(std::move(params)) {
    validate();
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const Vector& mean() const { return mean_; }
  const Vector& stddev() const { return stddev_; }
  MlpOutput output() const { return output_; }
  int n_classes() const { return n_classes_; }
  int n_features() const { return static_cast<int>(mean_.size()); }
  int n_outputs() const { return static_cast<int>(layers_.back().bias.size()); }
  const MlpParams& params() const { return params_; }

  void validate() const {
    if (layers_.empty()) throw ValidationError("mlp: at least one layer required");
    if (mean_.size() != stddev_.size()) throw ValidationError("mlp: standardization size mismatch");
    if ((stddev_.array() <= 0.0).any()) throw ValidationError("mlp: stddev must be positive");
    Eigen::Index width = mean_.size();
    for (const auto& l : layers_) {
      if (l.weights.rows() != width || l.weights.cols() != l.bias.size())
        throw ValidationError("mlp: layer dimensions do not chain");
      width = l.weights.cols();
    }
    const Eigen::Index expected =
        (output_ == MlpOutput::kSigmoid && n_classes_ == 2) ? 1 : n_classes_;
    if (width != expected)
      throw ValidationError("mlp: output layer has " + std::to_string(width) + " units, expected " +
                            std::to_string(expected));
  }

  Matrix standardize(const Matrix& X) const {
    if (X.cols() != mean_.size())
      throw ValidationError("mlp: expected " + std::to_string(mean_.size()) + " columns, got " +
                            std::to_string(X.cols()));
    Matrix Z = X;
    Z.rowwise() -= mean_.transpose();
    Z.array().rowwise() /= stddev_.transpose().array();
    return Z;
  }

  /// Output-layer pre-activations for standardized inputs.
  Matrix logits(const Matrix& Z) const {
    Matrix a = Z;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = a * layers_[l].weights;
      z.rowwise() += layers_[l].bias.transpose();
      if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a;
  }

  /// Activated outputs (sigmoid per unit, or softmax across units).
  Matrix activations(const Matrix& X) const { return activate(logits(standardize(X))); }

  Matrix activate(Matrix z) const {
    if (output_ == MlpOutput::kSigmoid) return z.unaryExpr([](double v) { return sigmoid(v); });
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const double mx = z.row(r).maxCoeff();
      z.row(r) = (z.row(r).array() - mx).exp();
      z.row(r) /= z.row(r).sum();
    }
    return z;
  }

  Matrix predict_proba(const Matrix& X) const {
    const Matrix a = activations(X);
    if (output_ == MlpOutput::kSoftmax) return a;
    if (n_classes_ == 2) {
      Matrix out(a.rows(), 2);
      out.col(0) = (1.0 - a.col(0).array()).matrix();
      out.col(1) = a.col(0);
      return out;
    }
    // Independent sigmoid units: normalize to one distribution per row.
    Matrix out = a;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double s = out.row(r).sum();
      if (s > 0.0)
        out.row(r) /= s;
      else
        out.row(r).setConstant(1.0 / static_cast<double>(out.cols()));
    }
    return out;
  }

  /// The activated output unit for `cls` (for a single sigmoid unit, class 0
  /// is its complement).
  std::vector<double> explained_output(const Matrix& X, int cls) const {
    const Matrix a = activations(X);
    std::vector<double> out(static_cast<std::size_t>(a.rows()));
    const bool single = a.cols() == 1;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      out[static_cast<std::size_t>(r)] = single ? (cls == 1 ? a(r, 0) : 1.0 - a(r, 0)) : a(r, cls);
    return out;
  }

  // Flat parameter addressing (weights then bias, layer by layer).
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }
  double& parameter(std::size_t i) {
    for (auto& l : layers_) {
      const auto nw = static_cast<std::size_t>(l.weights.size());
      if (i < nw) return l.weights.data()[i];
      i -= nw;
      const auto nb = static_cast<std::size_t>(l.bias.size());
      if (i < nb) return l.bias.data()[i];
      i -= nb;
    }
    throw std::out_of_range("mlp: parameter index out of range");
  }

  std::vector<DenseLayer>& mutable_layers() { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
  Vector mean_;
  Vector stddev_;
  MlpOutput output_ = MlpOutput::kSigmoid;
  int n_classes_ = 2;
  MlpParams params_;
};

/// Training targets: one column per output unit.
inline Matrix mlp_targets(std::span<const int> y, int n_classes, MlpOutput output) {
  const bool single = output == MlpOutput::kSigmoid && n_classes == 2;
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(y.size()), single ? 1 : n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (single)
      t(static_cast<Eigen::Index>(i), 0) = y[i];
    else
      t(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  }
  return t;
}

/// Mean loss on standardized inputs Z: binary cross-entropy averaged over
/// rows and sigmoid units, or softmax cross-entropy averaged over rows.
inline double mlp_loss(const MlpModel& model, const Matrix& Z, const Matrix& targets) {
  const Matrix z = model.logits(Z);
  double loss = 0.0;
  if (model.output() == MlpOutput::kSigmoid) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double v = z.data()[i];
      loss += std::max(v, 0.0) - v * targets.data()[i] + std::log1p(std::exp(-std::abs(v)));
    }
    return loss / static_cast<double>(z.size());
  }
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    loss += lse - (z.row(r).array() * targets.row(r).array()).sum();
  }
  return loss / static_cast<double>(z.rows());
}

/// Backpropagated gradient of mlp_loss, in the order used by
/// MlpModel::parameter().
inline std::vector<DenseLayer> mlp_gradient(const MlpModel& model, const Matrix& Z,
                                            const Matrix& targets) {
  const auto& layers = model.layers();
  std::vector<Matrix> acts{Z};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = acts.back() * layers[l].weights;
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  Matrix delta = model.activate(acts.back()) - targets;
  delta /= static_cast<double>(model.output() == MlpOutput::kSigmoid ? delta.size() : delta.rows());

  std::vector<DenseLayer> grads(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].weights = acts[l].transpose() * delta;
    grads[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * layers[l].weights.transpose();
      back.array() *= (acts[l].array() > 0.0).cast<double>();
      delta = std::move(back);
    }
  }
  return grads;
}

inline MlpModel fit_mlp(const TabularDataset& train, const MlpParams& params, std::uint64_t seed) {
  train.validate();
  detail::require_all_classes(train, "mlp");
  if (params.epochs < 0) throw ValidationError("mlp: epochs must be >= 0");
  if (params.batch_size < 1) throw ValidationError("mlp: batch_size must be >= 1");
  if (!(params.learning_rate > 0.0)) throw ValidationError("mlp: learning_rate must be > 0");
  for (int h : params.hidden_sizes)
    if (h < 1) throw ValidationError("mlp: hidden layer sizes must be >= 1");

  const int n_classes = static_cast<int>(train.n_classes());
  const Eigen::Index d = train.X.cols();
  const auto n = static_cast<Eigen::Index>(train.size());

  Vector mean = train.X.colwise().mean().transpose();
  Vector stddev(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const double var = (train.X.col(c).array() - mean(c)).square().mean();
    stddev(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }

  const int n_out = (params.output == MlpOutput::kSigmoid && n_classes == 2) ? 1 : n_classes;
  std::vector<int> widths{static_cast<int>(d)};
  widths.insert(widths.end(), params.hidden_sizes.begin(), params.hidden_sizes.end());
  widths.push_back(n_out);

  Rng init_rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.weights.resize(widths[l], widths[l + 1]);
    layer.bias = Vector::Zero(widths[l + 1]);
    const bool last = l + 2 == widths.size();
    if (last && params.zero_init_output) {
      layer.weights.setZero();
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = u(init_rng);
    }
    layers.push_back(std::move(layer));
  }
  MlpModel model(std::move(layers), mean, stddev, params.output, n_classes, params);

  const Matrix Z = model.standardize(train.X);
  const Matrix T = mlp_targets(train.y, n_classes, params.output);

  // Adam state, laid out like the parameters.
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<DenseLayer> m1, m2;
  for (const auto& l : model.layers()) {
    m1.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
    m2.push_back(m1.back());
  }
  std::uint64_t step = 0;
  Rng shuffle_rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += params.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(params.batch_size, n - start);
      Matrix zb(len, d), tb(len, T.cols());
      for (Eigen::Index k = 0; k < len; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + k)];
        zb.row(k) = Z.row(src);
        tb.row(k) = T.row(src);
      }
      epoch_loss += mlp_loss(model, zb, tb) * static_cast<double>(len);
      const auto grads = mlp_gradient(model, zb, tb);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto& layers_ref = model.mutable_layers();
      for (std::size_t l = 0; l < layers_ref.size(); ++l) {
        m1[l].weights = beta1 * m1[l].weights + (1 - beta1) * grads[l].weights;
        m2[l].weights = beta2 * m2[l].weights + (1 - beta2) * grads[l].weights.cwiseAbs2();
        m1[l].bias = beta1 * m1[l].bias + (1 - beta1) * grads[l].bias;
        m2[l].bias = beta2 * m2[l].bias + (1 - beta2) * grads[l].bias.cwiseAbs2();
        layers_ref[l].weights.array() -= params.learning_rate * (m1[l].weights.array() / c1) /
                                         ((m2[l].weights.array() / c2).sqrt() + eps);
        layers_ref[l].bias.array() -= params.learning_rate * (m1[l].bias.array() / c1) /
                                      ((m2[l].bias.array() / c2).sqrt() + eps);
      }
    }
    if (!std::isfinite(epoch_loss))
      throw RuntimeFailure("mlp: non-finite training loss in epoch " + std::to_string(epoch + 1));
  }
  return model;
}

}  // namespace xplainbench
