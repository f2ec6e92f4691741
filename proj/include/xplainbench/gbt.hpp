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

// Second-order gradient boosted trees for binary classification with the
// logistic loss. Leaf weight is -G / (H + lambda); a split must have positive
// gain and both children need hessian mass >= min_child_weight.

#pragma once

#include "xplainbench/dataset.hpp"
#include "xplainbench/forest.hpp"
#include "xplainbench/tree.hpp"

#include <cmath>

namespace xplainbench {

struct GbtParams {
  int n_rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda_l2 = 1.0;
  double min_child_weight = 1.0;

  friend bool operator==(const GbtParams&, const GbtParams&) = default;
};

namespace detail {

struct NewtonCriterion {
  struct Stats {
    double g = 0.0;
    double h = 0.0;
  };

  const std::vector<double>* grad;
  const std::vector<double>* hess;
  double lambda;
  double min_child_weight;

  Stats empty() const { return {}; }
  void add(Stats& s, std::size_t i) const {
    s.g += (*grad)[i];
    s.h += (*hess)[i];
  }
  double structure(double g, double h) const { return g * g / (h + lambda); }
  double score(const Stats& total, const Stats& left) const {
    return structure(left.g, left.h) + structure(total.g - left.g, total.h - left.h);
  }
  double parent_score(const Stats& s) const { return structure(s.g, s.h); }
  bool admissible(const Stats& total, const Stats& left) const {
    return left.h >= min_child_weight && total.h - left.h >= min_child_weight;
  }
  bool splittable(const Stats& s) const { return s.h >= 2.0 * min_child_weight; }
  bool accept(double best, double parent) const { return 0.5 * (best - parent) > 0.0; }
  void leaf(const Stats& s, std::span<double> out) const { out[0] = -s.g / (s.h + lambda); }
  int value_width() const { return 1; }
};

}  // namespace detail

class GbtModel {
 public:
  GbtModel() = default;
  GbtModel(std::vector<Tree> trees, double base_score, int n_features, GbtParams params)
      : trees_(std::move(trees)), base_score_(base_score), n_features_(n_features),
        params_(params) {
    validate();
  }

  const std::vector<Tree>& trees() const { return trees_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return params_.learning_rate; }
  int n_rounds() const { return static_cast<int>(trees_.size()); }
  int n_classes() const { return 2; }
  int n_features() const { return n_features_; }
  const GbtParams& params() const { return params_; }

  void validate() const {
    if (!std::isfinite(base_score_)) throw ValidationError("gbt: non-finite base score");
    for (const auto& t : trees_) {
      if (t.value_width != 1) throw ValidationError("gbt: trees must have scalar leaves");
      t.validate(static_cast<std::size_t>(n_features_));
    }
  }

  /// Log-odds of the positive class using the first `rounds` trees
  /// (all trees when rounds < 0).
  double margin(std::span<const double> x, int rounds = -1) const {
    const std::size_t limit =
        rounds < 0 ? trees_.size() : std::min(trees_.size(), static_cast<std::size_t>(rounds));
    double sum = 0.0;
    for (std::size_t t = 0; t < limit; ++t) sum += trees_[t].leaf_value(x)[0];
    return base_score_ + params_.learning_rate * sum;
  }

  Matrix predict_proba(const Matrix& X) const {
    check_width(X);
    Matrix out(X.rows(), 2);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const double p = sigmoid(margin(row_span(X, r)));
      out(r, 0) = 1.0 - p;
      out(r, 1) = p;
    }
    return out;
  }

  /// Boosted models are explained on the margin scale: +margin for the
  /// positive class, -margin for the negative one.
  std::vector<double> explained_output(const Matrix& X, int cls) const {
    check_width(X);
    const double sign = cls == 1 ? 1.0 : -1.0;
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      out[static_cast<std::size_t>(r)] = sign * margin(row_span(X, r));
    return out;
  }

  TreeEnsembleView tree_view(int cls) const {
    const double sign = cls == 1 ? 1.0 : -1.0;
    TreeEnsembleView view;
    for (const auto& t : trees_) view.trees.push_back(&t);
    view.value_index = 0;
    view.scale = sign * params_.learning_rate;
    view.offset = sign * base_score_;
    return view;
  }

 private:
  void check_width(const Matrix& X) const {
    if (X.cols() != n_features_)
      throw ValidationError("gbt: expected " + std::to_string(n_features_) + " columns, got " +
                            std::to_string(X.cols()));
  }

  std::vector<Tree> trees_;
  double base_score_ = 0.0;
  int n_features_ = 0;
  GbtParams params_;
};

/// Mean logistic loss of `model` truncated to `rounds` trees.
inline double gbt_log_loss(const GbtModel& model, const TabularDataset& ds, int rounds = -1) {
  double loss = 0.0;
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    const double m = model.margin(row_span(ds.X, r), rounds);
    const double y = ds.y[static_cast<std::size_t>(r)];
    // log(1 + e^m) - y m, computed stably.
    loss += (m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m))) - y * m;
  }
  return loss / static_cast<double>(ds.size());
}

/// Trains a boosted model. Splits are exact greedy over all features, so the
/// seed does not influence the result; it is accepted for interface symmetry.
inline GbtModel fit_gbt(const TabularDataset& train, const GbtParams& params,
                        std::uint64_t seed) {
  train.validate();
  if (train.n_classes() != 2)
    throw ValidationError("gbt: binary labels required; wrap multiclass data in one-vs-rest");
  detail::require_all_classes(train, "gbt");
  if (params.n_rounds < 0) throw ValidationError("gbt: n_rounds must be >= 0");
  if (params.max_depth < 1) throw ValidationError("gbt: max_depth must be >= 1");
  if (!(params.learning_rate > 0.0)) throw ValidationError("gbt: learning_rate must be > 0");
  if (params.lambda_l2 < 0.0) throw ValidationError("gbt: lambda_l2 must be >= 0");
  if (params.min_child_weight < 0.0) throw ValidationError("gbt: min_child_weight must be >= 0");

  const std::size_t n = train.size();
  const std::size_t d = train.n_features();
  double prior = 0.0;
  for (int v : train.y) prior += v;
  prior /= static_cast<double>(n);
  const double base = std::log(prior / (1.0 - prior));

  std::vector<std::vector<double>> cols(d, std::vector<double>(n));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t f = 0; f < d; ++f)
      cols[f][s] = train.X(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(f));

  std::vector<double> margin(n, base), grad(n), hess(n);
  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_rounds));
  Rng rng(seed);
  detail::NewtonCriterion crit{&grad, &hess, params.lambda_l2, params.min_child_weight};
  detail::TreeGrower<detail::NewtonCriterion> grower(crit, cols, params.max_depth, 1);
  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - train.y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    Tree tree = grower.grow(n, 0, rng);
    for (double v : tree.value)
      if (!std::isfinite(v))
        throw RuntimeFailure("gbt: non-finite leaf value in round " + std::to_string(round));
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = row_span(train.X, static_cast<Eigen::Index>(i));
      margin[i] += params.learning_rate * tree.leaf_value(x)[0];
    }
    trees.push_back(std::move(tree));
  }
  return GbtModel(std::move(trees), base, static_cast<int>(d), params);
}

}  // namespace xplainbench
