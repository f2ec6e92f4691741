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

// Random forest classifier: bootstrap aggregation of Gini trees with per-split
// feature subsampling. Predictions average the leaf class distributions.

#pragma once

#include "xplainbench/dataset.hpp"
#include "xplainbench/tree.hpp"

#include <cmath>
#include <optional>

namespace xplainbench {

struct ForestParams {
  int n_trees = 100;
  std::optional<int> max_depth;  // nullopt: grow until pure
  int min_samples_leaf = 1;
  std::optional<int> features_per_split;  // nullopt: ceil(sqrt(d))
  bool bootstrap = true;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

namespace detail {

struct GiniCriterion {
  struct Stats {
    std::vector<double> counts;
    double total = 0.0;
  };

  const std::vector<int>* labels;  // per sample
  int n_classes;

  Stats empty() const { return {std::vector<double>(static_cast<std::size_t>(n_classes), 0.0), 0.0}; }
  void add(Stats& s, std::size_t sample) const {
    s.counts[static_cast<std::size_t>((*labels)[sample])] += 1.0;
    s.total += 1.0;
  }
  static double purity(const Stats& s) {
    double sq = 0.0;
    for (double c : s.counts) sq += c * c;
    return sq / s.total;
  }
  // Maximizing sum of c^2/n over children minimizes weighted Gini impurity.
  double score(const Stats& total, const Stats& left) const {
    double sq_left = 0.0, sq_right = 0.0;
    for (std::size_t c = 0; c < left.counts.size(); ++c) {
      const double r = total.counts[c] - left.counts[c];
      sq_left += left.counts[c] * left.counts[c];
      sq_right += r * r;
    }
    return sq_left / left.total + sq_right / (total.total - left.total);
  }
  double parent_score(const Stats& s) const { return purity(s); }
  bool admissible(const Stats&, const Stats&) const { return true; }
  bool splittable(const Stats& s) const {
    int present = 0;
    for (double c : s.counts) present += c > 0.0;
    return present > 1;
  }
  bool accept(double, double) const { return true; }
  void leaf(const Stats& s, std::span<double> out) const {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = s.counts[c] / s.total;
  }
  int value_width() const { return n_classes; }
};

}  // namespace detail

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<Tree> trees, int n_classes, int n_features, ForestParams params)
      : trees_(std::move(trees)), n_classes_(n_classes), n_features_(n_features),
        params_(params) {
    validate();
  }

  const std::vector<Tree>& trees() const { return trees_; }
  int n_classes() const { return n_classes_; }
  int n_features() const { return n_features_; }
  const ForestParams& params() const { return params_; }

  void validate() const {
    if (trees_.empty()) throw ValidationError("forest: at least one tree required");
    for (const auto& t : trees_) {
      if (t.value_width != n_classes_) throw ValidationError("forest: leaf width mismatch");
      t.validate(static_cast<std::size_t>(n_features_));
    }
  }

  Matrix predict_proba(const Matrix& X) const {
    check_width(X);
    Matrix out = Matrix::Zero(X.rows(), n_classes_);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const auto x = row_span(X, r);
      for (const auto& t : trees_) {
        const auto leaf = t.leaf_value(x);
        for (int c = 0; c < n_classes_; ++c) out(r, c) += leaf[static_cast<std::size_t>(c)];
      }
    }
    out /= static_cast<double>(trees_.size());
    return out;
  }

  /// Probability of class `cls`: the scalar that explanations attribute.
  std::vector<double> explained_output(const Matrix& X, int cls) const {
    check_width(X);
    std::vector<double> out(static_cast<std::size_t>(X.rows()), 0.0);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const auto x = row_span(X, r);
      double s = 0.0;
      for (const auto& t : trees_) s += t.leaf_value(x)[static_cast<std::size_t>(cls)];
      out[static_cast<std::size_t>(r)] = s / static_cast<double>(trees_.size());
    }
    return out;
  }

  TreeEnsembleView tree_view(int cls) const {
    TreeEnsembleView view;
    for (const auto& t : trees_) view.trees.push_back(&t);
    view.value_index = cls;
    view.scale = 1.0 / static_cast<double>(trees_.size());
    return view;
  }

 private:
  void check_width(const Matrix& X) const {
    if (X.cols() != n_features_)
      throw ValidationError("forest: expected " + std::to_string(n_features_) + " columns, got " +
                            std::to_string(X.cols()));
  }

  std::vector<Tree> trees_;
  int n_classes_ = 0;
  int n_features_ = 0;
  ForestParams params_;
};

/// Trains a random forest. Tree t draws from its own stream seeded with
/// seed ^ t, so results do not depend on how trees are scheduled.
inline ForestModel fit_random_forest(const TabularDataset& train, const ForestParams& params,
                                     std::uint64_t seed) {
  train.validate();
  detail::require_all_classes(train, "random_forest");
  if (params.n_trees < 1) throw ValidationError("random_forest: n_trees must be >= 1");
  if (params.max_depth && *params.max_depth < 1)
    throw ValidationError("random_forest: max_depth must be >= 1");
  if (params.min_samples_leaf < 1)
    throw ValidationError("random_forest: min_samples_leaf must be >= 1");

  const std::size_t n = train.size();
  const std::size_t d = train.n_features();
  const std::size_t mtry =
      params.features_per_split
          ? static_cast<std::size_t>(std::max(1, *params.features_per_split))
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  const int n_classes = static_cast<int>(train.n_classes());

  std::vector<Tree> trees(static_cast<std::size_t>(params.n_trees));
  parallel_for(trees.size(), [&](std::size_t t) {
    Rng rng(seed ^ static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    std::vector<std::vector<double>> cols(d, std::vector<double>(n));
    std::vector<int> labels(n);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t f = 0; f < d; ++f)
        cols[f][s] = train.X(static_cast<Eigen::Index>(rows[s]), static_cast<Eigen::Index>(f));
      labels[s] = train.y[rows[s]];
    }
    detail::GiniCriterion crit{&labels, n_classes};
    detail::TreeGrower<detail::GiniCriterion> grower(
        crit, cols, params.max_depth, static_cast<std::size_t>(params.min_samples_leaf));
    trees[t] = grower.grow(n, mtry >= d ? d : mtry, rng);
  });
  return ForestModel(std::move(trees), n_classes, static_cast<int>(d), params);
}

}  // namespace xplainbench
