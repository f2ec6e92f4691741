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

// Binary decision trees stored as flat arrays, plus a generic greedy builder
// over presorted feature columns. Split criteria are plugged in as policies
// (Gini for forests, second-order gain for boosting).

#pragma once

#include "xplainbench/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xplainbench {

/// A decision tree. Node 0 is the root. A node with `feature[i] < 0` is a
/// leaf; internal nodes send x left when x[feature] <= threshold. Each node
/// owns `value_width` consecutive entries of `value`, only read at leaves.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;
  int value_width = 1;

  std::size_t node_count() const { return feature.size(); }
  bool is_leaf(int node) const { return feature[static_cast<std::size_t>(node)] < 0; }

  int leaf_index(std::span<const double> x) const {
    int node = 0;
    while (!is_leaf(node)) {
      const auto n = static_cast<std::size_t>(node);
      node = x[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
    }
    return node;
  }

  std::span<const double> node_value(int node) const {
    return {value.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(value_width),
            static_cast<std::size_t>(value_width)};
  }

  std::span<const double> leaf_value(std::span<const double> x) const {
    return node_value(leaf_index(x));
  }

  int depth() const { return depth_from(0); }

  bool uses_feature(int f) const {
    for (int g : feature)
      if (g == f) return true;
    return false;
  }

  void validate(std::size_t n_features) const {
    const std::size_t n = feature.size();
    if (n == 0) throw ValidationError("tree: no nodes");
    if (threshold.size() != n || left.size() != n || right.size() != n ||
        value.size() != n * static_cast<std::size_t>(value_width))
      throw ValidationError("tree: inconsistent array lengths");
    for (std::size_t i = 0; i < n; ++i) {
      if (feature[i] < 0) continue;
      if (static_cast<std::size_t>(feature[i]) >= n_features)
        throw ValidationError("tree: node " + std::to_string(i) + " uses feature " +
                              std::to_string(feature[i]) + " but model has " +
                              std::to_string(n_features));
      if (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
          static_cast<std::size_t>(left[i]) >= n || static_cast<std::size_t>(right[i]) >= n)
        throw ValidationError("tree: node " + std::to_string(i) + " has invalid children");
    }
    for (double v : value)
      if (!std::isfinite(v)) throw ValidationError("tree: non-finite leaf value");
  }

  nlohmann::json to_json() const {
    return {{"feature", feature}, {"threshold", threshold}, {"left", left},
            {"right", right},     {"value", value},         {"value_width", value_width}};
  }

  static Tree from_json(const nlohmann::json& j) {
    Tree t;
    j.at("feature").get_to(t.feature);
    j.at("threshold").get_to(t.threshold);
    j.at("left").get_to(t.left);
    j.at("right").get_to(t.right);
    j.at("value").get_to(t.value);
    j.at("value_width").get_to(t.value_width);
    return t;
  }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  int depth_from(int node) const {
    if (is_leaf(node)) return 0;
    const auto n = static_cast<std::size_t>(node);
    return 1 + std::max(depth_from(left[n]), depth_from(right[n]));
  }
};

/// Scalar output of a tree ensemble for one value slot:
///   offset + scale * sum_t leaf_t(x)[value_index].
/// This is the quantity tree_shap attributes.
struct TreeEnsembleView {
  std::vector<const Tree*> trees;
  int value_index = 0;
  double scale = 1.0;
  double offset = 0.0;

  double eval(std::span<const double> x) const {
    double sum = 0.0;
    for (const Tree* t : trees) sum += t->leaf_value(x)[static_cast<std::size_t>(value_index)];
    return offset + scale * sum;
  }
};

namespace detail {

// Greedy tree growth over presorted columns. A Criterion supplies:
//   Stats                 per-node sufficient statistics
//   Stats empty() const
//   void add(Stats&, std::size_t sample) const
//   double score(const Stats& total, const Stats& left) const   higher is better
//   double parent_score(const Stats&) const
//   bool admissible(const Stats& total, const Stats& left) const
//   bool splittable(const Stats&) const
//   bool accept(double best, double parent) const
//   void leaf(const Stats&, std::span<double> out) const
//   int value_width() const
template <class Criterion>
class TreeGrower {
 public:
  using Stats = typename Criterion::Stats;

  // `columns[f][s]` is the value of feature f for sample s.
  TreeGrower(const Criterion& criterion, const std::vector<std::vector<double>>& columns,
             std::optional<int> max_depth, std::size_t min_samples_leaf)
      : crit_(criterion), cols_(columns), max_depth_(max_depth),
        min_leaf_(std::max<std::size_t>(1, min_samples_leaf)) {}

  // `features_per_split` == 0 evaluates every feature in index order;
  // otherwise features are visited in a random order until that many
  // non-constant features have been evaluated.
  Tree grow(std::size_t n_samples, std::size_t features_per_split, Rng& rng) {
    tree_ = Tree{};
    tree_.value_width = crit_.value_width();
    const std::size_t d = cols_.size();
    std::vector<std::vector<std::size_t>> sorted(d);
    for (std::size_t f = 0; f < d; ++f) {
      auto& s = sorted[f];
      s.resize(n_samples);
      for (std::size_t i = 0; i < n_samples; ++i) s[i] = i;
      const auto& col = cols_[f];
      std::stable_sort(s.begin(), s.end(),
                       [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
    }
    goes_left_.assign(n_samples, 0);
    mtry_ = features_per_split;
    build(std::move(sorted), 0, rng);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity();
  };

  int new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.resize(tree_.value.size() + static_cast<std::size_t>(tree_.value_width), 0.0);
    return static_cast<int>(tree_.feature.size() - 1);
  }

  void make_leaf(int node, const Stats& stats) {
    const auto w = static_cast<std::size_t>(tree_.value_width);
    crit_.leaf(stats, std::span<double>(tree_.value.data() + static_cast<std::size_t>(node) * w, w));
  }

  void consider(std::size_t f, const std::vector<std::size_t>& order, const Stats& total,
                Split& best) const {
    const auto& col = cols_[f];
    const std::size_t n = order.size();
    Stats left = crit_.empty();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      crit_.add(left, order[i]);
      const double lo = col[order[i]];
      const double hi = col[order[i + 1]];
      if (!(lo < hi)) continue;
      if (i + 1 < min_leaf_ || n - (i + 1) < min_leaf_) continue;
      if (!crit_.admissible(total, left)) continue;
      const double s = crit_.score(total, left);
      double t = lo + (hi - lo) / 2.0;
      if (!(t < hi)) t = lo;
      // Ties: lowest feature index, then lowest threshold.
      if (s > best.score || (s == best.score && static_cast<int>(f) < best.feature)) {
        best = {static_cast<int>(f), t, s};
      }
    }
  }

  int build(std::vector<std::vector<std::size_t>> sorted, int depth, Rng& rng) {
    const int node = new_node();
    const auto& any = sorted.front();
    Stats total = crit_.empty();
    for (std::size_t s : any) crit_.add(total, s);

    const bool depth_ok = !max_depth_ || depth < *max_depth_;
    if (!depth_ok || any.size() < 2 * min_leaf_ || !crit_.splittable(total)) {
      make_leaf(node, total);
      return node;
    }

    const std::size_t d = sorted.size();
    Split best;
    if (mtry_ == 0 || mtry_ >= d) {
      for (std::size_t f = 0; f < d; ++f) consider(f, sorted[f], total, best);
    } else {
      std::vector<std::size_t> perm(d);
      for (std::size_t f = 0; f < d; ++f) perm[f] = f;
      std::size_t evaluated = 0;
      for (std::size_t k = 0; k < d && evaluated < mtry_; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, d - 1);
        std::swap(perm[k], perm[pick(rng)]);
        const std::size_t f = perm[k];
        const auto& order = sorted[f];
        if (!(cols_[f][order.front()] < cols_[f][order.back()])) continue;
        ++evaluated;
        consider(f, order, total, best);
      }
    }

    if (best.feature < 0 || !crit_.accept(best.score, crit_.parent_score(total))) {
      make_leaf(node, total);
      return node;
    }

    const auto& split_col = cols_[static_cast<std::size_t>(best.feature)];
    for (std::size_t s : any) goes_left_[s] = split_col[s] <= best.threshold ? 1 : 0;
    std::vector<std::vector<std::size_t>> left(d), right(d);
    for (std::size_t f = 0; f < d; ++f) {
      left[f].reserve(any.size());
      right[f].reserve(any.size());
      for (std::size_t s : sorted[f]) (goes_left_[s] ? left[f] : right[f]).push_back(s);
    }
    sorted.clear();
    sorted.shrink_to_fit();

    const auto n = static_cast<std::size_t>(node);
    tree_.feature[n] = best.feature;
    tree_.threshold[n] = best.threshold;
    const int l = build(std::move(left), depth + 1, rng);
    tree_.left[n] = l;
    const int r = build(std::move(right), depth + 1, rng);
    tree_.right[n] = r;
    return node;
  }

  const Criterion& crit_;
  const std::vector<std::vector<double>>& cols_;
  std::optional<int> max_depth_;
  std::size_t min_leaf_;
  std::size_t mtry_ = 0;
  std::vector<char> goes_left_;
  Tree tree_;
};

}  // namespace detail
}  // namespace xplainbench
