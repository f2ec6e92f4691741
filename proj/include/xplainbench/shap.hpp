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

// Shapley-value attributions under the interventional value function
//
//   v(S) = mean over background rows b of f(x_S, b_rest)
//
// computed three ways: brute-force enumeration of all coalitions, kernel
// weighted least squares with the efficiency constraint, and a polynomial
// recursion over tree paths for tree ensembles. All three agree on the same
// (model, x, background) up to floating point.

#pragma once

#include "xplainbench/model.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace xplainbench {

/// Additive explanation g(x) = base_value + sum(phi) of the scalar fx.
struct Attribution {
  double base_value = 0.0;
  std::vector<double> phi;
  double fx = 0.0;
  int target_class = 0;
  std::vector<std::string> feature_names;

  double surrogate() const {
    double g = base_value;
    for (double p : phi) g += p;
    return g;
  }

  friend bool operator==(const Attribution&, const Attribution&) = default;
};

/// Batched scalar model output: one value per row of the input.
using OutputFn = std::function<std::vector<double>(const Matrix&)>;

/// Reference rows used to fill absent features.
struct BackgroundSet {
  Matrix rows;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
};

/// Samples min(k, n) distinct rows of `data` without replacement.
inline BackgroundSet make_background(const Matrix& data, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("background: size must be >= 1");
  if (data.rows() == 0) throw ValidationError("background: no rows to sample from");
  Rng rng(seed);
  const auto idx = sample_without_replacement(static_cast<std::size_t>(data.rows()), k, rng);
  BackgroundSet bg;
  bg.seed = seed;
  bg.rows.resize(static_cast<Eigen::Index>(idx.size()), data.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    bg.rows.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(idx[i]));
  return bg;
}

using Coalition = std::uint64_t;  // bit j set: feature j takes the explained point's value

inline constexpr std::size_t kMaxExactFeatures = 20;

namespace detail {

inline void check_point(std::span<const double> x, const Matrix& background) {
  if (background.rows() < 1) throw ValidationError("shap: empty background set");
  if (static_cast<Eigen::Index>(x.size()) != background.cols())
    throw ValidationError("shap: point has " + std::to_string(x.size()) +
                          " features but background has " + std::to_string(background.cols()));
  if (x.size() > 63) throw ValidationError("shap: at most 63 features supported");
}

// v(S) for every coalition in `masks`, evaluating f on hybrid rows in chunks.
inline std::vector<double> coalition_values(const OutputFn& f, std::span<const double> x,
                                            const Matrix& background,
                                            std::span<const Coalition> masks) {
  const Eigen::Index k = background.rows();
  const Eigen::Index d = background.cols();
  const std::size_t per_chunk = std::max<std::size_t>(1, 65536 / static_cast<std::size_t>(k));
  std::vector<double> out(masks.size(), 0.0);
  for (std::size_t start = 0; start < masks.size(); start += per_chunk) {
    const std::size_t len = std::min(per_chunk, masks.size() - start);
    Matrix hybrid(static_cast<Eigen::Index>(len) * k, d);
    for (std::size_t m = 0; m < len; ++m) {
      const Coalition mask = masks[start + m];
      const Eigen::Index base = static_cast<Eigen::Index>(m) * k;
      hybrid.middleRows(base, k) = background;
      for (Eigen::Index j = 0; j < d; ++j)
        if (mask >> j & 1U) hybrid.col(j).segment(base, k).setConstant(x[static_cast<std::size_t>(j)]);
    }
    const auto values = f(hybrid);
    if (values.size() != static_cast<std::size_t>(hybrid.rows()))
      throw RuntimeFailure("shap: model returned the wrong number of outputs");
    for (std::size_t m = 0; m < len; ++m) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < k; ++r) s += values[m * static_cast<std::size_t>(k) + static_cast<std::size_t>(r)];
      out[start + m] = s / static_cast<double>(k);
    }
  }
  return out;
}

inline double eval_point(const OutputFn& f, std::span<const double> x) {
  Matrix one(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) one(0, static_cast<Eigen::Index>(j)) = x[j];
  return f(one).at(0);
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Interventional coalition value v(S).
inline double value_function(const OutputFn& f, std::span<const double> x, Coalition s,
                             const Matrix& background) {
  detail::check_point(x, background);
  const Coalition masks[] = {s};
  return detail::coalition_values(f, x, background, masks).front();
}

/// Shapley values by enumerating all 2^d coalitions. d <= 20.
inline Attribution exact_shapley(const OutputFn& f, std::span<const double> x,
                                 const Matrix& background) {
  detail::check_point(x, background);
  const int d = static_cast<int>(x.size());
  if (static_cast<std::size_t>(d) > kMaxExactFeatures)
    throw ValidationError("exact: " + std::to_string(d) + " features exceeds the limit of " +
                          std::to_string(kMaxExactFeatures) + "; use the kernel method");
  const Coalition full = (Coalition{1} << d) - 1;
  // v(N) is taken as a background mean like every other coalition, so a
  // feature the model ignores has bit-identical marginals.
  std::vector<Coalition> masks(static_cast<std::size_t>(full) + 1);
  for (Coalition m = 0; m <= full; ++m) masks[m] = m;
  const std::vector<double> v = detail::coalition_values(f, x, background, masks);
  Attribution out;
  out.fx = detail::eval_point(f, x);
  out.base_value = v[0];

  // weight(s) = s! (d - s - 1)! / d!
  std::vector<double> weight(static_cast<std::size_t>(std::max(d, 1)));
  for (int s = 0; s < d; ++s) weight[static_cast<std::size_t>(s)] = 1.0 / (d * detail::binomial(d - 1, s));

  out.phi.assign(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < d; ++i) {
    const Coalition bit = Coalition{1} << i;
    double acc = 0.0;
    for (Coalition m = 0; m <= full; ++m) {
      if (m & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(m))] * (v[m | bit] - v[m]);
    }
    out.phi[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

struct KernelOptions {
  std::optional<std::size_t> budget;  // nullopt: all 2^d - 2 proper coalitions
  std::uint64_t seed = 0;
};

namespace detail {

// Shapley kernel mass of one coalition of size s.
inline double kernel_weight(int d, int s) {
  return (d - 1.0) / (binomial(d, s) * s * (d - s));
}

struct WeightedCoalitions {
  std::vector<Coalition> masks;
  std::vector<double> weights;
};

inline WeightedCoalitions all_coalitions(int d) {
  WeightedCoalitions out;
  const Coalition full = (Coalition{1} << d) - 1;
  for (Coalition m = 1; m < full; ++m) {
    out.masks.push_back(m);
    out.weights.push_back(kernel_weight(d, std::popcount(m)));
  }
  return out;
}

// Distinct coalitions with sizes drawn in proportion to their kernel mass;
// each sampled coalition of size s carries mass(s) / (#sampled of size s).
inline WeightedCoalitions sample_coalitions(int d, std::size_t budget, Rng& rng) {
  std::vector<double> size_mass(static_cast<std::size_t>(d), 0.0);
  for (int s = 1; s < d; ++s)
    size_mass[static_cast<std::size_t>(s)] = kernel_weight(d, s) * binomial(d, s);
  std::discrete_distribution<int> pick_size(size_mass.begin(), size_mass.end());
  std::unordered_set<Coalition> seen;
  WeightedCoalitions out;
  std::vector<std::size_t> per_size(static_cast<std::size_t>(d), 0);
  const std::size_t max_draws = 50 * budget + 1000;
  for (std::size_t draw = 0; draw < max_draws && out.masks.size() < budget; ++draw) {
    const int s = pick_size(rng);
    const auto members = sample_without_replacement(static_cast<std::size_t>(d), static_cast<std::size_t>(s), rng);
    Coalition m = 0;
    for (std::size_t j : members) m |= Coalition{1} << j;
    if (!seen.insert(m).second) continue;
    out.masks.push_back(m);
    ++per_size[static_cast<std::size_t>(s)];
  }
  for (Coalition m : out.masks) {
    const int s = std::popcount(m);
    out.weights.push_back(size_mass[static_cast<std::size_t>(s)] /
                          static_cast<double>(per_size[static_cast<std::size_t>(s)]));
  }
  return out;
}

// Constrained weighted least squares: eliminate phi_{d-1} through
// sum(phi) = fx - base, solve for the remaining d - 1 coefficients.
inline std::optional<std::vector<double>> solve_kernel_wls(int d, const WeightedCoalitions& c,
                                                           std::span<const double> v, double base,
                                                           double fx) {
  const double delta = fx - base;
  const auto n = static_cast<Eigen::Index>(c.masks.size());
  const int last = d - 1;
  Matrix A(n, d - 1);
  Vector y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Coalition m = c.masks[static_cast<std::size_t>(r)];
    const double z_last = static_cast<double>(m >> last & 1U);
    const double sw = std::sqrt(c.weights[static_cast<std::size_t>(r)]);
    for (int j = 0; j < last; ++j) A(r, j) = sw * (static_cast<double>(m >> j & 1U) - z_last);
    y(r) = sw * (v[static_cast<std::size_t>(r)] - base - z_last * delta);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  if (qr.rank() < d - 1) return std::nullopt;
  const Vector beta = qr.solve(y);
  std::vector<double> phi(static_cast<std::size_t>(d));
  double rest = 0.0;
  for (int j = 0; j < last; ++j) {
    phi[static_cast<std::size_t>(j)] = beta(j);
    rest += beta(j);
  }
  phi[static_cast<std::size_t>(last)] = delta - rest;
  return phi;
}

}  // namespace detail

/// Kernel-weighted least-squares Shapley estimate with efficiency imposed.
/// With the full coalition set the result equals exact_shapley.
inline Attribution kernel_shap(const OutputFn& f, std::span<const double> x,
                               const Matrix& background, const KernelOptions& opts = {}) {
  detail::check_point(x, background);
  const int d = static_cast<int>(x.size());
  const Coalition empty[] = {0};
  Attribution out;
  out.base_value = detail::coalition_values(f, x, background, empty).front();
  out.fx = detail::eval_point(f, x);
  if (d == 0) return out;
  if (d == 1) {
    out.phi = {out.fx - out.base_value};
    return out;
  }
  const double proper = std::ldexp(1.0, d) - 2.0;
  if (opts.budget && *opts.budget < static_cast<std::size_t>(d) + 2)
    throw ValidationError("kernel: budget must be >= d + 2 = " + std::to_string(d + 2));
  const bool full = !opts.budget || static_cast<double>(*opts.budget) >= proper;
  if (full && d > 30) throw ValidationError("kernel: full enumeration needs d <= 30");

  Rng rng(opts.seed);
  for (int attempt = 0; attempt < 4; ++attempt) {
    const auto coalitions =
        full ? detail::all_coalitions(d) : detail::sample_coalitions(d, *opts.budget, rng);
    const auto v = detail::coalition_values(f, x, background, coalitions.masks);
    if (auto phi = detail::solve_kernel_wls(d, coalitions, v, out.base_value, out.fx)) {
      out.phi = std::move(*phi);
      return out;
    }
    if (full) break;
  }
  throw RuntimeFailure("kernel: weighted least-squares system is singular");
}

// ---------------------------------------------------------------------------
// Interventional tree recursion

namespace detail {

// For one (x, z) pair, the leaf reached when features in SX come from x and
// those in SZ from z contributes +v * |SX|-1)! |SZ|! / N! to each feature in
// SX and -v * |SX|! (|SZ|-1)! / N! to each in SZ, N = |SX| + |SZ|.
class PairTreeShap {
 public:
  PairTreeShap(int d, int value_index) : value_index_(value_index), in_x_(d, 0), in_z_(d, 0) {
    // coef_[a][b] = a! b! / (a + b + 1)!
    coef_.assign(static_cast<std::size_t>(d + 1), std::vector<double>(static_cast<std::size_t>(d + 1), 0.0));
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b) {
        double c = 1.0 / (a + b + 1);
        for (int i = 1; i <= a; ++i) c *= static_cast<double>(i) / (b + i);
        coef_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = c;
      }
  }

  void run(const Tree& tree, std::span<const double> x, std::span<const double> z,
           std::span<double> phi) {
    tree_ = &tree;
    x_ = x;
    z_ = z;
    phi_ = phi;
    n_x_ = n_z_ = 0;
    recurse(0);
  }

 private:
  struct Flow {
    double pos = 0.0;
    double neg = 0.0;
  };

  Flow recurse(int node) {
    const Tree& t = *tree_;
    if (t.is_leaf(node)) {
      const double v = t.node_value(node)[static_cast<std::size_t>(value_index_)];
      Flow f;
      if (n_x_ > 0) f.pos = coef_[static_cast<std::size_t>(n_x_ - 1)][static_cast<std::size_t>(n_z_)] * v;
      if (n_z_ > 0) f.neg = coef_[static_cast<std::size_t>(n_x_)][static_cast<std::size_t>(n_z_ - 1)] * v;
      return f;
    }
    const auto n = static_cast<std::size_t>(node);
    const auto feat = static_cast<std::size_t>(t.feature[n]);
    const int x_child = x_[feat] <= t.threshold[n] ? t.left[n] : t.right[n];
    const int z_child = z_[feat] <= t.threshold[n] ? t.left[n] : t.right[n];
    if (x_child == z_child) return recurse(x_child);
    if (in_x_[feat]) return recurse(x_child);
    if (in_z_[feat]) return recurse(z_child);

    in_x_[feat] = 1;
    ++n_x_;
    const Flow fx = recurse(x_child);
    in_x_[feat] = 0;
    --n_x_;

    in_z_[feat] = 1;
    ++n_z_;
    const Flow fz = recurse(z_child);
    in_z_[feat] = 0;
    --n_z_;

    phi_[feat] += fx.pos - fz.neg;
    return {fx.pos + fz.pos, fx.neg + fz.neg};
  }

  int value_index_;
  std::vector<char> in_x_, in_z_;
  std::vector<std::vector<double>> coef_;
  const Tree* tree_ = nullptr;
  std::span<const double> x_, z_;
  std::span<double> phi_;
  int n_x_ = 0, n_z_ = 0;
};

}  // namespace detail

/// Exact interventional Shapley values of a tree ensemble's scalar output.
/// Cost is O(trees * background * visited nodes) with no 2^d term.
inline Attribution tree_shap(const TreeEnsembleView& view, std::span<const double> x,
                             const Matrix& background) {
  detail::check_point(x, background);
  const int d = static_cast<int>(x.size());
  Attribution out;
  out.phi.assign(static_cast<std::size_t>(d), 0.0);
  out.fx = view.eval(x);
  detail::PairTreeShap pair(d, view.value_index);
  double base = 0.0;
  for (Eigen::Index r = 0; r < background.rows(); ++r) {
    const auto z = row_span(background, r);
    base += view.eval(z);
    for (const Tree* t : view.trees) pair.run(*t, x, z, out.phi);
  }
  const double k = static_cast<double>(background.rows());
  out.base_value = base / k;
  for (double& p : out.phi) p *= view.scale / k;
  return out;
}

// ---------------------------------------------------------------------------
// Model-level explanations

enum class ExplainMethod { kExact, kKernel, kTree };

inline const char* to_string(ExplainMethod m) {
  switch (m) {
    case ExplainMethod::kExact: return "exact";
    case ExplainMethod::kKernel: return "kernel";
    case ExplainMethod::kTree: return "tree";
  }
  return "?";
}

enum class TargetKind { kPositiveClass, kPredictedClass, kClassIndex };

struct ExplainTarget {
  TargetKind kind = TargetKind::kPositiveClass;
  int class_index = 0;

  friend bool operator==(const ExplainTarget&, const ExplainTarget&) = default;
};

struct ExplainerConfig {
  ExplainMethod method = ExplainMethod::kTree;
  std::size_t background_size = 100;
  std::optional<std::size_t> budget;  // kernel only; nullopt = full enumeration
  ExplainTarget target;
  std::uint64_t seed = 0;  // kernel coalition sampling

  friend bool operator==(const ExplainerConfig&, const ExplainerConfig&) = default;
};

/// Class whose output is explained for the point `x`.
inline int resolve_target(const Model& model, std::span<const double> x, const ExplainTarget& t) {
  const int k = n_classes(model);
  switch (t.kind) {
    case TargetKind::kPositiveClass:
      if (k != 2) throw ValidationError("target positive_class_prob requires a binary model");
      return 1;
    case TargetKind::kClassIndex:
      if (t.class_index < 0 || t.class_index >= k)
        throw ValidationError("target class index " + std::to_string(t.class_index) +
                              " out of range for " + std::to_string(k) + " classes");
      return t.class_index;
    case TargetKind::kPredictedClass: {
      Matrix one(1, static_cast<Eigen::Index>(x.size()));
      for (std::size_t j = 0; j < x.size(); ++j) one(0, static_cast<Eigen::Index>(j)) = x[j];
      Eigen::Index best = 0;
      predict_proba(model, one).row(0).maxCoeff(&best);
      return static_cast<int>(best);
    }
  }
  return 0;
}

inline OutputFn output_fn(const Model& model, int cls) {
  return [&model, cls](const Matrix& X) { return explained_output(model, X, cls); };
}

inline Attribution explain(const Model& model, std::span<const double> x,
                           const Matrix& background, const ExplainerConfig& config,
                           std::uint64_t row_seed = 0) {
  const int cls = resolve_target(model, x, config.target);
  Attribution a;
  switch (config.method) {
    case ExplainMethod::kTree: {
      const auto view = tree_view(model, cls);
      if (!view)
        throw ValidationError("tree method does not support " + model_name(model) +
                              "; use the kernel or exact method");
      a = tree_shap(*view, x, background);
      break;
    }
    case ExplainMethod::kExact:
      a = exact_shapley(output_fn(model, cls), x, background);
      break;
    case ExplainMethod::kKernel:
      a = kernel_shap(output_fn(model, cls), x, background, {config.budget, row_seed});
      break;
  }
  a.target_class = cls;
  return a;
}

/// One attribution per row of X_eval. Row i's kernel sampling uses
/// derive_seed(config.seed, i), so a batch equals the corresponding
/// single-row calls.
inline std::vector<Attribution> explain_batch(const Model& model, const Matrix& X_eval,
                                              const Matrix& background,
                                              const ExplainerConfig& config,
                                              const std::vector<std::string>& feature_names = {}) {
  if (!X_eval.allFinite()) throw ValidationError("explain: evaluation rows must be finite");
  std::vector<Attribution> out(static_cast<std::size_t>(X_eval.rows()));
  parallel_for(out.size(), [&](std::size_t i) {
    try {
      out[i] = explain(model, row_span(X_eval, static_cast<Eigen::Index>(i)), background, config,
                       derive_seed(config.seed, i));
      out[i].feature_names = feature_names;
    } catch (const Error& e) {
      throw RuntimeFailure("explain: row " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline void write_attributions_csv(const std::vector<Attribution>& rows, std::ostream& out) {
  const std::size_t d = rows.empty() ? 0 : rows.front().phi.size();
  out << "fx,phi0";
  for (std::size_t j = 1; j <= d; ++j) out << ",phi_" << j;
  out << '\n';
  for (const auto& a : rows) {
    out << detail::format_number(a.fx) << ',' << detail::format_number(a.base_value);
    for (double p : a.phi) out << ',' << detail::format_number(p);
    out << '\n';
  }
}

inline nlohmann::json attributions_to_json(const std::vector<Attribution>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : rows)
    j.push_back({{"fx", a.fx},
                 {"phi0", a.base_value},
                 {"phi", a.phi},
                 {"target_class", a.target_class},
                 {"feature_names", a.feature_names}});
  return j;
}

}  // namespace xplainbench
