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

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace {

using namespace xbt;

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

double efficiency_gap(const Attribution& a) {
  double s = a.base_value;
  for (double p : a.phi) s += p;
  return std::abs(s - a.fx);
}

// A smooth nonlinear function with interactions of every order up to 3.
PointFn random_smooth(Rng& rng, int d) {
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
  for (auto& v : a) v = n(rng);
  for (auto& v : b) v = n(rng);
  const double c = n(rng);
  return [a, b, c, d](std::span<const double> x) {
    double s = c;
    for (int j = 0; j < d; ++j) s += a[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
    for (int j = 0; j + 1 < d; ++j)
      s += b[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j + 1)];
    if (d >= 3) s += std::sin(x[0] * x[1] + x[2]);
    return s;
  };
}

// ---------------------------------------------------------------------------
// Value function and exact Shapley values

TEST(ValueFunction, LinearModelExample) {
  const auto f = batched([](std::span<const double> x) { return 2.0 * x[0]; });
  const Matrix bg = rows({{0.0}, {1.0}});
  const double x[] = {1.0};
  EXPECT_DOUBLE_EQ(value_function(f, x, 0b1, bg), 2.0);
  EXPECT_DOUBLE_EQ(value_function(f, x, 0b0, bg), 1.0);
}

TEST(ValueFunction, EndpointsAreTheBackgroundMeanAndThePrediction) {
  Rng rng(1);
  const auto g = random_smooth(rng, 4);
  const Matrix bg = uniform_matrix(rng, 9, 4);
  const Matrix x = uniform_matrix(rng, 1, 4);
  double mean = 0;
  for (Eigen::Index r = 0; r < bg.rows(); ++r) mean += g(row_span(bg, r));
  mean /= 9.0;
  EXPECT_NEAR(value_function(batched(g), row_span(x, 0), 0, bg), mean, 1e-12);
  EXPECT_NEAR(value_function(batched(g), row_span(x, 0), 0b1111, bg), g(row_span(x, 0)), 1e-12);
  for (std::uint64_t s = 0; s < 16; ++s)
    EXPECT_NEAR(value_function(batched(g), row_span(x, 0), s, bg), brute_value(g, row_span(x, 0), bg, s), 1e-12);
}

TEST(ExactShapley, AndGameSplitsEvenly) {
  const auto f = batched([](std::span<const double> x) { return x[0] * x[1]; });
  const Matrix bg = rows({{0.0, 0.0}});
  const double x[] = {1.0, 1.0};
  const auto a = exact_shapley(f, x, bg);
  EXPECT_NEAR(a.phi[0], 0.5, 1e-15);
  EXPECT_NEAR(a.phi[1], 0.5, 1e-15);
  EXPECT_NEAR(a.base_value, 0.0, 1e-15);
  EXPECT_NEAR(a.fx, 1.0, 1e-15);
}

TEST(ExactShapley, AdditiveModelHasClosedForm) {
  // f(x) = sum_j x_j^2: phi_j = x_j^2 - mean_b(b_j^2).
  Rng rng(2);
  const auto f = batched([](std::span<const double> x) {
    double s = 0;
    for (double v : x) s += v * v;
    return s;
  });
  const Matrix bg = uniform_matrix(rng, 13, 5, -2, 2);
  const Matrix x = uniform_matrix(rng, 1, 5, -2, 2);
  const auto a = exact_shapley(f, row_span(x, 0), bg);
  for (int j = 0; j < 5; ++j)
    EXPECT_NEAR(a.phi[static_cast<std::size_t>(j)], x(0, j) * x(0, j) - bg.col(j).array().square().mean(), 1e-12);
}

TEST(ExactShapley, ConstantModelGetsNoCredit) {
  const auto f = batched([](std::span<const double>) { return 3.5; });
  Rng rng(3);
  const Matrix bg = uniform_matrix(rng, 4, 6);
  const auto a = exact_shapley(f, row_span(bg, 0), bg);
  for (double p : a.phi) EXPECT_EQ(p, 0.0);
  EXPECT_DOUBLE_EQ(a.base_value, 3.5);
}

TEST(ExactShapley, MatchesThePermutationDefinition) {
  Rng rng(4);
  for (int d = 1; d <= 6; ++d) {
    const auto g = random_smooth(rng, d);
    const Matrix bg = uniform_matrix(rng, 5, d);
    const Matrix x = uniform_matrix(rng, 1, d);
    const auto oracle =
        permutation_shapley([&](std::uint64_t s) { return brute_value(g, row_span(x, 0), bg, s); }, d);
    const auto a = exact_shapley(batched(g), row_span(x, 0), bg);
    EXPECT_LT(max_abs_diff(a.phi, oracle), 1e-12) << "d=" << d;
    EXPECT_LT(efficiency_gap(a), 1e-12);
  }
}

TEST(ExactShapley, RejectsWideInputsAndBadBackgrounds) {
  const auto f = batched([](std::span<const double> x) { return x[0]; });
  const std::vector<double> wide(21, 0.0);
  try {
    exact_shapley(f, wide, Matrix::Zero(1, 21));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("kernel"), std::string::npos) << e.what();
  }
  const double x[] = {1.0, 2.0};
  EXPECT_THROW(exact_shapley(f, x, Matrix::Zero(0, 2)), ValidationError);
  EXPECT_THROW(exact_shapley(f, x, Matrix::Zero(3, 3)), ValidationError);
}

// ---------------------------------------------------------------------------
// Kernel SHAP

TEST(KernelShap, FullEnumerationRecoversExactValues) {
  Rng rng(5);
  for (int d = 1; d <= 8; ++d) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto g = batched(random_smooth(rng, d));
      const Matrix bg = uniform_matrix(rng, 7, d);
      const Matrix x = uniform_matrix(rng, 1, d);
      const auto exact = exact_shapley(g, row_span(x, 0), bg);
      const auto kernel = kernel_shap(g, row_span(x, 0), bg, {});
      EXPECT_LT(max_abs_diff(kernel.phi, exact.phi), 1e-6) << "d=" << d;
      EXPECT_LT(efficiency_gap(kernel), 1e-9);
    }
  }
}

TEST(KernelShap, AndGameAndConstantModel) {
  const auto f = batched([](std::span<const double> x) { return x[0] * x[1]; });
  const double x[] = {1.0, 1.0};
  const auto a = kernel_shap(f, x, rows({{0.0, 0.0}}), {});
  EXPECT_NEAR(a.phi[0], 0.5, 1e-12);
  EXPECT_NEAR(a.phi[1], 0.5, 1e-12);

  Rng rng(6);
  const auto c = batched([](std::span<const double>) { return -1.25; });
  const Matrix bg = uniform_matrix(rng, 5, 10);
  KernelOptions opts;
  opts.budget = 200;
  const auto k = kernel_shap(c, row_span(bg, 0), bg, opts);
  for (double p : k.phi) EXPECT_NEAR(p, 0.0, 1e-12);
}

TEST(KernelShap, SampledEstimatesAreEfficientAndSeeded) {
  Rng rng(7);
  const int d = 10;
  const auto g = batched(random_smooth(rng, d));
  const Matrix bg = uniform_matrix(rng, 6, d);
  const Matrix x = uniform_matrix(rng, 1, d);
  KernelOptions opts;
  opts.budget = 300;
  opts.seed = 17;
  const auto a = kernel_shap(g, row_span(x, 0), bg, opts);
  const auto b = kernel_shap(g, row_span(x, 0), bg, opts);
  EXPECT_EQ(a, b);
  EXPECT_LT(efficiency_gap(a), 1e-9);
  const auto exact = exact_shapley(g, row_span(x, 0), bg);
  EXPECT_LT(max_abs_diff(a.phi, exact.phi), 0.1);
  opts.seed = 18;
  EXPECT_NE(kernel_shap(g, row_span(x, 0), bg, opts).phi, a.phi);
}

TEST(KernelShap, BudgetBelowTheMinimumIsRejected) {
  const auto f = batched([](std::span<const double> x) { return x[0]; });
  const std::vector<double> x(6, 0.5);
  KernelOptions opts;
  opts.budget = 7;  // d + 1
  EXPECT_THROW(kernel_shap(f, x, Matrix::Zero(2, 6), opts), ValidationError);
  opts.budget = 8;
  EXPECT_NO_THROW(kernel_shap(f, x, Matrix::Zero(2, 6), opts));
}

TEST(KernelShap, SingleFeatureTakesTheWholeGap) {
  const auto f = batched([](std::span<const double> x) { return std::exp(x[0]); });
  const double x[] = {1.0};
  const auto a = kernel_shap(f, x, rows({{0.0}, {2.0}}), {});
  EXPECT_NEAR(a.phi[0], std::exp(1.0) - (1.0 + std::exp(2.0)) / 2.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Tree SHAP

TEST(TreeShap, StumpExample) {
  // f = 1 if x0 > 0.5; x = (1, 0); background {(0, 0)}: phi = (1, 0).
  const Tree t = stump(0, 0.5, {0.0}, {1.0});
  TreeEnsembleView view;
  view.trees = {&t};
  const double x[] = {1.0, 0.0};
  const auto a = tree_shap(view, x, rows({{0.0, 0.0}}));
  EXPECT_DOUBLE_EQ(a.phi[0], 1.0);
  EXPECT_DOUBLE_EQ(a.phi[1], 0.0);
  EXPECT_DOUBLE_EQ(a.base_value, 0.0);
  EXPECT_DOUBLE_EQ(a.fx, 1.0);
}

TEST(TreeShap, RandomEnsemblesMatchTheExactOracle) {
  Rng rng(8);
  std::normal_distribution<double> leaf(0, 1);
  const auto draw = [&](Rng& r) { return leaf(r); };
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 3 + rep % 5;
    std::vector<Tree> trees;
    for (int t = 0; t < 1 + rep % 4; ++t) trees.push_back(random_tree(rng, d, 1 + (rep + t) % 5, 1, draw));
    TreeEnsembleView view;
    for (const auto& t : trees) view.trees.push_back(&t);
    view.scale = 0.3 + rep * 0.1;
    view.offset = -0.7;
    const PointFn g = [&](std::span<const double> x) {
      double s = 0;
      for (const auto& t : trees) s += walk(t, x)[0];
      return view.offset + view.scale * s;
    };
    const Matrix bg = uniform_matrix(rng, 6, d);
    const Matrix x = uniform_matrix(rng, 1, d);
    const auto a = tree_shap(view, row_span(x, 0), bg);
    const auto oracle =
        permutation_shapley([&](std::uint64_t s) { return brute_value(g, row_span(x, 0), bg, s); }, d);
    EXPECT_LT(max_abs_diff(a.phi, oracle), 1e-12) << "rep " << rep;
    EXPECT_NEAR(a.base_value, brute_value(g, row_span(x, 0), bg, 0), 1e-12);
    EXPECT_NEAR(a.fx, g(row_span(x, 0)), 1e-12);
  }
}

TEST(TreeShap, ModelLevelAgreesWithExactForEveryFamily) {
  const auto bin = synthetic_binary(300, 5, 9);
  const auto multi = synthetic_multiclass(300, 5, 3, 10);
  const std::vector<Model> models = {fit_model(bin, forest_params(6, 4), 1, false),
                                     fit_model(bin, GbtParams{15}, 1, false),
                                     fit_model(multi, forest_params(4, 3), 1, true),
                                     fit_model(multi, GbtParams{8}, 1, true)};
  const Matrix bg = make_background(bin.X, 20, 3).rows;
  for (const auto& m : models) {
    for (int cls = 0; cls < n_classes(m); ++cls) {
      ExplainerConfig cfg;
      cfg.target = {TargetKind::kClassIndex, cls};
      for (Eigen::Index r = 0; r < 5; ++r) {
        cfg.method = ExplainMethod::kTree;
        const auto t = explain(m, row_span(bin.X, r), bg, cfg);
        cfg.method = ExplainMethod::kExact;
        const auto e = explain(m, row_span(bin.X, r), bg, cfg);
        EXPECT_LT(max_abs_diff(t.phi, e.phi), 1e-9) << model_name(m) << " class " << cls;
        EXPECT_NEAR(t.base_value, e.base_value, 1e-9);
        EXPECT_NEAR(t.fx, e.fx, 1e-9);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Axioms on constructed models

TEST(Axioms, EfficiencyHoldsForRandomTrees) {
  Rng rng(11);
  std::uniform_real_distribution<double> leaf(-3, 3);
  const auto draw = [&](Rng& r) { return leaf(r); };
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 2 + rep % 7;
    const Tree t = random_tree(rng, d, 1 + rep % 6, 1, draw);
    TreeEnsembleView view;
    view.trees = {&t};
    const Matrix bg = uniform_matrix(rng, 1 + rep % 9, d);
    const Matrix x = uniform_matrix(rng, 1, d);
    const auto a = tree_shap(view, row_span(x, 0), bg);
    ASSERT_LT(efficiency_gap(a), 1e-10) << "rep " << rep;
  }
}

TEST(Axioms, DummyFeatureGetsZero) {
  Rng rng(12);
  std::uniform_real_distribution<double> leaf(-1, 1);
  const auto draw = [&](Rng& r) { return leaf(r); };
  for (int rep = 0; rep < 50; ++rep) {
    // Trees over features 0..3 of a 5-feature input; feature 4 is a dummy.
    const Tree t = random_tree(rng, 4, 3, 1, draw);
    TreeEnsembleView view;
    view.trees = {&t};
    const Matrix bg = uniform_matrix(rng, 5, 5);
    const Matrix x = uniform_matrix(rng, 1, 5);
    EXPECT_EQ(tree_shap(view, row_span(x, 0), bg).phi[4], 0.0);
    PointFn g = [&](std::span<const double> z) { return walk(t, z)[0]; };
    EXPECT_EQ(exact_shapley(batched(g), row_span(x, 0), bg).phi[4], 0.0);
    EXPECT_NEAR(kernel_shap(batched(g), row_span(x, 0), bg, {}).phi[4], 0.0, 1e-10);
  }
}

TEST(Axioms, SymmetricFeaturesGetEqualCredit) {
  // f = [x0 > 0.5] + [x1 > 0.5] with a symmetric point and background.
  const Tree a = stump(0, 0.5, {0.0}, {1.0});
  const Tree b = stump(1, 0.5, {0.0}, {1.0});
  TreeEnsembleView view;
  view.trees = {&a, &b};
  const Matrix bg = rows({{0.1, 0.1, 0.7}, {0.9, 0.9, 0.2}, {0.2, 0.2, 0.0}});
  const double x[] = {0.8, 0.8, 0.3};
  const auto t = tree_shap(view, x, bg);
  EXPECT_DOUBLE_EQ(t.phi[0], t.phi[1]);
  const auto e = exact_shapley(batched([&](std::span<const double> z) { return view.eval(z); }), x, bg);
  EXPECT_DOUBLE_EQ(e.phi[0], e.phi[1]);
  // A product game is symmetric too.
  const auto p = exact_shapley(batched([](std::span<const double> z) { return z[0] * z[1] * z[2]; }),
                               std::vector<double>{2.0, 2.0, 1.0}, rows({{1.0, 1.0, 1.0}}));
  EXPECT_NEAR(p.phi[0], p.phi[1], 1e-14);
}

TEST(Axioms, LinearityOverEnsembleMembers) {
  Rng rng(13);
  const auto ds = synthetic_binary(300, 4, 14);
  ForestParams params;
  params.n_trees = 3;
  const auto forest = fit_random_forest(ds, params, 2);
  const Matrix bg = make_background(ds.X, 10, 1).rows;
  const auto x = row_span(ds.X, 7);
  const auto whole = tree_shap(forest.tree_view(1), x, bg);
  std::vector<double> sum(4, 0.0);
  double base = 0;
  for (const auto& t : forest.trees()) {
    const ForestModel single({t}, 2, 4, params);
    const auto a = tree_shap(single.tree_view(1), x, bg);
    for (int j = 0; j < 4; ++j) sum[static_cast<std::size_t>(j)] += a.phi[static_cast<std::size_t>(j)] / 3.0;
    base += a.base_value / 3.0;
  }
  EXPECT_LT(max_abs_diff(whole.phi, sum), 1e-12);
  EXPECT_NEAR(whole.base_value, base, 1e-12);

  // Linearity of the exact method in the game: phi(2f + 3g) = 2 phi(f) + 3 phi(g).
  const auto f = random_smooth(rng, 4);
  const auto g = random_smooth(rng, 4);
  const auto fg = [&](std::span<const double> z) { return 2 * f(z) + 3 * g(z); };
  const auto pf = exact_shapley(batched(f), x, bg).phi;
  const auto pg = exact_shapley(batched(g), x, bg).phi;
  const auto pfg = exact_shapley(batched(fg), x, bg).phi;
  for (int j = 0; j < 4; ++j)
    EXPECT_NEAR(pfg[static_cast<std::size_t>(j)], 2 * pf[static_cast<std::size_t>(j)] + 3 * pg[static_cast<std::size_t>(j)],
                1e-12);
}

// ---------------------------------------------------------------------------
// Model-level API

TEST(Explain, BatchEqualsSingleRowCalls) {
  const auto ds = synthetic_binary(200, 6, 15);
  MlpParams mp;
  mp.epochs = 3;
  mp.hidden_sizes = {8};
  const Model m = fit_model(ds, mp, 1, false);
  const Matrix bg = make_background(ds.X, 8, 2).rows;
  ExplainerConfig cfg;
  cfg.method = ExplainMethod::kKernel;
  cfg.budget = 30;
  cfg.seed = 99;
  cfg.target = {TargetKind::kPredictedClass, 0};
  const Matrix eval = ds.X.topRows(6);
  const auto batch = explain_batch(m, eval, bg, cfg, ds.feature_names);
  ASSERT_EQ(batch.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    auto single = explain(m, row_span(eval, static_cast<Eigen::Index>(i)), bg, cfg, derive_seed(99, i));
    single.feature_names = ds.feature_names;
    EXPECT_EQ(batch[i], single);
    Eigen::Index best = 0;
    predict_proba(m, eval.row(static_cast<Eigen::Index>(i))).row(0).maxCoeff(&best);
    EXPECT_EQ(batch[i].target_class, best);
  }
  EXPECT_TRUE(explain_batch(m, Matrix(0, 6), bg, cfg).empty());
}

TEST(Explain, TargetsAndErrors) {
  const auto bin = synthetic_binary(200, 4, 16);
  const Model rf = fit_model(bin, forest_params(5), 1, false);
  const Matrix bg = bin.X.topRows(5);
  ExplainerConfig cfg;
  cfg.target = {TargetKind::kClassIndex, 2};
  EXPECT_THROW(explain(rf, row_span(bin.X, 0), bg, cfg), ValidationError);
  cfg.target = {TargetKind::kPositiveClass, 0};
  EXPECT_EQ(explain(rf, row_span(bin.X, 0), bg, cfg).target_class, 1);

  const Model multi = fit_model(synthetic_multiclass(200, 4, 3, 17), forest_params(5), 1, true);
  EXPECT_THROW(explain(multi, row_span(bin.X, 0), bg, cfg), ValidationError);

  MlpParams mp;
  mp.epochs = 1;
  const Model mlp = fit_model(bin, mp, 1, false);
  cfg.method = ExplainMethod::kTree;
  try {
    explain(mlp, row_span(bin.X, 0), bg, cfg);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("kernel"), std::string::npos) << e.what();
  }
  try {
    explain_batch(mlp, bin.X.topRows(3), bg, cfg);
    FAIL() << "expected RuntimeFailure";
  } catch (const RuntimeFailure& e) {
    EXPECT_NE(std::string(e.what()).find("row 0"), std::string::npos) << e.what();
  }
  Matrix bad = bin.X.topRows(2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(explain_batch(rf, bad, bg, cfg), ValidationError);
}

TEST(Export, CsvAndJsonLayouts) {
  Attribution a;
  a.base_value = 0.25;
  a.phi = {0.5, -0.125};
  a.fx = 0.625;
  a.feature_names = {"u", "v"};
  std::ostringstream out;
  write_attributions_csv({a, a}, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "fx,phi0,phi_1,phi_2");
  EXPECT_NE(text.find("0.625,0.25,0.5,-0.125"), std::string::npos) << text;
  const auto j = attributions_to_json({a});
  ASSERT_EQ(j.size(), 1u);
  EXPECT_DOUBLE_EQ(j[0]["phi0"].get<double>(), 0.25);
  EXPECT_EQ(j[0]["phi"].size(), 2u);
}

TEST(Background, SampleIsSeededAndDrawnFromTheData) {
  Rng rng(18);
  const Matrix data = uniform_matrix(rng, 50, 3);
  const auto a = make_background(data, 10, 5);
  const auto b = make_background(data, 10, 5);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.size(), 10u);
  for (Eigen::Index r = 0; r < a.rows.rows(); ++r) {
    bool found = false;
    for (Eigen::Index s = 0; s < data.rows(); ++s) found |= data.row(s) == a.rows.row(r);
    EXPECT_TRUE(found);
  }
  EXPECT_EQ(make_background(data, 500, 5).size(), 50u);
  EXPECT_THROW(make_background(data, 0, 5), ValidationError);
}

}  // namespace
