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
using nlohmann::json;

std::vector<SpecIssue> issues_of(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const SpecError& e) {
    return e.issues();
  }
  return {};
}

bool has_issue(const std::vector<SpecIssue>& issues, const std::string& path, const std::string& fragment = "") {
  for (const auto& i : issues)
    if (i.path == path && i.message.find(fragment) != std::string::npos) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Parsing and validation

TEST(SpecParse, MinimalSpecGetsDefaults) {
  const auto s = parse_spec(R"({"spec_version": 1, "task": {"kind": "binary_alertness"},
                                "model": {"family": "random_forest"}})");
  EXPECT_EQ(s.task.kind, TaskId::kBinaryAlertness);
  EXPECT_EQ(s.task.alertness.n, 20000u);
  EXPECT_EQ(s.task.alertness.seed, 42u);
  EXPECT_EQ(s.split.test_fraction, 0.2);
  EXPECT_EQ(s.split.seed, 42u);
  EXPECT_EQ(s.model.family(), ModelFamily::kRandomForest);
  const auto& f = std::get<ForestParams>(s.model.hyperparameters);
  EXPECT_EQ(f.n_trees, 100);
  EXPECT_FALSE(f.max_depth);
  EXPECT_EQ(s.model.seed, 42u);
  EXPECT_FALSE(s.model.ovr);
  EXPECT_EQ(s.explainer.method, ExplainMethod::kTree);
  EXPECT_EQ(s.explainer.background_size, 100u);
  EXPECT_EQ(s.explainer.eval_size, 200u);
  EXPECT_EQ(s.explainer.target.kind, TargetKind::kPositiveClass);
  EXPECT_EQ(s.metrics.averaging, Averaging::kBinaryPositive);
  EXPECT_EQ(s.metrics.tau, 1e-3);
  EXPECT_EQ(s.source, "baseline");
}

TEST(SpecParse, FamilyAndTaskDependentDefaults) {
  const auto y = parse_spec(R"({"spec_version": 1, "task": {"kind": "yeast_multiclass"},
                                "model": {"family": "gbt"}})");
  EXPECT_TRUE(y.model.ovr);
  EXPECT_EQ(y.task.path, "data/yeast.csv");
  EXPECT_EQ(y.explainer.target.kind, TargetKind::kPredictedClass);
  EXPECT_EQ(y.metrics.averaging, Averaging::kWeighted);
  const auto& g = std::get<GbtParams>(y.model.hyperparameters);
  EXPECT_EQ(g.n_rounds, 100);
  EXPECT_EQ(g.max_depth, 3);
  EXPECT_EQ(g.learning_rate, 0.1);

  const auto m = parse_spec(R"({"spec_version": 1, "task": {"kind": "yeast_multiclass"},
                                "model": {"family": "mlp"}})");
  EXPECT_FALSE(m.model.ovr);
  EXPECT_EQ(m.explainer.method, ExplainMethod::kKernel);
  EXPECT_FALSE(m.explainer.budget);
  const auto& mp = std::get<MlpParams>(m.model.hyperparameters);
  EXPECT_EQ(mp.hidden_sizes, std::vector<int>{64});
  EXPECT_EQ(mp.epochs, 20);
  EXPECT_EQ(mp.learning_rate, 1e-3);
}

TEST(SpecParse, UnsupportedFamilyListsTheSupportedOnes) {
  const auto issues = issues_of(R"({"spec_version": 1, "task": {"kind": "binary_alertness"},
                                    "model": {"family": "lstm"}})");
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].path, "model.family");
  EXPECT_NE(issues[0].message.find("random_forest, gbt, mlp"), std::string::npos);
}

TEST(SpecParse, TestFractionOutOfRange) {
  const auto issues = issues_of(R"({"spec_version": 1, "task": {"kind": "binary_alertness"},
                                    "split": {"test_fraction": 1.5}, "model": {"family": "gbt"}})");
  EXPECT_TRUE(has_issue(issues, "split.test_fraction", "(0, 1)"));
}

TEST(SpecParse, EveryProblemIsReportedAtOnce) {
  const auto issues = issues_of(R"({
    "spec_version": 2,
    "colour": "blue",
    "task": {"kind": "yeast_multiclass", "n": 10},
    "split": {"test_fraction": "big", "seed": -1},
    "model": {"family": "random_forest", "ovr": false, "hyperparameters": {"n_trees": 0, "depth": 3}},
    "explainer": {"method": "tree", "budget": 100, "target": "positive_class_prob", "background_size": 0},
    "metrics": {"averaging": "binary_positive", "tau": -1}
  })");
  const std::vector<std::pair<std::string, std::string>> expected = {
      {"spec_version", "unsupported version"},
      {"colour", "unknown field"},
      {"task.n", "only valid for"},
      {"split.test_fraction", "expected number"},
      {"split.seed", "non-negative"},
      {"model.ovr", "must be true"},
      {"model.hyperparameters.n_trees", "[1,"},
      {"model.hyperparameters.depth", "allowed: n_trees"},
      {"explainer.budget", "only valid with method kernel"},
      {"explainer.target", "requires a binary task"},
      {"explainer.background_size", "[1,"},
      {"metrics.averaging", "requires a binary task"},
      {"metrics.tau", ">= 0"},
  };
  for (const auto& [path, fragment] : expected) EXPECT_TRUE(has_issue(issues, path, fragment)) << path;
  EXPECT_EQ(issues.size(), expected.size());
}

TEST(SpecParse, MissingAndMistypedRequiredFields) {
  auto issues = issues_of("{}");
  EXPECT_TRUE(has_issue(issues, "spec_version", "missing"));
  EXPECT_TRUE(has_issue(issues, "task", "missing"));
  EXPECT_TRUE(has_issue(issues, "model", "missing"));
  issues = issues_of(R"({"spec_version": 1, "task": [], "model": {"family": 3}})");
  EXPECT_TRUE(has_issue(issues, "task", "expected object, got array"));
  EXPECT_TRUE(has_issue(issues, "model.family", "expected string, got integer"));
  issues = issues_of("[1, 2]");
  EXPECT_TRUE(has_issue(issues, "", "expected a JSON object"));
  issues = issues_of("{not json");
  EXPECT_TRUE(has_issue(issues, "", "not valid JSON"));
  issues = issues_of(R"({"spec_version": 1, "task": {"kind": "custom_csv"}, "model": {"family": "mlp"},
                         "explainer": {"method": "tree", "target": {"class_index": -2}}})");
  EXPECT_TRUE(has_issue(issues, "task.path", "missing"));
  EXPECT_TRUE(has_issue(issues, "explainer.method", "does not support family mlp"));
  EXPECT_TRUE(has_issue(issues, "explainer.target.class_index"));
}

TEST(SpecParse, IssueRendering) {
  EXPECT_EQ(to_string(SpecIssue{"model.family", "bad"}), "model.family: bad");
  EXPECT_EQ(to_string(SpecIssue{"", "bad"}), "<root>: bad");
  try {
    parse_spec("{}");
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("invalid pipeline spec (3 errors)", 0), 0u) << e.what();
  }
}

// ---------------------------------------------------------------------------
// Canonical form

TEST(SpecSerialize, GeneratedSpecsRoundTrip) {
  SpecGenerator gen(2026);
  for (int i = 0; i < 100; ++i) {
    const PipelineSpec s = gen.next();
    const std::string text = serialize_spec(s);
    PipelineSpec back;
    ASSERT_NO_THROW(back = parse_spec(text)) << text;
    EXPECT_EQ(back, s) << text;
    EXPECT_EQ(serialize_spec(back), text);
    EXPECT_EQ(spec_hash(back), spec_hash(s));
  }
}

TEST(SpecSerialize, KeyOrderAndWhitespaceDoNotMatter) {
  const auto a = parse_spec(R"({"spec_version": 1, "task": {"kind": "binary_alertness", "n": 500, "seed": 3},
                                "model": {"family": "gbt", "hyperparameters": {"n_rounds": 5, "max_depth": 2}}})");
  const auto b = parse_spec(
      "{\n\"model\":{\"hyperparameters\":{\"max_depth\":2,\"n_rounds\":5},\"family\":\"gbt\"},"
      "\"task\":{\"seed\":3,\"n\":500,\"kind\":\"binary_alertness\"},   \"spec_version\":1}");
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_spec(a), serialize_spec(b));
  EXPECT_EQ(spec_hash(a), spec_hash(b));
}

TEST(SpecSerialize, CanonicalTextShape) {
  const auto s = parse_spec(R"({"spec_version": 1, "task": {"kind": "binary_alertness"},
                                "model": {"family": "random_forest"}})");
  const std::string text = serialize_spec(s);
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text.rfind("{\n  \"explainer\": {", 0), 0u) << text;
  EXPECT_NE(text.find("\"max_depth\": null"), std::string::npos);
  EXPECT_NE(text.find("\"budget\": null"), std::string::npos);
  EXPECT_EQ(spec_hash(s), sha256_hex(text));
  EXPECT_EQ(spec_hash(s).size(), 64u);
}

TEST(SpecSerialize, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

// ---------------------------------------------------------------------------
// Execution

PipelineSpec small_spec(const std::string& family, const std::string& extra_explainer = "") {
  return parse_spec(R"({"spec_version": 1, "task": {"kind": "binary_alertness", "n": 1500, "seed": 5},
      "model": {"family": ")" + family + R"(", "hyperparameters": )" +
                    (family == "random_forest" ? std::string(R"({"n_trees": 15})")
                     : family == "gbt"         ? std::string(R"({"n_rounds": 20})")
                                               : std::string(R"({"epochs": 3})")) +
                    R"(}, "explainer": {"background_size": 20, "eval_sample": {"size": 25})" + extra_explainer +
                    "}}");
}

TEST(RunPipeline, SameSpecSameReport) {
  for (const char* family : {"random_forest", "gbt", "mlp"}) {
    const auto spec = small_spec(family);
    const auto a = run_pipeline(spec);
    const auto b = run_pipeline(spec);
    EXPECT_EQ(to_json(a, false), to_json(b, false)) << family;
    ASSERT_TRUE(a.explainability);
    EXPECT_EQ(a.explainability->n_explained, 25u);
    EXPECT_LT(a.explainability->fidelity_mse, 1e-10) << family;
    EXPECT_EQ(a.n_train + a.n_test, 1500u);
    EXPECT_EQ(a.n_test, 300u);
    EXPECT_EQ(a.spec_hash, spec_hash(spec));
  }
}

TEST(RunPipeline, ExplainerSettingsDoNotTouchPerformance) {
  const auto a = run_pipeline(small_spec("random_forest"));
  const auto b = run_pipeline(small_spec("random_forest", R"(, "method": "kernel", "budget": 12, "seed": 9)"));
  EXPECT_EQ(a.performance, b.performance);
  EXPECT_EQ(a.n_train, b.n_train);
  EXPECT_NE(a.spec_hash, b.spec_hash);
}

TEST(RunPipeline, ExplanationFailureKeepsPerformance) {
  std::vector<Attribution> rows;
  // Four features need a budget of at least six coalitions.
  const auto r = run_pipeline(small_spec("gbt", R"(, "method": "kernel", "budget": 3)"), &rows);
  ASSERT_TRUE(r.explain_error);
  EXPECT_FALSE(r.explainability);
  EXPECT_NE(r.explain_error->find("explain"), std::string::npos);
  EXPECT_GT(r.performance.accuracy, 0.5);
  EXPECT_TRUE(rows.empty());
}

TEST(RunPipeline, AttributionsAreReturnedOnRequest) {
  std::vector<Attribution> rows;
  const auto r = run_pipeline(small_spec("random_forest"), &rows);
  ASSERT_EQ(rows.size(), 25u);
  EXPECT_EQ(rows[0].feature_names, (std::vector<std::string>{"heart_rate", "yawning", "looks_straight", "eyes_closed"}));
  EXPECT_DOUBLE_EQ(shap_fidelity(rows), r.explainability->fidelity_mse);
}

TEST(RunPipeline, StageFailuresNameTheStage) {
  auto spec = parse_spec(R"({"spec_version": 1, "task": {"kind": "yeast_multiclass", "path": "/nonexistent/y.csv"},
                             "model": {"family": "gbt"}})");
  try {
    run_pipeline(spec);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_EQ(std::string(e.what()).rfind("load: ", 0), 0u) << e.what();
  }

  TempDir dir;
  spit(dir.file("three.csv"), "a,b,y\n1,2,x\n2,3,y\n3,4,z\n4,5,x\n5,6,y\n6,7,z\n");
  spec = parse_spec(R"({"spec_version": 1, "task": {"kind": "custom_csv", "path": ")" + dir.file("three.csv") +
                    R"("}, "model": {"family": "mlp"}, "metrics": {"averaging": "binary_positive"}})");
  try {
    run_pipeline(spec);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_TRUE(e.is_validation());
  }
}

TEST(RunPipeline, ReportJsonRoundTrip) {
  const auto r = run_pipeline(small_spec("gbt"));
  const auto back = run_report_from_json(json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);
  EXPECT_EQ(to_json(r, false).count("timings_seconds"), 0u);
}

// ---------------------------------------------------------------------------
// Benchmark

TEST(Benchmark, BuiltInSuiteHasSixRows) {
  const auto suite = paper_suite(source_path("data/yeast.csv"));
  ASSERT_EQ(suite.size(), 6u);
  const auto result = run_benchmark(suite);
  ASSERT_EQ(result.rows.size(), 6u);
  EXPECT_TRUE(result.all_ok());
  EXPECT_EQ(performance_table(result).rows(), 6u);
  EXPECT_EQ(explainability_table(result).rows(), 6u);
  EXPECT_EQ(benchmark_from_json(json::parse(to_json(result).dump())), result);
  EXPECT_EQ(result.rows[3].task, "yeast_multiclass");
  EXPECT_EQ(result.rows[5].family, "mlp");
}

TEST(Benchmark, FailedRunsBecomeRowsAndTheSuiteContinues) {
  auto suite = paper_suite("/nonexistent/yeast.csv");
  suite.erase(suite.begin(), suite.begin() + 2);  // keep binary mlp and the three yeast runs
  for (auto& s : suite)
    if (s.task.kind == TaskId::kBinaryAlertness) s.task.alertness.n = 1000;
  const auto result = run_benchmark(suite);
  ASSERT_EQ(result.rows.size(), 4u);
  EXPECT_TRUE(result.rows[0].ok());
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_FALSE(result.rows[i].ok());
    ASSERT_TRUE(result.rows[i].error);
    EXPECT_NE(result.rows[i].error->find("load"), std::string::npos);
  }
  EXPECT_FALSE(result.all_ok());
  const std::string md = performance_table(result).render(TableStyle::kMarkdown);
  EXPECT_NE(md.find("failed: load"), std::string::npos) << md;
  EXPECT_THROW(run_benchmark({}), ValidationError);
}

}  // namespace
