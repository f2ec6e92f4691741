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

// Declarative pipeline specs and their executor.
//
// A spec is a JSON document:
//
//   {
//     "spec_version": 1,
//     "source": "baseline",
//     "task":      {"kind": "binary_alertness", "n": 20000, "seed": 42,
//                   "hr_band_low": 60, "hr_band_high": 100},
//     "split":     {"test_fraction": 0.2, "seed": 42},
//     "model":     {"family": "random_forest", "hyperparameters": {...},
//                   "seed": 42, "ovr": false},
//     "explainer": {"method": "tree", "background_size": 100, "seed": 42,
//                   "budget": null, "target": "positive_class_prob",
//                   "eval_sample": {"size": 200, "seed": 42}},
//     "metrics":   {"averaging": "binary_positive", "tau": 0.001}
//   }
//
// Only spec_version, task.kind and model.family are required. Defaults that
// depend on the task or family (ovr, explainer method, target, averaging)
// are resolved while parsing, so the canonical text is fully explicit.

#pragma once

#include "xplainbench/metrics.hpp"
#include "xplainbench/model.hpp"
#include "xplainbench/shap.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <limits>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xplainbench {

inline constexpr int kSpecVersion = 1;

enum class TaskId { kBinaryAlertness, kYeastMulticlass, kCustomCsv };

inline const char* to_string(TaskId t) {
  switch (t) {
    case TaskId::kBinaryAlertness: return "binary_alertness";
    case TaskId::kYeastMulticlass: return "yeast_multiclass";
    case TaskId::kCustomCsv: return "custom_csv";
  }
  return "?";
}

inline std::optional<TaskId> parse_task_id(std::string_view s) {
  if (s == "binary_alertness") return TaskId::kBinaryAlertness;
  if (s == "yeast_multiclass") return TaskId::kYeastMulticlass;
  if (s == "custom_csv") return TaskId::kCustomCsv;
  return std::nullopt;
}

inline std::optional<ExplainMethod> parse_method(std::string_view s) {
  if (s == "exact") return ExplainMethod::kExact;
  if (s == "kernel") return ExplainMethod::kKernel;
  if (s == "tree") return ExplainMethod::kTree;
  return std::nullopt;
}

inline constexpr const char* kDefaultYeastPath = "data/yeast.csv";

struct TaskSpec {
  TaskId kind = TaskId::kBinaryAlertness;
  AlertnessGenConfig alertness;  // binary_alertness only
  std::string path;              // yeast_multiclass and custom_csv
  std::string label_column;      // custom_csv only; empty = last column

  friend bool operator==(const TaskSpec& a, const TaskSpec& b) {
    return a.kind == b.kind && a.alertness.n == b.alertness.n && a.alertness.seed == b.alertness.seed &&
           a.alertness.hr_band_low == b.alertness.hr_band_low &&
           a.alertness.hr_band_high == b.alertness.hr_band_high && a.path == b.path &&
           a.label_column == b.label_column;
  }
};

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 42;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct ModelSpec {
  FamilyParams hyperparameters = ForestParams{};
  std::uint64_t seed = 42;
  bool ovr = false;

  ModelFamily family() const { return family_of(hyperparameters); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ExplainerSpec {
  ExplainMethod method = ExplainMethod::kTree;
  std::size_t background_size = 100;
  std::uint64_t seed = 42;
  std::optional<std::size_t> budget;  // kernel only; nullopt = full enumeration
  ExplainTarget target;
  std::size_t eval_size = 200;
  std::uint64_t eval_seed = 42;

  friend bool operator==(const ExplainerSpec&, const ExplainerSpec&) = default;
};

struct MetricsSpec {
  Averaging averaging = Averaging::kBinaryPositive;
  double tau = kDefaultTau;

  friend bool operator==(const MetricsSpec&, const MetricsSpec&) = default;
};

struct PipelineSpec {
  int spec_version = kSpecVersion;
  std::string source = "baseline";
  TaskSpec task;
  SplitSpec split;
  ModelSpec model;
  ExplainerSpec explainer;
  MetricsSpec metrics;

  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

/// One validation problem, located by a dotted document path.
struct SpecIssue {
  std::string path;
  std::string message;

  friend bool operator==(const SpecIssue&, const SpecIssue&) = default;
};

inline std::string to_string(const SpecIssue& i) {
  return (i.path.empty() ? std::string("<root>") : i.path) + ": " + i.message;
}

class SpecError : public ValidationError {
 public:
  explicit SpecError(std::vector<SpecIssue> issues)
      : ValidationError(render(issues)), issues_(std::move(issues)) {}

  const std::vector<SpecIssue>& issues() const { return issues_; }

 private:
  static std::string render(const std::vector<SpecIssue>& issues) {
    std::string s = "invalid pipeline spec (" + std::to_string(issues.size()) + " error" +
                    (issues.size() == 1 ? "" : "s") + ")";
    for (const auto& i : issues) s += "\n  " + to_string(i);
    return s;
  }

  std::vector<SpecIssue> issues_;
};

namespace detail {

using json = nlohmann::json;

inline std::string join_path(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

inline const char* type_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  return "object";
}

// Walks a JSON document, collecting every problem instead of stopping at the
// first one.
class SpecReader {
 public:
  std::vector<SpecIssue> issues;

  void fail(const std::string& path, std::string message) { issues.push_back({path, std::move(message)}); }

  // Child object, or nullptr (with an issue if present but not an object).
  const json* object(const json& parent, std::string_view key, const std::string& path, bool required) {
    const std::string p = join_path(path, key);
    if (!parent.contains(key)) {
      if (required) fail(p, "missing required field");
      return nullptr;
    }
    const json& v = parent.at(std::string(key));
    if (!v.is_object()) {
      fail(p, std::string("expected object, got ") + type_name(v));
      return nullptr;
    }
    return &v;
  }

  void allow_only(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (auto a : allowed) known = known || it.key() == a;
      if (!known) {
        std::string list;
        for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(join_path(path, it.key()), "unknown field '" + it.key() + "' (allowed: " + list + ")");
      }
    }
  }

  const json* field(const json& obj, std::string_view key) {
    return obj.contains(key) ? &obj.at(std::string(key)) : nullptr;
  }

  template <class T>
  void integer(const json& obj, std::string_view key, const std::string& path, T& out, long long lo,
               long long hi = std::numeric_limits<long long>::max()) {
    const json* v = field(obj, key);
    if (!v) return;
    const std::string p = join_path(path, key);
    if (!v->is_number_integer()) return fail(p, std::string("expected integer, got ") + type_name(*v));
    long long val = 0;
    if (v->is_number_unsigned()) {
      const auto u = v->get<unsigned long long>();
      if (u > static_cast<unsigned long long>(hi)) return fail(p, "must be <= " + std::to_string(hi));
      val = static_cast<long long>(u);
    } else {
      val = v->get<long long>();
    }
    if (val < lo || val > hi)
      return fail(p, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out = static_cast<T>(val);
  }

  void seed(const json& obj, std::string_view key, const std::string& path, std::uint64_t& out) {
    const json* v = field(obj, key);
    if (!v) return;
    if (!v->is_number_unsigned())
      return fail(join_path(path, key), std::string("expected non-negative integer seed, got ") + type_name(*v));
    out = v->get<std::uint64_t>();
  }

  void number(const json& obj, std::string_view key, const std::string& path, double& out) {
    const json* v = field(obj, key);
    if (!v) return;
    if (!v->is_number()) return fail(join_path(path, key), std::string("expected number, got ") + type_name(*v));
    out = v->get<double>();
    if (!std::isfinite(out)) fail(join_path(path, key), "must be finite");
  }

  void boolean(const json& obj, std::string_view key, const std::string& path, bool& out) {
    const json* v = field(obj, key);
    if (!v) return;
    if (!v->is_boolean()) return fail(join_path(path, key), std::string("expected boolean, got ") + type_name(*v));
    out = v->get<bool>();
  }

  std::optional<std::string> string(const json& obj, std::string_view key, const std::string& path,
                                    bool required = false) {
    const json* v = field(obj, key);
    if (!v) {
      if (required) fail(join_path(path, key), "missing required field");
      return std::nullopt;
    }
    if (!v->is_string()) {
      fail(join_path(path, key), std::string("expected string, got ") + type_name(*v));
      return std::nullopt;
    }
    return v->get<std::string>();
  }
};

inline void read_forest(SpecReader& r, const json& h, const std::string& p, ForestParams& f) {
  r.allow_only(h, p, {"n_trees", "max_depth", "min_samples_leaf", "features_per_split", "bootstrap"});
  r.integer(h, "n_trees", p, f.n_trees, 1, 100000);
  if (const json* v = r.field(h, "max_depth")) {
    if (v->is_null()) f.max_depth.reset();
    else {
      int depth = 0;
      r.integer(h, "max_depth", p, depth, 1, 1000);
      if (v->is_number_integer()) f.max_depth = depth;
    }
  }
  r.integer(h, "min_samples_leaf", p, f.min_samples_leaf, 1, 1000000);
  if (const json* v = r.field(h, "features_per_split")) {
    if (v->is_string() && v->get<std::string>() == "sqrt") f.features_per_split.reset();
    else if (v->is_number_integer()) {
      int k = 0;
      r.integer(h, "features_per_split", p, k, 1, 100000);
      f.features_per_split = k;
    } else {
      r.fail(join_path(p, "features_per_split"), "expected positive integer or \"sqrt\"");
    }
  }
  r.boolean(h, "bootstrap", p, f.bootstrap);
}

inline void read_gbt(SpecReader& r, const json& h, const std::string& p, GbtParams& g) {
  r.allow_only(h, p, {"n_rounds", "max_depth", "learning_rate", "lambda_l2", "min_child_weight"});
  r.integer(h, "n_rounds", p, g.n_rounds, 0, 100000);
  r.integer(h, "max_depth", p, g.max_depth, 1, 64);
  r.number(h, "learning_rate", p, g.learning_rate);
  if (!(g.learning_rate > 0)) r.fail(join_path(p, "learning_rate"), "must be > 0");
  r.number(h, "lambda_l2", p, g.lambda_l2);
  if (!(g.lambda_l2 >= 0)) r.fail(join_path(p, "lambda_l2"), "must be >= 0");
  r.number(h, "min_child_weight", p, g.min_child_weight);
  if (!(g.min_child_weight >= 0)) r.fail(join_path(p, "min_child_weight"), "must be >= 0");
}

inline void read_mlp(SpecReader& r, const json& h, const std::string& p, MlpParams& m) {
  r.allow_only(h, p, {"hidden_sizes", "epochs", "batch_size", "learning_rate", "output", "zero_init_output"});
  if (const json* v = r.field(h, "hidden_sizes")) {
    const std::string hp = join_path(p, "hidden_sizes");
    if (!v->is_array()) {
      r.fail(hp, std::string("expected array of positive integers, got ") + type_name(*v));
    } else {
      std::vector<int> sizes;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        if (!e.is_number_integer() || e.get<long long>() < 1 || e.get<long long>() > 100000)
          r.fail(hp + "[" + std::to_string(i) + "]", "expected positive integer");
        else
          sizes.push_back(e.get<int>());
      }
      m.hidden_sizes = sizes;
    }
  }
  r.integer(h, "epochs", p, m.epochs, 0, 1000000);
  r.integer(h, "batch_size", p, m.batch_size, 1, 1000000);
  r.number(h, "learning_rate", p, m.learning_rate);
  if (!(m.learning_rate > 0)) r.fail(join_path(p, "learning_rate"), "must be > 0");
  if (auto o = r.string(h, "output", p)) {
    if (*o == "sigmoid") m.output = MlpOutput::kSigmoid;
    else if (*o == "softmax") m.output = MlpOutput::kSoftmax;
    else r.fail(join_path(p, "output"), "unknown output '" + *o + "' (supported: sigmoid, softmax)");
  }
  r.boolean(h, "zero_init_output", p, m.zero_init_output);
}

inline bool task_is_multiclass(TaskId t) { return t == TaskId::kYeastMulticlass; }

}  // namespace detail

/// Parses and validates a spec, filling documented defaults. Throws
/// SpecError listing every problem found.
inline PipelineSpec parse_spec_json(const nlohmann::json& doc) {
  using detail::json;
  detail::SpecReader r;
  PipelineSpec s;
  if (!doc.is_object()) throw SpecError({{"", std::string("expected a JSON object, got ") + detail::type_name(doc)}});
  r.allow_only(doc, "", {"spec_version", "source", "task", "split", "model", "explainer", "metrics"});

  if (!doc.contains("spec_version")) r.fail("spec_version", "missing required field");
  r.integer(doc, "spec_version", "", s.spec_version, 0, 1000);
  if (doc.contains("spec_version") && doc.at("spec_version").is_number_integer() && s.spec_version != kSpecVersion)
    r.fail("spec_version", "unsupported version " + std::to_string(s.spec_version) + " (supported: 1)");
  if (auto src = r.string(doc, "source", "")) s.source = *src;

  // task
  bool task_known = false;
  if (const json* t = r.object(doc, "task", "", true)) {
    r.allow_only(*t, "task", {"kind", "n", "seed", "hr_band_low", "hr_band_high", "path", "label_column"});
    if (auto kind = r.string(*t, "kind", "task", true)) {
      if (auto id = parse_task_id(*kind)) {
        s.task.kind = *id;
        task_known = true;
      } else {
        r.fail("task.kind", "unsupported task '" + *kind +
                                "' (supported: binary_alertness, yeast_multiclass, custom_csv)");
      }
    }
    const auto only_for = [&](std::string_view key, TaskId id) {
      if (task_known && s.task.kind != id && t->contains(key))
        r.fail(detail::join_path("task", key), "only valid for task kind " + std::string(to_string(id)));
    };
    only_for("n", TaskId::kBinaryAlertness);
    only_for("seed", TaskId::kBinaryAlertness);
    only_for("hr_band_low", TaskId::kBinaryAlertness);
    only_for("hr_band_high", TaskId::kBinaryAlertness);
    only_for("label_column", TaskId::kCustomCsv);
    if (task_known && s.task.kind == TaskId::kBinaryAlertness && t->contains("path"))
      r.fail("task.path", "not valid for task kind binary_alertness");
    auto& a = s.task.alertness;
    r.integer(*t, "n", "task", a.n, 1, 10000000);
    r.seed(*t, "seed", "task", a.seed);
    r.integer(*t, "hr_band_low", "task", a.hr_band_low, kHeartRateMin, kHeartRateMax);
    r.integer(*t, "hr_band_high", "task", a.hr_band_high, kHeartRateMin, kHeartRateMax);
    if (a.hr_band_low >= a.hr_band_high) r.fail("task.hr_band_high", "must be greater than hr_band_low");
    if (auto path = r.string(*t, "path", "task")) {
      if (path->empty()) r.fail("task.path", "must not be empty");
      s.task.path = *path;
    }
    if (auto label = r.string(*t, "label_column", "task")) s.task.label_column = *label;
    if (task_known && s.task.kind == TaskId::kYeastMulticlass && s.task.path.empty())
      s.task.path = kDefaultYeastPath;
    if (task_known && s.task.kind == TaskId::kCustomCsv && !t->contains("path"))
      r.fail("task.path", "missing required field for task kind custom_csv");
  }
  const bool multiclass = task_known && detail::task_is_multiclass(s.task.kind);

  // split
  if (const json* sp = r.object(doc, "split", "", false)) {
    r.allow_only(*sp, "split", {"test_fraction", "seed"});
    r.number(*sp, "test_fraction", "split", s.split.test_fraction);
    if (!(s.split.test_fraction > 0.0 && s.split.test_fraction < 1.0))
      r.fail("split.test_fraction", "must be in (0, 1)");
    r.seed(*sp, "seed", "split", s.split.seed);
  }

  // model
  bool family_known = false;
  if (const json* m = r.object(doc, "model", "", true)) {
    r.allow_only(*m, "model", {"family", "hyperparameters", "seed", "ovr"});
    if (auto fam = r.string(*m, "family", "model", true)) {
      if (auto f = parse_family(*fam)) {
        s.model.hyperparameters = default_params(*f);
        family_known = true;
      } else {
        r.fail("model.family", "unsupported family '" + *fam + "' (supported: random_forest, gbt, mlp)");
      }
    }
    if (const json* h = r.object(*m, "hyperparameters", "model", false); h && family_known) {
      std::visit(
          [&](auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ForestParams>) detail::read_forest(r, *h, "model.hyperparameters", p);
            else if constexpr (std::is_same_v<P, GbtParams>) detail::read_gbt(r, *h, "model.hyperparameters", p);
            else detail::read_mlp(r, *h, "model.hyperparameters", p);
          },
          s.model.hyperparameters);
    }
    r.seed(*m, "seed", "model", s.model.seed);
    const bool tree_family = family_known && s.model.family() != ModelFamily::kMlp;
    s.model.ovr = multiclass && tree_family;
    r.boolean(*m, "ovr", "model", s.model.ovr);
    if (multiclass && tree_family && !s.model.ovr)
      r.fail("model.ovr", std::string("must be true: family ") + to_string(s.model.family()) +
                              " needs one-vs-rest on a multiclass task");
  }

  // explainer
  const bool mlp = family_known && s.model.family() == ModelFamily::kMlp;
  s.explainer.method = mlp ? ExplainMethod::kKernel : ExplainMethod::kTree;
  s.explainer.target.kind =
      task_known && s.task.kind == TaskId::kBinaryAlertness ? TargetKind::kPositiveClass : TargetKind::kPredictedClass;
  if (const json* e = r.object(doc, "explainer", "", false)) {
    r.allow_only(*e, "explainer", {"method", "background_size", "seed", "budget", "target", "eval_sample"});
    if (auto method = r.string(*e, "method", "explainer")) {
      if (auto m = parse_method(*method)) s.explainer.method = *m;
      else r.fail("explainer.method", "unknown method '" + *method + "' (supported: exact, kernel, tree)");
    }
    if (mlp && s.explainer.method == ExplainMethod::kTree)
      r.fail("explainer.method", "tree method does not support family mlp; use kernel or exact");
    r.integer(*e, "background_size", "explainer", s.explainer.background_size, 1, 1000000);
    r.seed(*e, "seed", "explainer", s.explainer.seed);
    if (const json* b = r.field(*e, "budget")) {
      if (b->is_null() || (b->is_string() && b->get<std::string>() == "full")) {
        s.explainer.budget.reset();
      } else if (b->is_number_integer()) {
        std::size_t budget = 0;
        r.integer(*e, "budget", "explainer", budget, 3, 100000000);
        s.explainer.budget = budget;
      } else {
        r.fail("explainer.budget", "expected integer >= d + 2, \"full\" or null");
      }
      if (s.explainer.budget && s.explainer.method != ExplainMethod::kKernel)
        r.fail("explainer.budget", "only valid with method kernel");
    }
    if (const json* t = r.field(*e, "target")) {
      if (t->is_string()) {
        const auto v = t->get<std::string>();
        if (v == "positive_class_prob") s.explainer.target.kind = TargetKind::kPositiveClass;
        else if (v == "predicted_class_prob") s.explainer.target.kind = TargetKind::kPredictedClass;
        else r.fail("explainer.target", "unknown target '" + v +
                                            "' (supported: positive_class_prob, predicted_class_prob, "
                                            "{\"class_index\": k})");
      } else if (t->is_object()) {
        r.allow_only(*t, "explainer.target", {"class_index"});
        if (!t->contains("class_index")) r.fail("explainer.target.class_index", "missing required field");
        s.explainer.target.kind = TargetKind::kClassIndex;
        r.integer(*t, "class_index", "explainer.target", s.explainer.target.class_index, 0, 100000);
      } else {
        r.fail("explainer.target", std::string("expected string or object, got ") + detail::type_name(*t));
      }
    }
    if (const json* ev = r.object(*e, "eval_sample", "explainer", false)) {
      r.allow_only(*ev, "explainer.eval_sample", {"size", "seed"});
      r.integer(*ev, "size", "explainer.eval_sample", s.explainer.eval_size, 1, 100000000);
      r.seed(*ev, "seed", "explainer.eval_sample", s.explainer.eval_seed);
    }
  }
  if (multiclass && s.explainer.target.kind == TargetKind::kPositiveClass)
    r.fail("explainer.target", "positive_class_prob requires a binary task");
  if (task_known && s.task.kind == TaskId::kBinaryAlertness && s.explainer.target.kind == TargetKind::kClassIndex &&
      s.explainer.target.class_index > 1)
    r.fail("explainer.target.class_index", "binary task has classes 0 and 1");

  // metrics
  s.metrics.averaging = multiclass || (task_known && s.task.kind == TaskId::kCustomCsv)
                            ? Averaging::kWeighted
                            : Averaging::kBinaryPositive;
  if (const json* mt = r.object(doc, "metrics", "", false)) {
    r.allow_only(*mt, "metrics", {"averaging", "tau"});
    if (auto avg = r.string(*mt, "averaging", "metrics")) {
      if (auto a = parse_averaging(*avg)) s.metrics.averaging = *a;
      else r.fail("metrics.averaging", "unknown averaging '" + *avg + "' (supported: binary_positive, weighted, macro)");
    }
    r.number(*mt, "tau", "metrics", s.metrics.tau);
    if (!(s.metrics.tau >= 0)) r.fail("metrics.tau", "must be >= 0");
  }
  if (multiclass && s.metrics.averaging == Averaging::kBinaryPositive)
    r.fail("metrics.averaging", "binary_positive requires a binary task");

  if (!r.issues.empty()) throw SpecError(std::move(r.issues));
  return s;
}

inline PipelineSpec parse_spec(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError({{"", std::string("not valid JSON: ") + e.what()}});
  }
  return parse_spec_json(doc);
}

inline nlohmann::json spec_to_json(const PipelineSpec& s) {
  nlohmann::json task = {{"kind", to_string(s.task.kind)}};
  switch (s.task.kind) {
    case TaskId::kBinaryAlertness:
      task["n"] = s.task.alertness.n;
      task["seed"] = s.task.alertness.seed;
      task["hr_band_low"] = s.task.alertness.hr_band_low;
      task["hr_band_high"] = s.task.alertness.hr_band_high;
      break;
    case TaskId::kYeastMulticlass:
      task["path"] = s.task.path;
      break;
    case TaskId::kCustomCsv:
      task["path"] = s.task.path;
      task["label_column"] = s.task.label_column;
      break;
  }
  nlohmann::json target;
  switch (s.explainer.target.kind) {
    case TargetKind::kPositiveClass: target = "positive_class_prob"; break;
    case TargetKind::kPredictedClass: target = "predicted_class_prob"; break;
    case TargetKind::kClassIndex: target = {{"class_index", s.explainer.target.class_index}}; break;
  }
  return {
      {"spec_version", s.spec_version},
      {"source", s.source},
      {"task", task},
      {"split", {{"test_fraction", s.split.test_fraction}, {"seed", s.split.seed}}},
      {"model",
       {{"family", to_string(s.model.family())},
        {"hyperparameters", params_to_json(s.model.hyperparameters)},
        {"seed", s.model.seed},
        {"ovr", s.model.ovr}}},
      {"explainer",
       {{"method", to_string(s.explainer.method)},
        {"background_size", s.explainer.background_size},
        {"seed", s.explainer.seed},
        {"budget", s.explainer.budget ? nlohmann::json(*s.explainer.budget) : nlohmann::json(nullptr)},
        {"target", target},
        {"eval_sample", {{"size", s.explainer.eval_size}, {"seed", s.explainer.eval_seed}}}}},
      {"metrics", {{"averaging", to_string(s.metrics.averaging)}, {"tau", s.metrics.tau}}},
  };
}

/// Canonical text: sorted keys, every default explicit, 2-space indent,
/// trailing newline.
inline std::string serialize_spec(const PipelineSpec& s) { return spec_to_json(s).dump(2) + "\n"; }

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw RuntimeFailure("sha256: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string spec_hash(const PipelineSpec& s) { return sha256_hex(serialize_spec(s)); }

// ---------------------------------------------------------------------------
// Execution

struct StageTimings {
  double load = 0, split = 0, fit = 0, predict = 0, explain = 0, total = 0;

  friend bool operator==(const StageTimings&, const StageTimings&) = default;
};

struct RunReport {
  PipelineSpec spec;
  std::string spec_hash;
  std::string version = kVersion;
  std::string model_name;
  std::size_t n_train = 0, n_test = 0, n_features = 0, n_classes = 0;
  std::vector<std::string> class_names;
  PerformanceReport performance;
  std::optional<ExplainabilityReport> explainability;
  std::optional<std::string> explain_error;
  StageTimings timings;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// A stage failure; what() starts with the stage name.
class StageError : public RuntimeFailure {
 public:
  StageError(std::string stage, const std::string& message, bool validation = false)
      : RuntimeFailure(stage + ": " + message), stage_(std::move(stage)), validation_(validation) {}

  const std::string& stage() const { return stage_; }
  bool is_validation() const { return validation_; }

 private:
  std::string stage_;
  bool validation_;
};

inline TabularDataset load_task_data(const TaskSpec& t) {
  switch (t.kind) {
    case TaskId::kBinaryAlertness: return generate_alertness(t.alertness);
    case TaskId::kYeastMulticlass: return load_yeast_csv(t.path);
    case TaskId::kCustomCsv: return load_csv(t.path, t.label_column);
  }
  throw ValidationError("unknown task");
}

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(name, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace detail

/// Rows of the test split explained by a run: a seeded sample of
/// min(size, n_test) indices in ascending order.
inline std::vector<std::size_t> eval_indices(const ExplainerSpec& e, std::size_t n_test) {
  Rng rng(e.eval_seed);
  auto idx = sample_without_replacement(n_test, e.eval_size, rng);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline ExplainerConfig explainer_config(const ExplainerSpec& e) {
  ExplainerConfig c;
  c.method = e.method;
  c.background_size = e.background_size;
  c.budget = e.budget;
  c.target = e.target;
  c.seed = derive_seed(e.seed, 1);
  return c;
}

/// Executes load, split, fit, predict, score, explain. Every stage failure
/// except explanation throws StageError; an explanation failure is recorded
/// in RunReport::explain_error. Attributions are copied out when requested.
inline RunReport run_pipeline(const PipelineSpec& spec, std::vector<Attribution>* attributions = nullptr) {
  RunReport rep;
  rep.spec = spec;
  rep.spec_hash = spec_hash(spec);
  detail::Stopwatch total, clock;

  const TabularDataset data = detail::stage("load", [&] { return load_task_data(spec.task); });
  rep.timings.load = clock.lap();
  if (spec.metrics.averaging == Averaging::kBinaryPositive && data.n_classes() != 2)
    throw StageError("load", "binary_positive averaging needs a 2-class dataset, got " +
                                 std::to_string(data.n_classes()) + " classes", true);

  auto [train, test] = detail::stage("split", [&] {
    return train_test_split(data, spec.split.test_fraction, spec.split.seed);
  });
  rep.timings.split = clock.lap();
  rep.n_train = train.size();
  rep.n_test = test.size();
  rep.n_features = data.n_features();
  rep.n_classes = static_cast<std::size_t>(data.n_classes());
  rep.class_names = data.class_names;

  const Model model = detail::stage("fit", [&] {
    return fit_model(train, spec.model.hyperparameters, spec.model.seed, spec.model.ovr);
  });
  rep.timings.fit = clock.lap();
  rep.model_name = model_name(model);

  rep.performance = detail::stage("predict", [&] {
    const auto pred = predict(model, test.X);
    return classification_metrics(test.y, pred, spec.metrics.averaging, data.n_classes());
  });
  rep.timings.predict = clock.lap();

  try {
    const auto idx = eval_indices(spec.explainer, test.size());
    const auto eval = subset(test, idx);
    const auto bg = make_background(train.X, spec.explainer.background_size, spec.explainer.seed);
    auto rows = explain_batch(model, eval.X, bg.rows, explainer_config(spec.explainer), data.feature_names);
    rep.explainability = explainability_report(rows, spec.metrics.tau);
    if (attributions) *attributions = std::move(rows);
  } catch (const std::exception& e) {
    rep.explain_error = std::string("explain: ") + e.what();
  }
  rep.timings.explain = clock.lap();
  rep.timings.total = total.lap();
  return rep;
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::json to_json(const StageTimings& t) {
  return {{"load", t.load}, {"split", t.split}, {"fit", t.fit},
          {"predict", t.predict}, {"explain", t.explain}, {"total", t.total}};
}

inline nlohmann::json to_json(const RunReport& r, bool include_timings = true) {
  nlohmann::json j = {
      {"spec", spec_to_json(r.spec)},
      {"provenance", {{"spec_hash", r.spec_hash}, {"version", r.version}}},
      {"model", r.model_name},
      {"data",
       {{"n_train", r.n_train}, {"n_test", r.n_test}, {"n_features", r.n_features},
        {"n_classes", r.n_classes}, {"class_names", r.class_names}}},
      {"performance", to_json(r.performance)},
      {"explainability", r.explainability ? to_json(*r.explainability) : nlohmann::json(nullptr)},
      {"explain_error", r.explain_error ? nlohmann::json(*r.explain_error) : nlohmann::json(nullptr)},
  };
  if (include_timings) j["timings_seconds"] = to_json(r.timings);
  return j;
}

inline RunReport run_report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.spec = parse_spec_json(j.at("spec"));
    r.spec_hash = j.at("provenance").at("spec_hash").get<std::string>();
    r.version = j.at("provenance").at("version").get<std::string>();
    r.model_name = j.at("model").get<std::string>();
    const auto& d = j.at("data");
    r.n_train = d.at("n_train").get<std::size_t>();
    r.n_test = d.at("n_test").get<std::size_t>();
    r.n_features = d.at("n_features").get<std::size_t>();
    r.n_classes = d.at("n_classes").get<std::size_t>();
    r.class_names = d.at("class_names").get<std::vector<std::string>>();
    r.performance = performance_from_json(j.at("performance"));
    if (!j.at("explainability").is_null()) r.explainability = explainability_from_json(j.at("explainability"));
    if (!j.at("explain_error").is_null()) r.explain_error = j.at("explain_error").get<std::string>();
    if (j.contains("timings_seconds")) {
      const auto& t = j.at("timings_seconds");
      r.timings = {t.at("load").get<double>(), t.at("split").get<double>(), t.at("fit").get<double>(),
                   t.at("predict").get<double>(), t.at("explain").get<double>(), t.at("total").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("run report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkRow {
  std::string source;
  std::string task;
  std::string family;
  std::optional<RunReport> report;
  std::optional<std::string> error;  // whole-run failure

  bool ok() const { return report && !report->explain_error; }

  friend bool operator==(const BenchmarkRow&, const BenchmarkRow&) = default;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;

  bool all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok(); });
  }

  friend bool operator==(const BenchmarkResult&, const BenchmarkResult&) = default;
};

/// The built-in suite: {random_forest, gbt, mlp} x {alertness, yeast} with
/// defaults.
inline std::vector<PipelineSpec> paper_suite(const std::string& yeast_path = kDefaultYeastPath) {
  std::vector<PipelineSpec> out;
  for (const char* task : {"binary_alertness", "yeast_multiclass"})
    for (const char* family : {"random_forest", "gbt", "mlp"}) {
      nlohmann::json doc = {{"spec_version", kSpecVersion},
                            {"task", {{"kind", task}}},
                            {"model", {{"family", family}}}};
      if (std::string_view(task) == "yeast_multiclass") doc["task"]["path"] = yeast_path;
      out.push_back(parse_spec_json(doc));
    }
  return out;
}

/// Runs every spec in order; a failed run becomes an error row and the
/// suite continues.
inline BenchmarkResult run_benchmark(const std::vector<PipelineSpec>& suite) {
  if (suite.empty()) throw ValidationError("benchmark: empty suite");
  BenchmarkResult out;
  for (const auto& spec : suite) {
    BenchmarkRow row{spec.source, to_string(spec.task.kind), to_string(spec.model.family()), std::nullopt,
                     std::nullopt};
    try {
      row.report = run_pipeline(spec);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline nlohmann::json to_json(const BenchmarkResult& b, bool include_timings = true) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : b.rows)
    runs.push_back({{"source", r.source},
                    {"task", r.task},
                    {"family", r.family},
                    {"report", r.report ? to_json(*r.report, include_timings) : nlohmann::json(nullptr)},
                    {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)}});
  return {{"version", kVersion}, {"runs", runs}};
}

inline BenchmarkResult benchmark_from_json(const nlohmann::json& j) {
  BenchmarkResult b;
  try {
    for (const auto& r : j.at("runs")) {
      BenchmarkRow row;
      row.source = r.at("source").get<std::string>();
      row.task = r.at("task").get<std::string>();
      row.family = r.at("family").get<std::string>();
      if (!r.at("report").is_null()) row.report = run_report_from_json(r.at("report"));
      if (!r.at("error").is_null()) row.error = r.at("error").get<std::string>();
      b.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("benchmark json: ") + e.what());
  }
  return b;
}

inline Table performance_table(const BenchmarkResult& b) {
  Table t({"Source", "Task", "Model", "Accuracy", "Precision", "Recall", "F1", "Averaging", "Status"});
  for (const auto& r : b.rows) {
    if (!r.report) {
      t.add_row({r.source, r.task, r.family, "error", "error", "error", "error", "-", "failed: " + *r.error});
      continue;
    }
    const auto& p = r.report->performance;
    t.add_row({r.source, r.task, r.report->model_name, fixed(p.accuracy, 4), fixed(p.precision, 4),
               fixed(p.recall, 4), fixed(p.f1, 4), to_string(p.averaging), "ok"});
  }
  return t;
}

inline Table explainability_table(const BenchmarkResult& b) {
  Table t({"Source", "Task", "Model", "SHAP Fidelity MSE", "SHAP Sparsity", "tau", "Explained", "Status"});
  for (const auto& r : b.rows) {
    if (!r.report) {
      t.add_row({r.source, r.task, r.family, "error", "error", "-", "-", "failed: " + *r.error});
      continue;
    }
    if (!r.report->explainability) {
      t.add_row({r.source, r.task, r.report->model_name, "error", "error", "-", "-",
                 "failed: " + r.report->explain_error.value_or("unknown")});
      continue;
    }
    const auto& e = *r.report->explainability;
    char fid[32];
    std::snprintf(fid, sizeof fid, "%.5g", e.fidelity_mse);
    char tau[32];
    std::snprintf(tau, sizeof tau, "%g", e.tau);
    t.add_row({r.source, r.task, r.report->model_name, fid, fixed(e.sparsity_avg, 2), tau,
               std::to_string(e.n_explained), "ok"});
  }
  return t;
}

}  // namespace xplainbench
