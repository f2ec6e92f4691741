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

// Uniform classifier surface over the model families, one-vs-rest
// decomposition, and versioned JSON serialization.
//
// Every model exposes:
//   predict_proba(X)          n x n_classes probabilities
//   explained_output(X, cls)  the scalar that attributions decompose
//   tree_view(cls)            tree ensembles only

#pragma once

#include "xplainbench/forest.hpp"
#include "xplainbench/gbt.hpp"
#include "xplainbench/mlp.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace xplainbench {

enum class ModelFamily { kRandomForest, kGbt, kMlp };

inline const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kRandomForest: return "random_forest";
    case ModelFamily::kGbt: return "gbt";
    case ModelFamily::kMlp: return "mlp";
  }
  return "?";
}

inline std::optional<ModelFamily> parse_family(std::string_view s) {
  if (s == "random_forest") return ModelFamily::kRandomForest;
  if (s == "gbt") return ModelFamily::kGbt;
  if (s == "mlp") return ModelFamily::kMlp;
  return std::nullopt;
}

using FamilyParams = std::variant<ForestParams, GbtParams, MlpParams>;

inline ModelFamily family_of(const FamilyParams& p) {
  return static_cast<ModelFamily>(p.index());
}

inline FamilyParams default_params(ModelFamily f) {
  switch (f) {
    case ModelFamily::kRandomForest: return ForestParams{};
    case ModelFamily::kGbt: return GbtParams{};
    case ModelFamily::kMlp: return MlpParams{};
  }
  return ForestParams{};
}

using BinaryModel = std::variant<ForestModel, GbtModel, MlpModel>;

/// One binary model per class; class k's score is component k's positive
/// class probability, and rows are normalized to sum to one.
class OvrModel {
 public:
  OvrModel() = default;
  OvrModel(std::vector<BinaryModel> components, int n_features)
      : components_(std::move(components)), n_features_(n_features) {
    if (components_.size() < 2) throw ValidationError("ovr: at least 2 components required");
  }

  const std::vector<BinaryModel>& components() const { return components_; }
  int n_classes() const { return static_cast<int>(components_.size()); }
  int n_features() const { return n_features_; }

  /// Per-class scores before normalization.
  Matrix raw_scores(const Matrix& X) const {
    Matrix raw(X.rows(), n_classes());
    for (int k = 0; k < n_classes(); ++k) {
      const Matrix p = std::visit([&](const auto& m) { return m.predict_proba(X); },
                                  components_[static_cast<std::size_t>(k)]);
      raw.col(k) = p.col(1);
    }
    return raw;
  }

  Matrix predict_proba(const Matrix& X) const { return normalize_rows(raw_scores(X)); }

  /// Component k's explained output for its positive class.
  std::vector<double> explained_output(const Matrix& X, int cls) const {
    return std::visit([&](const auto& m) { return m.explained_output(X, 1); },
                      components_.at(static_cast<std::size_t>(cls)));
  }

  std::optional<TreeEnsembleView> tree_view(int cls) const {
    const auto& c = components_.at(static_cast<std::size_t>(cls));
    if (const auto* f = std::get_if<ForestModel>(&c)) return f->tree_view(1);
    if (const auto* g = std::get_if<GbtModel>(&c)) return g->tree_view(1);
    return std::nullopt;
  }

  /// Divides each row by its sum; an all-zero row becomes uniform.
  static Matrix normalize_rows(Matrix m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double s = m.row(r).sum();
      if (s > 0.0)
        m.row(r) /= s;
      else
        m.row(r).setConstant(1.0 / static_cast<double>(m.cols()));
    }
    return m;
  }

 private:
  std::vector<BinaryModel> components_;
  int n_features_ = 0;
};

using Model = std::variant<ForestModel, GbtModel, MlpModel, OvrModel>;

inline Matrix predict_proba(const Model& model, const Matrix& X) {
  return std::visit([&](const auto& m) { return m.predict_proba(X); }, model);
}

inline std::vector<double> explained_output(const Model& model, const Matrix& X, int cls) {
  return std::visit([&](const auto& m) { return m.explained_output(X, cls); }, model);
}

inline int n_classes(const Model& model) {
  return std::visit([](const auto& m) { return m.n_classes(); }, model);
}

inline int n_features(const Model& model) {
  return std::visit([](const auto& m) { return m.n_features(); }, model);
}

inline std::optional<TreeEnsembleView> tree_view(const Model& model, int cls) {
  if (const auto* f = std::get_if<ForestModel>(&model)) return f->tree_view(cls);
  if (const auto* g = std::get_if<GbtModel>(&model)) return g->tree_view(cls);
  if (const auto* o = std::get_if<OvrModel>(&model)) return o->tree_view(cls);
  return std::nullopt;
}

inline std::vector<int> predict(const Model& model, const Matrix& X) {
  const Matrix p = predict_proba(model, X);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index best = 0;
    p.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

inline std::string model_name(const Model& model) {
  switch (model.index()) {
    case 0: return "random_forest";
    case 1: return "gbt";
    case 2: return "mlp";
    default: break;
  }
  const auto& ovr = std::get<OvrModel>(model);
  const char* base = ovr.components().front().index() == 0   ? "random_forest"
                     : ovr.components().front().index() == 1 ? "gbt"
                                                             : "mlp";
  return std::string("ovr(") + base + ")";
}

// ---------------------------------------------------------------------------
// Training

inline BinaryModel fit_binary(const TabularDataset& train, const FamilyParams& params,
                              std::uint64_t seed) {
  return std::visit(
      [&](const auto& p) -> BinaryModel {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ForestParams>) return fit_random_forest(train, p, seed);
        if constexpr (std::is_same_v<P, GbtParams>) return fit_gbt(train, p, seed);
        if constexpr (std::is_same_v<P, MlpParams>) return fit_mlp(train, p, seed);
      },
      params);
}

/// Trains one class-vs-rest binary model per class. Component k uses the
/// derived seed derive_seed(seed, k).
inline OvrModel fit_ovr(const FamilyParams& params, const TabularDataset& train,
                        std::uint64_t seed) {
  train.validate();
  if (train.n_classes() < 2) throw ValidationError("ovr: need at least 2 classes");
  const auto counts = train.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] == 0)
      throw ValidationError("ovr: class '" + train.class_names[k] +
                            "' is absent from the training split");
  std::vector<BinaryModel> components(train.n_classes());
  parallel_for(components.size(), [&](std::size_t k) {
    TabularDataset binary;
    binary.feature_names = train.feature_names;
    binary.X = train.X;
    binary.class_names = {"rest", train.class_names[k]};
    binary.label_name = train.label_name;
    binary.task_kind = TaskKind::kBinary;
    binary.y.reserve(train.size());
    for (int v : train.y) binary.y.push_back(v == static_cast<int>(k) ? 1 : 0);
    components[k] = fit_binary(binary, params, derive_seed(seed, k));
  });
  return OvrModel(std::move(components), static_cast<int>(train.n_features()));
}

/// Trains the requested family; multiclass data with a tree family must go
/// through one-vs-rest.
inline Model fit_model(const TabularDataset& train, const FamilyParams& params,
                       std::uint64_t seed, bool ovr) {
  if (ovr) return fit_ovr(params, train, seed);
  if (train.n_classes() > 2 && family_of(params) != ModelFamily::kMlp)
    throw ValidationError(std::string(to_string(family_of(params))) +
                          ": multiclass data requires ovr=true");
  return std::visit([&](auto&& m) -> Model { return std::move(m); },
                    fit_binary(train, params, seed));
}

// ---------------------------------------------------------------------------
// Hyperparameter JSON (shared with the pipeline spec)

inline nlohmann::json params_to_json(const FamilyParams& params) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ForestParams>) {
          nlohmann::json j;
          j["n_trees"] = p.n_trees;
          j["max_depth"] = p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr);
          j["min_samples_leaf"] = p.min_samples_leaf;
          j["features_per_split"] =
              p.features_per_split ? nlohmann::json(*p.features_per_split) : nlohmann::json("sqrt");
          j["bootstrap"] = p.bootstrap;
          return j;
        } else if constexpr (std::is_same_v<P, GbtParams>) {
          return {{"n_rounds", p.n_rounds},
                  {"max_depth", p.max_depth},
                  {"learning_rate", p.learning_rate},
                  {"lambda_l2", p.lambda_l2},
                  {"min_child_weight", p.min_child_weight}};
        } else {
          return {{"hidden_sizes", p.hidden_sizes},
                  {"epochs", p.epochs},
                  {"batch_size", p.batch_size},
                  {"learning_rate", p.learning_rate},
                  {"output", to_string(p.output)},
                  {"zero_init_output", p.zero_init_output}};
        }
      },
      params);
}

// Lenient reader for model files; the pipeline parser does the strict,
// path-annotated validation of user-authored specs.
inline FamilyParams params_from_json(ModelFamily family, const nlohmann::json& j) {
  switch (family) {
    case ModelFamily::kRandomForest: {
      ForestParams p;
      p.n_trees = j.at("n_trees").get<int>();
      if (!j.at("max_depth").is_null()) p.max_depth = j.at("max_depth").get<int>();
      p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
      if (j.at("features_per_split").is_number())
        p.features_per_split = j.at("features_per_split").get<int>();
      p.bootstrap = j.at("bootstrap").get<bool>();
      return p;
    }
    case ModelFamily::kGbt: {
      GbtParams p;
      p.n_rounds = j.at("n_rounds").get<int>();
      p.max_depth = j.at("max_depth").get<int>();
      p.learning_rate = j.at("learning_rate").get<double>();
      p.lambda_l2 = j.at("lambda_l2").get<double>();
      p.min_child_weight = j.at("min_child_weight").get<double>();
      return p;
    }
    case ModelFamily::kMlp: {
      MlpParams p;
      p.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
      p.epochs = j.at("epochs").get<int>();
      p.batch_size = j.at("batch_size").get<int>();
      p.learning_rate = j.at("learning_rate").get<double>();
      p.output = j.at("output").get<std::string>() == "softmax" ? MlpOutput::kSoftmax
                                                               : MlpOutput::kSigmoid;
      p.zero_init_output = j.at("zero_init_output").get<bool>();
      return p;
    }
  }
  throw ValidationError("unknown model family");
}

// ---------------------------------------------------------------------------
// Model serialization

inline constexpr const char* kModelFormat = "xplainbench-model";
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ValidationError("model: matrix data has wrong length");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

template <class M>
nlohmann::json body_to_json(const M& m) {
  nlohmann::json j;
  if constexpr (std::is_same_v<M, ForestModel>) {
    j["family"] = "random_forest";
    j["n_classes"] = m.n_classes();
    j["n_features"] = m.n_features();
    j["hyperparameters"] = params_to_json(m.params());
    j["trees"] = nlohmann::json::array();
    for (const auto& t : m.trees()) j["trees"].push_back(t.to_json());
  } else if constexpr (std::is_same_v<M, GbtModel>) {
    j["family"] = "gbt";
    j["n_classes"] = 2;
    j["n_features"] = m.n_features();
    j["hyperparameters"] = params_to_json(m.params());
    j["base_score"] = m.base_score();
    j["trees"] = nlohmann::json::array();
    for (const auto& t : m.trees()) j["trees"].push_back(t.to_json());
  } else if constexpr (std::is_same_v<M, MlpModel>) {
    j["family"] = "mlp";
    j["n_classes"] = m.n_classes();
    j["n_features"] = m.n_features();
    j["hyperparameters"] = params_to_json(m.params());
    j["output"] = to_string(m.output());
    j["standardization"] = {{"mean", vector_to_json(m.mean())},
                            {"stddev", vector_to_json(m.stddev())}};
    j["layers"] = nlohmann::json::array();
    for (const auto& l : m.layers())
      j["layers"].push_back({{"weights", matrix_to_json(l.weights)}, {"bias", vector_to_json(l.bias)}});
  } else {
    j["family"] = "ovr";
    j["n_classes"] = m.n_classes();
    j["n_features"] = m.n_features();
    j["components"] = nlohmann::json::array();
    for (const auto& c : m.components())
      j["components"].push_back(std::visit([](const auto& b) { return body_to_json(b); }, c));
  }
  return j;
}

inline BinaryModel binary_from_json(const nlohmann::json& j);

inline Model body_from_json(const nlohmann::json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "ovr") {
    std::vector<BinaryModel> components;
    for (const auto& c : j.at("components")) components.push_back(binary_from_json(c));
    return OvrModel(std::move(components), j.at("n_features").get<int>());
  }
  return std::visit([](auto&& m) -> Model { return std::move(m); }, binary_from_json(j));
}

inline BinaryModel binary_from_json(const nlohmann::json& j) {
  const auto family_name = j.at("family").get<std::string>();
  const auto family = parse_family(family_name);
  if (!family) throw ValidationError("model: unknown family '" + family_name + "'");
  const int n_features = j.at("n_features").get<int>();
  const auto params = params_from_json(*family, j.at("hyperparameters"));
  std::vector<Tree> trees;
  if (j.contains("trees"))
    for (const auto& t : j.at("trees")) trees.push_back(Tree::from_json(t));
  switch (*family) {
    case ModelFamily::kRandomForest:
      return ForestModel(std::move(trees), j.at("n_classes").get<int>(), n_features,
                         std::get<ForestParams>(params));
    case ModelFamily::kGbt:
      return GbtModel(std::move(trees), j.at("base_score").get<double>(), n_features,
                      std::get<GbtParams>(params));
    case ModelFamily::kMlp: {
      std::vector<DenseLayer> layers;
      for (const auto& l : j.at("layers"))
        layers.push_back({matrix_from_json(l.at("weights")), vector_from_json(l.at("bias"))});
      const auto& st = j.at("standardization");
      return MlpModel(std::move(layers), vector_from_json(st.at("mean")),
                      vector_from_json(st.at("stddev")),
                      j.at("output").get<std::string>() == "softmax" ? MlpOutput::kSoftmax
                                                                    : MlpOutput::kSigmoid,
                      j.at("n_classes").get<int>(), std::get<MlpParams>(params));
    }
  }
  throw ValidationError("model: unknown family");
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& model) {
  nlohmann::json j = std::visit([](const auto& m) { return detail::body_to_json(m); }, model);
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kModelFormat)
    throw ValidationError("model: not an xplainbench model document");
  if (j.value("version", 0) != kModelFormatVersion)
    throw ValidationError("model: unsupported format version " + std::to_string(j.value("version", 0)));
  try {
    return detail::body_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: malformed document: ") + e.what());
  }
}

}  // namespace xplainbench
