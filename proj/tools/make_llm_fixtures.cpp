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

// Writes the offline replay fixtures for every (task, family) pair.
//
// The replies are hand-authored stand-ins for model output. Request hashes
// are computed from the real rendered prompts, so the fixtures replay in
// strict mode. multiclass_gbt.json scripts one invalid reply (ovr disabled on
// a multiclass tree model) followed by a corrected one.
//
// usage: make_llm_fixtures OUT_DIR [MODEL_NAME]

#include "xplainbench/llm_client.hpp"

#include <filesystem>
#include <iostream>

namespace xb = xplainbench;

namespace {

nlohmann::json reply_spec(xb::PromptTask task, const std::string& family) {
  const bool binary = task == xb::PromptTask::kBinary;
  nlohmann::json spec = {
      {"spec_version", 1},
      {"source", "fixture"},
      {"task", binary ? nlohmann::json{{"kind", "binary_alertness"}, {"n", 20000}, {"seed", 42}}
                      : nlohmann::json{{"kind", "yeast_multiclass"}, {"path", "data/yeast.csv"}}},
      {"split", {{"test_fraction", 0.2}, {"seed", 42}}},
      {"metrics", {{"averaging", binary ? "binary_positive" : "weighted"}}},
  };
  nlohmann::json model = {{"family", family}, {"seed", 42}};
  if (family == "random_forest") model["hyperparameters"] = {{"n_trees", 100}, {"max_depth", nullptr}};
  if (family == "gbt") model["hyperparameters"] = {{"n_rounds", 100}, {"max_depth", 3}, {"learning_rate", 0.1}};
  if (family == "mlp") model["hyperparameters"] = {{"hidden_sizes", {64}}, {"epochs", 20}};
  if (!binary && family != "mlp") model["ovr"] = true;
  spec["model"] = model;
  spec["explainer"] = {{"method", family == "mlp" ? "kernel" : "tree"},
                       {"background_size", 100},
                       {"eval_sample", {{"size", 200}, {"seed", 42}}}};
  return spec;
}

std::string reply_text(const nlohmann::json& spec, const std::string& family) {
  return "Here is a pipeline specification that trains and evaluates the " + family +
         " model with a random 80/20 split and reports accuracy, precision, recall and F1.\n\n```json\n" +
         spec.dump(2) + "\n```\n\nThe runner will execute it and compute the metrics.\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_llm_fixtures OUT_DIR [MODEL_NAME]\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  const std::string model = argc > 2 ? argv[2] : xb::LlmRequestOptions{}.model;
  std::filesystem::create_directories(dir);

  for (auto task : {xb::PromptTask::kBinary, xb::PromptTask::kMulticlass}) {
    for (const std::string family : {"random_forest", "gbt", "mlp"}) {
      const std::string prompt = xb::render_prompt(task, family);
      xb::ChatRequest req{model, 1.0, {{"user", prompt}}};
      xb::Fixture fx;
      const auto good = reply_spec(task, family);
      if (task == xb::PromptTask::kMulticlass && family == "gbt") {
        auto bad = good;
        bad["model"]["ovr"] = false;
        const std::string bad_reply = reply_text(bad, family);
        std::vector<std::string> errors;
        try {
          xb::parse_spec(*xb::extract_fenced_json(bad_reply));
          std::cerr << "corrupted spec unexpectedly valid\n";
          return 1;
        } catch (const xb::SpecError& e) {
          for (const auto& i : e.issues()) errors.push_back(xb::to_string(i));
        }
        fx.exchanges.push_back({xb::request_hash(req), req, bad_reply});
        req.messages.push_back({"assistant", bad_reply});
        req.messages.push_back({"user", xb::retry_message(errors)});
      }
      fx.exchanges.push_back({xb::request_hash(req), req, reply_text(good, family)});
      const auto path = dir / (std::string(xb::to_string(task)) + "_" + family + ".json");
      xb::save_fixture(fx, path.string());
      std::cout << "wrote " << path.string() << " (" << fx.exchanges.size() << " exchanges)\n";
    }
  }
  return 0;
}
