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

// Prompt rendering, chat-completions transport, fixture record/replay, and
// the request loop that turns a model reply into a validated PipelineSpec.

#pragma once

#include "xplainbench/pipeline.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace xplainbench {

enum class PromptTask { kBinary, kMulticlass };

inline const char* to_string(PromptTask t) { return t == PromptTask::kBinary ? "binary" : "multiclass"; }

inline std::optional<PromptTask> parse_prompt_task(std::string_view s) {
  if (s == "binary") return PromptTask::kBinary;
  if (s == "multiclass") return PromptTask::kMulticlass;
  return std::nullopt;
}

/// Families a prompt can name. lstm renders but the executor rejects it.
inline const std::vector<std::string>& prompt_families() {
  static const std::vector<std::string> f = {"random_forest", "gbt", "mlp", "lstm"};
  return f;
}

inline bool family_supported_by_executor(std::string_view family) { return family != "lstm"; }

namespace detail {

// Line breaks follow the original prompt layout; {MODEL} is the family slot.
inline constexpr std::string_view kBinaryPrompt =
    "chat I have a csv with 200k rows the rows are analyzed\n"
    "below heart_rate,yawning,looks_straight,eyes_closed,alert\n"
    "heart_rate = human heart rate (positive integer\n"
    "usually no more than 160)\n"
    "yawning = boolean value that indicates if the person is\n"
    "yawning in each row or not 0 means yes 1 means no\n"
    "looks_straight = boolean value that indicates if the\n"
    "person is looking straight ahead or not\n"
    ", again 0 means no 1 means\n"
    "yes eyes_closed = boolean that indicates\n"
    "if the eyes of the\n"
    "person are closed 0 means yes 1 means no\n"
    "I want you to train and evaluate (split the dataset\n"
    "randomly) an {MODEL} model.\n"
    "for the evaluation I want the accuracy, the precision,\n"
    "the recall and F1 score that the model achieved\n";

inline constexpr std::string_view kMulticlassPrompt =
    "I have a CSV file called yeast.csv.\n"
    "It has 8 columns and 1484 rows, with the following\n"
    "characteristics Instances: 1,484 yeast proteins (rows)\n"
    "Features: 8 numeric features (attributes):\n"
    "mcg: McGeoch's method for signal sequence recognition\n"
    "gvh: von Heijne's method\n"
    "alm: Score for the presence of an Aliphatic region\n"
    "mit: Score for a mitochondrial targeting sequence\n"
    "erl, pox, vac, etc.\n"
    "Label (target): Protein localization site (e.g., CYT,\n"
    "NUC, MIT, ME1, etc.)\n"
    "Task: Multi-class classification (predict\n"
    "protein location from numeric features)\n"
    "The features are numeric, and the last\n"
    "column is the target (protein localization site). I want\n"
    "to build a classification model using {MODEL}\n"
    "to predict the target. Can you help\n"
    "me with the code to train and evaluate the model?\n"
    "for the evaluation I want the accuracy, the precision,\n"
    "the recall and F1 score that the model achieved\n";

inline std::string family_label(PromptTask task, std::string_view family) {
  static const std::map<std::string, std::pair<const char*, const char*>, std::less<>> labels = {
      {"random_forest", {"random forest", "Random Forest"}},
      {"gbt", {"xgboost", "XGBoost"}},
      {"mlp", {"mlp", "MLP"}},
      {"lstm", {"lstm", "LSTM"}},
  };
  const auto it = labels.find(family);
  if (it == labels.end())
    throw ValidationError("prompt: unknown family '" + std::string(family) +
                          "' (supported: random_forest, gbt, mlp, lstm)");
  return task == PromptTask::kBinary ? it->second.first : it->second.second;
}

}  // namespace detail

/// Fixed instructions appended to every prompt: answer with one fenced JSON
/// pipeline spec. Includes the schema so any endpoint can comply.
inline std::string response_format_suffix(PromptTask task, std::string_view family) {
  const bool binary = task == PromptTask::kBinary;
  std::string s;
  s += "Instead of code, answer with exactly one pipeline specification in a\n";
  s += "fenced ```json block. The runner executes the specification; prose\n";
  s += "outside the block is ignored. Schema (only spec_version, task.kind and\n";
  s += "model.family are required; omitted fields take the defaults shown):\n";
  s += "{\n";
  s += "  \"spec_version\": 1,\n";
  s += "  \"source\": string,\n";
  if (binary) {
    s += "  \"task\": {\"kind\": \"binary_alertness\", \"n\": int = 20000, \"seed\": int = 42,\n";
    s += "           \"hr_band_low\": int = 60, \"hr_band_high\": int = 100},\n";
  } else {
    s += "  \"task\": {\"kind\": \"yeast_multiclass\", \"path\": string = \"data/yeast.csv\"},\n";
  }
  s += "  \"split\": {\"test_fraction\": number in (0,1) = 0.2, \"seed\": int = 42},\n";
  s += "  \"model\": {\"family\": \"random_forest\" | \"gbt\" | \"mlp\", \"seed\": int = 42,\n";
  s += binary ? "            \"ovr\": bool = false,\n" : "            \"ovr\": bool (must be true for random_forest and gbt),\n";
  s += "            \"hyperparameters\": {\n";
  s += "              random_forest: n_trees, max_depth (int or null), min_samples_leaf,\n";
  s += "                             features_per_split (int or \"sqrt\"), bootstrap\n";
  s += "              gbt: n_rounds, max_depth, learning_rate, lambda_l2, min_child_weight\n";
  s += "              mlp: hidden_sizes (list of int), epochs, batch_size, learning_rate,\n";
  s += "                   output (\"sigmoid\" | \"softmax\"), zero_init_output\n";
  s += "            }},\n";
  s += "  \"explainer\": {\"method\": \"tree\" | \"kernel\" | \"exact\", \"background_size\": int = 100,\n";
  s += "                \"seed\": int = 42, \"budget\": int or null = null,\n";
  s += binary ? "                \"target\": \"positive_class_prob\" | \"predicted_class_prob\" | {\"class_index\": int},\n"
              : "                \"target\": \"predicted_class_prob\" | {\"class_index\": int},\n";
  s += "                \"eval_sample\": {\"size\": int = 200, \"seed\": int = 42}},\n";
  s += binary ? "  \"metrics\": {\"averaging\": \"binary_positive\" | \"weighted\" | \"macro\", \"tau\": number = 0.001}\n"
              : "  \"metrics\": {\"averaging\": \"weighted\" | \"macro\", \"tau\": number = 0.001}\n";
  s += "}\n";
  s += "Use model.family \"";
  s += family;
  s += "\".\n";
  return s;
}

/// Prompt text for one (task, family) pair: the study prompt with the
/// family substituted, a blank line, then the response-format suffix.
inline std::string render_prompt(PromptTask task, std::string_view family) {
  const std::string label = detail::family_label(task, family);
  std::string text(task == PromptTask::kBinary ? detail::kBinaryPrompt : detail::kMulticlassPrompt);
  const auto at = text.find("{MODEL}");
  text.replace(at, 7, label);
  return text + "\n" + response_format_suffix(task, family);
}

// ---------------------------------------------------------------------------
// Chat wire format

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  double temperature = 1.0;
  std::vector<ChatMessage> messages;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

inline nlohmann::json to_json(const ChatRequest& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", r.model}, {"temperature", r.temperature}, {"messages", msgs}};
}

inline ChatRequest chat_request_from_json(const nlohmann::json& j) {
  ChatRequest r;
  r.model = j.at("model").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  for (const auto& m : j.at("messages"))
    r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  return r;
}

/// SHA-256 of the canonical request body. Credentials are never part of it.
inline std::string request_hash(const ChatRequest& r) { return sha256_hex(to_json(r).dump()); }

/// Failure talking to the model or interpreting its reply. Carries the raw
/// reply (possibly empty) for audit.
class LlmError : public RuntimeFailure {
 public:
  LlmError(const std::string& message, std::string raw_response = {})
      : RuntimeFailure(message), raw_response_(std::move(raw_response)) {}

  const std::string& raw_response() const { return raw_response_; }

 private:
  std::string raw_response_;
};

class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

class ExtractionError : public LlmError {
 public:
  using LlmError::LlmError;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Reply text of the first choice.
  virtual std::string complete(const ChatRequest& request) = 0;
  /// Endpoint URL or fixture path, for audit records and messages.
  virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpOptions {
  std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
  std::string api_key;   // sent as a bearer token; never recorded
  std::chrono::seconds timeout{120};
  int max_attempts = 3;
  std::chrono::milliseconds backoff{1000};  // doubled after each failed attempt
};

inline constexpr const char* kApiKeyEnv = "XPLAINBENCH_API_KEY";

inline std::string api_key_from_env() {
  const char* v = std::getenv(kApiKeyEnv);
  return v ? v : "";
}

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedUrl parse_endpoint(const std::string& url) {
  const auto sep = url.find("://");
  if (sep == std::string::npos) throw TransportError("invalid endpoint URL '" + url + "': missing scheme");
  const std::string scheme = url.substr(0, sep);
  if (scheme != "http" && scheme != "https")
    throw TransportError("invalid endpoint URL '" + url + "': scheme must be http or https");
  const auto path_at = url.find('/', sep + 3);
  ParsedUrl p;
  p.scheme_host_port = url.substr(0, path_at);
  p.path = path_at == std::string::npos ? "/" : url.substr(path_at);
  if (p.scheme_host_port.size() <= sep + 3) throw TransportError("invalid endpoint URL '" + url + "': missing host");
  return p;
}

/// POSTs chat-completions requests; retries connection failures, 429 and
/// 5xx with exponential backoff.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(HttpOptions opts) : opts_(std::move(opts)), url_(parse_endpoint(opts_.endpoint)) {}

  std::string complete(const ChatRequest& request) override {
    const std::string body = to_json(request).dump();
    std::string last_error;
    auto delay = opts_.backoff;
    for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
      httplib::Client client(url_.scheme_host_port);
      client.set_connection_timeout(opts_.timeout);
      client.set_read_timeout(opts_.timeout);
      client.set_write_timeout(opts_.timeout);
      httplib::Headers headers;
      if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);
      const auto res = client.Post(url_.path, headers, body, "application/json");
      if (!res) {
        last_error = "connection failed: " + httplib::to_string(res.error());
      } else if (res->status == 200) {
        return parse_reply(res->body);
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else {
        throw TransportError(describe() + ": HTTP " + std::to_string(res->status), res->body);
      }
      if (attempt < opts_.max_attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
    throw TransportError(describe() + ": " + last_error + " after " + std::to_string(opts_.max_attempts) +
                         " attempts");
  }

  std::string describe() const override { return opts_.endpoint; }

  static std::string parse_reply(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed chat-completions response: ") + e.what(), body);
    }
  }

 private:
  HttpOptions opts_;
  ParsedUrl url_;
};

// ---------------------------------------------------------------------------
// Fixtures
//
// {
//   "format": "xplainbench-llm-fixture", "version": 1,
//   "exchanges": [{"request_hash": hex, "request": {...}, "response": text}]
// }

inline constexpr const char* kFixtureFormat = "xplainbench-llm-fixture";

struct FixtureExchange {
  std::string request_hash;
  ChatRequest request;
  std::string response;

  friend bool operator==(const FixtureExchange&, const FixtureExchange&) = default;
};

struct Fixture {
  std::vector<FixtureExchange> exchanges;

  friend bool operator==(const Fixture&, const Fixture&) = default;
};

inline std::string fixture_to_text(const Fixture& f) {
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : f.exchanges)
    ex.push_back({{"request_hash", e.request_hash}, {"request", to_json(e.request)}, {"response", e.response}});
  return nlohmann::json{{"format", kFixtureFormat}, {"version", 1}, {"exchanges", ex}}.dump(2) + "\n";
}

inline Fixture fixture_from_text(std::string_view text, const std::string& name = "fixture") {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kFixtureFormat || j.at("version").get<int>() != 1)
      throw ValidationError(name + ": not an xplainbench-llm-fixture v1 document");
    Fixture f;
    for (const auto& e : j.at("exchanges"))
      f.exchanges.push_back({e.at("request_hash").get<std::string>(), chat_request_from_json(e.at("request")),
                             e.at("response").get<std::string>()});
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(name + ": malformed fixture: " + e.what());
  }
}

inline Fixture load_fixture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open fixture '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return fixture_from_text(ss.str(), path);
}

inline void save_fixture(const Fixture& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write fixture '" + path + "'");
  out << fixture_to_text(f);
  if (!out) throw IoError("failed writing fixture '" + path + "'");
}

/// Serves recorded replies; never touches the network. Strict mode requires
/// the request hash to match a recorded exchange; otherwise unmatched
/// requests take the next unused exchange in file order.
class ReplayTransport : public Transport {
 public:
  ReplayTransport(Fixture fixture, std::string name, bool strict = true)
      : fixture_(std::move(fixture)), name_(std::move(name)), strict_(strict), used_(fixture_.exchanges.size(), false) {}

  std::string complete(const ChatRequest& request) override {
    const std::string h = request_hash(request);
    for (std::size_t i = 0; i < fixture_.exchanges.size(); ++i)
      if (!used_[i] && fixture_.exchanges[i].request_hash == h) {
        used_[i] = true;
        return fixture_.exchanges[i].response;
      }
    if (strict_)
      throw TransportError("replay " + name_ + ": no recorded exchange for request hash " + h + " (strict mode)");
    for (std::size_t i = 0; i < fixture_.exchanges.size(); ++i)
      if (!used_[i]) {
        used_[i] = true;
        return fixture_.exchanges[i].response;
      }
    throw TransportError("replay " + name_ + ": fixture exhausted");
  }

  std::string describe() const override { return "replay:" + name_; }

 private:
  Fixture fixture_;
  std::string name_;
  bool strict_;
  std::vector<bool> used_;
};

/// Forwards to another transport and keeps every exchange for saving.
class RecordingTransport : public Transport {
 public:
  explicit RecordingTransport(Transport& inner) : inner_(inner) {}

  std::string complete(const ChatRequest& request) override {
    std::string reply = inner_.complete(request);
    recorded_.exchanges.push_back({request_hash(request), request, reply});
    return reply;
  }

  std::string describe() const override { return inner_.describe(); }
  const Fixture& recorded() const { return recorded_; }

 private:
  Transport& inner_;
  Fixture recorded_;
};

// ---------------------------------------------------------------------------
// Extraction and the request loop

/// Body of the first ``` fence whose info string is empty or "json".
inline std::optional<std::string> extract_fenced_json(std::string_view reply) {
  std::size_t pos = 0;
  while (true) {
    const auto open = reply.find("```", pos);
    if (open == std::string_view::npos) return std::nullopt;
    const auto eol = reply.find('\n', open + 3);
    if (eol == std::string_view::npos) return std::nullopt;
    std::string info(detail::trim(reply.substr(open + 3, eol - open - 3)));
    for (auto& c : info) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto close = reply.find("```", eol + 1);
    if (close == std::string_view::npos) return std::nullopt;
    if (info.empty() || info == "json") return std::string(reply.substr(eol + 1, close - eol - 1));
    pos = close + 3;
  }
}

struct ChatAttempt {
  ChatRequest request;
  std::string response;
  double seconds = 0.0;
  std::vector<std::string> errors;  // validation problems found in this reply
};

struct ChatExchange {
  std::string endpoint;
  std::string model;
  double temperature = 1.0;
  std::vector<ChatAttempt> attempts;

  int retry_count() const { return static_cast<int>(attempts.size()) - 1; }
  const std::string& raw_response() const { return attempts.back().response; }
};

inline nlohmann::json to_json(const ChatExchange& x, bool include_timings = true) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : x.attempts) {
    nlohmann::json j = {{"request", to_json(a.request)},
                        {"request_hash", request_hash(a.request)},
                        {"response", a.response},
                        {"errors", a.errors}};
    if (include_timings) j["seconds"] = a.seconds;
    attempts.push_back(std::move(j));
  }
  return {{"endpoint", x.endpoint},
          {"model", x.model},
          {"temperature", x.temperature},
          {"retry_count", x.retry_count()},
          {"attempts", attempts}};
}

struct LlmRequestOptions {
  std::string model = "default";
  double temperature = 1.0;
  int max_retries = 2;
};

inline std::string retry_message(const std::vector<std::string>& errors) {
  std::string s = "The pipeline specification is invalid:\n";
  for (const auto& e : errors) s += "- " + e + "\n";
  s += "Reply with a corrected specification in a single fenced ```json block.";
  return s;
}

/// Sends the prompt, extracts and validates the spec, and re-prompts with the
/// validation errors up to max_retries times.
inline std::pair<PipelineSpec, ChatExchange> request_pipeline(Transport& transport, const std::string& prompt,
                                                              const LlmRequestOptions& opts = {}) {
  ChatExchange x;
  x.endpoint = transport.describe();
  x.model = opts.model;
  x.temperature = opts.temperature;
  ChatRequest req{opts.model, opts.temperature, {{"user", prompt}}};
  for (int attempt = 0;; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string reply = transport.complete(req);
    x.attempts.push_back({req, reply, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), {}});
    const auto block = extract_fenced_json(reply);
    if (!block) throw ExtractionError("no fenced JSON block in reply from " + transport.describe(), reply);
    try {
      return {parse_spec(*block), std::move(x)};
    } catch (const SpecError& e) {
      for (const auto& i : e.issues())
        x.attempts.back().errors.push_back(to_string(i));
      if (attempt >= opts.max_retries)
        throw LlmError("spec still invalid after " + std::to_string(attempt) + " retries from " +
                           transport.describe() + ": " + e.what(),
                       reply);
      req.messages.push_back({"assistant", reply});
      req.messages.push_back({"user", retry_message(x.attempts.back().errors)});
    }
  }
}

}  // namespace xplainbench
