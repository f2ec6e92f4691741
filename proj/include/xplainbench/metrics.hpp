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

// Classification scores and the two attribution-quality scores:
// fidelity = mean (f(x) - g(x))^2 and sparsity = mean #{i : |phi_i| > tau}.

#pragma once

#include "xplainbench/shap.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xplainbench {

enum class Averaging { kBinaryPositive, kWeighted, kMacro };

inline const char* to_string(Averaging a) {
  switch (a) {
    case Averaging::kBinaryPositive: return "binary_positive";
    case Averaging::kWeighted: return "weighted";
    case Averaging::kMacro: return "macro";
  }
  return "?";
}

inline std::optional<Averaging> parse_averaging(std::string_view s) {
  if (s == "binary_positive") return Averaging::kBinaryPositive;
  if (s == "weighted") return Averaging::kWeighted;
  if (s == "macro") return Averaging::kMacro;
  return std::nullopt;
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  friend bool operator==(const ClassScores&, const ClassScores&) = default;
};

struct PerformanceReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Averaging averaging = Averaging::kWeighted;
  std::vector<ClassScores> per_class;

  friend bool operator==(const PerformanceReport&, const PerformanceReport&) = default;
};

/// Confusion-matrix scores. Undefined ratios are 0. With binary_positive
/// the positive class is index 1.
inline PerformanceReport classification_metrics(std::span<const int> y_true,
                                                std::span<const int> y_pred,
                                                Averaging averaging, int n_classes = 0) {
  if (y_true.empty()) throw ValidationError("metrics: empty input");
  if (y_true.size() != y_pred.size())
    throw ValidationError("metrics: y_true has " + std::to_string(y_true.size()) +
                          " labels but y_pred has " + std::to_string(y_pred.size()));
  int k = n_classes;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_pred[i] < 0) throw ValidationError("metrics: negative label");
    k = std::max({k, y_true[i] + 1, y_pred[i] + 1});
  }
  if (averaging == Averaging::kBinaryPositive && k > 2)
    throw ValidationError("metrics: binary_positive averaging needs at most 2 classes");
  k = std::max(k, 2);

  std::vector<std::size_t> tp(static_cast<std::size_t>(k)), pred(static_cast<std::size_t>(k)),
      truth(static_cast<std::size_t>(k));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto t = static_cast<std::size_t>(y_true[i]);
    const auto p = static_cast<std::size_t>(y_pred[i]);
    ++truth[t];
    ++pred[p];
    if (t == p) {
      ++tp[t];
      ++correct;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  PerformanceReport r;
  r.averaging = averaging;
  r.accuracy = ratio(correct, y_true.size());
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
    ClassScores s;
    s.precision = ratio(tp[c], pred[c]);
    s.recall = ratio(tp[c], truth[c]);
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.support = truth[c];
    r.per_class.push_back(s);
  }
  switch (averaging) {
    case Averaging::kBinaryPositive:
      r.precision = r.per_class[1].precision;
      r.recall = r.per_class[1].recall;
      r.f1 = r.per_class[1].f1;
      break;
    case Averaging::kWeighted:
      for (const auto& s : r.per_class) {
        const double w = ratio(s.support, y_true.size());
        r.precision += w * s.precision;
        r.recall += w * s.recall;
        r.f1 += w * s.f1;
      }
      break;
    case Averaging::kMacro: {
      std::size_t present = 0;
      for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        if (truth[c] == 0 && pred[c] == 0) continue;  // neither seen nor predicted
        const auto& s = r.per_class[c];
        ++present;
        r.precision += s.precision;
        r.recall += s.recall;
        r.f1 += s.f1;
      }
      r.precision /= static_cast<double>(present);
      r.recall /= static_cast<double>(present);
      r.f1 /= static_cast<double>(present);
      break;
    }
  }
  return r;
}

inline constexpr double kDefaultTau = 1e-3;

/// Mean over rows of (fx - (phi0 + sum phi))^2.
inline double shap_fidelity(std::span<const Attribution> rows) {
  if (rows.empty()) throw ValidationError("fidelity: empty attribution list");
  double acc = 0.0;
  for (const auto& a : rows) {
    const double e = a.fx - a.surrogate();
    acc += e * e;
  }
  return acc / static_cast<double>(rows.size());
}

/// Mean over rows of the number of |phi_i| strictly above tau.
inline double shap_sparsity(std::span<const Attribution> rows, double tau = kDefaultTau) {
  if (rows.empty()) throw ValidationError("sparsity: empty attribution list");
  if (!(tau >= 0.0)) throw ValidationError("sparsity: tau must be >= 0");
  std::size_t count = 0;
  for (const auto& a : rows)
    for (double p : a.phi)
      if (std::abs(p) > tau) ++count;
  return static_cast<double>(count) / static_cast<double>(rows.size());
}

struct ExplainabilityReport {
  double fidelity_mse = 0.0;
  double sparsity_avg = 0.0;
  double tau = kDefaultTau;
  std::size_t n_explained = 0;

  friend bool operator==(const ExplainabilityReport&, const ExplainabilityReport&) = default;
};

inline ExplainabilityReport explainability_report(std::span<const Attribution> rows, double tau) {
  return {shap_fidelity(rows), shap_sparsity(rows, tau), tau, rows.size()};
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const PerformanceReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.per_class)
    per.push_back({{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
  return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
          {"f1", r.f1},             {"averaging", to_string(r.averaging)}, {"per_class", per}};
}

inline PerformanceReport performance_from_json(const nlohmann::json& j) {
  PerformanceReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  const auto avg = parse_averaging(j.at("averaging").get<std::string>());
  if (!avg) throw ValidationError("performance report: unknown averaging");
  r.averaging = *avg;
  for (const auto& s : j.at("per_class"))
    r.per_class.push_back({s.at("precision").get<double>(), s.at("recall").get<double>(),
                           s.at("f1").get<double>(), s.at("support").get<std::size_t>()});
  return r;
}

inline nlohmann::json to_json(const ExplainabilityReport& r) {
  return {{"fidelity_mse", r.fidelity_mse},
          {"sparsity_avg", r.sparsity_avg},
          {"tau", r.tau},
          {"n_explained", r.n_explained}};
}

inline ExplainabilityReport explainability_from_json(const nlohmann::json& j) {
  return {j.at("fidelity_mse").get<double>(), j.at("sparsity_avg").get<double>(),
          j.at("tau").get<double>(), j.at("n_explained").get<std::size_t>()};
}

// ---------------------------------------------------------------------------
// Aligned tables

enum class TableStyle { kText, kMarkdown, kCsv };

/// Rows of string cells rendered with padded columns (text), pipes
/// (markdown) or commas (csv). Numeric columns are right-aligned.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    cells.resize(header_.size());
    rows_.push_back(std::move(cells));
  }

  std::size_t rows() const { return rows_.size(); }

  std::string render(TableStyle style) const {
    std::string out;
    if (style == TableStyle::kCsv) {
      out += join(header_, ",", nullptr);
      for (const auto& r : rows_) out += join(r, ",", nullptr);
      return out;
    }
    std::vector<std::size_t> width(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) {
      width[c] = header_[c].size();
      for (const auto& r : rows_) width[c] = std::max(width[c], r[c].size());
    }
    if (style == TableStyle::kText) {
      out += join(header_, "  ", &width);
      std::string rule;
      for (std::size_t c = 0; c < width.size(); ++c)
        rule += std::string(width[c], '-') + (c + 1 < width.size() ? "  " : "");
      out += rule + '\n';
      for (const auto& r : rows_) out += join(r, "  ", &width);
      return out;
    }
    out += "| " + join_md(header_, width);
    std::string rule = "|";
    for (std::size_t c = 0; c < width.size(); ++c)
      rule += (numeric_column(c) ? std::string(width[c] + 1, '-') + ":" : ":" + std::string(width[c] + 1, '-')) + "|";
    out += rule + '\n';
    for (const auto& r : rows_) out += "| " + join_md(r, width);
    return out;
  }

 private:
  static bool is_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
  }

  bool numeric_column(std::size_t c) const {
    if (rows_.empty()) return false;
    for (const auto& r : rows_)
      if (!is_numeric(r[c]) && r[c] != "-" && r[c] != "error") return false;
    return true;
  }

  std::string pad(const std::string& s, std::size_t c, std::size_t w) const {
    const std::string fill(w - std::min(w, s.size()), ' ');
    return numeric_column(c) ? fill + s : s + fill;
  }

  std::string join(const std::vector<std::string>& cells, const char* sep,
                   const std::vector<std::size_t>* width) const {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) line += sep;
      line += width ? pad(cells[c], c, (*width)[c]) : cells[c];
    }
    while (width && !line.empty() && line.back() == ' ') line.pop_back();
    return line + '\n';
  }

  std::string join_md(const std::vector<std::string>& cells, const std::vector<std::size_t>& width) const {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) line += pad(cells[c], c, width[c]) + " | ";
    line.pop_back();
    return line + '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Per-class precision / recall / F1 / support table.
inline Table per_class_table(const PerformanceReport& r, const std::vector<std::string>& class_names) {
  Table t({"class", "precision", "recall", "f1", "support"});
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    t.add_row({c < class_names.size() ? class_names[c] : std::to_string(c), fixed(s.precision, 4),
               fixed(s.recall, 4), fixed(s.f1, 4), std::to_string(s.support)});
  }
  return t;
}

}  // namespace xplainbench
