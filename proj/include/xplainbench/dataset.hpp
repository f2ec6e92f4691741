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

// Tabular datasets: the synthetic driver-alertness generator, CSV loading
// (yeast and generic), CSV export, seeded splitting and a correlation
// diagnostic.

#pragma once

#include "xplainbench/common.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xplainbench {

enum class TaskKind { kBinary, kMulticlass };

struct TabularDataset {
  std::vector<std::string> feature_names;
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> class_names;
  std::string label_name = "label";
  TaskKind task_kind = TaskKind::kBinary;

  std::size_t size() const { return y.size(); }
  std::size_t n_features() const { return feature_names.size(); }
  std::size_t n_classes() const { return class_names.size(); }

  // Throws ValidationError if any structural invariant is broken.
  void validate() const {
    if (static_cast<std::size_t>(X.rows()) != y.size())
      throw ValidationError("dataset: X has " + std::to_string(X.rows()) + " rows but y has " +
                            std::to_string(y.size()));
    if (static_cast<std::size_t>(X.cols()) != feature_names.size())
      throw ValidationError("dataset: X has " + std::to_string(X.cols()) + " columns but " +
                            std::to_string(feature_names.size()) + " feature names");
    if (!X.allFinite()) throw ValidationError("dataset: X contains non-finite values");
    for (int label : y)
      if (label < 0 || static_cast<std::size_t>(label) >= class_names.size())
        throw ValidationError("dataset: label index " + std::to_string(label) + " out of range");
    if (task_kind == TaskKind::kBinary && class_names.size() != 2)
      throw ValidationError("dataset: binary task needs exactly 2 classes, got " +
                            std::to_string(class_names.size()));
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (int label : y) ++counts[static_cast<std::size_t>(label)];
    return counts;
  }
};

/// Rows of `ds` at `indices`, in that order.
inline TabularDataset subset(const TabularDataset& ds, std::span<const std::size_t> indices) {
  TabularDataset out;
  out.feature_names = ds.feature_names;
  out.class_names = ds.class_names;
  out.label_name = ds.label_name;
  out.task_kind = ds.task_kind;
  out.X.resize(static_cast<Eigen::Index>(indices.size()), ds.X.cols());
  out.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(static_cast<Eigen::Index>(indices[i]));
    out.y.push_back(ds.y[indices[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic driver alertness data

struct AlertnessGenConfig {
  std::size_t n = 20000;
  std::uint64_t seed = 42;
  int hr_band_low = 60;
  int hr_band_high = 100;

  void validate() const {
    if (n < 1) throw ValidationError("alertness: n must be >= 1");
    if (hr_band_low < 40 || hr_band_high > 160 || hr_band_low >= hr_band_high)
      throw ValidationError("alertness: heart-rate band must satisfy 40 <= low < high <= 160, got [" +
                            std::to_string(hr_band_low) + ", " + std::to_string(hr_band_high) + "]");
  }
};

inline constexpr int kHeartRateMin = 40;
inline constexpr int kHeartRateMax = 160;

/// Label rule shared by the generator and its tests. `in_band` is 1 when the
/// heart rate lies inside the alert-compatible band.
constexpr int alertness_label(int yawning, int looks_straight, int eyes_closed, int in_band) {
  const int sum = yawning + looks_straight + eyes_closed + in_band;
  return (sum >= 3 || (sum == 2 && in_band == 1)) ? 1 : 0;
}

inline TabularDataset generate_alertness(const AlertnessGenConfig& cfg) {
  cfg.validate();
  TabularDataset ds;
  ds.feature_names = {"heart_rate", "yawning", "looks_straight", "eyes_closed"};
  ds.class_names = {"0", "1"};
  ds.label_name = "alert";
  ds.task_kind = TaskKind::kBinary;
  ds.X.resize(static_cast<Eigen::Index>(cfg.n), 4);
  ds.y.resize(cfg.n);

  const int below = cfg.hr_band_low - kHeartRateMin;   // values 40 .. low-1
  const int above = kHeartRateMax - cfg.hr_band_high;  // values high+1 .. 160
  Rng rng(cfg.seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> in_band_hr(cfg.hr_band_low, cfg.hr_band_high);
  std::uniform_int_distribution<int> out_band_pick(0, std::max(0, below + above - 1));

  for (std::size_t i = 0; i < cfg.n; ++i) {
    int hr = 0;
    const bool want_in_band = coin(rng);
    if (want_in_band || below + above == 0) {
      hr = in_band_hr(rng);
    } else {
      const int k = out_band_pick(rng);
      hr = k < below ? kHeartRateMin + k : cfg.hr_band_high + 1 + (k - below);
    }
    const int yawning = coin(rng);
    const int looks_straight = coin(rng);
    const int eyes_closed = coin(rng);
    const int in_band = (hr >= cfg.hr_band_low && hr <= cfg.hr_band_high) ? 1 : 0;
    const auto r = static_cast<Eigen::Index>(i);
    ds.X(r, 0) = hr;
    ds.X(r, 1) = yawning;
    ds.X(r, 2) = looks_straight;
    ds.X(r, 3) = eyes_closed;
    ds.y[i] = alertness_label(yawning, looks_straight, eyes_closed, in_band);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                        s.front() == '\n' || s.front() == '"'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '\n' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

// Comma-separated when the line has a comma, otherwise whitespace-separated
// (the distribution format of the UCI yeast file).
inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  if (line.find(',') != std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      out.emplace_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else {
    std::istringstream ss{std::string(line)};
    std::string tok;
    while (ss >> tok) out.push_back(tok);
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct CsvRow {
  std::size_t line_number;
  std::vector<std::string> fields;
};

inline std::vector<CsvRow> read_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line_number == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (trim(line).empty()) continue;
    rows.push_back({line_number, split_fields(line)});
  }
  return rows;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Assigns class indices. Integer-valued labels are ordered numerically so
// that "0"/"1" map to indices 0/1; anything else keeps first-appearance order.
inline std::pair<std::vector<std::string>, std::vector<int>> encode_labels(
    const std::vector<std::string>& raw) {
  bool all_integer = !raw.empty();
  for (const auto& s : raw) {
    const auto v = parse_double(s);
    if (!v || std::floor(*v) != *v) {
      all_integer = false;
      break;
    }
  }
  std::vector<std::string> names;
  std::map<std::string, int> index;
  if (all_integer) {
    std::map<double, std::string> ordered;
    for (const auto& s : raw) ordered.emplace(*parse_double(s), s);
    for (const auto& [value, name] : ordered) {
      index.emplace(name, static_cast<int>(names.size()));
      names.push_back(name);
    }
    // Spellings like "1" and "1.0" share a class.
    for (const auto& s : raw)
      if (!index.count(s)) index.emplace(s, index.at(ordered.at(*parse_double(s))));
  } else {
    for (const auto& s : raw)
      if (index.emplace(s, static_cast<int>(names.size())).second) names.push_back(s);
  }
  std::vector<int> y;
  y.reserve(raw.size());
  for (const auto& s : raw) y.push_back(index.at(s));
  return {names, y};
}

inline void require_all_classes(const TabularDataset& train, const char* who) {
  if (train.size() < 2) throw ValidationError(std::string(who) + ": need at least 2 training rows");
  const auto counts = train.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw ValidationError(std::string(who) + ": class '" + train.class_names[c] +
                            "' has no training rows");
}

}  // namespace detail

inline const std::vector<std::string>& yeast_feature_names() {
  static const std::vector<std::string> names = {"mcg", "gvh", "alm", "mit",
                                                 "erl", "pox", "vac", "nuc"};
  return names;
}

/// Loads the yeast localization data. Accepts 9 columns (8 features, label
/// last) or 10 columns (leading sequence name), comma or whitespace separated,
/// with or without a header row.
inline TabularDataset load_yeast_csv(const std::string& path) {
  auto rows = detail::read_rows(path);
  if (rows.empty()) throw ValidationError("yeast: '" + path + "' is empty");

  const std::size_t width = rows.front().fields.size();
  if (width != 9 && width != 10)
    throw ValidationError("yeast: line " + std::to_string(rows.front().line_number) +
                          ": expected 9 or 10 columns, got " + std::to_string(width));
  const std::size_t offset = width == 10 ? 1 : 0;

  // Header: the first row whose feature cells are not all numeric.
  bool header = false;
  for (std::size_t c = offset; c < offset + 8; ++c)
    if (!detail::parse_double(rows.front().fields[c])) header = true;
  if (header) rows.erase(rows.begin());
  if (rows.empty()) throw ValidationError("yeast: '" + path + "' contains no data rows");

  TabularDataset ds;
  ds.feature_names = yeast_feature_names();
  ds.label_name = "localization";
  ds.task_kind = TaskKind::kMulticlass;
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), 8);
  std::vector<std::string> labels;
  labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != width)
      throw ValidationError("yeast: line " + std::to_string(row.line_number) + ": expected " +
                            std::to_string(width) + " columns, got " +
                            std::to_string(row.fields.size()));
    for (std::size_t c = 0; c < 8; ++c) {
      const auto v = detail::parse_double(row.fields[offset + c]);
      if (!v)
        throw ValidationError("yeast: line " + std::to_string(row.line_number) +
                              ": non-numeric value '" + row.fields[offset + c] + "' for " +
                              ds.feature_names[c]);
      ds.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
    labels.push_back(row.fields[offset + 8]);
  }
  // Yeast keeps first-appearance order even though names are never numeric.
  std::map<std::string, int> index;
  for (const auto& s : labels)
    if (index.emplace(s, static_cast<int>(ds.class_names.size())).second)
      ds.class_names.push_back(s);
  for (const auto& s : labels) ds.y.push_back(index.at(s));
  if (ds.class_names.size() == 2) ds.task_kind = TaskKind::kBinary;
  ds.validate();
  return ds;
}

/// Generic loader. `label_column` selects the target by header name; empty
/// means the last column. Every other column must be numeric.
inline TabularDataset load_csv(const std::string& path, const std::string& label_column = {}) {
  auto rows = detail::read_rows(path);
  if (rows.empty()) throw ValidationError("csv: '" + path + "' is empty");
  const std::size_t width = rows.front().fields.size();
  if (width < 2) throw ValidationError("csv: need at least 2 columns in '" + path + "'");

  bool header = false;
  for (std::size_t c = 0; c + 1 < width; ++c)
    if (!detail::parse_double(rows.front().fields[c])) header = true;
  std::vector<std::string> names;
  if (header) {
    names = rows.front().fields;
    rows.erase(rows.begin());
  } else {
    for (std::size_t c = 0; c < width; ++c) names.push_back("x" + std::to_string(c));
  }
  if (rows.empty()) throw ValidationError("csv: '" + path + "' contains no data rows");

  std::size_t label_idx = width - 1;
  if (!label_column.empty()) {
    const auto it = std::find(names.begin(), names.end(), label_column);
    if (it == names.end())
      throw ValidationError("csv: label column '" + label_column + "' not found in header");
    label_idx = static_cast<std::size_t>(it - names.begin());
  }

  TabularDataset ds;
  for (std::size_t c = 0; c < width; ++c)
    if (c != label_idx) ds.feature_names.push_back(names[c]);
  ds.label_name = names[label_idx];
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != width)
      throw ValidationError("csv: line " + std::to_string(row.line_number) + ": expected " +
                            std::to_string(width) + " columns, got " +
                            std::to_string(row.fields.size()));
    Eigen::Index out_c = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_idx) continue;
      const auto v = detail::parse_double(row.fields[c]);
      if (!v)
        throw ValidationError("csv: line " + std::to_string(row.line_number) +
                              ": non-numeric value '" + row.fields[c] + "' in column '" +
                              names[c] + "'");
      ds.X(static_cast<Eigen::Index>(r), out_c++) = *v;
    }
    labels.push_back(row.fields[label_idx]);
  }
  auto [class_names, y] = detail::encode_labels(labels);
  ds.class_names = std::move(class_names);
  ds.y = std::move(y);
  ds.task_kind = ds.class_names.size() == 2 ? TaskKind::kBinary : TaskKind::kMulticlass;
  if (ds.class_names.size() < 2) throw ValidationError("csv: need at least 2 distinct labels");
  ds.validate();
  return ds;
}

inline void write_csv(const TabularDataset& ds, std::ostream& out) {
  for (const auto& name : ds.feature_names) out << name << ',';
  out << ds.label_name << '\n';
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) out << detail::format_number(ds.X(r, c)) << ',';
    out << ds.class_names[static_cast<std::size_t>(ds.y[static_cast<std::size_t>(r)])] << '\n';
  }
}

inline void write_csv(const TabularDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(ds, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Splitting and diagnostics

/// Number of held-out rows: floor(n * test_fraction).
inline std::size_t test_partition_size(std::size_t n, double test_fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
}

inline std::pair<TabularDataset, TabularDataset> train_test_split(const TabularDataset& ds,
                                                                  double test_fraction,
                                                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("split: test_fraction must be in (0, 1)");
  const std::size_t n = ds.size();
  const std::size_t n_test = test_partition_size(n, test_fraction);
  if (n_test == 0 || n_test >= n)
    throw ValidationError("split: test_fraction " + detail::format_number(test_fraction) +
                          " on " + std::to_string(n) + " rows leaves an empty partition");
  Rng rng(seed);
  const auto order = sample_without_replacement(n, n, rng);
  const std::span<const std::size_t> all(order);
  return {subset(ds, all.first(n - n_test)), subset(ds, all.subspan(n - n_test))};
}

/// Pearson correlation of each feature with the label index. Zero-variance
/// columns yield std::nullopt.
inline std::vector<std::optional<double>> feature_label_correlation(const TabularDataset& ds) {
  const auto n = static_cast<double>(ds.size());
  std::vector<std::optional<double>> out;
  if (ds.size() < 2) return std::vector<std::optional<double>>(ds.n_features());
  double y_mean = 0.0;
  for (int v : ds.y) y_mean += v;
  y_mean /= n;
  double y_var = 0.0;
  for (int v : ds.y) y_var += (v - y_mean) * (v - y_mean);
  for (Eigen::Index c = 0; c < ds.X.cols(); ++c) {
    const double x_mean = ds.X.col(c).mean();
    double x_var = 0.0, cov = 0.0;
    for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
      const double dx = ds.X(r, c) - x_mean;
      x_var += dx * dx;
      cov += dx * (ds.y[static_cast<std::size_t>(r)] - y_mean);
    }
    if (x_var <= 0.0 || y_var <= 0.0) {
      out.emplace_back(std::nullopt);
      continue;
    }
    out.emplace_back(std::clamp(cov / std::sqrt(x_var * y_var), -1.0, 1.0));
  }
  return out;
}

}  // namespace xplainbench
