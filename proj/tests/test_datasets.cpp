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

#include <set>

namespace {

using namespace xbt;

// Pearson r between one of the four binary label inputs and the label, over
// the 16 equiprobable input combinations.
double enumerated_correlation(int which) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int m = 0; m < 16; ++m) {
    const int bits[4] = {m & 1, m >> 1 & 1, m >> 2 & 1, m >> 3 & 1};
    const double x = bits[which];
    const double y = alertness_label(bits[0], bits[1], bits[2], bits[3]);
    sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
  }
  const double n = 16;
  const double cov = sxy / n - sx / n * sy / n;
  return cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
}

TabularDataset small_alertness(std::size_t n, std::uint64_t seed) {
  AlertnessGenConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  return generate_alertness(cfg);
}

TEST(LabelRule, ExactlyHalfOfTheSixteenCombinationsAreAlert) {
  int alert = 0;
  for (int m = 0; m < 16; ++m) alert += alertness_label(m & 1, m >> 1 & 1, m >> 2 & 1, m >> 3 & 1);
  EXPECT_EQ(alert, 8);
}

TEST(LabelRule, EveryInputChangesTheLabelSomewhere) {
  for (int j = 0; j < 4; ++j) {
    bool flips = false;
    for (int m = 0; m < 16; ++m) {
      const int o = m ^ (1 << j);
      if (alertness_label(m & 1, m >> 1 & 1, m >> 2 & 1, m >> 3 & 1) !=
          alertness_label(o & 1, o >> 1 & 1, o >> 2 & 1, o >> 3 & 1))
        flips = true;
    }
    EXPECT_TRUE(flips) << "input " << j;
  }
}

TEST(LabelRule, DocumentedExamples) {
  EXPECT_EQ(alertness_label(1, 1, 1, 1), 1);
  EXPECT_EQ(alertness_label(0, 0, 0, 0), 0);
  EXPECT_EQ(alertness_label(1, 0, 0, 1), 1);  // two active, one of them in-band
  EXPECT_EQ(alertness_label(1, 1, 0, 0), 0);  // two active, heart rate out of band
  EXPECT_EQ(alertness_label(1, 1, 1, 0), 1);
}

TEST(Alertness, ColumnsAndLabelFollowTheRule) {
  const auto ds = small_alertness(5000, 3);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"heart_rate", "yawning", "looks_straight", "eyes_closed"}));
  EXPECT_EQ(ds.label_name, "alert");
  ASSERT_EQ(ds.size(), 5000u);
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    const double hr = ds.X(r, 0);
    ASSERT_EQ(hr, std::floor(hr));
    ASSERT_GE(hr, 40);
    ASSERT_LE(hr, 160);
    for (int c = 1; c < 4; ++c) ASSERT_TRUE(ds.X(r, c) == 0.0 || ds.X(r, c) == 1.0);
    const int in_band = hr >= 60 && hr <= 100 ? 1 : 0;
    ASSERT_EQ(ds.y[static_cast<std::size_t>(r)],
              alertness_label(static_cast<int>(ds.X(r, 1)), static_cast<int>(ds.X(r, 2)),
                              static_cast<int>(ds.X(r, 3)), in_band));
  }
}

TEST(Alertness, CsvHeaderIsExact) {
  std::ostringstream out;
  write_csv(small_alertness(3, 1), out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "heart_rate,yawning,looks_straight,eyes_closed,alert");
}

TEST(Alertness, SameSeedIsBitIdentical) {
  std::ostringstream a, b;
  write_csv(small_alertness(2000, 11), a);
  write_csv(small_alertness(2000, 11), b);
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  write_csv(small_alertness(2000, 12), c);
  EXPECT_NE(a.str(), c.str());
}

TEST(Alertness, ClassBalanceAndMarginals) {
  const auto ds = small_alertness(20000, 42);
  const auto counts = ds.class_counts();
  EXPECT_NEAR(static_cast<double>(counts[1]) / 20000.0, 0.5, 0.01);
  int in_band = 0, below = 0, above = 0;
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    const double hr = ds.X(r, 0);
    in_band += hr >= 60 && hr <= 100;
    below += hr < 60;
    above += hr > 100;
  }
  EXPECT_NEAR(in_band / 20000.0, 0.5, 0.02);
  EXPECT_GT(below, 0);
  EXPECT_GT(above, 0);
  for (int c = 1; c < 4; ++c) EXPECT_NEAR(ds.X.col(c).mean(), 0.5, 0.02);
}

TEST(Alertness, CustomBandMovesTheLabel) {
  AlertnessGenConfig cfg;
  cfg.n = 3000;
  cfg.hr_band_low = 50;
  cfg.hr_band_high = 70;
  const auto ds = generate_alertness(cfg);
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    const int in_band = ds.X(r, 0) >= 50 && ds.X(r, 0) <= 70;
    ASSERT_EQ(ds.y[static_cast<std::size_t>(r)],
              alertness_label(static_cast<int>(ds.X(r, 1)), static_cast<int>(ds.X(r, 2)),
                              static_cast<int>(ds.X(r, 3)), in_band));
  }
}

TEST(Alertness, InvalidConfigurationsAreRejected) {
  AlertnessGenConfig cfg;
  cfg.n = 0;
  EXPECT_THROW(generate_alertness(cfg), ValidationError);
  cfg = {};
  cfg.hr_band_low = 30;
  EXPECT_THROW(generate_alertness(cfg), ValidationError);
  cfg = {};
  cfg.hr_band_low = 100;
  cfg.hr_band_high = 100;
  EXPECT_THROW(generate_alertness(cfg), ValidationError);
  cfg = {};
  cfg.hr_band_high = 161;
  EXPECT_THROW(generate_alertness(cfg), ValidationError);
}

TEST(Correlation, MatchesEnumeratedValues) {
  const double r_indicator = enumerated_correlation(0);
  const double r_band = enumerated_correlation(3);
  EXPECT_NEAR(r_indicator, 0.25, 1e-12);
  EXPECT_NEAR(r_band, 0.75, 1e-12);

  auto ds = small_alertness(20000, 42);
  const auto r = feature_label_correlation(ds);
  for (int c = 1; c < 4; ++c) {
    ASSERT_TRUE(r[static_cast<std::size_t>(c)]);
    EXPECT_NEAR(*r[static_cast<std::size_t>(c)], r_indicator, 0.02) << ds.feature_names[static_cast<std::size_t>(c)];
  }

  // The in-band indicator carries the heart-rate signal.
  TabularDataset band = ds;
  for (Eigen::Index i = 0; i < band.X.rows(); ++i) band.X(i, 0) = band.X(i, 0) >= 60 && band.X(i, 0) <= 100;
  EXPECT_NEAR(*feature_label_correlation(band)[0], r_band, 0.02);
}

TEST(Correlation, IndependentAndDegenerateColumns) {
  auto ds = small_alertness(20000, 42);
  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  Matrix X(ds.X.rows(), 6);
  X.leftCols(4) = ds.X;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    X(r, 4) = u(rng);
    X(r, 5) = 3.0;
  }
  ds.X = X;
  ds.feature_names.push_back("noise");
  ds.feature_names.push_back("constant");
  const auto r = feature_label_correlation(ds);
  ASSERT_TRUE(r[4]);
  EXPECT_LT(std::abs(*r[4]), 0.05);
  EXPECT_FALSE(r[5]);

  TabularDataset self = ds;
  for (Eigen::Index i = 0; i < self.X.rows(); ++i) self.X(i, 4) = self.y[static_cast<std::size_t>(i)];
  EXPECT_NEAR(*feature_label_correlation(self)[4], 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Loaders

const char* kYeastRows[] = {
    "0.58,0.61,0.47,0.13,0.50,0.00,0.48,0.22,MIT", "0.43,0.67,0.48,0.27,0.50,0.00,0.53,0.22,MIT",
    "0.64,0.62,0.49,0.15,0.50,0.00,0.53,0.22,CYT", "0.58,0.44,0.57,0.13,0.50,0.00,0.54,0.22,NUC",
    "0.42,0.44,0.48,0.54,0.50,0.00,0.48,0.22,CYT"};

std::string yeast_text(bool header, bool name_column, char sep = ',') {
  std::string s;
  if (header) s += name_column ? "sequence,mcg,gvh,alm,mit,erl,pox,vac,nuc,localization\n"
                               : "mcg,gvh,alm,mit,erl,pox,vac,nuc,localization\n";
  int i = 0;
  for (const char* row : kYeastRows) {
    std::string line = name_column ? "SEQ" + std::to_string(i++) + "," + row : std::string(row);
    if (sep != ',') std::replace(line.begin(), line.end(), ',', sep);
    s += line + "\n";
  }
  return s;
}

TEST(YeastLoader, ShippedFileHasTheKnownShape) {
  const auto ds = load_yeast_csv(source_path("data/yeast.csv"));
  EXPECT_EQ(ds.size(), 1484u);
  EXPECT_EQ(ds.n_features(), 8u);
  EXPECT_EQ(ds.n_classes(), 10u);
  EXPECT_EQ(ds.feature_names, yeast_feature_names());
  std::map<std::string, std::size_t> counts;
  for (int y : ds.y) ++counts[ds.class_names[static_cast<std::size_t>(y)]];
  const std::map<std::string, std::size_t> expected = {{"CYT", 463}, {"NUC", 429}, {"MIT", 244}, {"ME3", 163},
                                                       {"ME2", 51},  {"ME1", 44},  {"EXC", 35},  {"VAC", 30},
                                                       {"POX", 20},  {"ERL", 5}};
  EXPECT_EQ(counts, expected);
}

TEST(YeastLoader, NineAndTenColumnVariantsAgree) {
  TempDir dir;
  spit(dir.file("nine.csv"), yeast_text(true, false));
  spit(dir.file("ten.csv"), yeast_text(true, true));
  spit(dir.file("bare.data"), yeast_text(false, true, ' '));
  const auto a = load_yeast_csv(dir.file("nine.csv"));
  const auto b = load_yeast_csv(dir.file("ten.csv"));
  const auto c = load_yeast_csv(dir.file("bare.data"));
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.class_names, b.class_names);
  EXPECT_EQ(a.X, c.X);
  EXPECT_EQ(a.y, c.y);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(a.class_names, (std::vector<std::string>{"MIT", "CYT", "NUC"}));
  EXPECT_DOUBLE_EQ(a.X(3, 2), 0.57);
}

TEST(YeastLoader, HeaderOnlyAndEmptyFilesAreErrors) {
  TempDir dir;
  spit(dir.file("header.csv"), "mcg,gvh,alm,mit,erl,pox,vac,nuc,localization\n");
  spit(dir.file("empty.csv"), "");
  EXPECT_THROW(load_yeast_csv(dir.file("header.csv")), ValidationError);
  EXPECT_THROW(load_yeast_csv(dir.file("empty.csv")), ValidationError);
  EXPECT_THROW(load_yeast_csv(dir.file("missing.csv")), Error);
}

TEST(YeastLoader, MalformedRowsNameTheirLine) {
  TempDir dir;
  std::string text = yeast_text(true, false);
  text += "0.1,0.2,0.3,MIT\n";  // line 7
  spit(dir.file("short.csv"), text);
  try {
    load_yeast_csv(dir.file("short.csv"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos) << e.what();
  }

  text = yeast_text(true, false);
  text.replace(text.find("0.64"), 4, "abc");  // line 4
  spit(dir.file("nonnumeric.csv"), text);
  try {
    load_yeast_csv(dir.file("nonnumeric.csv"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("mcg"), std::string::npos) << e.what();
  }

  spit(dir.file("seven.csv"), "1,2,3,4,5,6,X\n");
  EXPECT_THROW(load_yeast_csv(dir.file("seven.csv")), ValidationError);
}

TEST(CsvLoader, RoundTripPreservesValues) {
  TempDir dir;
  auto ds = small_alertness(500, 9);
  write_csv(ds, dir.file("a.csv"));
  const auto back = load_csv(dir.file("a.csv"), "alert");
  EXPECT_EQ(back.feature_names, ds.feature_names);
  EXPECT_EQ(back.y, ds.y);
  EXPECT_LE((back.X - ds.X).cwiseAbs().maxCoeff(), 1e-12);

  // Non-integer values survive too.
  Rng rng(4);
  TabularDataset r = synthetic_binary(300, 5, 8);
  r.X = uniform_matrix(rng, 300, 5, -1e3, 1e3);
  write_csv(r, dir.file("r.csv"));
  const auto rb = load_csv(dir.file("r.csv"));
  EXPECT_LE((rb.X - r.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(rb.y, r.y);
}

TEST(CsvLoader, LabelColumnSelectionAndErrors) {
  TempDir dir;
  spit(dir.file("mid.csv"), "a,label,b\n1,x,2\n3,y,4\n5,x,6\n");
  const auto ds = load_csv(dir.file("mid.csv"), "label");
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.y, (std::vector<int>{0, 1, 0}));
  EXPECT_DOUBLE_EQ(ds.X(2, 1), 6.0);
  EXPECT_THROW(load_csv(dir.file("mid.csv"), "nope"), ValidationError);
  spit(dir.file("one.csv"), "a,b\n1,x\n2,x\n");
  EXPECT_THROW(load_csv(dir.file("one.csv")), ValidationError);
}

// ---------------------------------------------------------------------------
// Splitting

TabularDataset indexed(std::size_t n) {
  TabularDataset ds;
  ds.feature_names = {"id"};
  ds.class_names = {"0", "1"};
  ds.X.resize(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    ds.X(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    ds.y.push_back(static_cast<int>(i % 2));
  }
  return ds;
}

TEST(Split, SizesFollowTheFloorRule) {
  auto [tr, te] = train_test_split(indexed(10), 0.2, 1);
  EXPECT_EQ(tr.size(), 8u);
  EXPECT_EQ(te.size(), 2u);
  auto [ytr, yte] = train_test_split(indexed(1484), 0.2, 42);
  EXPECT_EQ(ytr.size(), 1188u);
  EXPECT_EQ(yte.size(), 296u);
  EXPECT_EQ(test_partition_size(20000, 0.2), 4000u);
}

TEST(Split, PartitionIsDisjointCompleteAndDeterministic) {
  const auto ds = indexed(1000);
  auto [tr, te] = train_test_split(ds, 0.3, 17);
  std::set<int> seen;
  for (Eigen::Index r = 0; r < tr.X.rows(); ++r) seen.insert(static_cast<int>(tr.X(r, 0)));
  for (Eigen::Index r = 0; r < te.X.rows(); ++r) seen.insert(static_cast<int>(te.X(r, 0)));
  EXPECT_EQ(seen.size(), 1000u);
  for (Eigen::Index r = 0; r < tr.X.rows(); ++r)
    EXPECT_EQ(tr.y[static_cast<std::size_t>(r)], static_cast<int>(tr.X(r, 0)) % 2);

  auto [tr2, te2] = train_test_split(ds, 0.3, 17);
  EXPECT_EQ(tr.X, tr2.X);
  EXPECT_EQ(te.X, te2.X);
  auto [tr3, te3] = train_test_split(ds, 0.3, 18);
  EXPECT_NE(te.X, te3.X);
}

TEST(Split, DegenerateFractionsAreRejected) {
  EXPECT_THROW(train_test_split(indexed(10), 1.5, 1), ValidationError);
  EXPECT_THROW(train_test_split(indexed(10), 0.0, 1), ValidationError);
  EXPECT_THROW(train_test_split(indexed(2), 0.2, 1), ValidationError);  // floor(0.4) = 0 test rows
}

}  // namespace
