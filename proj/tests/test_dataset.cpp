#include "fm/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path path = fs::path(testing::TempDir()) / name;
  std::ofstream out(path);
  out << content;
  return path;
}

TEST(LoadTable, ArityBookkeeping) {
  const auto path = write_temp("basic.csv", "x,y\n1,0.4\n0.9,0.3\n-0.5,-1\n");
  const fm::RawDataset raw = fm::load_table(path, 1);
  EXPECT_EQ(raw.n(), 3u);
  EXPECT_EQ(raw.d(), 1u);
  EXPECT_EQ(raw.column_names, (std::vector<std::string>{"x", "y"}));
  EXPECT_DOUBLE_EQ(raw.rows(2, 0), -0.5);
  EXPECT_DOUBLE_EQ(raw.rows(2, 1), -1.0);
}

TEST(LoadTable, MissingValueNamesRowAndColumn) {
  const auto path = write_temp("missing.csv", "a,b\n1,2\n3,\n");
  try {
    fm::load_table(path, 1);
    FAIL() << "expected DataError";
  } catch (const fm::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing value at (row 2, column 2)"),
              std::string::npos);
  }
}

TEST(LoadTable, HeaderOnlyIsEmptyTable) {
  const auto path = write_temp("empty.csv", "a,b\n");
  try {
    fm::load_table(path, 0);
    FAIL() << "expected DataError";
  } catch (const fm::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty table"), std::string::npos);
  }
}

TEST(LoadTable, MalformedRowAndNonNumericCell) {
  const auto bad_arity = write_temp("arity.csv", "a,b\n1,2\n3,4,5\n");
  EXPECT_THROW(fm::load_table(bad_arity, 0), fm::DataError);

  const auto bad_cell = write_temp("cell.csv", "a,b\n1,oops\n");
  try {
    fm::load_table(bad_cell, 0);
    FAIL() << "expected DataError";
  } catch (const fm::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("non-numeric cell"), std::string::npos);
  }
}

TEST(LoadTable, MissingFileNamesPath) {
  try {
    fm::load_table("/no/such/file.csv", 0);
    FAIL() << "expected DataError";
  } catch (const fm::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/file.csv"), std::string::npos);
  }
}

fm::RawDataset single_feature_raw(std::vector<double> xs, std::vector<double> ys) {
  fm::RawDataset raw;
  raw.column_names = {"x", "y"};
  raw.rows = fm::Mat(xs.size(), 2);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    raw.rows(i, 0) = xs[i];
    raw.rows(i, 1) = ys[i];
  }
  raw.target_index = 1;
  return raw;
}

TEST(NormalizeFeatures, DirectSubstitution) {
  // one record with four identical features so d = 4
  fm::RawDataset raw;
  raw.rows = fm::Mat(1, 5);
  for (int j = 0; j < 4; ++j) raw.rows(0, j) = 100.0;
  raw.target_index = 4;
  fm::AttributeBounds bounds;
  for (int j = 0; j < 4; ++j) bounds.feature.push_back({0.0, 100.0});
  const fm::Mat features = fm::normalize_features(raw, bounds);
  EXPECT_DOUBLE_EQ(features(0, 0), 0.5);
}

TEST(NormalizeFeatures, EndpointsMapToZeroAndUnitNorm) {
  fm::RawDataset raw;
  raw.rows = fm::Mat(2, 3);
  raw.rows(0, 0) = -3.0;  // lower bounds
  raw.rows(0, 1) = 2.0;
  raw.rows(1, 0) = 7.0;  // upper bounds
  raw.rows(1, 1) = 4.0;
  raw.target_index = 2;
  fm::AttributeBounds bounds{{{-3.0, 7.0}, {2.0, 4.0}}};
  const fm::Mat features = fm::normalize_features(raw, bounds);
  EXPECT_DOUBLE_EQ(features(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(features(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(features(1, 0), 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(features(1, 1), 1.0 / std::sqrt(2.0));
  EXPECT_NEAR(fm::l2_norm(features.row(1)), 1.0, 1e-15);
}

TEST(NormalizeFeatures, OutOfBoundsIsHardError) {
  auto raw = single_feature_raw({5.0}, {0.0});
  fm::AttributeBounds bounds{{{0.0, 4.0}}};
  EXPECT_THROW(fm::normalize_features(raw, bounds), fm::DataError);
}

TEST(NormalizeFeatures, NormBoundHoldsOnRandomInputs) {
  fm::SplitRng rng(31);
  for (std::size_t d : {1u, 2u, 5u, 9u}) {
    fm::RawDataset raw;
    raw.rows = fm::Mat(60, d + 1);
    raw.target_index = d;
    fm::AttributeBounds bounds;
    for (std::size_t j = 0; j < d; ++j) {
      const double lo = -10.0 + 20.0 * rng.next_unit();
      bounds.feature.push_back({lo, lo + 0.1 + 5.0 * rng.next_unit()});
    }
    for (std::size_t i = 0; i < raw.n(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const auto [lo, hi] = bounds.feature[j];
        raw.rows(i, j) = lo + (hi - lo) * rng.next_unit();
      }
    const fm::Mat features = fm::normalize_features(raw, bounds);
    for (std::size_t i = 0; i < features.rows; ++i) {
      ASSERT_LE(fm::l2_norm(features.row(i)), 1.0 + 1e-12);
      for (double v : features.row(i)) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0 / std::sqrt(static_cast<double>(d)) + 1e-12);
      }
    }
  }
}

TEST(EncodeTarget, LinearEndpointsAndMidpoint) {
  auto raw = single_feature_raw({0.1, 0.2, 0.3}, {10.0, 30.0, 20.0});
  fm::AttributeBounds bounds{{{0.0, 1.0}}};
  auto features = fm::normalize_features(raw, bounds);
  const auto ds = fm::encode_target(raw, std::move(features),
                                    fm::TargetEncoding::linear({10.0, 30.0}));
  EXPECT_DOUBLE_EQ(ds.y(0), -1.0);
  EXPECT_DOUBLE_EQ(ds.y(1), 1.0);
  EXPECT_DOUBLE_EQ(ds.y(2), 0.0);
}

TEST(EncodeTarget, LinearOutsideBoundsIsHardError) {
  auto raw = single_feature_raw({0.1}, {31.0});
  auto features = fm::normalize_features(raw, fm::AttributeBounds{{{0.0, 1.0}}});
  EXPECT_THROW(fm::encode_target(raw, std::move(features),
                                 fm::TargetEncoding::linear({10.0, 30.0})),
               fm::DataError);
}

TEST(EncodeTarget, LogisticStrictThreshold) {
  auto raw = single_feature_raw({0.1, 0.2, 0.3}, {5.0, 5.0001, 4.9});
  auto features = fm::normalize_features(raw, fm::AttributeBounds{{{0.0, 1.0}}});
  const auto ds =
      fm::encode_target(raw, std::move(features), fm::TargetEncoding::logistic(5.0));
  EXPECT_DOUBLE_EQ(ds.y(0), 0.0);  // tie maps to 0
  EXPECT_DOUBLE_EQ(ds.y(1), 1.0);
  EXPECT_DOUBLE_EQ(ds.y(2), 0.0);
}

TEST(EncodeTarget, LinearEncodingIsOrderPreserving) {
  fm::SplitRng rng(55);
  const double lo = -4.0, hi = 9.0;
  std::vector<double> ys;
  for (int i = 0; i < 50; ++i) ys.push_back(lo + (hi - lo) * rng.next_unit());
  std::vector<double> xs(ys.size(), 0.5);
  auto raw = single_feature_raw(xs, ys);
  auto features = fm::normalize_features(raw, fm::AttributeBounds{{{0.0, 1.0}}});
  const auto ds = fm::encode_target(raw, std::move(features),
                                    fm::TargetEncoding::linear({lo, hi}));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j)
      if (ys[i] < ys[j]) ASSERT_LT(ds.y(i), ds.y(j));
}

fm::NormalizedDataset tiny_dataset(std::size_t n) {
  fm::Mat features(n, 1);
  fm::Vec targets(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) features(i, 0) = 0.5;
  return fm::make_dataset(fm::Task::Linear, std::move(features), std::move(targets));
}

TEST(KfoldSplit, ExactDivision) {
  const auto plan = fm::kfold_split(tiny_dataset(10), 5, 1);
  std::vector<int> sizes(5, 0);
  for (auto f : plan.assignment) ++sizes[f];
  for (int s : sizes) EXPECT_EQ(s, 2);
}

TEST(KfoldSplit, RemainderDistribution) {
  const auto plan = fm::kfold_split(tiny_dataset(11), 5, 1);
  std::multiset<std::size_t> sizes;
  for (std::size_t f = 0; f < 5; ++f) sizes.insert(plan.fold_indices(f).size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{3, 2, 2, 2, 2}));
}

TEST(KfoldSplit, DeterministicAndExactPartition) {
  const auto data = tiny_dataset(37);
  const auto a = fm::kfold_split(data, 5, 99);
  const auto b = fm::kfold_split(data, 5, 99);
  EXPECT_EQ(a.assignment, b.assignment);

  std::set<std::size_t> seen;
  for (std::size_t f = 0; f < 5; ++f)
    for (auto i : a.fold_indices(f)) ASSERT_TRUE(seen.insert(i).second);
  EXPECT_EQ(seen.size(), 37u);
}

TEST(KfoldSplit, TooManyFoldsIsError) {
  EXPECT_THROW(fm::kfold_split(tiny_dataset(3), 4, 0), fm::ConfigError);
}

TEST(SynthGenerate, ZeroModelGivesZeroTargets) {
  const fm::SynthSpec spec{100, 3, fm::Task::Linear, fm::Vec(3, 0.0), 0.0};
  const auto ds = fm::synth_generate(spec, 7);
  for (std::size_t i = 0; i < ds.n(); ++i) ASSERT_DOUBLE_EQ(ds.y(i), 0.0);
}

TEST(SynthGenerate, LogisticZeroModelIsBalanced) {
  const std::size_t n = 20000;
  const fm::SynthSpec spec{n, 2, fm::Task::Logistic, fm::Vec(2, 0.0), 0.0};
  const auto ds = fm::synth_generate(spec, 11);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += ds.y(i);
  mean /= static_cast<double>(n);
  // 3 sigma of a Bernoulli(1/2) mean over n draws
  EXPECT_NEAR(mean, 0.5, 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST(SynthGenerate, Reproducible) {
  const fm::SynthSpec spec{500, 4, fm::Task::Logistic, {0.5, -0.25, 1.0, 0.0}, 0.0};
  const auto a = fm::synth_generate(spec, 31337);
  const auto b = fm::synth_generate(spec, 31337);
  EXPECT_EQ(a.features.data, b.features.data);
  EXPECT_EQ(a.targets, b.targets);
  const auto c = fm::synth_generate(spec, 31338);
  EXPECT_NE(a.features.data, c.features.data);
}

TEST(SynthGenerate, RespectsNormBound) {
  const fm::SynthSpec spec{200, 6, fm::Task::Linear, fm::Vec(6, 0.9), 0.5};
  const auto ds = fm::synth_generate(spec, 3);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    ASSERT_LE(fm::l2_norm(ds.x(i)), 1.0);
    ASSERT_GE(ds.y(i), -1.0);
    ASSERT_LE(ds.y(i), 1.0);
  }
}

TEST(Subsample, ExactCount) {
  const fm::SynthSpec spec{1000, 2, fm::Task::Linear, fm::Vec(2, 0.1), 0.0};
  const auto ds = fm::synth_generate(spec, 5);
  const auto half = fm::subsample(ds, 0.5, 17);
  EXPECT_EQ(half.n(), 500u);
  EXPECT_EQ(half.d(), 2u);
}

TEST(FeaturePrefix, KeepsLeadingColumns) {
  const fm::SynthSpec spec{20, 5, fm::Task::Linear, fm::Vec(5, 0.2), 0.0};
  const auto ds = fm::synth_generate(spec, 5);
  const auto cut = fm::feature_prefix(ds, 3);
  EXPECT_EQ(cut.d(), 3u);
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (std::size_t j = 0; j < 3; ++j)
      ASSERT_DOUBLE_EQ(cut.features(i, j), ds.features(i, j));
}

TEST(WriteCsv, RoundTripsExactly) {
  const fm::SynthSpec spec{50, 3, fm::Task::Linear, {0.3, -0.6, 0.1}, 0.2};
  const auto ds = fm::synth_generate(spec, 21);
  const fs::path path = fs::path(testing::TempDir()) / "roundtrip.csv";
  fm::write_csv(ds, path);
  const auto loaded = fm::load_normalized(path, 3, fm::Task::Linear);
  EXPECT_EQ(loaded.features.data, ds.features.data);
  EXPECT_EQ(loaded.targets, ds.targets);
}

TEST(MakeDataset, RejectsInvariantViolations) {
  fm::Mat bad_norm(1, 2);
  bad_norm(0, 0) = 0.9;
  bad_norm(0, 1) = 0.9;  // norm > 1
  EXPECT_THROW(fm::make_dataset(fm::Task::Linear, bad_norm, fm::Vec{0.0}),
               fm::DataError);

  fm::Mat ok(1, 1);
  ok(0, 0) = 0.5;
  EXPECT_THROW(fm::make_dataset(fm::Task::Linear, ok, fm::Vec{1.5}), fm::DataError);
  EXPECT_THROW(fm::make_dataset(fm::Task::Logistic, ok, fm::Vec{0.5}), fm::DataError);
}

}  // namespace
