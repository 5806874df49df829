#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fm/error.hpp"
#include "fm/linalg.hpp"
#include "fm/random.hpp"

namespace fm {

enum class Task { Linear, Logistic };

inline const char* to_string(Task t) {
  return t == Task::Linear ? "linear" : "logistic";
}

// Tabular input before normalization: n records over d features plus the
// target column (at target_index, 0-based).
struct RawDataset {
  std::vector<std::string> column_names;
  Mat rows;  // n x (d+1)
  std::size_t target_index = 0;

  std::size_t n() const { return rows.rows; }
  std::size_t d() const { return rows.cols - 1; }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Declared a priori per feature (public knowledge), never estimated from
// the data itself. Indexed in feature order, target column excluded.
struct AttributeBounds {
  std::vector<Interval> feature;
};

struct TargetEncoding {
  Task task = Task::Linear;
  Interval y_bounds{-1.0, 1.0};  // linear: affine map of [lo,hi] onto [-1,1]
  double threshold = 0.0;        // logistic: y = 1 iff raw > threshold

  static TargetEncoding linear(Interval b) { return {Task::Linear, b, 0.0}; }
  static TargetEncoding logistic(double threshold) {
    return {Task::Logistic, {}, threshold};
  }
};

// Records (x_i, y_i) with ||x_i||_2 <= 1 and the target encoded for the
// task: linear y in [-1,1], logistic y in {0,1}. Immutable by convention;
// construct through make_dataset so the invariants are checked.
struct NormalizedDataset {
  Task task = Task::Linear;
  Mat features;  // n x d
  Vec targets;   // n

  std::size_t n() const { return features.rows; }
  std::size_t d() const { return features.cols; }
  std::span<const double> x(std::size_t i) const { return features.row(i); }
  double y(std::size_t i) const { return targets[i]; }
};

inline void validate_dataset(const NormalizedDataset& ds) {
  if (ds.features.rows == 0 || ds.features.cols == 0)
    throw DataError("dataset must have n >= 1 records and d >= 1 features");
  if (ds.targets.size() != ds.features.rows)
    throw DataError("dataset target count does not match record count");
  if (!all_finite(ds.features) || !all_finite(ds.targets))
    throw DataError("dataset contains non-finite values");
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (l2_norm(ds.x(i)) > 1.0 + 1e-12)
      throw DataError("record " + std::to_string(i + 1) +
                      " violates the feature norm bound ||x|| <= 1");
    const double y = ds.targets[i];
    if (ds.task == Task::Linear) {
      if (y < -1.0 - 1e-12 || y > 1.0 + 1e-12)
        throw DataError("record " + std::to_string(i + 1) +
                        " has linear target outside [-1, 1]");
    } else if (y != 0.0 && y != 1.0) {
      throw DataError("record " + std::to_string(i + 1) +
                      " has logistic target outside {0, 1}");
    }
  }
}

inline NormalizedDataset make_dataset(Task task, Mat features, Vec targets) {
  NormalizedDataset ds{task, std::move(features), std::move(targets)};
  validate_dataset(ds);
  return ds;
}

namespace detail {

inline std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline double parse_cell(std::string_view cell, std::size_t row1,
                         std::size_t col1) {
  const std::string_view t = trimmed(cell);
  const std::string at = " at (row " + std::to_string(row1) + ", column " +
                         std::to_string(col1) + ")";
  if (t.empty()) throw DataError("missing value" + at);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw DataError("non-numeric cell" + at + ": '" + std::string(t) + "'");
  if (!std::isfinite(v)) throw DataError("non-finite value" + at);
  return v;
}

}  // namespace detail

// Comma-separated numeric table with one header row, decimal-point reals,
// no quoting. target_index is 0-based.
inline RawDataset load_table(const std::filesystem::path& path,
                             std::size_t target_index) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty table: " + path.string());

  RawDataset raw;
  for (auto name : detail::split_commas(line))
    raw.column_names.emplace_back(detail::trimmed(name));
  const std::size_t arity = raw.column_names.size();
  if (arity < 2)
    throw DataError("table needs at least two columns (features and target): " +
                    path.string());
  if (target_index >= arity)
    throw DataError("target_index " + std::to_string(target_index) +
                    " out of range for " + std::to_string(arity) + " columns");

  std::vector<double> values;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const std::string_view lv = detail::trimmed(line);
    if (lv.empty()) continue;
    ++n;
    const auto cells = detail::split_commas(line);
    if (cells.size() != arity)
      throw DataError("malformed row " + std::to_string(n) + ": expected " +
                      std::to_string(arity) + " fields, got " +
                      std::to_string(cells.size()));
    for (std::size_t j = 0; j < arity; ++j)
      values.push_back(detail::parse_cell(cells[j], n, j + 1));
  }
  if (n == 0) throw DataError("empty table: " + path.string());

  raw.rows = Mat(n, arity);
  raw.rows.data = std::move(values);
  raw.target_index = target_index;
  return raw;
}

// x_ij <- (x_ij - lo_j) / ((hi_j - lo_j) * sqrt(d)); every output coordinate
// lands in [0, 1/sqrt(d)], hence ||x_i||_2 <= 1. Values outside the declared
// bounds are a hard error: clamping would silently invalidate the
// sensitivity guarantees downstream.
inline Mat normalize_features(const RawDataset& raw,
                              const AttributeBounds& bounds) {
  const std::size_t d = raw.d();
  if (bounds.feature.size() != d)
    throw ConfigError("expected " + std::to_string(d) +
                      " attribute bounds, got " +
                      std::to_string(bounds.feature.size()));
  for (std::size_t j = 0; j < d; ++j) {
    const auto [lo, hi] = bounds.feature[j];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw ConfigError("attribute bounds " + std::to_string(j + 1) +
                        " must be finite with lo < hi");
  }

  const double root_d = std::sqrt(static_cast<double>(d));
  Mat out(raw.n(), d);
  for (std::size_t i = 0; i < raw.n(); ++i) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < raw.rows.cols; ++c) {
      if (c == raw.target_index) continue;
      const double v = raw.rows(i, c);
      const auto [lo, hi] = bounds.feature[j];
      if (v < lo || v > hi)
        throw DataError("value " + std::to_string(v) + " at (row " +
                        std::to_string(i + 1) + ", column " +
                        std::to_string(c + 1) + ") outside declared bounds [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
      out(i, j) = (v - lo) / ((hi - lo) * root_d);
      ++j;
    }
  }
  return out;
}

// Assemble the final dataset from normalized features and the encoded
// target column. Linear: y <- 2(y - lo)/(hi - lo) - 1 (order-preserving
// affine map onto [-1,1]); logistic: y <- 1 iff raw strictly above the
// threshold.
inline NormalizedDataset encode_target(const RawDataset& raw, Mat features,
                                       const TargetEncoding& enc) {
  if (features.rows != raw.n())
    throw ConfigError("feature matrix row count does not match raw dataset");
  Vec y(raw.n());
  if (enc.task == Task::Linear) {
    const auto [lo, hi] = enc.y_bounds;
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw ConfigError("target bounds must be finite with lo < hi");
    for (std::size_t i = 0; i < raw.n(); ++i) {
      const double v = raw.rows(i, raw.target_index);
      if (v < lo || v > hi)
        throw DataError("target value " + std::to_string(v) + " at row " +
                        std::to_string(i + 1) + " outside declared bounds [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
      y[i] = 2.0 * (v - lo) / (hi - lo) - 1.0;
    }
  } else {
    if (!std::isfinite(enc.threshold))
      throw ConfigError("logistic threshold must be finite");
    for (std::size_t i = 0; i < raw.n(); ++i)
      y[i] = raw.rows(i, raw.target_index) > enc.threshold ? 1.0 : 0.0;
  }
  return make_dataset(enc.task, std::move(features), std::move(y));
}

// Load a table whose values already satisfy the dataset invariants
// (features with ||x|| <= 1, target already encoded). Used for files
// produced by synth_generate.
inline NormalizedDataset load_normalized(const std::filesystem::path& path,
                                         std::size_t target_index, Task task) {
  const RawDataset raw = load_table(path, target_index);
  Mat features(raw.n(), raw.d());
  Vec y(raw.n());
  for (std::size_t i = 0; i < raw.n(); ++i) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < raw.rows.cols; ++c) {
      if (c == raw.target_index)
        y[i] = raw.rows(i, c);
      else
        features(i, j++) = raw.rows(i, c);
    }
  }
  return make_dataset(task, std::move(features), std::move(y));
}

// Balanced k-way partition: fold sizes differ by at most one, derived from
// a seeded permutation.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // record index -> fold
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> complement_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] != fold) out.push_back(i);
    return out;
  }
};

inline FoldPlan kfold_split(const NormalizedDataset& data, std::size_t k,
                            std::uint64_t seed) {
  const std::size_t n = data.n();
  if (k < 2) throw ConfigError("fold count k must be at least 2");
  if (k > n)
    throw ConfigError("fold count k = " + std::to_string(k) +
                      " exceeds record count n = " + std::to_string(n));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  SplitRng rng(seed, /*stream=*/0x0f01d);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_below(i + 1)]);

  FoldPlan plan{k, std::vector<std::size_t>(n, 0), seed};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t s = 0; s < size; ++s) plan.assignment[perm[pos++]] = f;
  }
  return plan;
}

inline NormalizedDataset subset(const NormalizedDataset& data,
                                std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("subset selects no records");
  Mat features(indices.size(), data.d());
  Vec y(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    for (std::size_t j = 0; j < data.d(); ++j) features(r, j) = data.features(i, j);
    y[r] = data.targets[i];
  }
  return NormalizedDataset{data.task, std::move(features), std::move(y)};
}

// Keep the first d_keep feature columns; dropping columns can only shrink
// row norms, so invariants are preserved.
inline NormalizedDataset feature_prefix(const NormalizedDataset& data,
                                        std::size_t d_keep) {
  if (d_keep == 0 || d_keep > data.d())
    throw ConfigError("feature prefix dimension out of range");
  if (d_keep == data.d()) return data;
  Mat features(data.n(), d_keep);
  for (std::size_t i = 0; i < data.n(); ++i)
    for (std::size_t j = 0; j < d_keep; ++j) features(i, j) = data.features(i, j);
  return NormalizedDataset{data.task, std::move(features), data.targets};
}

// Seed-deterministic row subsample of exactly floor(rate * n) records.
inline NormalizedDataset subsample(const NormalizedDataset& data, double rate,
                                   std::uint64_t seed) {
  if (!(rate > 0.0) || rate > 1.0)
    throw ConfigError("sampling rate must be in (0, 1]");
  const auto m = static_cast<std::size_t>(rate * static_cast<double>(data.n()));
  if (m == 0) throw ConfigError("sampling rate selects no records");
  if (m == data.n()) return data;

  std::vector<std::size_t> perm(data.n());
  std::iota(perm.begin(), perm.end(), 0);
  SplitRng rng(seed, /*stream=*/0x5a3b);
  for (std::size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_below(i + 1)]);
  perm.resize(m);
  std::sort(perm.begin(), perm.end());
  return subset(data, perm);
}

struct SynthSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  Task task = Task::Linear;
  Vec true_omega;            // d entries
  double noise_level = 0.0;  // linear only: stddev of additive Gaussian noise
};

// Features i.i.d. uniform on [0, 1/sqrt(d)] per coordinate (so ||x|| <= 1);
// linear targets clamp(x.w + noise, [-1,1]); logistic targets
// Bernoulli(sigmoid(x.w)). Deterministic given the seed.
inline NormalizedDataset synth_generate(const SynthSpec& spec,
                                        std::uint64_t seed) {
  if (spec.n < 1 || spec.d < 1)
    throw ConfigError("synthetic spec needs n >= 1 and d >= 1");
  if (spec.true_omega.size() != spec.d)
    throw ConfigError("synthetic true omega must have d entries");
  if (!all_finite(spec.true_omega) || !std::isfinite(spec.noise_level))
    throw ConfigError("synthetic spec contains non-finite values");

  SplitRng rng(seed, /*stream=*/0x5e7a);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.d));
  Mat features(spec.n, spec.d);
  Vec y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < spec.d; ++j)
      features(i, j) = rng.next_unit() * scale;
    const double mean = dot(features.row(i), spec.true_omega);
    if (spec.task == Task::Linear) {
      double v = mean;
      if (spec.noise_level > 0.0) v += spec.noise_level * normal_sample(rng);
      y[i] = std::clamp(v, -1.0, 1.0);
    } else {
      const double p = 1.0 / (1.0 + std::exp(-mean));
      y[i] = rng.next_unit() < p ? 1.0 : 0.0;
    }
  }
  return make_dataset(spec.task, std::move(features), std::move(y));
}

// Emit a dataset in the same comma-separated format load_table reads;
// feature columns first, target last. Round-trips exactly via %.17g.
inline void write_csv(const NormalizedDataset& data,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path.string());
  for (std::size_t j = 0; j < data.d(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  char buf[40];
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.d(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", data.targets[i]);
    out << buf << '\n';
  }
  if (!out) throw DataError("failed writing: " + path.string());
}

}  // namespace fm
