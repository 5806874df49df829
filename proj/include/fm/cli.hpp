#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fm/dataset.hpp"
#include "fm/error.hpp"
#include "fm/eval.hpp"
#include "fm/mechanism.hpp"
#include "fm/solver.hpp"
#include "fm/train.hpp"

namespace fm {

enum class Command { Train, Bench, Synth, Validate };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Train: return "train";
    case Command::Bench: return "bench";
    case Command::Synth: return "synth";
    default: return "validate";
  }
}

struct RunConfig {
  Command command = Command::Train;

  // data source: exactly one of input_path / synth
  std::optional<std::filesystem::path> input_path;
  std::size_t target_index = 0;
  bool pre_normalized = false;
  AttributeBounds bounds;
  std::optional<Interval> y_bounds;
  std::optional<double> threshold;
  std::optional<SynthSpec> synth;

  Task task = Task::Linear;
  std::vector<MethodKind> methods{MethodKind::FM};
  double epsilon = 0.8;
  RepairStrategy strategy = RepairStrategy::RegularizeTrim;
  std::optional<double> lambda_override;
  std::size_t folds = 5;
  std::size_t repeats = 50;
  SweepGrid grid;
  std::uint64_t seed = 0;
  std::filesystem::path output = "fmreg_out";
};

using KeyValue = std::pair<std::string, std::string>;

// Flat key-value config: `[section]` headers, `key = value` lines, `#` or
// `;` comments. Keys are reported as "section.key".
inline std::vector<KeyValue> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::vector<KeyValue> entries;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = detail::trimmed(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": malformed section header");
      section = std::string(detail::trimmed(t.substr(1, t.size() - 2)));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key(detail::trimmed(t.substr(0, eq)));
    const std::string value(detail::trimmed(t.substr(eq + 1)));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    entries.emplace_back(section.empty() ? key : section + "." + key, value);
  }
  return entries;
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("field " + key + ": expected a number, got '" + value + "'");
  }
}

inline std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("field " + key + ": expected a non-negative integer, got '" +
                      value + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("field " + key + ": expected an unsigned integer, got '" +
                      value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on")
    return true;
  if (value == "false" || value == "0" || value == "no" || value == "off")
    return false;
  throw ConfigError("field " + key + ": expected a boolean, got '" + value + "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto piece : split_commas(value)) {
    const auto t = trimmed(piece);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline Interval parse_interval(const std::string& key, const std::string& value) {
  const std::size_t colon = value.find(':');
  if (colon == std::string::npos)
    throw ConfigError("field " + key + ": expected lo:hi, got '" + value + "'");
  return {parse_double(key, value.substr(0, colon)),
          parse_double(key, value.substr(colon + 1))};
}

inline Task parse_task(const std::string& key, const std::string& value) {
  if (value == "linear") return Task::Linear;
  if (value == "logistic") return Task::Logistic;
  throw ConfigError("field " + key + ": expected linear or logistic, got '" +
                    value + "'");
}

inline RepairStrategy parse_strategy(const std::string& key,
                                     const std::string& value) {
  if (value == "regularize-trim" || value == "regularize+trim")
    return RepairStrategy::RegularizeTrim;
  if (value == "rerun-once") return RepairStrategy::RerunOnce;
  throw ConfigError("field " + key +
                    ": expected regularize-trim or rerun-once, got '" + value +
                    "'");
}

inline MethodKind parse_method(const std::string& key, const std::string& value) {
  if (value == "fm" || value == "FM") return MethodKind::FM;
  if (value == "noprivacy" || value == "NoPrivacy") return MethodKind::NoPrivacy;
  if (value == "truncated" || value == "Truncated") return MethodKind::Truncated;
  throw ConfigError("field " + key +
                    ": expected fm, noprivacy or truncated, got '" + value + "'");
}

}  // namespace detail

inline std::optional<std::string> env_default_seed() {
  if (const char* v = std::getenv("FMREG_SEED")) return std::string(v);
  return std::nullopt;
}

// Merge config-file entries with command-line overrides (command line
// wins), validate, and fill Table-2-style defaults: k=5, repeats=50,
// epsilon=0.8, strategy=regularize-trim.
inline RunConfig parse_config(
    Command command, const std::vector<KeyValue>& file_entries,
    const std::vector<KeyValue>& flag_entries,
    std::optional<std::string> env_seed = env_default_seed()) {
  static const std::set<std::string> known{
      "data.path",      "data.target_index", "data.bounds",
      "data.y_bounds",  "data.threshold",    "data.pre_normalized",
      "synth.n",        "synth.d",           "synth.omega",
      "synth.noise",    "run.task",          "run.methods",
      "run.epsilon",    "run.strategy",      "run.lambda",
      "run.folds",      "run.repeats",       "run.seed",
      "run.output",     "grid.epsilons",     "grid.rates",
      "grid.dims"};

  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : file_entries) {
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "'");
    kv[k] = v;
  }
  for (const auto& [k, v] : flag_entries) {
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "'");
    kv[k] = v;
  }

  const auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  RunConfig cfg;
  cfg.command = command;

  if (auto v = get("run.task")) cfg.task = detail::parse_task("run.task", *v);
  else if (command != Command::Validate)
    throw ConfigError("missing required field run.task");

  if (auto v = get("run.methods")) {
    cfg.methods.clear();
    for (const auto& name : detail::split_list(*v))
      cfg.methods.push_back(detail::parse_method("run.methods", name));
    if (cfg.methods.empty())
      throw ConfigError("field run.methods: expected at least one method");
  }
  if (auto v = get("run.epsilon")) {
    cfg.epsilon = detail::parse_double("run.epsilon", *v);
  }
  bool uses_fm = false;
  for (auto m : cfg.methods) uses_fm = uses_fm || m == MethodKind::FM;
  if (uses_fm && !(cfg.epsilon > 0.0))
    throw ConfigError("epsilon must be positive");
  if (auto v = get("run.strategy"))
    cfg.strategy = detail::parse_strategy("run.strategy", *v);
  if (auto v = get("run.lambda")) {
    cfg.lambda_override = detail::parse_double("run.lambda", *v);
    if (*cfg.lambda_override < 0.0)
      throw ConfigError("field run.lambda: must be >= 0");
  }
  if (auto v = get("run.folds")) {
    cfg.folds = detail::parse_size("run.folds", *v);
    if (cfg.folds < 2) throw ConfigError("field run.folds: must be >= 2");
  }
  if (auto v = get("run.repeats")) {
    cfg.repeats = detail::parse_size("run.repeats", *v);
    if (cfg.repeats < 1) throw ConfigError("field run.repeats: must be >= 1");
  }
  if (auto v = get("run.seed")) cfg.seed = detail::parse_u64("run.seed", *v);
  else if (env_seed) cfg.seed = detail::parse_u64("FMREG_SEED", *env_seed);
  if (auto v = get("run.output")) cfg.output = *v;

  if (auto v = get("grid.epsilons"))
    for (const auto& s : detail::split_list(*v))
      cfg.grid.epsilons.push_back(detail::parse_double("grid.epsilons", s));
  if (auto v = get("grid.rates"))
    for (const auto& s : detail::split_list(*v))
      cfg.grid.sampling_rates.push_back(detail::parse_double("grid.rates", s));
  if (auto v = get("grid.dims"))
    for (const auto& s : detail::split_list(*v))
      cfg.grid.dims.push_back(detail::parse_size("grid.dims", s));
  for (double e : cfg.grid.epsilons)
    if (!(e > 0.0)) throw ConfigError("field grid.epsilons: epsilon must be positive");

  const bool has_file = kv.count("data.path") > 0;
  const bool has_synth = kv.count("synth.n") || kv.count("synth.d") ||
                         kv.count("synth.omega") || kv.count("synth.noise");

  if (command == Command::Train || command == Command::Bench ||
      command == Command::Synth) {
    if (command == Command::Synth && has_file)
      throw ConfigError("synth does not take data.path");
    if (command != Command::Synth && has_file == has_synth)
      throw ConfigError(
          "exactly one data source: set data.path or the synth.* fields");
  }

  if (has_file) {
    cfg.input_path = std::filesystem::path(kv["data.path"]);
    if (auto v = get("data.target_index"))
      cfg.target_index = detail::parse_size("data.target_index", *v);
    else
      throw ConfigError("missing required field data.target_index");
    if (auto v = get("data.pre_normalized"))
      cfg.pre_normalized = detail::parse_bool("data.pre_normalized", *v);
    if (auto v = get("data.bounds"))
      for (const auto& s : detail::split_list(*v))
        cfg.bounds.feature.push_back(detail::parse_interval("data.bounds", s));
    if (auto v = get("data.y_bounds"))
      cfg.y_bounds = detail::parse_interval("data.y_bounds", *v);
    if (auto v = get("data.threshold"))
      cfg.threshold = detail::parse_double("data.threshold", *v);
    if (!cfg.pre_normalized) {
      if (cfg.bounds.feature.empty())
        throw ConfigError("missing required field data.bounds");
      if (cfg.task == Task::Linear && !cfg.y_bounds)
        throw ConfigError("missing required field data.y_bounds");
      if (cfg.task == Task::Logistic && !cfg.threshold)
        throw ConfigError("missing required field data.threshold");
    }
  }

  if (has_synth || command == Command::Synth) {
    SynthSpec spec;
    if (auto v = get("synth.n")) spec.n = detail::parse_size("synth.n", *v);
    else throw ConfigError("missing required field synth.n");
    if (auto v = get("synth.d")) spec.d = detail::parse_size("synth.d", *v);
    else throw ConfigError("missing required field synth.d");
    if (spec.n < 1 || spec.d < 1)
      throw ConfigError("synth.n and synth.d must be >= 1");
    spec.task = cfg.task;
    if (auto v = get("synth.omega")) {
      for (const auto& s : detail::split_list(*v))
        spec.true_omega.push_back(detail::parse_double("synth.omega", s));
      if (spec.true_omega.size() == 1 && spec.d > 1)
        spec.true_omega.assign(spec.d, spec.true_omega[0]);
      if (spec.true_omega.size() != spec.d)
        throw ConfigError("field synth.omega: expected " +
                          std::to_string(spec.d) + " entries");
    } else {
      spec.true_omega.assign(spec.d, 0.0);
    }
    if (auto v = get("synth.noise")) {
      spec.noise_level = detail::parse_double("synth.noise", *v);
      if (spec.noise_level < 0.0)
        throw ConfigError("field synth.noise: must be >= 0");
    }
    cfg.synth = std::move(spec);
  }

  if (command == Command::Train && cfg.methods.size() != 1)
    throw ConfigError("train expects a single method");

  return cfg;
}

inline NormalizedDataset build_input(const RunConfig& cfg) {
  if (cfg.synth)
    return synth_generate(*cfg.synth, derive_seed(cfg.seed, {0xda7a}));
  if (cfg.pre_normalized)
    return load_normalized(*cfg.input_path, cfg.target_index, cfg.task);
  const RawDataset raw = load_table(*cfg.input_path, cfg.target_index);
  Mat features = normalize_features(raw, cfg.bounds);
  const TargetEncoding enc = cfg.task == Task::Linear
                                 ? TargetEncoding::linear(*cfg.y_bounds)
                                 : TargetEncoding::logistic(*cfg.threshold);
  return encode_target(raw, std::move(features), enc);
}

inline Method make_method(MethodKind kind, const RunConfig& cfg) {
  switch (kind) {
    case MethodKind::FM:
      return Method::fm(cfg.task,
                        TrainOptions{std::nullopt, cfg.strategy,
                                     cfg.lambda_override});
    case MethodKind::NoPrivacy:
      return Method::no_privacy(cfg.task);
    default:
      return Method::truncated(cfg.task);
  }
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_omega(const Vec& omega) {
  std::string out = "[";
  for (std::size_t j = 0; j < omega.size(); ++j) {
    if (j) out += ", ";
    out += format_double(omega[j]);
  }
  out += "]";
  return out;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path.string());
  out << content;
  if (!out) throw DataError("failed writing: " + path.string());
}

}  // namespace detail

inline int run_train(const RunConfig& cfg, std::ostream& out) {
  const Method method = make_method(cfg.methods[0], cfg);
  const NormalizedDataset data = build_input(cfg);

  nlohmann::json artifact{{"command", "train"},
                          {"method", to_string(method.kind)},
                          {"task", to_string(cfg.task)},
                          {"seed", cfg.seed},
                          {"n", data.n()},
                          {"d", data.d()}};
  Vec omega;
  if (method.kind == MethodKind::FM) {
    const bool rerun = cfg.strategy == RepairStrategy::RerunOnce;
    PrivacyBudget budget(rerun ? 2.0 * cfg.epsilon : cfg.epsilon);
    SplitRng rng(derive_seed(cfg.seed, {0x7a17}));
    TrainOptions opts = method.options;
    opts.epsilon = cfg.epsilon;
    TrainResult result = fm_train(data, cfg.task, budget, rng, opts);
    omega = std::move(result.omega);
    artifact["epsilon"] = cfg.epsilon;
    artifact["epsilon_spent"] = result.epsilon_spent;
    artifact["repair"] = result.repair.to_json();
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : result.traces) jt.push_back(t.to_json());
    artifact["traces"] = jt;
  } else {
    omega = train_baseline(method, data);
  }

  const char* metric_name =
      cfg.task == Task::Linear ? "mse" : "misclassification_rate";
  const double metric = cfg.task == Task::Linear
                            ? mse(omega, data)
                            : misclassification_rate(omega, data);
  artifact["omega"] = omega;
  artifact["metric_name"] = metric_name;
  artifact["metric"] = metric;

  std::filesystem::create_directories(cfg.output);
  const auto model_path = cfg.output / "model.json";
  detail::write_text_file(model_path, artifact.dump(2) + "\n");

  out << "omega = " << detail::format_omega(omega) << "\n";
  out << "train " << metric_name << " = " << detail::format_double(metric)
      << "\n";
  out << "wrote " << model_path.string() << "\n";
  return 0;
}

inline int run_bench(const RunConfig& cfg, std::ostream& out) {
  const NormalizedDataset data = build_input(cfg);
  std::vector<Method> methods;
  for (auto kind : cfg.methods) methods.push_back(make_method(kind, cfg));

  const EvalReport report =
      sweep(cfg.grid, data, methods, cfg.folds, cfg.repeats, cfg.seed);

  std::filesystem::create_directories(cfg.output);
  nlohmann::json artifact = report.to_json();
  artifact["command"] = "bench";
  artifact["task"] = to_string(cfg.task);
  artifact["seed"] = cfg.seed;
  artifact["folds"] = cfg.folds;
  artifact["repeats"] = cfg.repeats;
  detail::write_text_file(cfg.output / "report.json", artifact.dump(2) + "\n");

  std::ostringstream csv;
  report.write_csv(csv);
  detail::write_text_file(cfg.output / "cells.csv", csv.str());

  // Timing sidecar: informational only, not part of the deterministic
  // artifacts.
  std::ostringstream timings;
  double total = 0.0;
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    timings << "cell " << i << " " << report.cells[i].wall_ms << " ms\n";
    total += report.cells[i].wall_ms;
  }
  timings << "total " << total << " ms\n";
  detail::write_text_file(cfg.output / "timings.txt", timings.str());

  for (const auto& a : report.aggregates()) {
    out << a.method << " " << to_string(cfg.task)
        << " epsilon=" << detail::format_double(a.epsilon) << " n=" << a.n
        << " d=" << a.d << " cells=" << a.cells
        << " mean=" << detail::format_double(a.mean)
        << " median=" << detail::format_double(a.median)
        << " stddev=" << detail::format_double(a.stddev) << "\n";
  }
  out << "wrote " << (cfg.output / "report.json").string() << "\n";
  return 0;
}

inline int run_synth(const RunConfig& cfg, std::ostream& out) {
  const NormalizedDataset data =
      synth_generate(*cfg.synth, derive_seed(cfg.seed, {0xda7a}));
  if (cfg.output.has_parent_path())
    std::filesystem::create_directories(cfg.output.parent_path());
  write_csv(data, cfg.output);
  out << "wrote " << data.n() << " records (" << data.d() << " features, "
      << to_string(data.task) << " target) to " << cfg.output.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// `validate`: quick self-checks of the library invariants.

namespace selfcheck {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline void random_tuple(std::size_t d, Task task, SplitRng& rng, Vec& x,
                         double& y) {
  x.assign(d, 0.0);
  const double style = rng.next_unit();
  if (style < 0.34) {
    x[rng.next_below(d)] = 2.0 * rng.next_unit() - 1.0;  // mass on one axis
  } else {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = 2.0 * rng.next_unit() - 1.0;
      norm2 += x[j] * x[j];
    }
    const double target = rng.next_unit();  // rescale to a random norm <= 1
    const double s = norm2 > 0.0 ? target / std::sqrt(norm2) : 0.0;
    for (double& v : x) v *= s;
  }
  y = task == Task::Linear ? 2.0 * rng.next_unit() - 1.0
                           : (rng.next_unit() < 0.5 ? 0.0 : 1.0);
}

inline NormalizedDataset random_dataset(std::size_t n, std::size_t d, Task task,
                                        SplitRng& rng) {
  Mat features(n, d);
  Vec targets(n);
  Vec x;
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    random_tuple(d, task, rng, x, y);
    for (std::size_t j = 0; j < d; ++j) features(i, j) = x[j];
    targets[i] = y;
  }
  return make_dataset(task, std::move(features), std::move(targets));
}

inline Check check_normalization_bound(std::uint64_t seed) {
  Check c{"normalization-bound"};
  SplitRng rng(seed, 1);
  for (std::size_t d : {1u, 3u, 7u}) {
    RawDataset raw;
    raw.rows = Mat(40, d + 1);
    raw.target_index = d;
    AttributeBounds bounds;
    for (std::size_t j = 0; j < d; ++j) {
      const double lo = -5.0 + 10.0 * rng.next_unit();
      bounds.feature.push_back({lo, lo + 0.5 + 10.0 * rng.next_unit()});
    }
    for (std::size_t i = 0; i < raw.n(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const auto [lo, hi] = bounds.feature[j];
        raw.rows(i, j) = lo + (hi - lo) * rng.next_unit();
      }
    const Mat features = normalize_features(raw, bounds);
    for (std::size_t i = 0; i < features.rows; ++i)
      if (l2_norm(features.row(i)) > 1.0 + 1e-12) {
        c.detail = "row norm exceeds 1";
        return c;
      }
  }
  c.pass = true;
  return c;
}

inline Check check_kfold_partition(std::uint64_t seed) {
  Check c{"kfold-partition"};
  SplitRng rng(seed, 2);
  const NormalizedDataset data = random_dataset(11, 2, Task::Linear, rng);
  const FoldPlan plan = kfold_split(data, 5, seed);
  std::vector<std::size_t> sizes(5, 0);
  for (auto f : plan.assignment) ++sizes[f];
  std::sort(sizes.begin(), sizes.end());
  if (sizes != std::vector<std::size_t>{2, 2, 2, 2, 3}) {
    c.detail = "fold sizes not balanced";
    return c;
  }
  c.pass = true;
  return c;
}

inline Check check_laplace_moments(std::uint64_t seed) {
  Check c{"laplace-moments"};
  SplitRng rng(seed, 3);
  const std::size_t n = 200000;
  double sum = 0.0, sum_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = laplace_sample(1.0, rng);
    sum += v;
    sum_abs += std::abs(v);
  }
  const double mean = sum / n;
  const double mean_abs = sum_abs / n;
  if (std::abs(mean) > 0.018 || std::abs(mean_abs - 1.0) > 0.02) {
    c.detail = "mean=" + std::to_string(mean) +
               " mean|x|=" + std::to_string(mean_abs);
    return c;
  }
  c.pass = true;
  return c;
}

inline Check check_sensitivity_bound(std::uint64_t seed) {
  Check c{"sensitivity-neighbor-bound"};
  SplitRng rng(seed, 4);
  for (Task task : {Task::Linear, Task::Logistic}) {
    for (std::size_t d : {1u, 5u, 14u}) {
      const Sensitivity sens =
          task == Task::Linear ? sensitivity_linear(d) : sensitivity_logistic(d);
      for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.next_below(5);
        NormalizedDataset a = random_dataset(n, d, task, rng);
        NormalizedDataset b = a;
        Vec x;
        double y = 0.0;
        random_tuple(d, task, rng, x, y);
        for (std::size_t j = 0; j < d; ++j) b.features(n - 1, j) = x[j];
        b.targets[n - 1] = y;
        const auto build = [&](const NormalizedDataset& ds) {
          return task == Task::Linear ? build_linear_objective(ds)
                                      : build_logistic_taylor_objective(ds);
        };
        if (coefficient_l1_distance(build(a), build(b)) > sens.delta) {
          c.detail = "distance exceeded delta at d=" + std::to_string(d);
          return c;
        }
      }
    }
  }
  c.pass = true;
  return c;
}

inline Check check_dp_ratio(std::uint64_t seed) {
  Check c{"dp-ratio"};
  SplitRng rng(seed, 5);
  const double eps = 1.0;
  const std::size_t d = 3;
  const Sensitivity sens = sensitivity_linear(d);
  const double b = sens.delta / eps;
  const std::size_t m = perturbed_coefficient_count(d);
  for (int trial = 0; trial < 200; ++trial) {
    Vec shift(m);
    double l1 = 0.0;
    for (auto& s : shift) {
      s = 2.0 * rng.next_unit() - 1.0;
      l1 += std::abs(s);
    }
    const double scale = sens.delta * rng.next_unit() / l1;
    for (auto& s : shift) s *= scale;
    double log_ratio = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double center = 10.0 * (2.0 * rng.next_unit() - 1.0);
      const double x = center + 50.0 * (2.0 * rng.next_unit() - 1.0);
      log_ratio += (std::abs(x - center - shift[i]) - std::abs(x - center)) / b;
    }
    if (log_ratio > eps + 1e-9) {
      c.detail = "density ratio exceeded exp(eps)";
      return c;
    }
  }
  c.pass = true;
  return c;
}

inline Check check_eigen_reconstruction(std::uint64_t seed) {
  Check c{"eigen-reconstruction"};
  SplitRng rng(seed, 6);
  for (int trial = 0; trial < 10; ++trial) {
    Mat m(14, 14);
    for (std::size_t i = 0; i < 14; ++i)
      for (std::size_t j = i; j < 14; ++j)
        m(i, j) = m(j, i) = 10.0 * (2.0 * rng.next_unit() - 1.0);
    const EigenDecomposition eig = sym_eigendecompose(m);
    Mat lam(14, 14);
    for (std::size_t i = 0; i < 14; ++i) lam(i, i) = eig.lambdas[i];
    const Mat rec = matmul(matmul(transpose(eig.q), lam), eig.q);
    double resid = 0.0;
    for (std::size_t i = 0; i < rec.data.size(); ++i)
      resid = std::max(resid, std::abs(rec.data[i] - m.data[i]));
    if (resid > 1e-8) {
      c.detail = "reconstruction residual " + std::to_string(resid);
      return c;
    }
  }
  c.pass = true;
  return c;
}

inline Check check_noiseless_limit(std::uint64_t seed) {
  Check c{"noiseless-limit"};
  SplitRng rng(seed, 7);
  for (std::size_t d : {1u, 5u}) {
    SynthSpec spec{400, d, Task::Linear, Vec(d, 0.4), 0.05};
    const NormalizedDataset data = synth_generate(spec, rng.next_u64());
    PrivacyBudget budget(1e12);
    SplitRng noise_rng = rng.split(d);
    const TrainResult fm = fm_train(data, Task::Linear, budget, noise_rng);
    const Vec exact = minimize_linear_least_squares(data);
    if (linf_diff(fm.omega, exact) > 1e-3) {
      c.detail = "FM at eps=1e12 deviates from the exact minimizer";
      return c;
    }
  }
  c.pass = true;
  return c;
}

inline Check check_budget_accounting(std::uint64_t seed) {
  Check c{"budget-accounting"};
  SplitRng rng(seed, 8);
  const NormalizedDataset data = random_dataset(8, 2, Task::Linear, rng);
  const QuadraticObjective obj = build_linear_objective(data);
  const Sensitivity sens = sensitivity_linear(2);
  PrivacyBudget budget(1.0);
  perturb_objective(obj, sens, budget, rng, 0.4);
  perturb_objective(obj, sens, budget, rng, 0.4);
  if (std::abs(budget.consumed() - 0.8) > 1e-12) {
    c.detail = "consumed " + std::to_string(budget.consumed());
    return c;
  }
  try {
    perturb_objective(obj, sens, budget, rng, 0.4);
    c.detail = "overdraft was not rejected";
    return c;
  } catch (const NumericError&) {
  }
  c.pass = true;
  return c;
}

inline Check check_gradient(std::uint64_t seed) {
  Check c{"gradient-finite-differences"};
  SplitRng rng(seed, 9);
  for (Task task : {Task::Linear, Task::Logistic}) {
    const NormalizedDataset data = random_dataset(30, 4, task, rng);
    const QuadraticObjective obj = task == Task::Linear
                                       ? build_linear_objective(data)
                                       : build_logistic_taylor_objective(data);
    Vec omega(4);
    for (auto& v : omega) v = 2.0 * rng.next_unit() - 1.0;
    const Vec g = gradient(obj, omega);
    for (std::size_t j = 0; j < omega.size(); ++j) {
      Vec hi = omega, lo = omega;
      hi[j] += 1e-5;
      lo[j] -= 1e-5;
      const double fd = (evaluate(obj, hi) - evaluate(obj, lo)) / 2e-5;
      if (std::abs(fd - g[j]) > 1e-6 * (1.0 + std::abs(g[j]))) {
        c.detail = "gradient mismatch at coordinate " + std::to_string(j);
        return c;
      }
    }
  }
  c.pass = true;
  return c;
}

}  // namespace selfcheck

inline int run_validate(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = cfg.seed;
  const std::vector<selfcheck::Check> checks{
      selfcheck::check_normalization_bound(seed),
      selfcheck::check_kfold_partition(seed),
      selfcheck::check_laplace_moments(seed),
      selfcheck::check_sensitivity_bound(seed),
      selfcheck::check_dp_ratio(seed),
      selfcheck::check_eigen_reconstruction(seed),
      selfcheck::check_noiseless_limit(seed),
      selfcheck::check_budget_accounting(seed),
      selfcheck::check_gradient(seed)};
  int failures = 0;
  for (const auto& c : checks) {
    if (c.pass) {
      out << "[PASS] " << c.name << "\n";
    } else {
      ++failures;
      out << "[FAIL] " << c.name << (c.detail.empty() ? "" : ": " + c.detail)
          << "\n";
    }
  }
  out << (failures == 0 ? "all checks passed"
                        : std::to_string(failures) + " check(s) failed")
      << "\n";
  return failures == 0 ? 0 : 3;
}

// Dispatch one validated configuration. Artifacts land under the output
// path; deterministic given (config, seed).
inline int run(const RunConfig& cfg, std::ostream& out) {
  switch (cfg.command) {
    case Command::Train: return run_train(cfg, out);
    case Command::Bench: return run_bench(cfg, out);
    case Command::Synth: return run_synth(cfg, out);
    default: return run_validate(cfg, out);
  }
}

}  // namespace fm
