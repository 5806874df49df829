#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fm/dataset.hpp"
#include "fm/objective.hpp"
#include "fm/solver.hpp"
#include "fm/train.hpp"

namespace fm {

enum class MethodKind { FM, NoPrivacy, Truncated };

inline const char* to_string(MethodKind k) {
  switch (k) {
    case MethodKind::FM: return "FM";
    case MethodKind::NoPrivacy: return "NoPrivacy";
    default: return "Truncated";
  }
}

// A benchmarked algorithm. Truncated (minimize the degree-2 surrogate
// without noise) exists for logistic only; for linear the surrogate is
// the exact objective and the method coincides with NoPrivacy.
struct Method {
  MethodKind kind = MethodKind::FM;
  Task task = Task::Linear;
  TrainOptions options;

  static Method fm(Task task, TrainOptions options = {}) {
    return {MethodKind::FM, task, std::move(options)};
  }
  static Method no_privacy(Task task) { return {MethodKind::NoPrivacy, task, {}}; }
  static Method truncated(Task task) {
    if (task == Task::Linear)
      throw ConfigError(
          "Truncated applies to logistic only (for linear it coincides with "
          "NoPrivacy)");
    return {MethodKind::Truncated, task, {}};
  }
};

inline double mse(std::span<const double> omega, const NormalizedDataset& test) {
  if (test.n() == 0) throw DataError("empty test set");
  if (omega.size() != test.d())
    throw ConfigError("model parameter dimension does not match test set");
  double total = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    const double r = test.y(i) - dot(test.x(i), omega);
    total += r * r;
  }
  return total / static_cast<double>(test.n());
}

// Predict class 1 iff the predicted probability is strictly above 1/2
// (equivalently x.w > 0); an exact tie predicts 0.
inline double misclassification_rate(std::span<const double> omega,
                                     const NormalizedDataset& test) {
  if (test.n() == 0) throw DataError("empty test set");
  if (omega.size() != test.d())
    throw ConfigError("model parameter dimension does not match test set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    const double predicted = dot(test.x(i), omega) > 0.0 ? 1.0 : 0.0;
    if (predicted != test.y(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.n());
}

// Exact least-squares minimizer through the spectral pseudo-inverse;
// rank-deficient data yields the minimum-norm solution.
inline Vec minimize_linear_least_squares(const NormalizedDataset& data) {
  if (data.task != Task::Linear)
    throw ConfigError("least-squares baseline requires a linear-task dataset");
  return minimize(spectral_trim(build_linear_objective(data)));
}

namespace detail {

// Positive-definite-floored solve of H p = -g via eigendecomposition.
inline Vec newton_direction(const Mat& hessian, const Vec& grad) {
  const EigenDecomposition eig = sym_eigendecompose(hessian);
  const double floor = std::max(1e-12, 1e-10 * std::abs(eig.lambdas.front()));
  Vec proj = matvec(eig.q, grad);
  for (std::size_t r = 0; r < proj.size(); ++r)
    proj[r] /= std::max(eig.lambdas[r], floor);
  Vec dir = matvec_t(eig.q, proj);
  for (double& v : dir) v = -v;
  return dir;
}

}  // namespace detail

// Iterative descent on the exact logistic loss (damped Newton steps with
// Armijo backtracking, gradient-descent fallback). Stops when the gradient
// norm drops below grad_tol. Near the minimum the remaining decrease falls
// below the floating-point resolution of the loss value long before the
// gradient reaches the tolerance; once the line search can no longer see a
// decrease, the bare Newton step is taken while the gradient norm keeps
// contracting.
inline Vec minimize_logistic_loss(const NormalizedDataset& data,
                                  double grad_tol = 1e-8,
                                  std::size_t max_iter = 100000) {
  if (data.task != Task::Logistic)
    throw ConfigError("logistic baseline requires a logistic-task dataset");
  const std::size_t n = data.n();
  const std::size_t d = data.d();

  Vec w(d, 0.0);
  double f = true_loss(data, w, Task::Logistic);
  Vec grad(d), trial(d);
  Mat hess(d, d);

  const auto gradient_at = [&](const Vec& at, Vec& out) {
    out.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.x(i);
      const double resid = detail::sigmoid(dot(x, at)) - data.y(i);
      for (std::size_t j = 0; j < d; ++j) out[j] += resid * x[j];
    }
    return l2_norm(out);
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.data.begin(), hess.data.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.x(i);
      const double p = detail::sigmoid(dot(x, w));
      const double resid = p - data.y(i);
      const double curv = p * (1.0 - p);
      for (std::size_t j = 0; j < d; ++j) {
        grad[j] += resid * x[j];
        for (std::size_t l = j; l < d; ++l) hess(j, l) += curv * x[j] * x[l];
      }
    }
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < j; ++l) hess(j, l) = hess(l, j);

    const double gn = l2_norm(grad);
    if (gn <= grad_tol) break;

    Vec dir = detail::newton_direction(hess, grad);
    double slope = dot(dir, grad);
    if (slope >= 0.0) {  // not a descent direction; fall back to steepest
      dir = grad;
      for (double& v : dir) v = -v;
      slope = -gn * gn;
    }

    if (-slope <= 1e-10 * (1.0 + std::abs(f))) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] + dir[j];
      Vec probe_grad;
      if (gradient_at(trial, probe_grad) < 0.5 * gn) {
        w = trial;
        f = true_loss(data, w, Task::Logistic);
        continue;
      }
      break;  // gradient floor of double precision reached
    }

    bool accepted = false;
    double step = 1.0;
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] + step * dir[j];
      const double f_trial = true_loss(data, trial, Task::Logistic);
      if (f_trial < f && f_trial <= f + 1e-4 * step * slope) {
        w = trial;
        f = f_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // stalled at floating-point resolution
  }
  return w;
}

// Minimizer of the noise-free degree-2 surrogate.
inline Vec minimize_truncated(const NormalizedDataset& data) {
  if (data.task != Task::Logistic)
    throw ConfigError("Truncated applies to logistic only");
  return minimize(spectral_trim(build_logistic_taylor_objective(data)));
}

inline Vec train_baseline(const Method& method, const NormalizedDataset& train) {
  if (method.kind == MethodKind::Truncated) return minimize_truncated(train);
  return method.task == Task::Linear ? minimize_linear_least_squares(train)
                                     : minimize_logistic_loss(train);
}

// One train/test evaluation. Non-private methods store epsilon = 0.
struct EvalCell {
  std::string method;
  Task task = Task::Linear;
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t fold = 0;
  std::size_t repeat = 0;
  double metric = 0.0;
  double wall_ms = 0.0;  // excluded from the deterministic artifacts
  std::uint64_t seed = 0;
  std::optional<RepairReport> repair;
  std::vector<NoiseTrace> traces;
};

struct Aggregate {
  std::string method;
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t cells = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
};

inline double median_of(Vec values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct EvalReport {
  std::vector<EvalCell> cells;

  // Grouped by (method, epsilon, n, d); recomputable from the cells.
  std::vector<Aggregate> aggregates() const {
    std::map<std::tuple<std::string, double, std::size_t, std::size_t>, Vec>
        groups;
    for (const auto& c : cells)
      groups[{c.method, c.epsilon, c.n, c.d}].push_back(c.metric);
    std::vector<Aggregate> out;
    for (const auto& [key, values] : groups) {
      Aggregate agg;
      std::tie(agg.method, agg.epsilon, agg.n, agg.d) = key;
      agg.cells = values.size();
      double sum = 0.0;
      for (double v : values) sum += v;
      agg.mean = sum / static_cast<double>(values.size());
      agg.median = median_of(values);
      double ss = 0.0;
      for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
      agg.stddev = values.size() > 1
                       ? std::sqrt(ss / static_cast<double>(values.size() - 1))
                       : 0.0;
      out.push_back(std::move(agg));
    }
    return out;
  }

  void merge(EvalReport&& other) {
    cells.insert(cells.end(), std::make_move_iterator(other.cells.begin()),
                 std::make_move_iterator(other.cells.end()));
  }

  // Deterministic given the cells: wall time is deliberately left out.
  nlohmann::json to_json() const {
    nlohmann::json jcells = nlohmann::json::array();
    for (const auto& c : cells) {
      nlohmann::json jc{{"method", c.method},
                        {"task", fm::to_string(c.task)},
                        {"epsilon", c.epsilon},
                        {"n", c.n},
                        {"d", c.d},
                        {"fold", c.fold},
                        {"repeat", c.repeat},
                        {"metric", c.metric},
                        {"seed", c.seed}};
      if (c.repair) jc["repair"] = c.repair->to_json();
      if (!c.traces.empty()) {
        nlohmann::json jt = nlohmann::json::array();
        for (const auto& t : c.traces) jt.push_back(t.to_json());
        jc["traces"] = jt;
      }
      jcells.push_back(std::move(jc));
    }
    nlohmann::json jaggs = nlohmann::json::array();
    for (const auto& a : aggregates())
      jaggs.push_back({{"method", a.method},
                       {"epsilon", a.epsilon},
                       {"n", a.n},
                       {"d", a.d},
                       {"cells", a.cells},
                       {"mean", a.mean},
                       {"median", a.median},
                       {"stddev", a.stddev}});
    return {{"cells", jcells}, {"aggregates", jaggs}};
  }

  // Flat table, one row per cell.
  void write_csv(std::ostream& out) const {
    out << "method,task,epsilon,n,d,fold,repeat,seed,metric\n";
    char buf[64];
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, "%.17g", c.epsilon);
      out << c.method << ',' << fm::to_string(c.task) << ',' << buf << ','
          << c.n << ',' << c.d << ',' << c.fold << ',' << c.repeat << ','
          << c.seed << ',';
      std::snprintf(buf, sizeof buf, "%.17g", c.metric);
      out << buf << '\n';
    }
  }
};

// Train one model for a cell. FM sizes its own budget per trained model:
// each cell is an independent release of epsilon (2x capacity reserved
// when the rerun strategy may double-charge).
inline EvalCell run_cell(const Method& method, const NormalizedDataset& train,
                         const NormalizedDataset& test, double epsilon,
                         std::uint64_t cell_seed) {
  EvalCell cell;
  cell.method = to_string(method.kind);
  cell.task = method.task;
  cell.n = train.n();
  cell.d = train.d();
  cell.seed = cell_seed;

  const auto start = std::chrono::steady_clock::now();
  Vec omega;
  if (method.kind == MethodKind::FM) {
    cell.epsilon = epsilon;
    const bool rerun = method.options.strategy == RepairStrategy::RerunOnce;
    PrivacyBudget budget(rerun ? 2.0 * epsilon : epsilon);
    SplitRng rng(cell_seed);
    TrainOptions opts = method.options;
    opts.epsilon = epsilon;
    TrainResult result = fm_train(train, method.task, budget, rng, opts);
    omega = std::move(result.omega);
    cell.repair = std::move(result.repair);
    cell.traces = std::move(result.traces);
  } else {
    omega = train_baseline(method, train);
  }
  cell.metric = method.task == Task::Linear
                    ? mse(omega, test)
                    : misclassification_rate(omega, test);
  cell.wall_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return cell;
}

// k-fold cross-validation repeated `repeats` times; folds reshuffle per
// repeat and every trained model draws fresh mechanism noise from a
// derived sub-seed. Each model is its own epsilon-release (budgets do not
// compose across cells here).
inline EvalReport cross_validate(const Method& method,
                                 const NormalizedDataset& data, std::size_t k,
                                 std::size_t repeats, double epsilon,
                                 std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (method.kind == MethodKind::FM && !(epsilon > 0.0))
    throw ConfigError("epsilon must be positive");

  EvalReport report;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    const FoldPlan plan = kfold_split(data, k, derive_seed(seed, {0xf01d, rep}));
    for (std::size_t fold = 0; fold < k; ++fold) {
      const auto train_idx = plan.complement_indices(fold);
      const auto test_idx = plan.fold_indices(fold);
      const NormalizedDataset train = subset(data, train_idx);
      const NormalizedDataset test = subset(data, test_idx);
      EvalCell cell = run_cell(method, train, test, epsilon,
                               derive_seed(seed, {0xce11, rep, fold}));
      cell.n = data.n();  // key cells by the grid point, not the fold split
      cell.fold = fold;
      cell.repeat = rep;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

struct SweepGrid {
  std::vector<double> epsilons;
  std::vector<double> sampling_rates;
  std::vector<std::size_t> dims;
};

// One cross_validate per grid point x method. Dimensionality points take a
// feature-column prefix; sampling-rate points take a seed-deterministic
// row subsample.
inline EvalReport sweep(const SweepGrid& grid, const NormalizedDataset& data,
                        const std::vector<Method>& methods, std::size_t k,
                        std::size_t repeats, std::uint64_t seed) {
  if (methods.empty()) throw ConfigError("sweep needs at least one method");
  const Vec epsilons =
      grid.epsilons.empty() ? Vec{0.8} : grid.epsilons;
  const Vec rates =
      grid.sampling_rates.empty() ? Vec{1.0} : grid.sampling_rates;
  const std::vector<std::size_t> dims =
      grid.dims.empty() ? std::vector<std::size_t>{data.d()} : grid.dims;

  EvalReport report;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    const NormalizedDataset projected = feature_prefix(data, dims[di]);
    for (std::size_t ri = 0; ri < rates.size(); ++ri) {
      const NormalizedDataset sampled =
          rates[ri] < 1.0
              ? subsample(projected, rates[ri], derive_seed(seed, {0x5a3b, di, ri}))
              : projected;
      for (std::size_t ei = 0; ei < epsilons.size(); ++ei)
        for (std::size_t mi = 0; mi < methods.size(); ++mi)
          report.merge(cross_validate(
              methods[mi], sampled, k, repeats, epsilons[ei],
              derive_seed(seed, {0x9a1d, di, ri, ei, mi})));
    }
  }
  return report;
}

}  // namespace fm
