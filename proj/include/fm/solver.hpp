#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fm/error.hpp"
#include "fm/linalg.hpp"
#include "fm/mechanism.hpp"
#include "fm/objective.hpp"

namespace fm {

// q rows are eigenvectors, lambdas the matching eigenvalues sorted
// descending; m = q^T diag(lambdas) q.
struct EigenDecomposition {
  Mat q;
  Vec lambdas;
};

// Cyclic Jacobi rotations. Ample for the target dimensions (d <= a few
// hundred); capped at 100 sweeps with an off-diagonal threshold of
// 1e-12 relative to the Frobenius norm.
inline EigenDecomposition sym_eigendecompose(const Mat& m) {
  if (m.rows != m.cols) throw ConfigError("eigendecomposition needs a square matrix");
  if (!all_finite(m)) throw ConfigError("eigendecomposition input is not finite");
  const std::size_t n = m.rows;
  const double scale = max_abs(m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * std::max(1.0, scale))
        throw ConfigError("eigendecomposition input is not symmetric");

  Mat a = m;
  Mat v = Mat::identity(n);

  const auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  const double tol = 1e-12 * std::max(frobenius_norm(m), 1e-300);
  int sweeps = 0;
  for (; sweeps < 100 && off_norm() > tol; ++sweeps) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = tau >= 0.0
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (const double off = off_norm(); off > tol)
    throw NumericError("eigendecomposition did not converge after " +
                       std::to_string(sweeps) +
                       " sweeps; off-diagonal residual " + std::to_string(off));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition eig{Mat(n, n), Vec(n)};
  for (std::size_t r = 0; r < n; ++r) {
    eig.lambdas[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) eig.q(r, k) = v(k, order[r]);
  }
  return eig;
}

// Regularizer recommended for the noisy quadratic term: 4x the standard
// deviation of the injected Laplace noise, i.e. 4 * sqrt(2) * delta/epsilon.
inline double default_lambda(const Sensitivity& sens, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  return 4.0 * std::sqrt(2.0) * sens.delta / epsilon;
}

// m <- m + lambda I; shifts every eigenvalue up by exactly lambda.
inline QuadraticObjective regularize(const QuadraticObjective& obj,
                                     double lambda) {
  if (lambda < 0.0) throw ConfigError("regularization lambda must be >= 0");
  QuadraticObjective out = obj;
  for (std::size_t j = 0; j < out.d; ++j) out.m(j, j) += lambda;
  return out;
}

// Eigenvalues at or below this are treated as non-positive when trimming.
inline double trim_tolerance(const Mat& m) {
  return 1e-10 * std::max(1.0, max_abs(m));
}

// Surrogate objective restricted to the span of the retained eigenvectors:
//   g(V) = V^T diag(lambdas_p) V + (qp a)^T V + c0   with V = qp w.
struct TrimmedObjective {
  Mat qp;         // (d - removed) x d, orthonormal rows
  Vec lambdas_p;  // retained eigenvalues, all positive, descending
  Vec a;
  double c0 = 0.0;
  std::size_t removed = 0;
};

// Drop eigenvalues <= tolerance together with their eigenvector rows. A
// fully non-positive spectrum leaves nothing to optimize and is an error.
inline TrimmedObjective spectral_trim(const QuadraticObjective& obj,
                                      double tolerance) {
  const EigenDecomposition eig = sym_eigendecompose(obj.m);
  std::size_t keep = 0;
  while (keep < eig.lambdas.size() && eig.lambdas[keep] > tolerance) ++keep;
  if (keep == 0)
    throw NumericError(
        "fully degenerate objective: no eigenvalue above trim tolerance " +
        std::to_string(tolerance));

  TrimmedObjective out;
  out.qp = Mat(keep, obj.d);
  out.lambdas_p.assign(eig.lambdas.begin(), eig.lambdas.begin() + keep);
  for (std::size_t r = 0; r < keep; ++r)
    for (std::size_t k = 0; k < obj.d; ++k) out.qp(r, k) = eig.q(r, k);
  out.a = obj.a;
  out.c0 = obj.c0;
  out.removed = obj.d - keep;
  return out;
}

inline TrimmedObjective spectral_trim(const QuadraticObjective& obj) {
  return spectral_trim(obj, trim_tolerance(obj.m));
}

// Stationary point of the trimmed surrogate, V* = -(1/2) diag(1/lambda) qp a,
// mapped back by the minimum-norm solution of qp w = V*, i.e. w = qp^T V*.
inline Vec minimize(const TrimmedObjective& trimmed) {
  const Vec proj = matvec(trimmed.qp, trimmed.a);
  Vec vstar(proj.size());
  for (std::size_t r = 0; r < proj.size(); ++r)
    vstar[r] = -0.5 * proj[r] / trimmed.lambdas_p[r];
  return matvec_t(trimmed.qp, vstar);
}

enum class RepairStrategy { RegularizeTrim, RerunOnce };

inline const char* to_string(RepairStrategy s) {
  return s == RepairStrategy::RegularizeTrim ? "regularize-trim" : "rerun-once";
}

struct RepairReport {
  RepairStrategy strategy = RepairStrategy::RegularizeTrim;
  double lambda = 0.0;     // regularizer actually applied
  std::size_t trimmed = 0; // eigenvalues removed
  Vec spectrum;            // eigenvalues of the repaired matrix, descending
  bool rerun_triggered = false;

  nlohmann::json to_json() const {
    return {{"strategy", fm::to_string(strategy)},
            {"lambda", lambda},
            {"trimmed", trimmed},
            {"spectrum", spectrum},
            {"rerun_triggered", rerun_triggered}};
  }
};

struct SolveResult {
  Vec omega;
  RepairReport report;
};

// Repair a possibly-unbounded noisy objective and minimize it.
//
// RegularizeTrim (default): add lambda I (lambda from default_lambda unless
// overridden), trim the non-positive spectrum, minimize the surrogate.
//
// RerunOnce: if the raw quadratic term is positive definite, minimize it
// directly; otherwise request one fresh perturbation through `reperturb`
// (the caller charges the budget there, doubling the privacy cost) and
// fail hard if the redrawn objective is still degenerate.
inline SolveResult solve_pipeline(
    const QuadraticObjective& noisy, const Sensitivity& sens, double epsilon,
    RepairStrategy strategy,
    std::optional<double> lambda_override = std::nullopt,
    const std::function<QuadraticObjective()>& reperturb = {}) {
  if (sens.d != noisy.d)
    throw ConfigError("sensitivity dimension does not match objective");

  RepairReport report;
  report.strategy = strategy;

  if (strategy == RepairStrategy::RegularizeTrim) {
    report.lambda = lambda_override.value_or(default_lambda(sens, epsilon));
    const QuadraticObjective reg = regularize(noisy, report.lambda);
    report.spectrum = sym_eigendecompose(reg.m).lambdas;
    const TrimmedObjective trimmed = spectral_trim(reg);
    report.trimmed = trimmed.removed;
    return {minimize(trimmed), std::move(report)};
  }

  const auto solve_if_pd =
      [&](const QuadraticObjective& obj) -> std::optional<Vec> {
    const double tol = trim_tolerance(obj.m);
    const EigenDecomposition eig = sym_eigendecompose(obj.m);
    report.spectrum = eig.lambdas;
    if (eig.lambdas.back() <= tol) return std::nullopt;
    return minimize(spectral_trim(obj, tol));
  };

  if (auto omega = solve_if_pd(noisy)) return {std::move(*omega), std::move(report)};
  if (!reperturb)
    throw NumericError(
        "noisy objective is unbounded and no reperturbation source was given");
  report.rerun_triggered = true;
  const QuadraticObjective redrawn = reperturb();
  if (auto omega = solve_if_pd(redrawn)) return {std::move(*omega), std::move(report)};
  throw NumericError(
      "objective still unbounded after one rerun; privacy budget cap reached");
}

}  // namespace fm
