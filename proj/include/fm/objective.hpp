#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fm/dataset.hpp"
#include "fm/error.hpp"
#include "fm/linalg.hpp"

namespace fm {

// Degree-<=2 polynomial in the model parameters:
//   f(w) = c0 + a.w + w^T m w
// with m kept exactly symmetric (cross-monomial coefficients split evenly
// between the mirrored entries). The coefficient of the monomial w_j w_l
// (j != l) is therefore m(j,l) + m(l,j).
struct QuadraticObjective {
  std::size_t d = 0;
  double c0 = 0.0;
  Vec a;
  Mat m;

  static QuadraticObjective zero(std::size_t d) {
    return {d, 0.0, Vec(d, 0.0), Mat(d, d)};
  }

  // Add `coeff * w_j * w_l` preserving symmetry.
  void add_monomial(std::size_t j, std::size_t l, double coeff) {
    if (j == l) {
      m(j, j) += coeff;
    } else {
      m(j, l) += 0.5 * coeff;
      m(l, j) += 0.5 * coeff;
    }
  }
};

inline void check_dims(const QuadraticObjective& obj,
                       std::span<const double> omega) {
  if (omega.size() != obj.d)
    throw ConfigError("model parameter dimension " +
                      std::to_string(omega.size()) +
                      " does not match objective dimension " +
                      std::to_string(obj.d));
}

inline double evaluate(const QuadraticObjective& obj,
                       std::span<const double> omega) {
  check_dims(obj, omega);
  return obj.c0 + dot(obj.a, omega) + quad_form(obj.m, omega);
}

// a + 2 m w (m symmetric).
inline Vec gradient(const QuadraticObjective& obj,
                    std::span<const double> omega) {
  check_dims(obj, omega);
  Vec g = matvec(obj.m, omega);
  for (std::size_t j = 0; j < obj.d; ++j) g[j] = obj.a[j] + 2.0 * g[j];
  return g;
}

// Exact polynomial form of the least-squares objective sum_i (y_i - x_i.w)^2:
//   c0 = sum y_i^2,  a_j = -2 sum y_i x_ij,  m_jl = sum x_ij x_il.
inline QuadraticObjective build_linear_objective(const NormalizedDataset& data) {
  if (data.task != Task::Linear)
    throw ConfigError("build_linear_objective requires a linear-task dataset");
  const std::size_t d = data.d();
  auto obj = QuadraticObjective::zero(d);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.x(i);
    const double y = data.y(i);
    obj.c0 += y * y;
    for (std::size_t j = 0; j < d; ++j) {
      obj.a[j] -= 2.0 * y * x[j];
      obj.m(j, j) += x[j] * x[j];
      for (std::size_t l = j + 1; l < d; ++l) {
        const double v = x[j] * x[l];
        obj.m(j, l) += v;
        obj.m(l, j) += v;
      }
    }
  }
  return obj;
}

// One additive piece of a cost function f(t,w) = sum_l f_l(g_l(t,w)) with
// g_l affine in w per tuple: g_l(t,w) = wvec(t).w + offset(t). Restricting
// g_l to affine forms keeps the degree-2 truncation exact at degree 2.
struct CostComponent {
  // Fills wvec (d entries) and offset for a tuple (x, y).
  std::function<void(std::span<const double> x, double y, Vec& wvec,
                     double& offset)>
      affine_form;
  double expansion_point = 0.0;
  // Value, first and second derivative of f_l at the expansion point.
  std::array<double, 3> derivatives{};
};

struct CostDecomposition {
  std::vector<CostComponent> components;
};

// Degree-2 truncated expansion of sum_l sum_i f_l(g_l(t_i, w)) around the
// per-component expansion points:
//   sum_l sum_i sum_{k=0..2} f_l^(k)(z_l)/k! * (g_l(t_i,w) - z_l)^k.
inline QuadraticObjective build_taylor_objective(
    const CostDecomposition& decomp, const NormalizedDataset& data) {
  const std::size_t d = data.d();
  auto obj = QuadraticObjective::zero(d);
  Vec w(d, 0.0);
  for (const auto& comp : decomp.components) {
    const auto [f0, f1, f2] = comp.derivatives;
    if (!std::isfinite(f0) || !std::isfinite(f1) || !std::isfinite(f2))
      throw ConfigError("cost component has non-finite derivative values");
    for (std::size_t i = 0; i < data.n(); ++i) {
      double b = 0.0;
      comp.affine_form(data.x(i), data.y(i), w, b);
      const double c = b - comp.expansion_point;
      // k = 0, 1, 2 of (wvec.w + c)^k
      obj.c0 += f0 + f1 * c + 0.5 * f2 * c * c;
      for (std::size_t j = 0; j < d; ++j) {
        obj.a[j] += (f1 + f2 * c) * w[j];
        obj.m(j, j) += 0.5 * f2 * w[j] * w[j];
        for (std::size_t l = j + 1; l < d; ++l) {
          const double v = 0.5 * f2 * w[j] * w[l];
          obj.m(j, l) += v;
          obj.m(l, j) += v;
        }
      }
    }
  }
  return obj;
}

// The two-piece decomposition of the logistic cost
//   log(1 + exp(x.w)) - y x.w
// expanded at 0: the log-partition piece with derivatives
// (log 2, 1/2, 1/4) on g1 = x.w, and the linear label piece -g2 with
// g2 = y x.w.
inline CostDecomposition logistic_decomposition() {
  CostDecomposition decomp;
  CostComponent log_partition;
  log_partition.affine_form = [](std::span<const double> x, double, Vec& w,
                                 double& b) {
    std::copy(x.begin(), x.end(), w.begin());
    b = 0.0;
  };
  log_partition.expansion_point = 0.0;
  log_partition.derivatives = {std::log(2.0), 0.5, 0.25};
  decomp.components.push_back(std::move(log_partition));

  CostComponent label_term;
  label_term.affine_form = [](std::span<const double> x, double y, Vec& w,
                              double& b) {
    for (std::size_t j = 0; j < x.size(); ++j) w[j] = y * x[j];
    b = 0.0;
  };
  label_term.expansion_point = 0.0;
  label_term.derivatives = {0.0, -1.0, 0.0};
  decomp.components.push_back(std::move(label_term));
  return decomp;
}

// Truncated logistic objective; coefficients come out as
//   c0 = n log 2,  a_j = sum_i (1/2 - y_i) x_ij,  m_jl = (1/8) sum_i x_ij x_il.
inline QuadraticObjective build_logistic_taylor_objective(
    const NormalizedDataset& data) {
  if (data.task != Task::Logistic)
    throw ConfigError(
        "build_logistic_taylor_objective requires a logistic-task dataset");
  return build_taylor_objective(logistic_decomposition(), data);
}

namespace detail {

// log(1 + exp(s)) without overflow.
inline double log1p_exp(double s) {
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

inline double sigmoid(double s) {
  return s >= 0.0 ? 1.0 / (1.0 + std::exp(-s))
                  : std::exp(s) / (1.0 + std::exp(s));
}

}  // namespace detail

// Exact (untruncated) cost: linear sum_i (y_i - x_i.w)^2, logistic
// sum_i log(1 + exp(x_i.w)) - y_i x_i.w.
inline double true_loss(const NormalizedDataset& data,
                        std::span<const double> omega, Task task) {
  if (omega.size() != data.d())
    throw ConfigError("model parameter dimension does not match dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double s = dot(data.x(i), omega);
    if (task == Task::Linear) {
      const double r = data.y(i) - s;
      total += r * r;
    } else {
      total += detail::log1p_exp(s) - data.y(i) * s;
    }
  }
  return total;
}

}  // namespace fm
