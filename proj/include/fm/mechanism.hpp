#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "fm/error.hpp"
#include "fm/objective.hpp"
#include "fm/random.hpp"

namespace fm {

// Privacy allowance for a sequence of releases. The accumulator can never
// exceed the capacity; overdraft is a hard error raised before any noise
// is sampled.
class PrivacyBudget {
 public:
  explicit PrivacyBudget(double epsilon) : epsilon_(epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw ConfigError("epsilon must be positive");
  }

  double epsilon() const { return epsilon_; }
  double consumed() const { return consumed_; }
  double remaining() const { return epsilon_ - consumed_; }

  void charge(double eps) {
    if (!(eps > 0.0))
      throw NumericError("privacy budget charge must be positive");
    if (consumed_ + eps > epsilon_ * (1.0 + 1e-9))
      throw NumericError("insufficient privacy budget: requested " +
                         std::to_string(eps) + ", remaining " +
                         std::to_string(remaining()));
    consumed_ += eps;
  }

 private:
  double epsilon_;
  double consumed_ = 0.0;
};

// Worst-case L1 change of the objective's coefficient vector across
// neighbor databases, in closed form per task.
struct Sensitivity {
  double delta = 0.0;
  Task task = Task::Linear;
  std::size_t d = 0;
};

// 2(d+1)^2 for the least-squares expansion.
inline Sensitivity sensitivity_linear(std::size_t d) {
  if (d < 1) throw ConfigError("dimension must be at least 1");
  const auto dd = static_cast<double>(d);
  return {2.0 * (dd + 1.0) * (dd + 1.0), Task::Linear, d};
}

// d^2/4 + 3d for the truncated logistic expansion; independent of n.
inline Sensitivity sensitivity_logistic(std::size_t d) {
  if (d < 1) throw ConfigError("dimension must be at least 1");
  const auto dd = static_cast<double>(d);
  return {dd * dd / 4.0 + 3.0 * dd, Task::Logistic, d};
}

// One draw from Lap(0, b) by inverse CDF on u in (-1/2, 1/2):
//   -b * sign(u) * ln(1 - 2|u|).
inline double laplace_sample(double scale, SplitRng& rng) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw ConfigError("Laplace scale must be positive");
  const double u = rng.next_unit() - 0.5;
  const double sign = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
  return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

// Replay record for one perturbation: resume(rng_key, offset) and redraw
// `draws` samples at `scale` to reproduce the noise exactly.
struct NoiseTrace {
  double scale = 0.0;
  std::uint64_t rng_key = 0;
  std::uint64_t offset = 0;
  std::size_t draws = 0;

  nlohmann::json to_json() const {
    return {{"scale", scale},
            {"seed", rng_key},
            {"offset", offset},
            {"draws", draws}};
  }
};

// Coefficient count perturbed for dimension d: the constant, the d linear
// coefficients, and the d(d+1)/2 upper-triangular quadratic entries.
inline std::size_t perturbed_coefficient_count(std::size_t d) {
  return 1 + d + d * (d + 1) / 2;
}

// Add independent Lap(delta/epsilon) noise to every released coefficient:
// c0, then a_1..a_d, then the upper triangle of m in row-major order, each
// upper entry mirrored to keep m symmetric. Charges the budget first, so
// overdraft aborts before any sampling. epsilon defaults to the budget's
// full remaining allowance.
inline std::pair<QuadraticObjective, NoiseTrace> perturb_objective(
    const QuadraticObjective& obj, const Sensitivity& sens,
    PrivacyBudget& budget, SplitRng& rng,
    std::optional<double> epsilon = std::nullopt) {
  if (sens.d != obj.d)
    throw ConfigError("sensitivity dimension does not match objective");
  const double eps = epsilon.value_or(budget.remaining());
  if (!(eps > 0.0)) throw NumericError("insufficient privacy budget");
  budget.charge(eps);

  const double b = sens.delta / eps;
  NoiseTrace trace{b, rng.key(), rng.consumed(),
                   perturbed_coefficient_count(obj.d)};

  QuadraticObjective noisy = obj;
  noisy.c0 += laplace_sample(b, rng);
  for (std::size_t j = 0; j < obj.d; ++j) noisy.a[j] += laplace_sample(b, rng);
  for (std::size_t j = 0; j < obj.d; ++j)
    for (std::size_t l = j; l < obj.d; ++l) {
      const double eta = laplace_sample(b, rng);
      noisy.m(j, l) += eta;
      if (l != j) noisy.m(l, j) = noisy.m(j, l);
    }
  return {std::move(noisy), trace};
}

// L1 distance between coefficient vectors over distinct monomials: the
// constant, each linear coefficient, each diagonal quadratic coefficient,
// and each cross monomial counted once with its full coefficient
// m(j,l) + m(l,j).
inline double coefficient_l1_distance(const QuadraticObjective& lhs,
                                      const QuadraticObjective& rhs) {
  if (lhs.d != rhs.d)
    throw ConfigError("objective dimensions do not match");
  double dist = std::abs(lhs.c0 - rhs.c0);
  for (std::size_t j = 0; j < lhs.d; ++j) dist += std::abs(lhs.a[j] - rhs.a[j]);
  for (std::size_t j = 0; j < lhs.d; ++j) {
    dist += std::abs(lhs.m(j, j) - rhs.m(j, j));
    for (std::size_t l = j + 1; l < lhs.d; ++l)
      dist += std::abs(lhs.m(j, l) + lhs.m(l, j) - rhs.m(j, l) - rhs.m(l, j));
  }
  return dist;
}

}  // namespace fm
