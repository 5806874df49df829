#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "fm/dataset.hpp"
#include "fm/mechanism.hpp"
#include "fm/objective.hpp"
#include "fm/solver.hpp"

namespace fm {

struct TrainOptions {
  // Per-release budget; defaults to everything left in the budget. The
  // rerun-once strategy can charge this twice, so size the budget for 2x
  // when selecting it.
  std::optional<double> epsilon;
  RepairStrategy strategy = RepairStrategy::RegularizeTrim;
  std::optional<double> lambda_override;
};

struct TrainResult {
  Vec omega;
  std::vector<NoiseTrace> traces;  // one per perturbation (two if rerun fired)
  RepairReport repair;
  double epsilon_spent = 0.0;
};

// The full private training path: build the polynomial objective (exact
// for least squares, degree-2 truncation for logistic), perturb its
// coefficients, repair and minimize.
inline TrainResult fm_train(const NormalizedDataset& data, Task task,
                            PrivacyBudget& budget, SplitRng& rng,
                            const TrainOptions& options = {}) {
  if (task != data.task)
    throw ConfigError("requested task does not match dataset task");

  const QuadraticObjective obj = task == Task::Linear
                                     ? build_linear_objective(data)
                                     : build_logistic_taylor_objective(data);
  const Sensitivity sens = task == Task::Linear
                               ? sensitivity_linear(data.d())
                               : sensitivity_logistic(data.d());
  const double eps = options.epsilon.value_or(budget.remaining());

  TrainResult result;
  auto [noisy, trace] = perturb_objective(obj, sens, budget, rng, eps);
  result.traces.push_back(trace);
  result.epsilon_spent = eps;

  const auto reperturb = [&]() {
    auto [redrawn, retrace] = perturb_objective(obj, sens, budget, rng, eps);
    result.traces.push_back(retrace);
    result.epsilon_spent += eps;
    return redrawn;
  };

  SolveResult solved =
      solve_pipeline(noisy, sens, eps, options.strategy,
                     options.lambda_override,
                     options.strategy == RepairStrategy::RerunOnce
                         ? std::function<QuadraticObjective()>(reperturb)
                         : std::function<QuadraticObjective()>{});
  result.omega = std::move(solved.omega);
  result.repair = std::move(solved.report);
  return result;
}

}  // namespace fm
