#ifndef GPDE_OPTIMIZE_HPP
#define GPDE_OPTIMIZE_HPP

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "gpde/gp.hpp"

namespace gpde {

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
  double armijo = 1e-4;
  int max_backtracks = 60;
  double initial_step = 1.0;
};

template <typename Scalar = double>
struct FitResult {
  Hyperparams<Scalar> hyper;
  Scalar objective = Scalar(0);
  Scalar initial_objective = Scalar(0);
  int iterations = 0;
  bool converged = false;      // gradient norm fell below tolerance
  std::vector<Scalar> trace;   // objective after each accepted step, starting at init
};

/// Sum of per-dataset log marginals under one shared set of hyperparameters.
template <typename Scalar>
LogMarginal<Scalar> shared_log_marginal(std::span<const Dataset<Scalar>> datasets,
                                        const Hyperparams<Scalar>& h) {
  LogMarginal<Scalar> total{Scalar(0), Eigen::Matrix<Scalar, 3, 1>::Zero()};
  for (const auto& d : datasets) {
    const LogMarginal<Scalar> part = log_marginal_likelihood(d, h);
    total.value += part.value;
    total.grad += part.grad;
  }
  return total;
}

/// Maximizes the shared log marginal by gradient ascent in log space with a
/// backtracking (sufficient increase) line search.
template <typename Scalar>
FitResult<Scalar> fit(std::span<const Dataset<Scalar>> datasets, const Hyperparams<Scalar>& init,
                      const FitOptions& opts = {}) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  if (datasets.empty()) throw InvalidInput("fit: no datasets");
  for (const auto& d : datasets) {
    d.validate();
    if (d.dims() != datasets.front().dims() || d.outputs() != datasets.front().outputs())
      throw InvalidInput("fit: datasets disagree on D or C");
  }
  init.validate();

  LogMarginal<Scalar> current = shared_log_marginal(datasets, init);
  if (!std::isfinite(current.value) || !current.grad.allFinite())
    throw InvalidInput("fit: objective is not finite at the initial hyperparameters");

  FitResult<Scalar> result;
  result.hyper = init;
  result.initial_objective = current.value;
  result.trace.push_back(current.value);

  Vec3 theta = init.to_log();
  Scalar step = Scalar(opts.initial_step);
  const Scalar tol = Scalar(opts.gradient_tolerance);

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Scalar gnorm = current.grad.norm();
    if (gnorm < tol) {
      result.converged = true;
      break;
    }
    const Vec3 dir = current.grad / gnorm;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt, step *= Scalar(0.5)) {
      const Vec3 candidate = theta + step * dir;
      LogMarginal<Scalar> trial;
      try {
        trial = shared_log_marginal(datasets, Hyperparams<Scalar>::from_log(candidate));
      } catch (const NumericalFailure&) {
        continue;
      }
      if (std::isfinite(trial.value) && trial.grad.allFinite() &&
          trial.value >= current.value + Scalar(opts.armijo) * step * gnorm) {
        theta = candidate;
        current = trial;
        accepted = true;
        break;
      }
    }
    result.iterations = it + 1;
    if (!accepted) break;
    result.trace.push_back(current.value);
    step *= Scalar(2);
  }
  if (!result.converged && current.grad.norm() < tol) result.converged = true;

  result.hyper = Hyperparams<Scalar>::from_log(theta);
  if (result.iterations == 0) result.hyper = init;
  result.objective = current.value;
  return result;
}

template <typename Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& data, const Hyperparams<Scalar>& init,
                      const FitOptions& opts = {}) {
  return fit(std::span<const Dataset<Scalar>>(&data, 1), init, opts);
}

}  // namespace gpde

#endif  // GPDE_OPTIMIZE_HPP
