#pragma once

#include <functional>

#include <Eigen/Core>

namespace ascertain {

struct OptimizerControls {
  double gradient_tolerance = 1e-6;   ///< sup-norm of the gradient
  double relative_tolerance = 1e-10;  ///< relative change of the objective
  int max_iterations = 1000;
  bool newton_polish = true;          ///< finite-difference Newton steps if BFGS stalls
};

/// Objective to maximize. Fills grad and returns the value; may return a
/// non-finite value or throw NumericalError outside its domain.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct OptimizeResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
  double value = 0.0;
  double gradient_norm = 0.0;  ///< sup-norm
  int iterations = 0;
  bool converged = false;
};

/// BFGS ascent with a strong-Wolfe line search.
OptimizeResult maximize_bfgs(const Objective& objective, Eigen::VectorXd start, const OptimizerControls& controls = {});

}  // namespace ascertain
