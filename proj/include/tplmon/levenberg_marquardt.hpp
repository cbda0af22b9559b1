#pragma once

// Small dense Levenberg–Marquardt solver for weighted least squares,
//   minimize sum_i w_i r_i(x)^2,
// with Marquardt (diagonal) damping. Steps that leave the feasible region
// are treated like steps that increase the cost.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace tplmon {

struct LmOptions {
  int max_iterations = 200;
  /// Stop once an accepted step lowers the cost by less than this fraction.
  double relative_tolerance = 1e-10;
  double initial_damping = 1e-3;
};

template <int N>
struct LmResult {
  Eigen::Matrix<double, N, 1> x;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// `problem(x, r, J)` fills residuals and their Jacobian (rows = residuals)
/// and returns false when x is infeasible or the values are not finite.
template <int N, typename Problem>
LmResult<N> levenberg_marquardt(Problem&& problem, const Eigen::VectorXd& weights,
                                Eigen::Matrix<double, N, 1> x0, const LmOptions& options = {}) {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;
  using Jac = Eigen::Matrix<double, Eigen::Dynamic, N>;

  const auto evaluate = [&](const Vec& x, Eigen::VectorXd& r, Jac& J, double& cost) {
    if (!problem(x, r, J)) return false;
    if (!r.allFinite() || !J.allFinite()) return false;
    cost = (weights.array() * r.array().square()).sum();
    return std::isfinite(cost);
  };

  LmResult<N> result;
  result.x = x0;
  Eigen::VectorXd r(weights.size());
  Jac J(weights.size(), x0.size());
  if (!evaluate(result.x, r, J, result.cost)) {
    result.cost = std::numeric_limits<double>::infinity();
    return result;
  }

  Eigen::VectorXd r_try(weights.size());
  Jac J_try(weights.size(), x0.size());
  double damping = options.initial_damping;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    if (result.cost == 0.0) {
      result.converged = true;
      break;
    }
    const Mat A = J.transpose() * weights.asDiagonal() * J;
    const Vec g = J.transpose() * (weights.array() * r.array()).matrix();
    Vec diag = A.diagonal();
    const double diag_floor = std::max(diag.maxCoeff(), 1.0) * 1e-15;
    diag = diag.cwiseMax(diag_floor);

    bool accepted = false;
    while (damping < 1e16) {
      Mat damped = A;
      damped.diagonal() += damping * diag;
      const Vec step = damped.ldlt().solve(-g);
      const Vec x_try = result.x + step;
      double cost_try = 0.0;
      if (step.allFinite() && evaluate(x_try, r_try, J_try, cost_try) && cost_try < result.cost) {
        const double decrease = (result.cost - cost_try) / result.cost;
        result.x = x_try;
        result.cost = cost_try;
        r.swap(r_try);
        J.swap(J_try);
        damping = std::max(damping / 10.0, 1e-15);
        accepted = true;
        if (decrease < options.relative_tolerance) result.converged = true;
        break;
      }
      damping *= 10.0;
    }
    // No downhill step at any damping: the current point is a minimum to
    // working precision.
    if (!accepted) result.converged = true;
    if (result.converged) break;
  }
  return result;
}

}  // namespace tplmon
