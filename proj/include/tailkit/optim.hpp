#pragma once

#include <Eigen/Dense>
#include <functional>

namespace tailkit {

struct BfgsOptions {
  int max_iters = 300;
  double grad_tol = 1e-8;
  double step_tol = 1e-12;
  int max_backtracks = 50;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd grad;
  int iters = 0;
  bool converged = false;
};

// Objective returns f(x) and fills *grad when non-null.  Infeasible points
// must return +inf (the line search backs off).
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// BFGS with Armijo backtracking.  The inverse Hessian approximation is reset
// to the identity once if a line search stalls.
BfgsResult bfgs_minimize(const Objective& fn, const Eigen::VectorXd& x0,
                         const BfgsOptions& opt = {});

// Central-difference gradient, for checking analytic gradients in tests.
Eigen::VectorXd finite_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                                     const Eigen::VectorXd& x, double h = 1e-6);

}  // namespace tailkit
