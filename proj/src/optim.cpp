#include "tailkit/optim.hpp"

#include <cmath>
#include <limits>

namespace tailkit {

BfgsResult bfgs_minimize(const Objective& fn, const Eigen::VectorXd& x0,
                         const BfgsOptions& opt) {
  const int d = static_cast<int>(x0.size());
  BfgsResult res;
  res.x = x0;
  res.grad.resize(d);
  res.value = fn(res.x, &res.grad);
  if (!std::isfinite(res.value))
    throw std::invalid_argument("bfgs_minimize: start point is infeasible");

  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  bool reset_used = false;

  for (res.iters = 0; res.iters < opt.max_iters; ++res.iters) {
    if (res.grad.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -(Hinv * res.grad);
    double slope = dir.dot(res.grad);
    if (slope >= 0.0) {  // not a descent direction; fall back to steepest descent
      Hinv.setIdentity();
      dir = -res.grad;
      slope = dir.dot(res.grad);
    }

    double step = 1.0;
    double new_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd new_x, new_grad(d);
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      new_x = res.x + step * dir;
      new_value = fn(new_x, &new_grad);
      if (std::isfinite(new_value) && new_value <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!reset_used) {
        reset_used = true;
        Hinv.setIdentity();
        continue;
      }
      // No further progress possible; report what we have.
      res.converged = res.grad.lpNorm<Eigen::Infinity>() < 1e-4;
      return res;
    }

    const Eigen::VectorXd s = new_x - res.x;
    const Eigen::VectorXd y = new_grad - res.grad;
    const double sty = s.dot(y);
    const double prev_value = res.value;
    res.x = new_x;
    res.value = new_value;
    res.grad = new_grad;

    if (sty > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd Hy = Hinv * y;
      const double yHy = y.dot(Hy);
      Hinv += ((sty + yHy) / (sty * sty)) * (s * s.transpose());
      const Eigen::MatrixXd cross = Hy * s.transpose();
      Hinv -= (cross + cross.transpose()) / sty;
    }

    if (std::abs(prev_value - res.value) <
        opt.step_tol * (std::abs(res.value) + 1.0)) {
      res.converged = true;
      return res;
    }
  }
  res.converged = res.grad.lpNorm<Eigen::Infinity>() < 1e-4;
  return res;
}

Eigen::VectorXd finite_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                                     const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    const double hi = h * (1.0 + std::abs(x[i]));
    xp[i] += hi;
    xm[i] -= hi;
    g[i] = (fn(xp) - fn(xm)) / (2.0 * hi);
  }
  return g;
}

}  // namespace tailkit
