#include "tailkit/gpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailkit/common.hpp"
#include "tailkit/optim.hpp"

namespace tailkit {

static const double kNegInf = -std::numeric_limits<double>::infinity();

static void check_params(const GpdParams& p) {
  if (!(p.scale > 0.0)) throw std::domain_error("gpd: scale must be positive");
  if (!std::isfinite(p.shape)) throw std::domain_error("gpd: non-finite shape");
}

double gpd_survival(double y, const GpdParams& p) {
  check_params(p);
  if (y < 0.0) throw std::domain_error("gpd: negative excess");
  if (std::abs(p.shape) < kShapeEps) return std::exp(-y / p.scale);
  const double t = 1.0 + p.shape * y / p.scale;
  if (t <= 0.0) return 0.0;
  return std::exp(-std::log(t) / p.shape);
}

double gpd_cdf(double y, const GpdParams& p) {
  check_params(p);
  if (y < 0.0) throw std::domain_error("gpd: negative excess");
  if (std::abs(p.shape) < kShapeEps) return -std::expm1(-y / p.scale);
  const double t = 1.0 + p.shape * y / p.scale;
  if (t <= 0.0) return 1.0;
  return -std::expm1(-std::log(t) / p.shape);
}

double gpd_quantile(double q, const GpdParams& p) {
  check_params(p);
  if (!(q >= 0.0 && q < 1.0)) throw std::domain_error("gpd: quantile level outside [0,1)");
  const double l = -std::log1p(-q);  // exponential quantile
  if (std::abs(p.shape) < kShapeEps) return p.scale * l;
  return p.scale / p.shape * std::expm1(p.shape * l);
}

double gpd_logpdf(double y, const GpdParams& p) {
  check_params(p);
  if (y < 0.0) throw std::domain_error("gpd: negative excess");
  if (std::abs(p.shape) < kShapeEps) return -std::log(p.scale) - y / p.scale;
  const double t = 1.0 + p.shape * y / p.scale;
  if (t <= 0.0) return kNegInf;
  return -std::log(p.scale) - (1.0 + 1.0 / p.shape) * std::log(t);
}

double gpd_loglik(const std::vector<double>& excesses, double log_scale, double shape) {
  const GpdParams p{std::exp(log_scale), shape};
  double ll = 0.0;
  for (double y : excesses) {
    const double l = gpd_logpdf(y, p);
    if (l == kNegInf) return kNegInf;
    ll += l;
  }
  return ll;
}

double rgpd(Rng& rng, const GpdParams& p) { return gpd_quantile(rng.uniform(), p); }

GpdParams gpd_fit_pwm(const std::vector<double>& excesses) {
  std::vector<double> x(excesses);
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("gpd_fit_pwm: need at least 2 points");
  double a0 = 0.0, a1 = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    a0 += x[i - 1];
    a1 += x[i - 1] * static_cast<double>(n - i) / static_cast<double>(n - 1);
  }
  a0 /= static_cast<double>(n);
  a1 /= static_cast<double>(n);
  const double denom = a0 - 2.0 * a1;
  GpdParams p;
  if (denom > 0.0 && std::isfinite(denom)) {
    p.shape = 2.0 - a0 / denom;
    p.scale = 2.0 * a0 * a1 / denom;
  } else {
    p.shape = 0.1;
    p.scale = a0;
  }
  if (!(p.scale > 0.0)) p.scale = a0 > 0.0 ? a0 : 1.0;
  p.shape = std::min(1.0, std::max(-0.5, p.shape));
  return p;
}

GpdFitResult gpd_fit_mle(const std::vector<double>& excesses, int min_n) {
  const int n = static_cast<int>(excesses.size());
  if (n < min_n) throw std::invalid_argument("gpd_fit_mle: fewer excesses than required minimum");
  double lo = excesses[0], hi = excesses[0];
  for (double y : excesses) {
    if (y < 0.0) throw std::domain_error("gpd_fit_mle: negative excess");
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  if (hi <= lo) throw FitError("gpd_fit_mle: degenerate data, all excesses equal");

  const GpdParams init = gpd_fit_pwm(excesses);
  Eigen::VectorXd x0(2);
  x0 << std::log(init.scale), init.shape;

  const double nd = static_cast<double>(n);
  Objective obj = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad) -> double {
    const double logs = th[0], xi = th[1];
    if (xi <= -1.0 + 1e-6 || xi > 2.0 || !std::isfinite(logs) || std::abs(logs) > 50.0)
      return std::numeric_limits<double>::infinity();
    const double sigma = std::exp(logs);
    double negll = 0.0, gs = 0.0, gx = 0.0;
    for (double y : excesses) {
      const double h = y / sigma;
      const double t = 1.0 + xi * h;
      if (t <= 0.0) return std::numeric_limits<double>::infinity();
      if (std::abs(xi) < kShapeEps)
        negll += logs + h;
      else
        negll += logs + (1.0 + 1.0 / xi) * std::log(t);
      if (grad) {
        double dls, dxi;
        gpd_logpdf_grad(h, xi, &dls, &dxi);
        gs -= dls;
        gx -= dxi;
      }
    }
    if (grad) {
      (*grad)[0] = gs / nd;
      (*grad)[1] = gx / nd;
    }
    return negll / nd;
  };

  BfgsResult r = bfgs_minimize(obj, x0);
  if (!r.converged)
    throw FitError("gpd_fit_mle: optimizer did not converge (grad norm " +
                   std::to_string(r.grad.norm()) + " after " + std::to_string(r.iters) +
                   " iterations)");

  GpdFitResult out;
  out.params.scale = std::exp(r.x[0]);
  out.params.shape = r.x[1];
  out.loglik = -r.value * nd;
  out.n = n;
  out.converged = true;

  // Observed information via central differences of the analytic gradient.
  Eigen::MatrixXd H(2, 2);
  const double hstep = 1e-5;
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd xp = r.x, xm = r.x;
    const double hj = hstep * (1.0 + std::abs(r.x[j]));
    xp[j] += hj;
    xm[j] -= hj;
    Eigen::VectorXd gp(2), gm(2);
    obj(xp, &gp);
    obj(xm, &gm);
    H.col(j) = (gp - gm) * (nd / (2.0 * hj));
  }
  H = 0.5 * (H + H.transpose());
  const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
  if (det > 0.0 && H(0, 0) > 0.0) {
    out.cov[0][0] = H(1, 1) / det;
    out.cov[1][1] = H(0, 0) / det;
    out.cov[0][1] = out.cov[1][0] = -H(0, 1) / det;
    out.se_scale = out.params.scale * std::sqrt(std::max(0.0, out.cov[0][0]));
    out.se_shape = std::sqrt(std::max(0.0, out.cov[1][1]));
  } else {
    out.se_scale = out.se_shape = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace tailkit
