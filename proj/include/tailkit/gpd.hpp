#pragma once

#include <vector>

#include "tailkit/rng.hpp"

namespace tailkit {

struct GpdParams {
  double scale = 1.0;
  double shape = 0.0;
};

// Shape values inside this band are treated as the exponential limit.
constexpr double kShapeEps = 1e-8;

// Pr(Y > y) for an excess y >= 0; 0 beyond the upper endpoint when shape < 0.
double gpd_survival(double y, const GpdParams& p);
double gpd_cdf(double y, const GpdParams& p);
// Inverse CDF, p in [0,1).
double gpd_quantile(double p, const GpdParams& p_gpd);
double gpd_logpdf(double y, const GpdParams& p);

double gpd_loglik(const std::vector<double>& excesses, double log_scale, double shape);

// Partial derivatives of one log density term with respect to log scale and
// shape, at h = y/scale.  The shape derivative switches to a series near 0.
inline void gpd_logpdf_grad(double h, double xi, double* d_log_scale, double* d_shape) {
  const double t = 1.0 + xi * h;
  *d_log_scale = -1.0 + (1.0 + xi) * h / t;
  if (xi > -1e-5 && xi < 1e-5) {
    *d_shape = 0.5 * h * h - h + xi * h * h * (1.0 - 2.0 / 3.0 * h);
    return;
  }
  *d_shape = std::log(t) / (xi * xi) - (1.0 + 1.0 / xi) * h / t;
}

double rgpd(Rng& rng, const GpdParams& p);

struct GpdFitResult {
  GpdParams params;
  double loglik = 0.0;
  double se_scale = 0.0;
  double se_shape = 0.0;
  // Covariance of (log scale, shape) from the inverse observed information.
  double cov[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  int n = 0;
  bool converged = false;
};

// Maximum likelihood over (log scale, shape) with shape constrained to
// (-1, 2].  Probability-weighted moments give the start point.
GpdFitResult gpd_fit_mle(const std::vector<double>& excesses, int min_n = 10);

// PWM estimates used for initialization; exposed for reuse and testing.
GpdParams gpd_fit_pwm(const std::vector<double>& excesses);

}  // namespace tailkit
