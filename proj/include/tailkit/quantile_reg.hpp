#pragma once

#include <cstdint>
#include <vector>

#include "tailkit/design.hpp"

namespace tailkit {

// Default smoothing grid: 7 points, log-spaced over [1e-2, 1e4].
std::vector<double> default_lambda_grid();

struct QuantileRegOptions {
  double tau = 0.95;
  std::vector<double> fixed_lambda;  // per spline block; empty selects by CV
  std::vector<double> lambda_grid;   // defaults to default_lambda_grid()
  int cv_folds = 5;
  std::uint64_t cv_seed = 0;
};

// Covariate-dependent quantile curve exp(psi(x)) fitted by smoothed pinball
// loss with a log link.
struct QuantileRegFit {
  Predictor model;
  Eigen::VectorXd coef;
  double tau = 0.0;
  std::vector<double> lambda;
  double exceed_fraction = 0.0;  // achieved on the training rows
  std::vector<std::string> warnings;

  double value_at(const Series& data, int row) const;
};

QuantileRegFit fit_threshold_quantile(const Formula& formula, const Series& data,
                                      const std::vector<int>& rows,
                                      const std::string& response,
                                      const QuantileRegOptions& opts);

// Exact per-stratum empirical quantiles for stepped thresholds.
struct SteppedQuantiles {
  std::vector<double> levels;  // distinct stratum labels, ascending
  std::vector<double> values;  // quantile per stratum

  double value_for(double level) const;
};

SteppedQuantiles stepped_quantiles(const Series& data, const std::vector<int>& rows,
                                   const std::string& response, const std::string& stratum_var,
                                   double tau);

// Pinball loss mean over rows; used for reporting and cross-validation.
double pinball_loss(double tau, const std::vector<double>& y, const std::vector<double>& fitted);

}  // namespace tailkit
