#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tailkit/gpd.hpp"
#include "tailkit/margins.hpp"
#include "tailkit/quantile_reg.hpp"

namespace tailkit {

enum class ThresholdKind { stepped, smooth };

struct ThresholdSpec {
  ThresholdKind kind = ThresholdKind::stepped;
  double tau = 0.95;
  std::string stratum_var;  // stepped steps and per-stratum rates; empty = single stratum
  Formula formula;          // smooth thresholds only
};

struct SmoothingSpec {
  enum class Mode { fixed, cv_grid };
  Mode mode = Mode::cv_grid;
  std::vector<double> fixed;        // per spline block when mode == fixed
  std::vector<double> lambda_grid;  // defaults to default_lambda_grid()
  int cv_folds = 5;
  std::uint64_t cv_seed = 0;
};

struct GpdGamSpec {
  std::string response = "y";
  ThresholdSpec threshold;
  Formula scale;                     // log link
  std::optional<double> fixed_shape; // pins xi instead of estimating it
  SmoothingSpec smoothing;
  int min_excesses = 50;
};

// Fitted exceedance model: covariate threshold, per-stratum exceedance rate,
// covariate GPD scale and constant shape, empirical body below the threshold.
struct GpdFit {
  GpdGamSpec spec;

  // Threshold component.
  SteppedQuantiles stepped;       // stepped mode
  QuantileRegFit smooth;          // smooth mode
  std::vector<double> rate_levels;
  std::vector<double> rates;      // exceedance probability per stratum

  // Tail component.
  Predictor scale_model;
  Eigen::VectorXd scale_coef;
  double shape = 0.0;
  double shape_se = 0.0;
  bool shape_fixed = false;

  // Bodies (per stratum) for the sub-threshold part of the conditional CDF.
  std::vector<BodyCdf> bodies;

  // Bookkeeping.
  double loglik = 0.0;
  double penalized_obj = 0.0;
  double edf = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int n_total = 0;
  int n_retained = 0;
  int n_excess = 0;
  double dropped_fraction = 0.0;
  std::vector<double> smoothing;
  std::vector<int> retained_rows;
  std::vector<int> excess_rows;
  std::vector<std::string> warnings;

  double threshold_at(const Series& data, int row) const;
  double rate_at(const Series& data, int row) const;
  double scale_at(const Series& data, int row) const;
  int stratum_index(const Series& data, int row) const;

  // Full conditional distribution F(y | x): scaled empirical body below the
  // threshold, rate-weighted GPD tail above it.
  double conditional_cdf(const Series& data, int row, double y) const;
  double conditional_quantile(const Series& data, int row, double p) const;
};

GpdFit fit_nonstationary_gpd(const Series& data, const GpdGamSpec& spec);

// Builds the fit object directly from known components; no estimation.
// Stepped thresholds only.  Bodies are filled from `data` when provided.
GpdFit assemble_gpd_fit(const GpdGamSpec& spec, const Series& data,
                        const std::vector<double>& stratum_levels,
                        const std::vector<double>& thresholds,
                        const std::vector<double>& rates,
                        const Eigen::VectorXd& scale_coef, double shape);

// -log gpd_survival of each excess under the fitted model; unit exponential
// when the model is correct.
std::vector<double> transform_excesses_to_exponential(const GpdFit& fit, const Series& data);

}  // namespace tailkit
