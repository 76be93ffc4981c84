#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tailkit/gpd_gam.hpp"

namespace tailkit {

// Asymmetric competition loss; undefined for non-positive true quantiles.
double competition_loss(double q_true, double q_est);

// CRPS of the distribution with the given CDF against observation y,
// integrated over [lo, hi] by adaptive Simpson quadrature split at y.
// Throws NumericError (reporting the achieved tolerance) on non-convergence.
double crps_cdf(const std::function<double(double)>& cdf, double y, double lo, double hi,
                double tol = 1e-8);

enum class CvMetric { crps, loss };

// Blocked k-fold cross-validation score for a tail model specification.
// Folds are contiguous chunks of the retained rows; each fold refits the
// model on the remainder and scores the held-out excesses.
double k_fold_cv(const Series& data, const GpdGamSpec& spec, int k, CvMetric metric,
                 std::uint64_t seed);

struct SelectionEntry {
  std::string formula;
  double crps = 0.0;
  double delta_crps = 0.0;  // relative to the baseline
  double aic = 0.0;
  double delta_aic = 0.0;
  double bic = 0.0;
  double delta_bic = 0.0;
  bool accepted = false;
};

struct SelectionReport {
  std::vector<SelectionEntry> entries;  // baseline first, then each step's winner
  std::string chosen;                   // formula string of the final model
};

// Greedy forward selection over candidate scale terms, ranked by CV CRPS.
// The baseline formula is always entry zero; a term is added only while the
// score improves.
SelectionReport forward_select(const Series& data, const GpdGamSpec& base_spec,
                               const std::vector<FormulaTerm>& pool, int k,
                               std::uint64_t seed);

// Loss-targeted refit: starting from a fitted model, minimizes
// penalized negative log likelihood plus the mean competition loss between
// the ordered transformed excesses and unit exponential quantiles.
GpdFit loss_augmented_refit(const GpdFit& fit, const Series& data, double weight = 1.0);

}  // namespace tailkit
