#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tailkit/series.hpp"

namespace tailkit {

// Conditional tail model for one group on Laplace margins: given the
// conditioning coordinate exceeding its threshold, every other coordinate j
// follows W_j = alpha_j W_i + W_i^beta_j Z_j with the empirical residual
// rows Z kept for simulation.
struct CondExtFit {
  std::vector<std::string> vars;  // group columns, conditioning one included
  int cond_index = 0;             // position of the conditioning column in `vars`
  double u_quantile = 0.85;
  double u_threshold = 0.0;       // Laplace-scale value of that quantile

  std::vector<double> alpha;  // size d-1, order = vars with the conditioner removed
  std::vector<double> beta;   // same order, each <= 1
  std::vector<double> resid_mean;
  std::vector<double> resid_sd;

  std::vector<double> cond_values;             // W_i per retained exceedance row
  std::vector<std::vector<double>> residuals;  // matching rows of Z, width d-1

  std::vector<std::string> warnings;

  int n_exceedances() const { return static_cast<int>(cond_values.size()); }
};

// Fits the conditional model by per-coordinate Gaussian working likelihood
// with (mean, sd) profiled out; alpha in [-1,1] and beta <= 1 via smooth
// reparametrization.  Rows missing any group coordinate are dropped.
CondExtFit fit_condext(const Series& data, const std::vector<std::string>& vars,
                       int cond_index, double u_quantile = 0.85);

// Same model with the threshold given directly instead of by quantile; used
// when refitting simulated exceedance sets that carry no body.
CondExtFit fit_condext_fixed_threshold(const Series& data,
                                       const std::vector<std::string>& vars,
                                       int cond_index, double threshold,
                                       double u_quantile_label = 0.85);

// Draws rows of the group given W_i > level: the conditioner is level plus a
// standard exponential, residual rows are resampled whole so cross-coordinate
// dependence survives.  Requires level >= u_threshold.
Series simulate_conditional(const CondExtFit& fit, int n_sim, double level,
                            std::uint64_t seed);

struct GroupProb {
  double value = 0.0;     // tail * fraction
  double tail = 0.0;      // Pr(W_i > s_i) = exp(-s_i)/2
  double fraction = 1.0;  // simulated Pr(all other W_j > s_j | W_i > s_i)
  double se = 0.0;        // MC standard error of `value`
  int n_sim = 0;
};

// Pr(all coordinates exceed their levels), conditioning on the fitted site.
// `levels` aligns with fit.vars; the conditioning level must be positive and
// at least the fitted threshold.  Single-site groups need no simulation.
GroupProb group_exceedance_probability(const CondExtFit& fit,
                                       const std::vector<double>& levels,
                                       int n_sim = 1000000, std::uint64_t seed = 0);

// Product over independent groups.
double factorized_probability(const std::vector<double>& group_probs);

// Laplace level exceeded with probability p: -log(2p), p in (0, 0.5].
double laplace_upper_level(double p);

// Once-a-year and once-a-month levels under the island calendar.
std::pair<double, double> challenge_levels(int days_per_year = 300,
                                           int days_per_month = 25);

}  // namespace tailkit
