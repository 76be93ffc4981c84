#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tailkit/gpd_gam.hpp"

namespace tailkit {

// Direction on the unit simplex together with the exponential-scale levels
// that generated it: omega[i] = levels[i] / r, r = sum(levels).
struct SimplexRay {
  std::vector<double> omega;
  std::vector<double> levels;
  double r = 0.0;
};

// Normalizes positive exponential-scale levels into a ray.
SimplexRay make_ray(const std::vector<double>& levels);

// Rays for the two standing joint-tail targets, from Gumbel-scale inputs:
// part 1 asks for all three margins above y; part 2 for the first two above v
// and the third below m (hit by negating the third margin).
struct ChallengeRays {
  SimplexRay part1;
  SimplexRay part2;
};
ChallengeRays build_challenge_rays(double y, double v, double m);

// Flips an exponential-margin value into the opposite tail:
// z -> -log(1 - exp(-z)).  Self-inverse, exponential margins preserved,
// fixed point at log 2.  Requires z > 0.
double negate_third_margin(double z3);

// Row-wise min of z_i / omega_i over coordinates with omega_i > 0.
// Rows with a missing needed coordinate yield NaN.
std::vector<double> min_projection(const Series& data,
                                   const std::vector<std::string>& z_vars,
                                   const SimplexRay& ray);

struct MinProjOptions {
  double tau = 0.85;
  std::vector<std::string> z_vars{"z1", "z2", "z3"};
  std::string atmos_var = "atmos";    // empty: no atmosphere smooths
  std::string season_var = "season";  // empty: no seasonal threshold shift
  double season_level = 2.0;
  int basis_dim = 10;
  std::optional<double> fixed_shape;
  SmoothingSpec smoothing;  // a single fixed value is recycled over every spline block
  int min_excesses = 50;

  MinProjOptions() {
    smoothing.mode = SmoothingSpec::Mode::fixed;
    smoothing.fixed = {0.1};
  }
};

// Two-stage tail model of the min-projection: covariate threshold at quantile
// tau (spline in atmosphere plus seasonal step), then a GPD GAM on the
// exceedances with covariate scale and constant shape.
struct MinProjFit {
  SimplexRay ray;
  double tau = 0.0;
  GpdFit gpd;       // response column "t_proj" of `table`
  Series table;     // input data plus the projection column
  double shape = 0.0;
  double shape_lo = 0.0;  // normal 95% interval, free-shape fits only
  double shape_hi = 0.0;
};

MinProjFit fit_minproj(const Series& data, const SimplexRay& ray,
                       const MinProjOptions& opts);

// Exponential-scale QQ diagnostic: sorted -log GPD survival of the
// exceedances against Exp(1) quantiles at i/(n+1), with a pointwise 95%
// band from `n_band` simulated Exp(1) samples of the same size.
struct QqTable {
  std::vector<double> theoretical;
  std::vector<double> empirical;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
};
QqTable exponential_qq(const GpdFit& fit, const Series& data, int n_band = 200,
                       std::uint64_t seed = 0);
QqTable minproj_qq(const MinProjFit& fit, int n_band = 200, std::uint64_t seed = 0);

// Monte-Carlo joint survivor probability at radius r:
// (1 - tau)/n * sum_t S_GPD(r - v(x_t); sigma(x_t), xi).  Requires r above
// every fitted threshold (the estimator is only valid in the joint tail).
double joint_survivor_probability(const MinProjFit& fit, double r);
double joint_survivor_probability(const MinProjFit& fit);  // at r = ray.r

// Threshold-level sweep: fit per tau, score by mean absolute deviation of the
// QQ pairs, keep the best-scoring fit.
struct TauSweepEntry {
  double tau = 0.0;
  double qq_mad = 0.0;
  double shape = 0.0;
};
struct TauSweepResult {
  std::vector<TauSweepEntry> entries;
  double chosen_tau = 0.0;
  MinProjFit best;
};
TauSweepResult select_tau_minproj(const Series& data, const SimplexRay& ray,
                                  const MinProjOptions& base,
                                  const std::vector<double>& taus);

}  // namespace tailkit
