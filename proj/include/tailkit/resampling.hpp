#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "tailkit/condex.hpp"
#include "tailkit/gpd_gam.hpp"

namespace tailkit {

// Stationary bootstrap index stream: blocks with uniform starts and
// Geometric(1/mean_block) lengths, wrapped circularly, truncated to n.
std::vector<int> stationary_bootstrap_indices(int n, int mean_block, Rng& rng);
std::vector<int> stationary_bootstrap_indices(int n, int mean_block,
                                              std::uint64_t seed);

struct BootstrapEstimates {
  std::vector<double> estimates;  // surviving replicates, in replicate order
  int n_requested = 0;
  int n_failed = 0;
  int mean_block = 0;
  std::uint64_t seed = 0;

  // Central interval from replicate quantiles, e.g. level 0.5 -> (q25, q75).
  std::pair<double, double> central_interval(double level) const;
};

using QuantileEstimator = std::function<double(const GpdFit&, const Series&)>;
using VectorEstimator =
    std::function<std::vector<double>(const GpdFit&, const Series&)>;

struct BootstrapVectorEstimates {
  std::vector<std::vector<double>> estimates;  // one entry per surviving replicate
  int n_requested = 0;
  int n_failed = 0;
  int mean_block = 0;
  std::uint64_t seed = 0;

  // Central interval of component j across replicates.
  std::pair<double, double> central_interval(int j, double level) const;
};

// Response bootstrap around a fitted exceedance model: the response is mapped
// to uniform through each row's conditional CDF, the uniform series is
// block-resampled over the retained rows, mapped back through the conditional
// model at the original rows (covariates never move), and the model is refit.
// Smoothing is pinned at the fitted penalties so replicates skip the CV grid.
// Replicates whose refit or estimator throws are dropped and counted.
BootstrapEstimates semiparametric_response_bootstrap(
    const GpdFit& fit, const Series& data, const QuantileEstimator& estimator,
    int mean_block, int n_boot, std::uint64_t seed);

// Same scheme with a vector statistic (e.g. one quantile per report row);
// every component of a replicate shares that replicate's refit.
BootstrapVectorEstimates semiparametric_response_bootstrap_multi(
    const GpdFit& fit, const Series& data, const VectorEstimator& estimator,
    int mean_block, int n_boot, std::uint64_t seed);

// Parametric bootstrap for a conditional extremes fit: each replicate draws a
// synthetic exceedance set from the fitted model (exponential conditioning
// overshoots, resampled residual rows), refits at the same threshold, and
// recomputes the group exceedance probability at `levels`.
BootstrapEstimates parametric_bootstrap_condex(const CondExtFit& fit,
                                               const std::vector<double>& levels,
                                               int n_boot, int n_sim,
                                               std::uint64_t seed);

}  // namespace tailkit
