#include "tailkit/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tailkit/common.hpp"

namespace tailkit {

std::vector<int> stationary_bootstrap_indices(int n, int mean_block, Rng& rng) {
  if (mean_block < 1)
    throw std::invalid_argument("stationary_bootstrap: mean block length must be >= 1");
  std::vector<int> idx;
  idx.reserve(n);
  while (static_cast<int>(idx.size()) < n) {
    const int start = static_cast<int>(rng.index(n));
    const int len = static_cast<int>(rng.geometric(1.0 / mean_block));
    for (int j = 0; j < len && static_cast<int>(idx.size()) < n; ++j)
      idx.push_back((start + j) % n);
  }
  return idx;
}

std::vector<int> stationary_bootstrap_indices(int n, int mean_block,
                                              std::uint64_t seed) {
  Rng rng(seed);
  return stationary_bootstrap_indices(n, mean_block, rng);
}

std::pair<double, double> BootstrapEstimates::central_interval(double level) const {
  if (!(level > 0.0 && level < 1.0))
    throw std::domain_error("central_interval: level must lie in (0,1)");
  if (estimates.empty()) throw std::logic_error("central_interval: no replicates");
  std::vector<double> sorted = estimates;
  std::sort(sorted.begin(), sorted.end());
  const double a = 0.5 * (1.0 - level);
  return {interp_quantile_sorted(sorted, a), interp_quantile_sorted(sorted, 1.0 - a)};
}

std::pair<double, double> BootstrapVectorEstimates::central_interval(
    int j, double level) const {
  if (!(level > 0.0 && level < 1.0))
    throw std::domain_error("central_interval: level must lie in (0,1)");
  if (estimates.empty()) throw std::logic_error("central_interval: no replicates");
  std::vector<double> sorted;
  sorted.reserve(estimates.size());
  for (const auto& e : estimates) sorted.push_back(e.at(j));
  std::sort(sorted.begin(), sorted.end());
  const double a = 0.5 * (1.0 - level);
  return {interp_quantile_sorted(sorted, a), interp_quantile_sorted(sorted, 1.0 - a)};
}

BootstrapVectorEstimates semiparametric_response_bootstrap_multi(
    const GpdFit& fit, const Series& data, const VectorEstimator& estimator,
    int mean_block, int n_boot, std::uint64_t seed) {
  if (n_boot < 1)
    throw std::invalid_argument("semiparametric_bootstrap: n_boot must be >= 1");
  if (!estimator) throw std::invalid_argument("semiparametric_bootstrap: no estimator");
  const auto& rows = fit.retained_rows;
  const int ne = static_cast<int>(rows.size());
  if (ne < 2) throw FitError("semiparametric_bootstrap: fit retains fewer than 2 rows");

  const int yc = data.col_index(fit.spec.response);
  std::vector<double> u(ne);
  for (int k = 0; k < ne; ++k)
    u[k] = clamp_unit(fit.conditional_cdf(data, rows[k], data.at(rows[k], yc)));

  // Replicates reuse the fitted penalties; re-running the CV grid per
  // replicate would swamp the refits.
  GpdGamSpec bspec = fit.spec;
  if (bspec.smoothing.mode == SmoothingSpec::Mode::cv_grid) {
    bspec.smoothing.mode = SmoothingSpec::Mode::fixed;
    bspec.smoothing.fixed = fit.smooth.lambda;
    bspec.smoothing.fixed.insert(bspec.smoothing.fixed.end(), fit.smoothing.begin(),
                                 fit.smoothing.end());
  }

  BootstrapVectorEstimates out;
  out.n_requested = n_boot;
  out.mean_block = mean_block;
  out.seed = seed;
  for (int r = 0; r < n_boot; ++r) {
    Rng rng(seed + static_cast<std::uint64_t>(r));
    const std::vector<int> pick = stationary_bootstrap_indices(ne, mean_block, rng);
    Series bdata = data;
    for (int k = 0; k < ne; ++k)
      bdata.set(rows[k], yc, fit.conditional_quantile(data, rows[k], u[pick[k]]));
    try {
      const GpdFit refit = fit_nonstationary_gpd(bdata, bspec);
      out.estimates.push_back(estimator(refit, bdata));
    } catch (const FitError&) {
      ++out.n_failed;
    } catch (const NumericError&) {
      ++out.n_failed;
    }
  }
  return out;
}

BootstrapEstimates semiparametric_response_bootstrap(
    const GpdFit& fit, const Series& data, const QuantileEstimator& estimator,
    int mean_block, int n_boot, std::uint64_t seed) {
  if (!estimator) throw std::invalid_argument("semiparametric_bootstrap: no estimator");
  const BootstrapVectorEstimates multi = semiparametric_response_bootstrap_multi(
      fit, data,
      [&estimator](const GpdFit& refit, const Series& bdata) {
        return std::vector<double>{estimator(refit, bdata)};
      },
      mean_block, n_boot, seed);
  BootstrapEstimates out;
  out.n_requested = multi.n_requested;
  out.n_failed = multi.n_failed;
  out.mean_block = multi.mean_block;
  out.seed = multi.seed;
  out.estimates.reserve(multi.estimates.size());
  for (const auto& e : multi.estimates) out.estimates.push_back(e[0]);
  return out;
}

BootstrapEstimates parametric_bootstrap_condex(const CondExtFit& fit,
                                               const std::vector<double>& levels,
                                               int n_boot, int n_sim,
                                               std::uint64_t seed) {
  if (n_boot < 1)
    throw std::invalid_argument("parametric_bootstrap: n_boot must be >= 1");
  const int d = static_cast<int>(fit.vars.size());
  if (static_cast<int>(levels.size()) != d)
    throw std::invalid_argument("parametric_bootstrap: one level per site");
  if (fit.residuals.empty() && d > 1)
    throw FitError("parametric_bootstrap: fit holds no residual rows");
  if (!(levels[fit.cond_index] > 0.0) || levels[fit.cond_index] < fit.u_threshold)
    throw std::domain_error(
        "parametric_bootstrap: conditioning level must be positive and above the "
        "fitted threshold");

  const int ne = fit.n_exceedances();
  BootstrapEstimates out;
  out.n_requested = n_boot;
  out.seed = seed;
  for (int r = 0; r < n_boot; ++r) {
    Rng rng(seed + static_cast<std::uint64_t>(r));
    std::vector<std::vector<double>> cols(d, std::vector<double>(ne));
    for (int t = 0; t < ne; ++t) {
      const double w = fit.u_threshold + rng.exponential();
      cols[fit.cond_index][t] = w;
      const auto& z = fit.residuals[rng.index(ne)];
      int jj = 0;
      for (int j = 0; j < d; ++j) {
        if (j == fit.cond_index) continue;
        cols[j][t] = fit.alpha[jj] * w + std::pow(w, fit.beta[jj]) * z[jj];
        ++jj;
      }
    }
    Series synth;
    for (int j = 0; j < d; ++j) synth.add_column(fit.vars[j], std::move(cols[j]));
    try {
      const CondExtFit refit = fit_condext_fixed_threshold(
          synth, fit.vars, fit.cond_index, fit.u_threshold, fit.u_quantile);
      out.estimates.push_back(
          group_exceedance_probability(refit, levels, n_sim, rng.raw()).value);
    } catch (const FitError&) {
      ++out.n_failed;
    } catch (const NumericError&) {
      ++out.n_failed;
    }
  }
  return out;
}

}  // namespace tailkit
