#include "tailkit/condex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tailkit/common.hpp"
#include "tailkit/optim.hpp"
#include "tailkit/rng.hpp"

namespace tailkit {

namespace {

constexpr double kDegenerateSd = 1e-8;

struct CoordFit {
  double alpha = 0.0;
  double beta = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  bool degenerate = false;
  bool converged = true;
};

// Profiled working negative log likelihood per exceedance row:
// f(alpha, beta) = log sd(z) + beta * mean(log w),  z_t = (y_t - alpha w_t) / w_t^beta.
CoordFit fit_coordinate(const std::vector<double>& w, const std::vector<double>& y) {
  const int n = static_cast<int>(w.size());
  double mean_logw = 0.0;
  for (double wi : w) mean_logw += std::log(wi);
  mean_logw /= n;

  std::vector<double> z(n), wpow(n);
  const auto profile = [&](double alpha, double beta, double* m, double* sd) {
    double zm = 0.0;
    for (int t = 0; t < n; ++t) {
      wpow[t] = std::pow(w[t], beta);
      z[t] = (y[t] - alpha * w[t]) / wpow[t];
      zm += z[t];
    }
    zm /= n;
    double v = 0.0;
    for (int t = 0; t < n; ++t) v += (z[t] - zm) * (z[t] - zm);
    *m = zm;
    *sd = std::sqrt(v / n);
  };

  const Objective fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double alpha = std::tanh(x[0]);
    const double beta = 1.0 - std::log1p(std::exp(x[1]));
    double zm, sd;
    profile(alpha, beta, &zm, &sd);
    if (!std::isfinite(sd)) return std::numeric_limits<double>::infinity();
    const double s2 = std::max(sd * sd, 1e-300);
    const double f = 0.5 * std::log(s2) + beta * mean_logw;
    if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
    if (grad) {
      double da = 0.0, db = 0.0;
      for (int t = 0; t < n; ++t) {
        const double c = (z[t] - zm) / (n * s2);
        da += c * (-w[t] / wpow[t]);
        db += c * (-z[t] * std::log(w[t]));
      }
      db += mean_logw;
      (*grad)(0) = da * (1.0 - alpha * alpha);
      (*grad)(1) = db * (-1.0 / (1.0 + std::exp(-x[1])));
    }
    return f;
  };

  Eigen::VectorXd x0(2);
  x0 << 0.0, std::log(std::expm1(1.0));  // alpha = 0, beta = 0
  BfgsOptions opt;
  opt.max_iters = 500;
  const BfgsResult res = bfgs_minimize(fn, x0, opt);

  CoordFit out;
  out.alpha = std::tanh(res.x[0]);
  out.beta = 1.0 - std::log1p(std::exp(res.x[1]));
  profile(out.alpha, out.beta, &out.mean, &out.sd);
  out.converged = res.converged;

  if (out.sd < kDegenerateSd * (1.0 + std::abs(out.mean))) {
    // Functional dependence: the Gaussian spread collapses, so pin beta and
    // take the variance-minimizing slope instead.
    double sw = 0.0, sy = 0.0, sww = 0.0, swy = 0.0;
    for (int t = 0; t < n; ++t) {
      sw += w[t];
      sy += y[t];
      sww += w[t] * w[t];
      swy += w[t] * y[t];
    }
    const double slope = (swy - sw * sy / n) / (sww - sw * sw / n);
    out.alpha = std::clamp(slope, -1.0, 1.0);
    out.beta = 0.0;
    profile(out.alpha, out.beta, &out.mean, &out.sd);
    out.degenerate = true;
    out.converged = true;
  }
  return out;
}

CondExtFit fit_condext_core(const Series& data, const std::vector<std::string>& vars,
                            int cond_index, double u_quantile,
                            const double* fixed_threshold) {
  if (vars.empty()) throw std::invalid_argument("fit_condext: no variables");
  if (cond_index < 0 || cond_index >= static_cast<int>(vars.size()))
    throw std::invalid_argument("fit_condext: conditioning index out of range");
  if (!(u_quantile > 0.0 && u_quantile < 1.0))
    throw std::invalid_argument("fit_condext: conditioning quantile must lie in (0,1)");

  std::vector<int> cols;
  for (const auto& v : vars) cols.push_back(data.col_index(v));

  std::vector<int> rows;
  for (int t = 0; t < data.n_rows(); ++t) {
    bool ok = true;
    for (int c : cols)
      if (std::isnan(data.at(t, c))) ok = false;
    if (ok) rows.push_back(t);
  }
  if (rows.empty()) throw FitError("fit_condext: no complete rows");

  CondExtFit fit;
  fit.vars = vars;
  fit.cond_index = cond_index;
  fit.u_quantile = u_quantile;

  if (fixed_threshold) {
    fit.u_threshold = *fixed_threshold;
  } else {
    std::vector<double> cond;
    for (int t : rows) cond.push_back(data.at(t, cols[cond_index]));
    fit.u_threshold = interp_quantile(cond, u_quantile);
  }

  const int d = static_cast<int>(vars.size());
  std::vector<std::vector<double>> others(d - 1);
  for (int t : rows) {
    const double w = data.at(t, cols[cond_index]);
    if (!(w > fit.u_threshold)) continue;
    fit.cond_values.push_back(w);
    int jj = 0;
    for (int j = 0; j < d; ++j) {
      if (j == cond_index) continue;
      others[jj++].push_back(data.at(t, cols[j]));
    }
  }
  const int ne = fit.n_exceedances();
  if (ne < 2) throw FitError("fit_condext: fewer than 2 conditioning exceedances");
  if (ne < 100) {
    std::ostringstream os;
    os << "only " << ne << " conditioning exceedances; fit may be unstable";
    fit.warnings.push_back(os.str());
  }
  if (!(fit.u_threshold > 0.0))
    throw FitError("fit_condext: conditioning threshold is not in the upper tail");

  fit.residuals.assign(ne, std::vector<double>(d - 1));
  for (int jj = 0; jj < d - 1; ++jj) {
    const CoordFit cf = fit_coordinate(fit.cond_values, others[jj]);
    if (!cf.converged)
      throw FitError("fit_condext: working likelihood did not converge for " +
                     vars[jj < cond_index ? jj : jj + 1]);
    fit.alpha.push_back(cf.alpha);
    fit.beta.push_back(cf.beta);
    fit.resid_mean.push_back(cf.mean);
    fit.resid_sd.push_back(cf.sd);
    if (cf.degenerate)
      fit.warnings.push_back("degenerate residual spread for " +
                             vars[jj < cond_index ? jj : jj + 1] +
                             "; slope-only refit");
    if (std::abs(cf.alpha) > 0.999)
      fit.warnings.push_back("alpha at the dependence boundary for " +
                             vars[jj < cond_index ? jj : jj + 1]);
    if (cf.beta > 0.999)
      fit.warnings.push_back("beta at the upper boundary for " +
                             vars[jj < cond_index ? jj : jj + 1]);
    for (int t = 0; t < ne; ++t) {
      const double w = fit.cond_values[t];
      fit.residuals[t][jj] = (others[jj][t] - cf.alpha * w) / std::pow(w, cf.beta);
    }
  }
  return fit;
}

}  // namespace

CondExtFit fit_condext(const Series& data, const std::vector<std::string>& vars,
                       int cond_index, double u_quantile) {
  return fit_condext_core(data, vars, cond_index, u_quantile, nullptr);
}

CondExtFit fit_condext_fixed_threshold(const Series& data,
                                       const std::vector<std::string>& vars,
                                       int cond_index, double threshold,
                                       double u_quantile_label) {
  return fit_condext_core(data, vars, cond_index, u_quantile_label, &threshold);
}

Series simulate_conditional(const CondExtFit& fit, int n_sim, double level,
                            std::uint64_t seed) {
  if (n_sim <= 0) throw std::invalid_argument("simulate_conditional: n_sim must be positive");
  if (fit.residuals.empty())
    throw FitError("simulate_conditional: fit holds no residual rows");
  if (level < fit.u_threshold)
    throw std::domain_error("simulate_conditional: level below the fitted threshold");

  const int d = static_cast<int>(fit.vars.size());
  std::vector<std::vector<double>> out(d, std::vector<double>(n_sim));
  Rng rng(seed);
  const int ne = fit.n_exceedances();
  for (int s = 0; s < n_sim; ++s) {
    const double w = level + rng.exponential();
    const auto& z = fit.residuals[rng.index(ne)];
    out[fit.cond_index][s] = w;
    int jj = 0;
    for (int j = 0; j < d; ++j) {
      if (j == fit.cond_index) continue;
      out[j][s] = fit.alpha[jj] * w + std::pow(w, fit.beta[jj]) * z[jj];
      ++jj;
    }
  }
  Series sim;
  for (int j = 0; j < d; ++j) sim.add_column(fit.vars[j], std::move(out[j]));
  return sim;
}

GroupProb group_exceedance_probability(const CondExtFit& fit,
                                       const std::vector<double>& levels,
                                       int n_sim, std::uint64_t seed) {
  const int d = static_cast<int>(fit.vars.size());
  if (static_cast<int>(levels.size()) != d)
    throw std::invalid_argument("group_exceedance_probability: one level per site");
  const double s_i = levels[fit.cond_index];
  if (!(s_i > 0.0) || s_i < fit.u_threshold)
    throw std::domain_error(
        "group_exceedance_probability: conditioning level for " +
        fit.vars[fit.cond_index] + " must be positive and above the fitted threshold");

  GroupProb gp;
  gp.tail = 0.5 * std::exp(-s_i);
  if (d == 1) {
    gp.value = gp.tail;
    return gp;
  }

  const Series sim = simulate_conditional(fit, n_sim, s_i, seed);
  std::vector<int> other_cols;
  std::vector<double> other_levels;
  for (int j = 0; j < d; ++j) {
    if (j == fit.cond_index) continue;
    other_cols.push_back(sim.col_index(fit.vars[j]));
    other_levels.push_back(levels[j]);
  }
  int hit = 0;
  for (int s = 0; s < n_sim; ++s) {
    bool all = true;
    for (std::size_t k = 0; k < other_cols.size() && all; ++k)
      all = sim.at(s, other_cols[k]) > other_levels[k];
    if (all) ++hit;
  }
  gp.n_sim = n_sim;
  gp.fraction = static_cast<double>(hit) / n_sim;
  gp.value = gp.tail * gp.fraction;
  gp.se = gp.tail * std::sqrt(gp.fraction * (1.0 - gp.fraction) / n_sim);
  return gp;
}

double factorized_probability(const std::vector<double>& group_probs) {
  if (group_probs.empty())
    throw std::invalid_argument("factorized_probability: no group factors");
  double p = 1.0;
  for (double g : group_probs) {
    if (!(g >= 0.0 && g <= 1.0))
      throw std::domain_error("factorized_probability: factor outside [0,1]");
    p *= g;
  }
  return p;
}

double laplace_upper_level(double p) {
  if (!(p > 0.0 && p <= 0.5))
    throw std::domain_error("laplace_upper_level: probability must lie in (0, 0.5]");
  return -std::log(2.0 * p);
}

std::pair<double, double> challenge_levels(int days_per_year, int days_per_month) {
  if (days_per_year <= 1 || days_per_month <= 1)
    throw std::invalid_argument("challenge_levels: calendar lengths must exceed 1");
  return {laplace_upper_level(1.0 / days_per_year),
          laplace_upper_level(1.0 / days_per_month)};
}

}  // namespace tailkit
