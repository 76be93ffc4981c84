#include "tailkit/minproj.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tailkit/margins.hpp"
#include "tailkit/rng.hpp"

namespace tailkit {

SimplexRay make_ray(const std::vector<double>& levels) {
  if (levels.empty()) throw std::invalid_argument("make_ray: no levels");
  SimplexRay ray;
  ray.levels = levels;
  for (double l : levels) {
    if (!(l > 0.0)) throw std::invalid_argument("make_ray: levels must be positive");
    ray.r += l;
  }
  for (double l : levels) ray.omega.push_back(l / ray.r);
  return ray;
}

double negate_third_margin(double z3) {
  if (!(z3 > 0.0)) throw std::domain_error("negate_third_margin: value must be positive");
  return -std::log(-std::expm1(-z3));
}

ChallengeRays build_challenge_rays(double y, double v, double m) {
  const double zy = transform_margin(y, MarginScale::gumbel, MarginScale::exponential);
  const double zv = transform_margin(v, MarginScale::gumbel, MarginScale::exponential);
  // Lower-tail event {Y3 < m}: on the negated exponential margin the level is
  // -log F_Gumbel(m) = exp(-m) exactly.
  const double zm = std::exp(-m);
  ChallengeRays rays;
  rays.part1 = make_ray({zy, zy, zy});
  rays.part2 = make_ray({zv, zv, zm});
  return rays;
}

std::vector<double> min_projection(const Series& data,
                                   const std::vector<std::string>& z_vars,
                                   const SimplexRay& ray) {
  if (z_vars.size() != ray.omega.size())
    throw std::invalid_argument("min_projection: variable count does not match the ray");
  std::vector<int> cols;
  for (const auto& v : z_vars) cols.push_back(data.col_index(v));
  std::vector<double> out(data.n_rows());
  for (int t = 0; t < data.n_rows(); ++t) {
    double m = std::numeric_limits<double>::infinity();
    bool missing = false;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (ray.omega[i] <= 0.0) continue;
      const double z = data.at(t, cols[i]);
      if (std::isnan(z)) {
        missing = true;
        break;
      }
      m = std::min(m, z / ray.omega[i]);
    }
    out[t] = missing ? std::numeric_limits<double>::quiet_NaN() : m;
  }
  return out;
}

MinProjFit fit_minproj(const Series& data, const SimplexRay& ray,
                       const MinProjOptions& opts) {
  if (!(opts.tau > 0.0 && opts.tau < 1.0))
    throw std::invalid_argument("fit_minproj: tau must lie in (0,1)");

  MinProjFit fit;
  fit.ray = ray;
  fit.tau = opts.tau;
  fit.table = data;
  fit.table.add_column("t_proj", min_projection(data, opts.z_vars, ray));

  Formula thr;
  thr.target = "threshold";
  thr.terms.push_back(intercept_term());
  if (!opts.atmos_var.empty())
    thr.terms.push_back(spline_term(opts.atmos_var, opts.basis_dim));
  if (!opts.season_var.empty())
    thr.terms.push_back(indicator_term(opts.season_var, opts.season_level));

  Formula scale;
  scale.target = "scale";
  scale.terms.push_back(intercept_term());
  if (!opts.atmos_var.empty())
    scale.terms.push_back(spline_term(opts.atmos_var, opts.basis_dim));

  GpdGamSpec spec;
  spec.response = "t_proj";
  spec.threshold.kind = ThresholdKind::smooth;
  spec.threshold.tau = opts.tau;
  spec.threshold.formula = thr;
  spec.scale = scale;
  spec.fixed_shape = opts.fixed_shape;
  spec.smoothing = opts.smoothing;
  spec.min_excesses = opts.min_excesses;
  if (spec.smoothing.mode == SmoothingSpec::Mode::fixed &&
      spec.smoothing.fixed.size() == 1) {
    int nb = 0;
    for (const auto& t : thr.terms)
      if (t.kind == FormulaTerm::Kind::spline) ++nb;
    for (const auto& t : scale.terms)
      if (t.kind == FormulaTerm::Kind::spline) ++nb;
    spec.smoothing.fixed.assign(nb, opts.smoothing.fixed[0]);
  }

  fit.gpd = fit_nonstationary_gpd(fit.table, spec);
  fit.shape = fit.gpd.shape;
  if (!fit.gpd.shape_fixed) {
    fit.shape_lo = fit.shape - 1.96 * fit.gpd.shape_se;
    fit.shape_hi = fit.shape + 1.96 * fit.gpd.shape_se;
  } else {
    fit.shape_lo = fit.shape_hi = fit.shape;
  }
  return fit;
}

QqTable exponential_qq(const GpdFit& fit, const Series& data, int n_band,
                       std::uint64_t seed) {
  QqTable qq;
  qq.empirical = transform_excesses_to_exponential(fit, data);
  std::sort(qq.empirical.begin(), qq.empirical.end());
  const int n = static_cast<int>(qq.empirical.size());
  if (n == 0) throw std::invalid_argument("exponential_qq: no exceedances");
  for (int i = 0; i < n; ++i)
    qq.theoretical.push_back(-std::log1p(-static_cast<double>(i + 1) / (n + 1)));

  if (n_band > 0) {
    // Pointwise 95% envelope of Exp(1) order statistics.
    std::vector<std::vector<double>> sims(n_band, std::vector<double>(n));
    for (int b = 0; b < n_band; ++b) {
      Rng rng(seed + static_cast<std::uint64_t>(b));
      for (int i = 0; i < n; ++i) sims[b][i] = rng.exponential();
      std::sort(sims[b].begin(), sims[b].end());
    }
    std::vector<double> pool(n_band);
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < n_band; ++b) pool[b] = sims[b][i];
      std::sort(pool.begin(), pool.end());
      qq.band_lo.push_back(interp_quantile_sorted(pool, 0.025));
      qq.band_hi.push_back(interp_quantile_sorted(pool, 0.975));
    }
  }
  return qq;
}

QqTable minproj_qq(const MinProjFit& fit, int n_band, std::uint64_t seed) {
  return exponential_qq(fit.gpd, fit.table, n_band, seed);
}

double joint_survivor_probability(const MinProjFit& fit, double r) {
  const auto& rows = fit.gpd.retained_rows;
  if (rows.empty()) throw std::invalid_argument("joint_survivor_probability: empty fit");
  std::vector<int> offending;
  for (int t : rows)
    if (!(r > fit.gpd.threshold_at(fit.table, t))) offending.push_back(t);
  if (!offending.empty()) {
    std::ostringstream os;
    os << "joint_survivor_probability: radius " << r << " does not exceed the threshold at "
       << offending.size() << " rows (first:";
    for (std::size_t i = 0; i < offending.size() && i < 5; ++i) os << " " << offending[i];
    os << ")";
    throw std::domain_error(os.str());
  }
  double sum = 0.0;
  for (int t : rows) {
    const GpdParams g{fit.gpd.scale_at(fit.table, t), fit.gpd.shape};
    sum += gpd_survival(r - fit.gpd.threshold_at(fit.table, t), g);
  }
  return (1.0 - fit.tau) * sum / static_cast<double>(rows.size());
}

double joint_survivor_probability(const MinProjFit& fit) {
  return joint_survivor_probability(fit, fit.ray.r);
}

TauSweepResult select_tau_minproj(const Series& data, const SimplexRay& ray,
                                  const MinProjOptions& base,
                                  const std::vector<double>& taus) {
  if (taus.empty()) throw std::invalid_argument("select_tau_minproj: empty tau grid");
  TauSweepResult res;
  double best_mad = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (double tau : taus) {
    MinProjOptions opts = base;
    opts.tau = tau;
    MinProjFit fit;
    try {
      fit = fit_minproj(data, ray, opts);
    } catch (const FitError&) {
      continue;  // too few exceedances at high tau on small data
    }
    const QqTable qq = minproj_qq(fit, 0);
    double mad = 0.0;
    for (std::size_t i = 0; i < qq.empirical.size(); ++i)
      mad += std::abs(qq.empirical[i] - qq.theoretical[i]);
    mad /= static_cast<double>(qq.empirical.size());
    res.entries.push_back({tau, mad, fit.shape});
    if (mad < best_mad) {
      best_mad = mad;
      res.best = std::move(fit);
      res.chosen_tau = tau;
      have_best = true;
    }
  }
  if (!have_best) throw FitError("select_tau_minproj: no tau level could be fitted");
  return res;
}

}  // namespace tailkit
