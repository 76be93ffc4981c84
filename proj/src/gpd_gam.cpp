#include "tailkit/gpd_gam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailkit/optim.hpp"
#include "tailkit/scoring.hpp"

namespace tailkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Penalized negative log likelihood over (scale coefficients, shape).
// When fixed_shape is set the parameter vector is the coefficients alone.
struct TailProblem {
  const Eigen::MatrixXd* Z;
  const Eigen::VectorXd* z;  // excesses
  const std::vector<PenaltyBlock>* penalties;
  std::vector<double> lambda;
  std::optional<double> fixed_shape;

  int dim() const { return static_cast<int>(Z->cols()) + (fixed_shape ? 0 : 1); }

  double shape_of(const Eigen::VectorXd& th) const {
    return fixed_shape ? *fixed_shape : th[th.size() - 1];
  }

  // Penalized objective; grad optional.  Infeasible points return +inf.
  double operator()(const Eigen::VectorXd& th, Eigen::VectorXd* grad) const {
    const int p = static_cast<int>(Z->cols());
    const int n = static_cast<int>(Z->rows());
    const double xi = shape_of(th);
    if (xi <= -1.0 + 1e-6 || xi > 2.0) return kInf;
    const Eigen::VectorXd psi = (*Z) * th.head(p);
    double f = 0.0;
    Eigen::VectorXd w;
    double gxi = 0.0;
    if (grad) w.resize(n);
    for (int i = 0; i < n; ++i) {
      if (std::abs(psi[i]) > 50.0) return kInf;
      const double sigma = std::exp(psi[i]);
      const double h = (*z)[i] / sigma;
      const double t = 1.0 + xi * h;
      if (t <= 0.0) return kInf;
      if (std::abs(xi) < kShapeEps)
        f += psi[i] + h;
      else
        f += psi[i] + (1.0 + 1.0 / xi) * std::log(t);
      if (grad) {
        double dls, dxi;
        gpd_logpdf_grad(h, xi, &dls, &dxi);
        w[i] = -dls;
        gxi -= dxi;
      }
    }
    f /= n;
    if (grad) {
      grad->resize(dim());
      grad->head(p) = Z->transpose() * w / n;
      if (!fixed_shape) (*grad)[p] = gxi / n;
    }
    for (std::size_t b = 0; b < penalties->size(); ++b) {
      const auto& pb = (*penalties)[b];
      const int wdt = static_cast<int>(pb.S.rows());
      const Eigen::VectorXd seg = th.segment(pb.offset, wdt);
      const Eigen::VectorXd Sseg = pb.S * seg;
      f += 0.5 * lambda[b] * seg.dot(Sseg) / n;
      if (grad) grad->segment(pb.offset, wdt) += lambda[b] * Sseg / n;
    }
    return f;
  }
};

Eigen::VectorXd solve_tail(const TailProblem& prob, const Eigen::VectorXd& start,
                           bool* converged = nullptr) {
  const auto r = bfgs_minimize(
      [&prob](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return prob(x, g); }, start,
      {.max_iters = 400});
  if (converged) *converged = r.converged;
  return r.x;
}

Eigen::VectorXd start_point(const TailProblem& prob, const Eigen::VectorXd& z) {
  Eigen::VectorXd th = Eigen::VectorXd::Zero(prob.dim());
  const double mz = z.mean();
  th[0] = std::log(std::max(mz, 1e-8));
  if (!prob.fixed_shape) {
    std::vector<double> zv(z.data(), z.data() + z.size());
    double xi0 = 0.1;
    if (zv.size() >= 10) {
      const GpdParams pwm = gpd_fit_pwm(zv);
      xi0 = std::min(0.5, std::max(-0.3, pwm.shape));
    }
    // A negative shape start must keep the largest excess inside the support,
    // otherwise the first objective evaluation is infeasible.
    if (xi0 < 0.0)
      th[0] = std::max(th[0], std::log(1.1 * -xi0 * z.maxCoeff()));
    th[th.size() - 1] = xi0;
  }
  return th;
}

}  // namespace

static int find_level(const std::vector<double>& levels, double v) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == v) return static_cast<int>(i);
  return -1;
}

int GpdFit::stratum_index(const Series& data, int row) const {
  if (spec.threshold.stratum_var.empty()) return 0;
  const double v = data.at(row, spec.threshold.stratum_var);
  const int i = find_level(rate_levels, v);
  if (i < 0)
    throw std::invalid_argument("gpd fit: unseen stratum level " + std::to_string(v));
  return i;
}

double GpdFit::threshold_at(const Series& data, int row) const {
  if (spec.threshold.kind == ThresholdKind::stepped) {
    if (spec.threshold.stratum_var.empty()) return stepped.values[0];
    return stepped.value_for(data.at(row, spec.threshold.stratum_var));
  }
  return smooth.value_at(data, row);
}

double GpdFit::rate_at(const Series& data, int row) const {
  return rates[stratum_index(data, row)];
}

double GpdFit::scale_at(const Series& data, int row) const {
  return std::exp(scale_model.eval(scale_coef, data, row));
}

double GpdFit::conditional_cdf(const Series& data, int row, double y) const {
  const double v = threshold_at(data, row);
  const int s = stratum_index(data, row);
  const double lam = rates[s];
  if (y > v) {
    const GpdParams g{scale_at(data, row), shape};
    return 1.0 - lam * gpd_survival(y - v, g);
  }
  if (bodies.empty() || bodies[s].empty())
    throw std::logic_error("gpd fit: no body distribution available below the threshold");
  return (1.0 - lam) * bodies[s].cdf(y - v);
}

double GpdFit::conditional_quantile(const Series& data, int row, double p) const {
  if (!(p >= 0.0 && p < 1.0))
    throw std::domain_error("conditional_quantile: p outside [0,1)");
  const double v = threshold_at(data, row);
  const int s = stratum_index(data, row);
  const double lam = rates[s];
  if (p >= 1.0 - lam) {
    const GpdParams g{scale_at(data, row), shape};
    return v + gpd_quantile(1.0 - (1.0 - p) / lam, g);
  }
  if (bodies.empty() || bodies[s].empty())
    throw std::logic_error("gpd fit: no body distribution available below the threshold");
  return v + bodies[s].quantile(p / (1.0 - lam));
}

GpdFit fit_nonstationary_gpd(const Series& data, const GpdGamSpec& spec) {
  GpdFit fit;
  fit.spec = spec;
  fit.n_total = data.n_rows();

  // Case deletion over the response and every referenced covariate.
  std::vector<std::string> needed{spec.response};
  if (!spec.threshold.stratum_var.empty()) needed.push_back(spec.threshold.stratum_var);
  if (spec.threshold.kind == ThresholdKind::smooth)
    for (const auto& v : spec.threshold.formula.variables()) needed.push_back(v);
  for (const auto& v : spec.scale.variables()) needed.push_back(v);
  fit.retained_rows = data.complete_rows(needed);
  fit.n_retained = static_cast<int>(fit.retained_rows.size());
  if (fit.n_retained == 0) throw FitError("fit_nonstationary_gpd: no complete rows");
  fit.dropped_fraction = 1.0 - static_cast<double>(fit.n_retained) / fit.n_total;
  if (fit.dropped_fraction > 0.5)
    fit.warnings.push_back("case deletion dropped " + std::to_string(fit.dropped_fraction) +
                           " of all rows");

  // Threshold component.
  if (spec.threshold.kind == ThresholdKind::stepped) {
    if (spec.threshold.stratum_var.empty()) {
      std::vector<double> ys;
      for (int r : fit.retained_rows) ys.push_back(data.at(r, spec.response));
      fit.stepped.levels = {0.0};
      fit.stepped.values = {interp_quantile(std::move(ys), spec.threshold.tau)};
    } else {
      fit.stepped = stepped_quantiles(data, fit.retained_rows, spec.response,
                                      spec.threshold.stratum_var, spec.threshold.tau);
    }
  } else {
    QuantileRegOptions qopts;
    qopts.tau = spec.threshold.tau;
    if (spec.smoothing.mode == SmoothingSpec::Mode::fixed) {
      int nb = 0;
      for (const auto& t : spec.threshold.formula.terms)
        if (t.kind == FormulaTerm::Kind::spline) ++nb;
      if (static_cast<int>(spec.smoothing.fixed.size()) < nb)
        throw std::invalid_argument("smoothing: fixed lambda list must cover every spline block");
      // The fixed list covers threshold spline blocks first, then scale blocks.
      qopts.fixed_lambda.assign(spec.smoothing.fixed.begin(),
                                spec.smoothing.fixed.begin() + nb);
    } else {
      qopts.lambda_grid = spec.smoothing.lambda_grid;
      qopts.cv_folds = spec.smoothing.cv_folds;
      qopts.cv_seed = spec.smoothing.cv_seed;
    }
    fit.smooth = fit_threshold_quantile(spec.threshold.formula, data, fit.retained_rows,
                                        spec.response, qopts);
    for (const auto& w : fit.smooth.warnings) fit.warnings.push_back("threshold: " + w);
  }

  // Stratum labels for rates and bodies.
  if (spec.threshold.stratum_var.empty()) {
    fit.rate_levels = {0.0};
  } else {
    for (int r : fit.retained_rows) {
      const double s = data.at(r, spec.threshold.stratum_var);
      if (find_level(fit.rate_levels, s) < 0) fit.rate_levels.push_back(s);
    }
    std::sort(fit.rate_levels.begin(), fit.rate_levels.end());
  }
  const int n_strata = static_cast<int>(fit.rate_levels.size());

  // Excess rows, empirical rates, bodies of y - v(x).
  std::vector<std::vector<double>> body_vals(n_strata);
  std::vector<int> stratum_n(n_strata, 0), stratum_exc(n_strata, 0);
  for (int r : fit.retained_rows) {
    const int s = fit.stratum_index(data, r);
    const double v = fit.threshold_at(data, r);
    const double y = data.at(r, spec.response);
    ++stratum_n[s];
    if (y > v) {
      ++stratum_exc[s];
      fit.excess_rows.push_back(r);
    } else {
      body_vals[s].push_back(y - v);
    }
  }
  fit.n_excess = static_cast<int>(fit.excess_rows.size());
  if (fit.n_excess < spec.min_excesses)
    throw FitError("fit_nonstationary_gpd: only " + std::to_string(fit.n_excess) +
                   " excesses, need " + std::to_string(spec.min_excesses));
  for (int s = 0; s < n_strata; ++s) {
    fit.rates.push_back(stratum_n[s] > 0
                            ? static_cast<double>(stratum_exc[s]) / stratum_n[s]
                            : 0.0);
    if (stratum_exc[s] == 0)
      fit.warnings.push_back("stratum " + std::to_string(fit.rate_levels[s]) +
                             " has no excesses");
    fit.bodies.emplace_back(body_vals[s].empty() ? BodyCdf()
                                                 : BodyCdf(std::move(body_vals[s]), 0.0));
  }

  // Tail design and excess vector.
  fit.scale_model = Predictor::build(spec.scale, data, fit.excess_rows);
  if (fit.scale_model.any_clamped_in_build())
    fit.warnings.push_back("scale covariates clamped to the spline knot range");
  Eigen::VectorXd z(fit.n_excess);
  for (int i = 0; i < fit.n_excess; ++i)
    z[i] = data.at(fit.excess_rows[i], spec.response) - fit.threshold_at(data, fit.excess_rows[i]);

  TailProblem prob{&fit.scale_model.design(), &z, &fit.scale_model.penalties(), {},
                   spec.fixed_shape};
  const int nb_scale = fit.scale_model.n_spline_blocks();
  int nb_thr = 0;
  if (spec.threshold.kind == ThresholdKind::smooth)
    nb_thr = fit.smooth.model.n_spline_blocks();

  std::vector<double> lambda(nb_scale, 0.0);
  if (nb_scale > 0) {
    if (spec.smoothing.mode == SmoothingSpec::Mode::fixed) {
      if (static_cast<int>(spec.smoothing.fixed.size()) != nb_thr + nb_scale)
        throw std::invalid_argument("smoothing: fixed lambda list must cover every spline block");
      lambda.assign(spec.smoothing.fixed.begin() + nb_thr, spec.smoothing.fixed.end());
    } else {
      // Blocked k-fold CV on held-out CRPS, coordinate descent over blocks.
      const auto grid = spec.smoothing.lambda_grid.empty() ? default_lambda_grid()
                                                           : spec.smoothing.lambda_grid;
      const int k = std::min(spec.smoothing.cv_folds, fit.n_excess);
      if (k < 2) throw std::invalid_argument("smoothing: need at least 2 folds");
      struct Fold {
        Predictor model;
        Eigen::VectorXd z_train;
        std::vector<int> valid_rows;
        std::vector<double> z_valid;
      };
      std::vector<Fold> folds(k);
      {
        std::vector<std::vector<int>> train_idx(k), valid_idx(k);
        for (int i = 0; i < fit.n_excess; ++i) {
          const int f = blocked_fold(i, fit.n_excess, k, spec.smoothing.cv_seed);
          for (int g = 0; g < k; ++g) (f == g ? valid_idx : train_idx)[g].push_back(i);
        }
        for (int f = 0; f < k; ++f) {
          std::vector<int> tr;
          for (int i : train_idx[f]) tr.push_back(fit.excess_rows[i]);
          folds[f].model = Predictor::build(spec.scale, data, tr);
          folds[f].z_train.resize(tr.size());
          for (std::size_t i = 0; i < tr.size(); ++i)
            folds[f].z_train[i] = z[train_idx[f][i]];
          for (int i : valid_idx[f]) {
            folds[f].valid_rows.push_back(fit.excess_rows[i]);
            folds[f].z_valid.push_back(z[i]);
          }
        }
      }
      lambda.assign(nb_scale, grid[grid.size() / 2]);
      for (int block = 0; block < nb_scale; ++block) {
        double best = kInf, best_l = lambda[block];
        for (double l : grid) {
          auto trial = lambda;
          trial[block] = l;
          double score = 0.0;
          bool ok = true;
          for (auto& fd : folds) {
            if (fd.z_train.size() == 0 || fd.valid_rows.empty()) continue;
            TailProblem fp{&fd.model.design(), &fd.z_train, &fd.model.penalties(), trial,
                           spec.fixed_shape};
            bool conv = false;
            const Eigen::VectorXd th = solve_tail(fp, start_point(fp, fd.z_train), &conv);
            if (!conv) {
              ok = false;
              break;
            }
            const double xi = fp.shape_of(th);
            const int p = fd.model.n_coef();
            for (std::size_t i = 0; i < fd.valid_rows.size(); ++i) {
              const double sigma =
                  std::exp(fd.model.eval(th.head(p), data, fd.valid_rows[i]));
              const GpdParams g{sigma, xi};
              const double hi = gpd_quantile(0.9999, g);
              const double obs = fd.z_valid[i];
              score += crps_cdf([&g](double t) { return gpd_cdf(t, g); }, obs, 0.0, hi, 1e-6);
            }
          }
          if (ok && score < best) {
            best = score;
            best_l = l;
          }
        }
        lambda[block] = best_l;
      }
    }
  }
  fit.smoothing = lambda;
  prob.lambda = lambda;

  bool converged = false;
  const Eigen::VectorXd theta = solve_tail(prob, start_point(prob, z), &converged);
  if (!converged)
    throw FitError("fit_nonstationary_gpd: tail optimizer did not converge");
  const int p = fit.scale_model.n_coef();
  fit.scale_coef = theta.head(p);
  fit.shape = prob.shape_of(theta);
  fit.shape_fixed = spec.fixed_shape.has_value();
  if (!fit.shape_fixed && (fit.shape <= -1.0 + 1e-4 || fit.shape >= 2.0 - 1e-4))
    fit.warnings.push_back("shape estimate sits on the box boundary");

  const double nd = fit.n_excess;
  TailProblem unpen = prob;
  unpen.lambda.assign(nb_scale, 0.0);
  fit.loglik = -unpen(theta, nullptr) * nd;
  fit.penalized_obj = prob(theta, nullptr) * nd;

  // Effective dof: tr[(H + P)^-1 H] with H the unpenalized information.
  {
    const int d = prob.dim();
    Eigen::MatrixXd H(d, d);
    const double hstep = 1e-5;
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd xp = theta, xm = theta;
      const double hj = hstep * (1.0 + std::abs(theta[j]));
      xp[j] += hj;
      xm[j] -= hj;
      Eigen::VectorXd gp(d), gm(d);
      if (!std::isfinite(unpen(xp, &gp)) || !std::isfinite(unpen(xm, &gm))) {
        H.setIdentity();
        fit.warnings.push_back("information matrix evaluated at the feasibility boundary");
        break;
      }
      H.col(j) = (gp - gm) * (nd / (2.0 * hj));
    }
    H = 0.5 * (H + H.transpose());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t b = 0; b < fit.scale_model.penalties().size(); ++b) {
      const auto& pb = fit.scale_model.penalties()[b];
      P.block(pb.offset, pb.offset, pb.S.rows(), pb.S.cols()) += lambda[b] * pb.S;
    }
    const Eigen::MatrixXd HP = H + P;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(HP);
    if (lu.isInvertible()) {
      fit.edf = (lu.solve(H)).trace();
      const Eigen::MatrixXd Vb = lu.inverse();
      if (!fit.shape_fixed && Vb(d - 1, d - 1) > 0.0)
        fit.shape_se = std::sqrt(Vb(d - 1, d - 1));
    } else {
      fit.edf = d;
      fit.warnings.push_back("penalized information not invertible; edf set to parameter count");
    }
  }
  fit.aic = -2.0 * fit.loglik + 2.0 * fit.edf;
  fit.bic = -2.0 * fit.loglik + std::log(nd) * fit.edf;
  return fit;
}

GpdFit assemble_gpd_fit(const GpdGamSpec& spec, const Series& data,
                        const std::vector<double>& stratum_levels,
                        const std::vector<double>& thresholds,
                        const std::vector<double>& rates,
                        const Eigen::VectorXd& scale_coef, double shape) {
  if (spec.threshold.kind != ThresholdKind::stepped)
    throw std::invalid_argument("assemble_gpd_fit: stepped thresholds only");
  if (stratum_levels.size() != thresholds.size() || thresholds.size() != rates.size())
    throw std::invalid_argument("assemble_gpd_fit: level/threshold/rate size mismatch");
  GpdFit fit;
  fit.spec = spec;
  fit.n_total = data.n_rows();
  fit.stepped.levels = stratum_levels;
  fit.stepped.values = thresholds;
  fit.rate_levels = stratum_levels;
  fit.rates = rates;

  std::vector<std::string> needed;
  if (!spec.threshold.stratum_var.empty()) needed.push_back(spec.threshold.stratum_var);
  for (const auto& v : spec.scale.variables()) needed.push_back(v);
  if (data.has_column(spec.response)) needed.push_back(spec.response);
  fit.retained_rows = data.complete_rows(needed);
  fit.n_retained = static_cast<int>(fit.retained_rows.size());
  fit.dropped_fraction = 1.0 - static_cast<double>(fit.n_retained) / std::max(1, fit.n_total);

  fit.scale_model = Predictor::build(spec.scale, data, fit.retained_rows);
  fit.scale_coef = scale_coef;
  fit.shape = shape;
  fit.shape_fixed = spec.fixed_shape.has_value();

  const int n_strata = static_cast<int>(stratum_levels.size());
  std::vector<std::vector<double>> body_vals(n_strata);
  if (data.has_column(spec.response)) {
    for (int r : fit.retained_rows) {
      const int s = fit.stratum_index(data, r);
      const double y = data.at(r, spec.response);
      const double v = thresholds[s];
      if (y > v)
        fit.excess_rows.push_back(r);
      else
        body_vals[s].push_back(y - v);
    }
  }
  fit.n_excess = static_cast<int>(fit.excess_rows.size());
  for (int s = 0; s < n_strata; ++s)
    fit.bodies.emplace_back(body_vals[s].empty() ? BodyCdf()
                                                 : BodyCdf(std::move(body_vals[s]), 0.0));
  return fit;
}

std::vector<double> transform_excesses_to_exponential(const GpdFit& fit, const Series& data) {
  std::vector<double> out;
  out.reserve(fit.excess_rows.size());
  for (int r : fit.excess_rows) {
    const double z = data.at(r, fit.spec.response) - fit.threshold_at(data, r);
    if (!(z > 0.0)) throw std::logic_error("transform_excesses: non-positive excess");
    const double sigma = fit.scale_at(data, r);
    const double s = gpd_survival(z, GpdParams{sigma, fit.shape});
    out.push_back(-std::log(std::max(s, 1e-300)));
  }
  return out;
}

}  // namespace tailkit
