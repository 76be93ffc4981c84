#include "tailkit/quantile_reg.hpp"

#include <algorithm>
#include <cmath>

#include "tailkit/optim.hpp"

namespace tailkit {

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i < 7; ++i) g.push_back(std::pow(10.0, -2.0 + i));
  return g;
}

static double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }

// Smoothed pinball rho_tau^eps(u) = tau*u + eps*log(1+exp(-u/eps)).
static double smoothed_pinball(double tau, double u, double eps) {
  return tau * u + eps * softplus(-u / eps);
}

static double smoothed_pinball_deriv(double tau, double u, double eps) {
  const double t = u / eps;
  const double sig = t > 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return tau - (1.0 - sig);
}

double pinball_loss(double tau, const std::vector<double>& y, const std::vector<double>& fitted) {
  if (y.size() != fitted.size() || y.empty())
    throw std::invalid_argument("pinball_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double u = y[i] - fitted[i];
    s += u >= 0.0 ? tau * u : (tau - 1.0) * u;
  }
  return s / static_cast<double>(y.size());
}

namespace {

struct PinballProblem {
  const Eigen::MatrixXd* X;
  const Eigen::VectorXd* y;
  const std::vector<PenaltyBlock>* penalties;
  std::vector<double> lambda;
  double tau;
  double eps;

  double operator()(const Eigen::VectorXd& c, Eigen::VectorXd* grad) const {
    const int n = static_cast<int>(X->rows());
    const Eigen::VectorXd psi = (*X) * c;
    double f = 0.0;
    Eigen::VectorXd w;
    if (grad) w.resize(n);
    for (int i = 0; i < n; ++i) {
      if (psi[i] > 50.0) return std::numeric_limits<double>::infinity();
      const double fit = std::exp(psi[i]);
      const double u = (*y)[i] - fit;
      f += smoothed_pinball(tau, u, eps);
      if (grad) w[i] = -smoothed_pinball_deriv(tau, u, eps) * fit;
    }
    f /= n;
    if (grad) *grad = X->transpose() * w / n;
    for (std::size_t b = 0; b < penalties->size(); ++b) {
      const auto& pb = (*penalties)[b];
      const int wdt = static_cast<int>(pb.S.rows());
      const Eigen::VectorXd seg = c.segment(pb.offset, wdt);
      const Eigen::VectorXd Sseg = pb.S * seg;
      f += 0.5 * lambda[b] * seg.dot(Sseg) / n;
      if (grad) grad->segment(pb.offset, wdt) += lambda[b] * Sseg / n;
    }
    return f;
  }
};

Eigen::VectorXd solve_pinball(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<PenaltyBlock>& penalties,
                              const std::vector<double>& lambda, double tau,
                              const Eigen::VectorXd& start) {
  // Epsilon continuation: coarse smoothing first, then sharpen.
  const double spread = std::max(1e-8, y.maxCoeff() - y.minCoeff());
  Eigen::VectorXd c = start;
  for (double scale : {1e-2, 1e-4}) {
    PinballProblem prob{&X, &y, &penalties, lambda, tau, spread * scale};
    const auto r = bfgs_minimize([&prob](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
      return prob(x, g);
    }, c, {.max_iters = 500});
    c = r.x;
  }
  return c;
}

}  // namespace

QuantileRegFit fit_threshold_quantile(const Formula& formula, const Series& data,
                                      const std::vector<int>& rows,
                                      const std::string& response,
                                      const QuantileRegOptions& opts) {
  if (!(opts.tau > 0.0 && opts.tau < 1.0))
    throw std::domain_error("fit_threshold_quantile: tau must lie in (0,1)");
  if (rows.empty()) throw std::invalid_argument("fit_threshold_quantile: no rows");

  QuantileRegFit fit;
  fit.tau = opts.tau;
  fit.model = Predictor::build(formula, data, rows);
  const int n = static_cast<int>(rows.size());
  Eigen::VectorXd y(n);
  {
    const int yc = data.col_index(response);
    for (int i = 0; i < n; ++i) {
      y[i] = data.at(rows[i], yc);
      if (std::isnan(y[i]))
        throw std::invalid_argument("fit_threshold_quantile: missing response in retained rows");
    }
  }

  Eigen::VectorXd start = Eigen::VectorXd::Zero(fit.model.n_coef());
  if (formula.has_intercept()) {
    std::vector<double> yv(y.data(), y.data() + n);
    const double q0 = interp_quantile(yv, opts.tau);
    start[0] = std::log(std::max(q0, 1e-6));
  }

  const int nb = fit.model.n_spline_blocks();
  std::vector<double> lambda(nb, 0.0);
  if (nb > 0) {
    if (!opts.fixed_lambda.empty()) {
      if (static_cast<int>(opts.fixed_lambda.size()) != nb)
        throw std::invalid_argument("fit_threshold_quantile: one lambda per spline term required");
      lambda = opts.fixed_lambda;
    } else {
      const auto grid = opts.lambda_grid.empty() ? default_lambda_grid() : opts.lambda_grid;
      const int k = std::min(opts.cv_folds, n);
      if (k < 2) throw std::invalid_argument("fit_threshold_quantile: need at least 2 folds");
      // Precompute per-fold training/validation splits once.
      std::vector<std::vector<int>> train_pos(k), valid_pos(k);
      for (int i = 0; i < n; ++i) {
        const int f = blocked_fold(i, n, k, opts.cv_seed);
        for (int g = 0; g < k; ++g) (f == g ? valid_pos : train_pos)[g].push_back(i);
      }
      lambda.assign(nb, grid[grid.size() / 2]);
      for (int block = 0; block < nb; ++block) {
        double best = std::numeric_limits<double>::infinity();
        double best_l = lambda[block];
        for (double l : grid) {
          auto trial = lambda;
          trial[block] = l;
          double score = 0.0;
          for (int f = 0; f < k; ++f) {
            std::vector<int> train_rows, valid_rows;
            for (int i : train_pos[f]) train_rows.push_back(rows[i]);
            for (int i : valid_pos[f]) valid_rows.push_back(rows[i]);
            if (train_rows.empty() || valid_rows.empty()) continue;
            Predictor pm = Predictor::build(formula, data, train_rows);
            Eigen::MatrixXd Xt = pm.design();
            Eigen::VectorXd yt(train_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i)
              yt[i] = data.at(train_rows[i], response);
            Eigen::VectorXd s0 = Eigen::VectorXd::Zero(pm.n_coef());
            if (formula.has_intercept()) s0[0] = start[0];
            const Eigen::VectorXd c = solve_pinball(Xt, yt, pm.penalties(), trial, opts.tau, s0);
            std::vector<double> yv, fv;
            for (int r : valid_rows) {
              yv.push_back(data.at(r, response));
              fv.push_back(std::exp(pm.eval(c, data, r)));
            }
            score += pinball_loss(opts.tau, yv, fv);
          }
          if (score < best) {
            best = score;
            best_l = l;
          }
        }
        lambda[block] = best_l;
      }
    }
  }

  fit.lambda = lambda;
  fit.coef = solve_pinball(fit.model.design(), y, fit.model.penalties(), lambda, opts.tau, start);

  int exceed = 0;
  for (int i = 0; i < n; ++i)
    if (y[i] > std::exp(fit.model.design().row(i).dot(fit.coef))) ++exceed;
  fit.exceed_fraction = static_cast<double>(exceed) / n;
  if (std::abs(fit.exceed_fraction - (1.0 - opts.tau)) > 0.02)
    fit.warnings.push_back("exceedance fraction " + std::to_string(fit.exceed_fraction) +
                           " is far from nominal " + std::to_string(1.0 - opts.tau));
  return fit;
}

double QuantileRegFit::value_at(const Series& data, int row) const {
  return std::exp(model.eval(coef, data, row));
}

SteppedQuantiles stepped_quantiles(const Series& data, const std::vector<int>& rows,
                                   const std::string& response, const std::string& stratum_var,
                                   double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("stepped_quantiles: tau in (0,1)");
  const int yc = data.col_index(response);
  const int sc = data.col_index(stratum_var);
  std::vector<double> levels;
  for (int r : rows) {
    const double s = data.at(r, sc);
    if (std::isnan(s)) throw std::invalid_argument("stepped_quantiles: missing stratum value");
    if (std::find(levels.begin(), levels.end(), s) == levels.end()) levels.push_back(s);
  }
  std::sort(levels.begin(), levels.end());
  SteppedQuantiles out;
  out.levels = levels;
  for (double lv : levels) {
    std::vector<double> ys;
    for (int r : rows)
      if (data.at(r, sc) == lv) ys.push_back(data.at(r, yc));
    out.values.push_back(interp_quantile(std::move(ys), tau));
  }
  return out;
}

double SteppedQuantiles::value_for(double level) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return values[i];
  throw std::invalid_argument("stepped threshold: unseen stratum level " + std::to_string(level));
}

}  // namespace tailkit
