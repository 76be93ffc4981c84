#include "tailkit/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tailkit/optim.hpp"

namespace tailkit {

double competition_loss(double q_true, double q_est) {
  if (!(q_true > 0.0)) throw std::domain_error("competition_loss: true quantile must be positive");
  if (!std::isfinite(q_est)) throw std::domain_error("competition_loss: non-finite estimate");
  if (q_est < 0.95 * q_true) return 0.9 * (0.95 * q_true - q_est);
  if (q_est > 1.05 * q_true) return 0.1 * (q_est - 1.05 * q_true);
  return 0.0;
}

namespace {

struct QuadState {
  const std::function<double(double)>* f;
  int evals = 0;
  bool too_deep = false;
};

double simpson_rec(QuadState& st, double a, double b, double fa, double fm, double fb,
                   double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = (*st.f)(lm), frm = (*st.f)(rm);
  st.evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * eps || depth >= 48) {
    if (depth >= 48 && std::abs(delta) > 15.0 * eps) st.too_deep = true;
    return left + right + delta / 15.0;
  }
  return simpson_rec(st, a, m, fa, flm, fm, left, eps * 0.5, depth + 1) +
         simpson_rec(st, m, b, fm, frm, fb, right, eps * 0.5, depth + 1);
}

double simpson(const std::function<double(double)>& f, double a, double b, double eps) {
  if (b <= a) return 0.0;
  QuadState st{&f};
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double r = simpson_rec(st, a, b, fa, fm, fb, whole, eps, 0);
  if (st.too_deep) {
    std::ostringstream os;
    os << "quadrature did not reach tolerance " << eps << " (estimate " << r << ")";
    throw NumericError(os.str());
  }
  return r;
}

}  // namespace

double crps_cdf(const std::function<double(double)>& cdf, double y, double lo, double hi,
                double tol) {
  if (!std::isfinite(y)) throw std::invalid_argument("crps_cdf: non-finite observation");
  if (hi <= lo) return 0.0;
  const double split = std::min(std::max(y, lo), hi);
  const auto below = [&cdf](double t) {
    const double F = cdf(t);
    return F * F;
  };
  const auto above = [&cdf](double t) {
    const double e = 1.0 - cdf(t);
    return e * e;
  };
  double out = 0.0;
  if (split > lo) out += simpson(below, lo, split, 0.5 * tol);
  if (hi > split) out += simpson(above, split, hi, 0.5 * tol);
  return out;
}

namespace {

// Held-out score of one fitted fold on validation rows.
struct FoldScore {
  double sum = 0.0;
  int count = 0;
};

FoldScore score_fold(const GpdFit& fit, const Series& data, const std::vector<int>& valid_rows,
                     CvMetric metric) {
  FoldScore fs;
  std::vector<double> transformed;
  for (int r : valid_rows) {
    const double y = data.at(r, fit.spec.response);
    if (std::isnan(y)) continue;
    bool usable = true;
    for (const auto& v : fit.spec.scale.variables())
      if (std::isnan(data.at(r, v))) usable = false;
    if (!fit.spec.threshold.stratum_var.empty() &&
        std::isnan(data.at(r, fit.spec.threshold.stratum_var)))
      usable = false;
    if (fit.spec.threshold.kind == ThresholdKind::smooth)
      for (const auto& v : fit.spec.threshold.formula.variables())
        if (std::isnan(data.at(r, v))) usable = false;
    if (!usable) continue;
    double v;
    try {
      v = fit.threshold_at(data, r);
    } catch (const std::invalid_argument&) {
      continue;  // stratum level absent from the training fold
    }
    if (!(y > v)) continue;
    const double z = y - v;
    const GpdParams g{fit.scale_at(data, r), fit.shape};
    if (metric == CvMetric::crps) {
      const double hi = gpd_quantile(0.9999, g);
      fs.sum += crps_cdf([&g](double t) { return gpd_cdf(t, g); }, z, 0.0, hi, 1e-6);
      ++fs.count;
    } else {
      transformed.push_back(-std::log(std::max(gpd_survival(z, g), 1e-300)));
    }
  }
  if (metric == CvMetric::loss && !transformed.empty()) {
    std::sort(transformed.begin(), transformed.end());
    const std::size_t m = transformed.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double qhat = -std::log1p(-static_cast<double>(i + 1) / static_cast<double>(m + 1));
      fs.sum += competition_loss(transformed[i], qhat);
    }
    fs.count = static_cast<int>(m);
  }
  return fs;
}

}  // namespace

double k_fold_cv(const Series& data, const GpdGamSpec& spec, int k, CvMetric metric,
                 std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k_fold_cv: k must be at least 2");

  // Folds are blocked over the rows the full-data fit would retain.
  std::vector<std::string> needed{spec.response};
  if (!spec.threshold.stratum_var.empty()) needed.push_back(spec.threshold.stratum_var);
  if (spec.threshold.kind == ThresholdKind::smooth)
    for (const auto& v : spec.threshold.formula.variables()) needed.push_back(v);
  for (const auto& v : spec.scale.variables()) needed.push_back(v);
  const std::vector<int> rows = data.complete_rows(needed);
  const int n = static_cast<int>(rows.size());
  if (k > n) throw std::invalid_argument("k_fold_cv: more folds than usable rows");

  double total = 0.0;
  int total_count = 0;
  for (int f = 0; f < k; ++f) {
    std::vector<int> train, valid;
    for (int i = 0; i < n; ++i)
      (blocked_fold(i, n, k, seed) == f ? valid : train).push_back(rows[i]);
    if (train.empty() || valid.empty()) continue;
    const Series sub = data.subset(train);
    const GpdFit fit = fit_nonstationary_gpd(sub, spec);
    const FoldScore fs = score_fold(fit, data, valid, metric);
    total += fs.sum;
    total_count += fs.count;
  }
  if (total_count == 0) throw FitError("k_fold_cv: no held-out excesses to score");
  return total / total_count;
}

SelectionReport forward_select(const Series& data, const GpdGamSpec& base_spec,
                               const std::vector<FormulaTerm>& pool, int k,
                               std::uint64_t seed) {
  SelectionReport report;
  const auto evaluate = [&](const Formula& f, bool accepted) {
    GpdGamSpec spec = base_spec;
    spec.scale = f;
    // Candidates change the spline block count; a fixed smoothing list keeps
    // its threshold prefix and recycles its last value over the new blocks.
    if (spec.smoothing.mode == SmoothingSpec::Mode::fixed &&
        !spec.smoothing.fixed.empty()) {
      int need = 0;
      if (spec.threshold.kind == ThresholdKind::smooth)
        for (const auto& t : spec.threshold.formula.terms)
          if (t.kind == FormulaTerm::Kind::spline) ++need;
      for (const auto& t : f.terms)
        if (t.kind == FormulaTerm::Kind::spline) ++need;
      auto& fx = spec.smoothing.fixed;
      if (static_cast<int>(fx.size()) > need) fx.resize(need);
      while (static_cast<int>(fx.size()) < need) fx.push_back(base_spec.smoothing.fixed.back());
    }
    SelectionEntry e;
    e.formula = f.str();
    e.crps = k_fold_cv(data, spec, k, CvMetric::crps, seed);
    const GpdFit fit = fit_nonstationary_gpd(data, spec);
    e.aic = fit.aic;
    e.bic = fit.bic;
    e.accepted = accepted;
    return e;
  };

  Formula current = base_spec.scale;
  SelectionEntry base = evaluate(current, true);
  report.entries.push_back(base);
  double best_score = base.crps;

  std::vector<bool> used(pool.size(), false);
  bool improved = true;
  while (improved) {
    improved = false;
    int best_term = -1;
    SelectionEntry best_entry;
    std::vector<SelectionEntry> round;
    for (std::size_t t = 0; t < pool.size(); ++t) {
      if (used[t]) continue;
      Formula cand = current;
      cand.terms.push_back(pool[t]);
      SelectionEntry e = evaluate(cand, false);
      round.push_back(e);
      if (best_term < 0 || e.crps < best_entry.crps) {
        best_term = static_cast<int>(t);
        best_entry = e;
      }
    }
    for (auto& e : round) report.entries.push_back(e);
    if (best_term >= 0 && best_entry.crps < best_score) {
      used[best_term] = true;
      current.terms.push_back(pool[best_term]);
      best_score = best_entry.crps;
      for (auto& e : report.entries)
        if (e.formula == best_entry.formula) e.accepted = true;
      improved = true;
    }
  }

  for (auto& e : report.entries) {
    e.delta_crps = e.crps - base.crps;
    e.delta_aic = e.aic - base.aic;
    e.delta_bic = e.bic - base.bic;
  }
  report.chosen = current.str();
  return report;
}

GpdFit loss_augmented_refit(const GpdFit& fit, const Series& data, double weight) {
  if (fit.excess_rows.empty())
    throw std::invalid_argument("loss_augmented_refit: fit has no recorded excess rows");
  const int n = static_cast<int>(fit.excess_rows.size());
  const int p = fit.scale_model.n_coef();
  const bool free_shape = !fit.shape_fixed;
  const int d = p + (free_shape ? 1 : 0);

  Eigen::MatrixXd Z(n, p);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) {
    const int r = fit.excess_rows[i];
    Z.row(i) = fit.scale_model.row_for(data, r);
    z[i] = data.at(r, fit.spec.response) - fit.threshold_at(data, r);
  }
  std::vector<double> qhat(n);
  for (int i = 0; i < n; ++i)
    qhat[i] = -std::log1p(-static_cast<double>(i + 1) / static_cast<double>(n + 1));

  const auto& penalties = fit.scale_model.penalties();
  const std::vector<double>& lambda = fit.smoothing;

  const auto objective = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad) -> double {
    const double xi = free_shape ? th[d - 1] : fit.shape;
    if (xi <= -1.0 + 1e-6 || xi > 2.0) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd psi = Z * th.head(p);
    double f = 0.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    double gxi = 0.0;
    std::vector<double> q(n);
    std::vector<double> dq_dls(n), dq_dxi(n);
    for (int i = 0; i < n; ++i) {
      if (std::abs(psi[i]) > 50.0) return std::numeric_limits<double>::infinity();
      const double sigma = std::exp(psi[i]);
      const double h = z[i] / sigma;
      const double t = 1.0 + xi * h;
      if (t <= 0.0) return std::numeric_limits<double>::infinity();
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
      // Transformed excess and its parameter derivatives.
      if (std::abs(xi) < 1e-5) {
        q[i] = h - xi * h * h / 2.0 + xi * xi * h * h * h / 3.0;
        dq_dxi[i] = -h * h / 2.0 + 2.0 * xi * h * h * h / 3.0;
      } else {
        q[i] = std::log(t) / xi;
        dq_dxi[i] = -std::log(t) / (xi * xi) + h / (xi * t);
      }
      dq_dls[i] = -h / t;
    }
    f /= n;
    if (grad) {
      grad->resize(d);
      grad->head(p) = Z.transpose() * w / n;
      if (free_shape) (*grad)[d - 1] = gxi / n;
    }
    for (std::size_t b = 0; b < penalties.size(); ++b) {
      const auto& pb = penalties[b];
      const int wdt = static_cast<int>(pb.S.rows());
      const Eigen::VectorXd seg = th.segment(pb.offset, wdt);
      const Eigen::VectorXd Sseg = pb.S * seg;
      f += 0.5 * lambda[b] * seg.dot(Sseg) / n;
      if (grad) grad->segment(pb.offset, wdt) += lambda[b] * Sseg / n;
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&q](int a, int b) { return q[a] < q[b]; });
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const int j = order[i];
      if (!(q[j] > 0.0)) return std::numeric_limits<double>::infinity();
      loss += competition_loss(q[j], qhat[i]);
      if (grad) {
        // d loss / d q_true at fixed estimate.
        double dl = 0.0;
        if (qhat[i] < 0.95 * q[j]) dl = 0.9 * 0.95;
        else if (qhat[i] > 1.05 * q[j]) dl = -0.1 * 1.05;
        if (dl != 0.0) {
          const double scale = weight * dl / n;
          grad->head(p) += scale * dq_dls[j] * Z.row(j).transpose();
          if (free_shape) (*grad)[d - 1] += scale * dq_dxi[j];
        }
      }
    }
    f += weight * loss / n;
    return f;
  };

  Eigen::VectorXd th0(d);
  th0.head(p) = fit.scale_coef;
  if (free_shape) th0[d - 1] = fit.shape;

  GpdFit out = fit;
  try {
    const BfgsResult r = bfgs_minimize(objective, th0, {.max_iters = 400});
    const double f0 = objective(th0, nullptr);
    if (!std::isfinite(r.value) || r.value > f0) {
      out.warnings.push_back("loss-augmented refit made no progress; keeping likelihood fit");
      return out;
    }
    out.scale_coef = r.x.head(p);
    if (free_shape) out.shape = r.x[d - 1];
  } catch (const std::exception& e) {
    out.warnings.push_back(std::string("loss-augmented refit failed: ") + e.what());
    return out;
  }

  // Refresh the unpenalized log likelihood at the new parameters.
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sigma = std::exp(Z.row(i).dot(out.scale_coef));
    ll += gpd_logpdf(z[i], GpdParams{sigma, out.shape});
  }
  out.loglik = ll;
  out.aic = -2.0 * ll + 2.0 * out.edf;
  out.bic = -2.0 * ll + std::log(static_cast<double>(n)) * out.edf;
  out.warnings.push_back("loss-augmented refit applied");
  return out;
}

}  // namespace tailkit
