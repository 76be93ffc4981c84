#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tailkit/gpd_gam.hpp"
#include "tailkit/rng.hpp"

using namespace tailkit;

TEST_SUITE_BEGIN("gpd_gam");

namespace {

GpdGamSpec stationary_spec(double tau) {
  GpdGamSpec spec;
  spec.response = "y";
  spec.threshold.kind = ThresholdKind::stepped;
  spec.threshold.tau = tau;
  spec.scale = Formula::parse("scale ~ 1");
  spec.smoothing.mode = SmoothingSpec::Mode::fixed;
  spec.smoothing.fixed = {};
  return spec;
}

Series exp_scale_table(int n, std::uint64_t seed, double amp) {
  Rng rng(seed);
  std::vector<double> y(n), x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = std::exp(1.0 + amp * std::sin(2.0 * M_PI * x[i])) * rng.exponential();
  }
  Series tab;
  tab.add_column("y", y);
  tab.add_column("x", x);
  return tab;
}

}  // namespace

TEST_CASE("stationary fit recovers scale, shape, rate, and threshold") {
  Rng rng(101);
  const int n = 8000;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = rgpd(rng, {2.0, 0.15});
  Series tab;
  tab.add_column("y", y);

  const auto spec = stationary_spec(0.9);
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);

  CHECK(fit.n_retained == n);
  CHECK(fit.n_excess == doctest::Approx(0.1 * n).epsilon(0.05));
  CHECK(fit.rates.size() == 1);
  CHECK(fit.rates[0] == doctest::Approx(0.1).epsilon(0.02));

  // Threshold is the empirical 0.9 quantile of the sample.
  std::vector<double> sorted = y;
  const double q90 = interp_quantile(std::move(sorted), 0.9);
  CHECK(fit.stepped.values[0] == doctest::Approx(q90));

  // Excesses over any threshold of a GPD stay GPD with the same shape and
  // scale sigma + xi * v.
  const double sigma_excess = 2.0 + 0.15 * q90;
  CHECK(fit.shape == doctest::Approx(0.15).epsilon(0.8));
  CHECK(fit.scale_at(tab, 0) == doctest::Approx(sigma_excess).epsilon(0.15));
  CHECK(fit.shape_se > 0.0);
  CHECK(fit.shape_se < 0.3);
  CHECK(!fit.shape_fixed);
}

TEST_CASE("covariate-dependent scale is recovered") {
  const Series tab = exp_scale_table(8000, 102, 0.5);
  GpdGamSpec spec = stationary_spec(0.6);
  spec.scale = Formula::parse("scale ~ 1 + crs(x, B=10)");
  spec.smoothing.fixed = {0.05};
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);

  // Exponential data: excesses over any threshold keep the same scale.
  CHECK(std::abs(fit.shape) < 0.08);
  Series probe;
  probe.add_column("x", {0.1, 0.3, 0.5, 0.7, 0.9});
  for (int i = 0; i < 5; ++i) {
    const double truth = std::exp(1.0 + 0.5 * std::sin(2.0 * M_PI * probe.at(i, "x")));
    const double ratio = fit.scale_at(probe, i) / truth;
    CHECK(ratio > 0.85);
    CHECK(ratio < 1.15);
  }
  CHECK(fit.edf > 1.0);
  CHECK(fit.edf < 12.0);
  CHECK(fit.aic == doctest::Approx(-2.0 * fit.loglik + 2.0 * fit.edf));
  CHECK(fit.bic ==
        doctest::Approx(-2.0 * fit.loglik + std::log(double(fit.n_excess)) * fit.edf));
}

TEST_CASE("fixed shape pins the estimate and suppresses its standard error") {
  const Series tab = exp_scale_table(4000, 103, 0.5);
  GpdGamSpec spec = stationary_spec(0.6);
  spec.scale = Formula::parse("scale ~ 1 + crs(x, B=8)");
  spec.smoothing.fixed = {0.05};
  spec.fixed_shape = 0.0;
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);
  CHECK(fit.shape == 0.0);
  CHECK(fit.shape_fixed);
  CHECK(fit.shape_se == 0.0);
  const double truth = std::exp(1.0 + 0.5 * std::sin(2.0 * M_PI * 0.3));
  Series probe;
  probe.add_column("x", {0.3});
  CHECK(fit.scale_at(probe, 0) / truth == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("conditional cdf and quantile invert each other and meet at the threshold") {
  const Series tab = exp_scale_table(4000, 104, 0.3);
  GpdGamSpec spec = stationary_spec(0.8);
  spec.scale = Formula::parse("scale ~ 1 + crs(x, B=6)");
  spec.smoothing.fixed = {1.0};
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);

  for (double p : {0.05, 0.3, 0.7, 0.9, 0.99, 0.999}) {
    const double q = fit.conditional_quantile(tab, 7, p);
    CHECK(fit.conditional_cdf(tab, 7, q) == doctest::Approx(p).epsilon(1e-6));
  }
  const double v = fit.threshold_at(tab, 7);
  const double below = fit.conditional_cdf(tab, 7, v);
  const double above = fit.conditional_cdf(tab, 7, v + 1e-9);
  CHECK(below == doctest::Approx(1.0 - fit.rate_at(tab, 7)).epsilon(1e-9));
  CHECK(above - below == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(fit.conditional_cdf(tab, 7, v + 1.0) > below);
  CHECK_THROWS_AS(fit.conditional_quantile(tab, 7, 1.0), std::domain_error);
}

TEST_CASE("assembled known model reproduces closed-form tail probabilities") {
  // lambda = 0.1, unit exponential tail: F(v + 1) = 1 - 0.1 exp(-1).
  GpdGamSpec spec = stationary_spec(0.9);
  spec.threshold.stratum_var = "";
  Series tab;
  tab.add_column("y", {0.5, 1.0, 1.5, 2.0, 2.5});
  Eigen::VectorXd beta(1);
  beta[0] = 0.0;
  const double v0 = 3.0;
  const GpdFit fit = assemble_gpd_fit(spec, tab, {0.0}, {v0}, {0.1}, beta, 0.0);

  CHECK(fit.conditional_cdf(tab, 0, v0 + 1.0) ==
        doctest::Approx(1.0 - 0.1 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(fit.conditional_cdf(tab, 0, v0 + 1.0) == doctest::Approx(0.9632120559).epsilon(1e-9));
  // Upper tail quantile: survival 0.001 needs GPD survival 0.01.
  CHECK(fit.conditional_quantile(tab, 0, 0.999) ==
        doctest::Approx(v0 + std::log(100.0)).epsilon(1e-9));
  CHECK(fit.scale_at(tab, 0) == doctest::Approx(1.0));
  CHECK(fit.rate_at(tab, 0) == doctest::Approx(0.1));
  CHECK(fit.n_excess == 0);
}

TEST_CASE("assembled fit rejects smooth thresholds and mismatched sizes") {
  GpdGamSpec spec = stationary_spec(0.9);
  Series tab;
  tab.add_column("y", {1.0, 2.0});
  Eigen::VectorXd beta(1);
  beta[0] = 0.0;
  CHECK_THROWS_AS(assemble_gpd_fit(spec, tab, {0.0, 1.0}, {3.0}, {0.1}, beta, 0.0),
                  std::invalid_argument);
  GpdGamSpec smooth = spec;
  smooth.threshold.kind = ThresholdKind::smooth;
  CHECK_THROWS_AS(assemble_gpd_fit(smooth, tab, {0.0}, {3.0}, {0.1}, beta, 0.0),
                  std::invalid_argument);
}

TEST_CASE("transformed excesses are unit exponential under the true model") {
  Rng rng(104);
  const int n = 2000;
  const double v0 = 1.0;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = v0 + rgpd(rng, {1.0, 0.2});
  Series tab;
  tab.add_column("y", y);

  GpdGamSpec spec = stationary_spec(0.9);
  Eigen::VectorXd beta(1);
  beta[0] = 0.0;
  const GpdFit fit = assemble_gpd_fit(spec, tab, {0.0}, {v0}, {1.0}, beta, 0.2);
  CHECK(fit.n_excess == n);

  std::vector<double> e = transform_excesses_to_exponential(fit, tab);
  std::sort(e.begin(), e.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double F = -std::expm1(-e[i]);
    ks = std::max(ks, std::abs(F - double(i + 1) / n));
    ks = std::max(ks, std::abs(F - double(i) / n));
  }
  CHECK(ks < 1.36 / std::sqrt(double(n)));
  CHECK(mean_of(e) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cross-validated smoothing flattens a stationary scale") {
  Rng rng(106);
  const int n = 1500;
  std::vector<double> y(n), x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = 2.0 * rng.exponential();
  }
  Series tab;
  tab.add_column("y", y);
  tab.add_column("x", x);

  GpdGamSpec spec = stationary_spec(0.5);
  spec.scale = Formula::parse("scale ~ 1 + crs(x, B=6)");
  spec.smoothing.mode = SmoothingSpec::Mode::cv_grid;
  spec.smoothing.lambda_grid = {1e-2, 1e3};
  spec.smoothing.cv_folds = 4;
  spec.smoothing.cv_seed = 9;
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);
  CHECK(fit.smoothing.size() == 1);
  CHECK(fit.smoothing[0] == doctest::Approx(1e3));
  // Heavy smoothing leaves the curve nearly flat.
  Series probe;
  probe.add_column("x", {0.1, 0.5, 0.9});
  const double s0 = fit.scale_at(probe, 0);
  CHECK(fit.scale_at(probe, 1) == doctest::Approx(s0).epsilon(0.1));
  CHECK(fit.scale_at(probe, 2) == doctest::Approx(s0).epsilon(0.1));
}

TEST_CASE("effective dof shrinks as the penalty grows") {
  const Series tab = exp_scale_table(3000, 107, 0.5);
  GpdGamSpec spec = stationary_spec(0.6);
  spec.scale = Formula::parse("scale ~ 1 + crs(x, B=8)");

  spec.smoothing.fixed = {1e-3};
  const GpdFit rough = fit_nonstationary_gpd(tab, spec);
  spec.smoothing.fixed = {1e3};
  const GpdFit flat = fit_nonstationary_gpd(tab, spec);

  CHECK(rough.edf > flat.edf);
  // Intercept and shape are never penalized.
  CHECK(flat.edf >= 1.9);
  CHECK(rough.edf <= 10.0);
}

TEST_CASE("stepped thresholds and rates are computed per stratum") {
  Rng rng(108);
  const int n = 4000;
  std::vector<double> y(n), season(n);
  for (int i = 0; i < n; ++i) {
    season[i] = 1.0 + (i % 2);
    y[i] = (season[i] == 2.0 ? 3.0 : 1.0) * rng.exponential();
  }
  Series tab;
  tab.add_column("y", y);
  tab.add_column("season", season);

  GpdGamSpec spec = stationary_spec(0.9);
  spec.threshold.stratum_var = "season";
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);

  CHECK(fit.rate_levels == std::vector<double>{1.0, 2.0});
  CHECK(fit.rates[0] == doctest::Approx(0.1).epsilon(0.05));
  CHECK(fit.rates[1] == doctest::Approx(0.1).epsilon(0.05));
  CHECK(fit.stepped.value_for(2.0) / fit.stepped.value_for(1.0) == doctest::Approx(3.0).epsilon(0.15));
  Series probe;
  probe.add_column("season", {1.0, 2.0});
  CHECK(fit.threshold_at(probe, 0) == doctest::Approx(fit.stepped.value_for(1.0)));
  CHECK(fit.threshold_at(probe, 1) == doctest::Approx(fit.stepped.value_for(2.0)));
  Series bad;
  bad.add_column("season", {3.0});
  CHECK_THROWS_AS(fit.stratum_index(bad, 0), std::invalid_argument);
}

TEST_CASE("smooth thresholds vary with the covariate") {
  const Series tab = exp_scale_table(6000, 109, 0.8);
  GpdGamSpec spec = stationary_spec(0.9);
  spec.threshold.kind = ThresholdKind::smooth;
  spec.threshold.formula = Formula::parse("threshold ~ 1 + crs(x, B=8)");
  spec.scale = Formula::parse("scale ~ 1");
  spec.smoothing.fixed = {0.01};  // threshold block only; no scale splines
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);

  CHECK(fit.n_excess == doctest::Approx(0.1 * tab.n_rows()).epsilon(0.15));
  Series probe;
  probe.add_column("x", {0.25, 0.75});
  // Threshold follows the conditional quantile, so the sine peak sits well
  // above the trough.
  CHECK(fit.threshold_at(probe, 0) / fit.threshold_at(probe, 1) > 2.0);
  // Exponential scale does not depend on the threshold level.
  CHECK(fit.scale_at(probe, 0) == doctest::Approx(std::exp(1.0)).epsilon(0.5));

  for (double p : {0.5, 0.95, 0.99}) {
    const double q = fit.conditional_quantile(tab, 11, p);
    CHECK(fit.conditional_cdf(tab, 11, q) == doctest::Approx(p).epsilon(1e-6));
  }
}

TEST_CASE("rows with missing fields are dropped and counted") {
  Series tab = exp_scale_table(1000, 110, 0.3);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  tab.set(3, tab.col_index("x"), nan);
  tab.set(17, tab.col_index("x"), nan);
  tab.set(40, tab.col_index("y"), nan);

  GpdGamSpec spec = stationary_spec(0.5);
  spec.scale = Formula::parse("scale ~ 1 + crs(x, B=6)");
  spec.smoothing.fixed = {1.0};
  const GpdFit fit = fit_nonstationary_gpd(tab, spec);
  CHECK(fit.n_total == 1000);
  CHECK(fit.n_retained == 997);
  CHECK(fit.dropped_fraction == doctest::Approx(0.003));
}

TEST_CASE("fit failures raise errors with context") {
  Series tab;
  tab.add_column("y", {1.0, 2.0, 3.0, 4.0, 5.0});
  GpdGamSpec spec = stationary_spec(0.9);
  CHECK_THROWS_AS(fit_nonstationary_gpd(tab, spec), FitError);  // too few excesses

  Series empty;
  std::vector<double> nan_col(4, std::numeric_limits<double>::quiet_NaN());
  empty.add_column("y", nan_col);
  CHECK_THROWS_AS(fit_nonstationary_gpd(empty, spec), FitError);

  const Series ok = exp_scale_table(500, 111, 0.3);
  GpdGamSpec bad = stationary_spec(0.5);
  bad.scale = Formula::parse("scale ~ 1 + crs(x, B=6)");
  bad.smoothing.mode = SmoothingSpec::Mode::fixed;
  bad.smoothing.fixed = {1.0, 2.0};  // one spline block, two lambdas
  CHECK_THROWS_AS(fit_nonstationary_gpd(ok, bad), std::invalid_argument);
}

TEST_SUITE_END();
