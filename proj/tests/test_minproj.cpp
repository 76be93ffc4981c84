#include <cmath>
#include <vector>

#include "doctest.h"
#include "tailkit/margins.hpp"
#include "tailkit/minproj.hpp"
#include "tailkit/rng.hpp"

using namespace tailkit;

TEST_SUITE_BEGIN("minproj");

namespace {

Series indep_exp_table(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> z1(n), z2(n), z3(n);
  for (int i = 0; i < n; ++i) {
    z1[i] = rng.exponential();
    z2[i] = rng.exponential();
    z3[i] = rng.exponential();
  }
  Series tab;
  tab.add_column("z1", z1);
  tab.add_column("z2", z2);
  tab.add_column("z3", z3);
  return tab;
}

MinProjOptions stationary_opts(double tau) {
  MinProjOptions opts;
  opts.tau = tau;
  opts.atmos_var = "";
  opts.season_var = "";
  opts.min_excesses = 30;
  return opts;
}

double band_fraction(const QqTable& qq) {
  int in = 0;
  for (std::size_t i = 0; i < qq.empirical.size(); ++i)
    if (qq.empirical[i] >= qq.band_lo[i] && qq.empirical[i] <= qq.band_hi[i]) ++in;
  return static_cast<double>(in) / qq.empirical.size();
}

}  // namespace

TEST_CASE("min projection is the row minimum of rescaled coordinates") {
  Series tab;
  tab.add_column("z1", {3.0, 1.0, 2.0});
  tab.add_column("z2", {3.0, 2.0, 4.0});
  tab.add_column("z3", {3.0, 3.0, 8.0});
  const std::vector<std::string> vars{"z1", "z2", "z3"};

  const auto equal = min_projection(tab, vars, make_ray({1.0, 1.0, 1.0}));
  CHECK(equal[0] == doctest::Approx(9.0));
  CHECK(equal[1] == doctest::Approx(3.0));

  // levels (2,1,1): omega = (1/2, 1/4, 1/4).
  const auto skewed = min_projection(tab, vars, make_ray({2.0, 1.0, 1.0}));
  CHECK(skewed[2] == doctest::Approx(4.0));

  // Zero-weight coordinates are ignored even when smaller.
  SimplexRay first_axis;
  first_axis.omega = {1.0, 0.0, 0.0};
  first_axis.levels = {1.0, 0.0, 0.0};
  first_axis.r = 1.0;
  const auto only_first = min_projection(tab, vars, first_axis);
  CHECK(only_first[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(min_projection(tab, {"z1", "z2"}, make_ray({1.0, 1.0, 1.0})),
                  std::invalid_argument);
}

TEST_CASE("min projection propagates missing coordinates") {
  Series tab;
  tab.add_column("z1", {1.0, 1.0});
  tab.add_column("z2", {2.0, 2.0});
  tab.set(1, tab.col_index("z2"), std::numeric_limits<double>::quiet_NaN());
  const auto t = min_projection(tab, {"z1", "z2"}, make_ray({1.0, 1.0}));
  CHECK(t[0] == doctest::Approx(2.0));
  CHECK(std::isnan(t[1]));
}

TEST_CASE("rays normalize positive levels onto the simplex") {
  const SimplexRay ray = make_ray({2.0, 1.0, 1.0});
  CHECK(ray.r == doctest::Approx(4.0));
  CHECK(ray.omega[0] == doctest::Approx(0.5));
  CHECK(ray.omega[1] == doctest::Approx(0.25));
  CHECK(ray.omega[0] + ray.omega[1] + ray.omega[2] == doctest::Approx(1.0));

  CHECK_THROWS_AS(make_ray({}), std::invalid_argument);
  CHECK_THROWS_AS(make_ray({1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_ray({1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("challenge rays reproduce the frozen joint-tail geometry") {
  // Gumbel 6 and 7 on the exponential scale; lower level m = -log log 2 maps
  // to exp(-m) = log 2 after the third margin is negated.
  const double m = -std::log(std::log(2.0));
  const ChallengeRays rays = build_challenge_rays(6.0, 7.0, m);

  CHECK(rays.part1.levels[0] == doctest::Approx(6.001239120079478).epsilon(1e-12));
  CHECK(rays.part1.r == doctest::Approx(18.003717360238433).epsilon(1e-12));
  for (double w : rays.part1.omega) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK(rays.part2.levels[0] == doctest::Approx(7.000455906335786).epsilon(1e-12));
  CHECK(rays.part2.levels[1] == rays.part2.levels[0]);
  CHECK(rays.part2.levels[2] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(rays.part2.r == doctest::Approx(14.694058993231517).epsilon(1e-12));
  CHECK(rays.part2.omega[0] == doctest::Approx(0.47641403301568247).epsilon(1e-12));
  CHECK(rays.part2.omega[2] == doctest::Approx(0.04717193396863506).epsilon(1e-12));

  // With both Gumbel levels at -log log 2 every coordinate sits at log 2.
  const ChallengeRays flat = build_challenge_rays(6.0, m, m);
  for (double w : flat.part2.omega) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(flat.part2.r == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("negating the third margin is a self-inverse involution") {
  CHECK(negate_third_margin(std::log(2.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (double z : {0.1, 0.7, 2.0, 5.0})
    CHECK(negate_third_margin(negate_third_margin(z)) == doctest::Approx(z).epsilon(1e-12));

  // Lower Gumbel level m pulled through both transforms lands on exp(-m).
  const double zm = transform_margin(1.0, MarginScale::gumbel, MarginScale::exponential);
  CHECK(negate_third_margin(zm) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(negate_third_margin(0.0), std::domain_error);
  CHECK_THROWS_AS(negate_third_margin(-1.0), std::domain_error);
}

TEST_CASE("independent exponential margins give a unit exponential projection tail") {
  // T = 3 min(Z_i) is Exp(1) again, so the exceedance model should sit near
  // sigma = 1, xi = 0 with threshold at the 0.85 quantile.
  const Series tab = indep_exp_table(4000, 11);
  const MinProjFit fit = fit_minproj(tab, make_ray({1.0, 1.0, 1.0}), stationary_opts(0.85));

  CHECK(fit.shape == doctest::Approx(0.0).epsilon(0.1));
  CHECK(fit.gpd.scale_at(fit.table, 0) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(fit.gpd.threshold_at(fit.table, 0) ==
        doctest::Approx(-std::log(0.15)).epsilon(0.05));
  CHECK(fit.shape_lo < fit.shape);
  CHECK(fit.shape < fit.shape_hi);
  CHECK(fit.tau == doctest::Approx(0.85));
}

TEST_CASE("comonotone margins stretch the projection scale threefold") {
  Rng rng(77);
  const int n = 4000;
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.exponential();
  Series tab;
  tab.add_column("z1", z);
  tab.add_column("z2", z);
  tab.add_column("z3", z);

  const MinProjFit fit = fit_minproj(tab, make_ray({1.0, 1.0, 1.0}), stationary_opts(0.85));
  CHECK(fit.gpd.scale_at(fit.table, 0) == doctest::Approx(3.0).epsilon(0.1));
  CHECK(fit.shape == doctest::Approx(0.0).epsilon(0.1));
}

TEST_CASE("pinned exponential fit recovers the mean excess exactly") {
  const Series tab = indep_exp_table(3000, 9);
  const SimplexRay ray = make_ray({1.0, 1.0, 1.0});
  MinProjOptions opts = stationary_opts(0.9);
  opts.fixed_shape = 0.0;
  const MinProjFit fit = fit_minproj(tab, ray, opts);

  const double v = fit.gpd.threshold_at(fit.table, 0);
  const auto t_proj = min_projection(tab, opts.z_vars, ray);
  double sum = 0.0;
  int k = 0;
  for (double t : t_proj)
    if (t > v) {
      sum += t - v;
      ++k;
    }
  CHECK(k >= 290);
  CHECK(fit.gpd.scale_at(fit.table, 0) == doctest::Approx(sum / k).epsilon(1e-8));
  CHECK(fit.shape == 0.0);
  CHECK(fit.shape_lo == 0.0);
  CHECK(fit.shape_hi == 0.0);
}

TEST_CASE("stationary joint survivor matches the closed form") {
  const Series tab = indep_exp_table(3000, 9);
  MinProjOptions opts = stationary_opts(0.9);
  opts.fixed_shape = 0.0;
  const MinProjFit fit = fit_minproj(tab, make_ray({1.0, 1.0, 1.0}), opts);

  const double v = fit.gpd.threshold_at(fit.table, 0);
  const double sigma = fit.gpd.scale_at(fit.table, 0);
  for (double r : {v + 1.0, v + 3.0, 12.0}) {
    const double want = 0.1 * gpd_survival(r - v, {sigma, 0.0});
    CHECK(joint_survivor_probability(fit, r) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("joint survivor demands a radius above every threshold") {
  const Series tab = indep_exp_table(1000, 13);
  const MinProjFit fit = fit_minproj(tab, make_ray({1.0, 1.0, 1.0}), stationary_opts(0.85));
  const double v = fit.gpd.threshold_at(fit.table, 0);
  CHECK_THROWS_WITH_AS(joint_survivor_probability(fit, v - 0.5),
                       doctest::Contains("does not exceed"), std::domain_error);
  CHECK_THROWS_AS(joint_survivor_probability(fit, v), std::domain_error);
  CHECK(joint_survivor_probability(fit, v + 1.0) > 0.0);
}

TEST_CASE("projection qq diagnostic stays inside its null band") {
  const Series tab = indep_exp_table(2000, 101);
  const MinProjFit fit = fit_minproj(tab, make_ray({1.0, 1.0, 1.0}), stationary_opts(0.85));
  const QqTable qq = minproj_qq(fit, 200, 7);

  REQUIRE(qq.empirical.size() == qq.theoretical.size());
  REQUIRE(qq.band_lo.size() == qq.empirical.size());
  for (std::size_t i = 1; i < qq.theoretical.size(); ++i) {
    CHECK(qq.theoretical[i] > qq.theoretical[i - 1]);
    CHECK(qq.empirical[i] >= qq.empirical[i - 1]);
  }
  for (std::size_t i = 0; i < qq.band_lo.size(); ++i) CHECK(qq.band_lo[i] < qq.band_hi[i]);
  CHECK(band_fraction(qq) >= 0.95);
}

TEST_CASE("misspecified pinned shape pushes the upper tail out of the band") {
  // Heavy-tailed projection (xi = 0.5) fitted with the shape pinned at zero:
  // the top decile of QQ points should escape the 95% band almost always.
  int exited = 0;
  for (int rep = 0; rep < 10; ++rep) {
    Rng rng(500 + rep);
    const int n = 2000;
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = (std::pow(rng.uniform(), -0.5) - 1.0) / 0.5;
    Series tab;
    tab.add_column("z1", z);
    tab.add_column("z2", z);
    tab.add_column("z3", z);
    MinProjOptions opts = stationary_opts(0.85);
    opts.fixed_shape = 0.0;
    const QqTable qq = minproj_qq(fit_minproj(tab, make_ray({1.0, 1.0, 1.0}), opts), 200, 7);
    const int m = static_cast<int>(qq.empirical.size());
    for (int i = static_cast<int>(0.9 * m); i < m; ++i)
      if (qq.empirical[i] > qq.band_hi[i]) {
        ++exited;
        break;
      }
  }
  CHECK(exited >= 8);
}

TEST_CASE("single excess yields the textbook qq pair") {
  GpdGamSpec spec;
  spec.response = "y";
  spec.threshold.kind = ThresholdKind::stepped;
  spec.threshold.tau = 0.5;
  spec.scale = Formula::parse("scale ~ 1");
  Series tab;
  tab.add_column("y", {4.0});
  Eigen::VectorXd beta(1);
  beta[0] = 0.0;
  const GpdFit fit = assemble_gpd_fit(spec, tab, {0.0}, {3.0}, {0.5}, beta, 0.0);

  const QqTable qq = exponential_qq(fit, tab, 200, 5);
  REQUIRE(qq.empirical.size() == 1);
  CHECK(qq.theoretical[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(qq.empirical[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(qq.band_lo[0] < std::log(2.0));
  CHECK(qq.band_hi[0] > 1.0);

  Series below;
  below.add_column("y", {1.0, 2.0});
  const GpdFit none = assemble_gpd_fit(spec, below, {0.0}, {3.0}, {0.5}, beta, 0.0);
  CHECK_THROWS_AS(exponential_qq(none, below), std::invalid_argument);
}

TEST_CASE("covariate threshold tracks the signal and the sweep picks a level") {
  Rng rng(42);
  const int n = 3000;
  std::vector<double> atmos(n), season(n), z1(n), z2(n), z3(n);
  for (int i = 0; i < n; ++i) {
    atmos[i] = rng.uniform();
    season[i] = (i % 2) ? 2.0 : 1.0;
    const double s = std::exp(0.4 * std::sin(2.0 * M_PI * atmos[i])) *
                     (season[i] == 2.0 ? 1.4 : 1.0);
    z1[i] = s * rng.exponential();
    z2[i] = s * rng.exponential();
    z3[i] = s * rng.exponential();
  }
  Series tab;
  tab.add_column("z1", z1);
  tab.add_column("z2", z2);
  tab.add_column("z3", z3);
  tab.add_column("atmos", atmos);
  tab.add_column("season", season);

  const SimplexRay ray = make_ray({1.0, 1.0, 1.0});
  const MinProjOptions opts;
  const MinProjFit fit = fit_minproj(tab, ray, opts);

  int peak = -1, trough = -1;
  for (int i = 0; i < n; ++i) {
    if (season[i] != 1.0) continue;
    if (peak < 0 && std::abs(atmos[i] - 0.25) < 0.02) peak = i;
    if (trough < 0 && std::abs(atmos[i] - 0.75) < 0.02) trough = i;
  }
  REQUIRE(peak >= 0);
  REQUIRE(trough >= 0);
  CHECK(fit.gpd.threshold_at(fit.table, peak) >
        1.5 * fit.gpd.threshold_at(fit.table, trough));
  CHECK(fit.shape == doctest::Approx(0.0).epsilon(0.2));
  CHECK(fit.shape_lo < 0.0);
  CHECK(fit.shape_hi > fit.shape_lo);
  CHECK(band_fraction(minproj_qq(fit, 200, 3)) >= 0.85);

  const double p = joint_survivor_probability(fit, 25.0);
  CHECK(p > 1e-12);
  CHECK(p < 1e-6);

  const TauSweepResult sweep = select_tau_minproj(tab, ray, opts, {0.80, 0.85, 0.90, 0.95});
  REQUIRE(sweep.entries.size() == 4);
  CHECK(sweep.chosen_tau >= 0.80);
  CHECK(sweep.chosen_tau <= 0.90);
  CHECK(sweep.best.tau == doctest::Approx(sweep.chosen_tau));
  double best_mad = sweep.entries[0].qq_mad;
  for (const auto& e : sweep.entries) best_mad = std::min(best_mad, e.qq_mad);
  for (const auto& e : sweep.entries)
    if (e.tau == sweep.chosen_tau) CHECK(e.qq_mad == doctest::Approx(best_mad));
}

TEST_CASE("tau sweep rejects empty or infeasible grids") {
  const Series tab = indep_exp_table(200, 3);
  const SimplexRay ray = make_ray({1.0, 1.0, 1.0});
  CHECK_THROWS_AS(select_tau_minproj(tab, ray, stationary_opts(0.85), {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(select_tau_minproj(tab, ray, stationary_opts(0.85), {0.999}), FitError);
  CHECK_THROWS_AS(fit_minproj(tab, ray, stationary_opts(1.2)), std::invalid_argument);
}

TEST_SUITE_END();
