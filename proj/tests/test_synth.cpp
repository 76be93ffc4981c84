#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tailkit/dependence.hpp"
#include "tailkit/synth.hpp"

TEST_SUITE_BEGIN("synth");

using namespace tailkit;

namespace {

double ks_exp1(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const int n = static_cast<int>(x.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = -std::expm1(-x[i]);
    d = std::max(d, std::max(std::abs(f - static_cast<double>(i) / n),
                             std::abs((i + 1.0) / n - f)));
  }
  return d;
}

double ks_uniform(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const int n = static_cast<int>(x.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i)
    d = std::max(d, std::max(std::abs(x[i] - static_cast<double>(i) / n),
                             std::abs((i + 1.0) / n - x[i])));
  return d;
}

// finite-sample one-sample KS scaling; 5% critical value 1.358
double ks_stat(double d, double m) { return d * (std::sqrt(m) + 0.12 + 0.11 / std::sqrt(m)); }

}  // namespace

TEST_CASE("univariate truth record echoes the config and inverts its own law") {
  UnivariateConfig cfg;
  const UnivariateData d = gen_univariate(cfg, 100);

  CHECK(d.truth.threshold_at(1) == 10.0);
  CHECK(d.truth.threshold_at(2) == 7.0);
  CHECK_THROWS_AS(d.truth.threshold_at(0), std::invalid_argument);
  CHECK_THROWS_AS(d.truth.threshold_at(3), std::invalid_argument);

  CHECK(d.truth.sigma_at(1, 0.25) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
  CHECK(d.truth.sigma_at(2, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  // boundary: the body ends exactly at the threshold
  CHECK(d.truth.conditional_quantile(1, 0.3, 0.85) == doctest::Approx(10.0).epsilon(1e-12));
  for (double p : {0.1, 0.5, 0.84, 0.86, 0.95, 0.999}) {
    const double q = d.truth.conditional_quantile(2, -0.4, p);
    CHECK(d.truth.conditional_cdf(2, -0.4, q) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK_THROWS_AS(d.truth.conditional_quantile(1, 0.0, -0.1), std::domain_error);
  CHECK_THROWS_AS(d.truth.conditional_quantile(1, 0.0, 1.1), std::domain_error);

  SUBCASE("deterministic given seed") {
    const UnivariateData again = gen_univariate(cfg, 100);
    CHECK(again.table.col("y") == d.table.col("y"));
    CHECK(again.missing_fraction == d.missing_fraction);
    CHECK(again.truth.metadata_json() == d.truth.metadata_json());
    const UnivariateData other = gen_univariate(cfg, 101);
    CHECK(other.table.col("y") != d.table.col("y"));
  }
  SUBCASE("metadata is machine-readable") {
    const auto j = nlohmann::json::parse(d.truth.metadata_json());
    CHECK(j["kind"] == "univariate");
    CHECK(j["seed"] == 100);
    CHECK(j["season_threshold"][1] == 7.0);
    CHECK(j["missing_rate"] == doctest::Approx(0.117));
  }
}

TEST_CASE("univariate realized missingness and tail rates sit at their targets") {
  const UnivariateData d = gen_univariate(UnivariateConfig{}, 100);
  const Series& tab = d.table;
  REQUIRE(tab.n_rows() == 21000);

  CHECK(std::abs(d.missing_fraction - 0.117) <= 0.01);
  int n_nan_rows = 0;
  int n1 = 0, e1 = 0, n2 = 0, e2 = 0;
  const int wc = tab.col_index("wind");
  const int ac = tab.col_index("atmos");
  for (int t = 0; t < tab.n_rows(); ++t) {
    CHECK_FALSE(std::isnan(tab.at(t, "y")));
    CHECK(tab.at(t, "y") > 0.0);
    if (tab.is_missing(t, wc) || tab.is_missing(t, ac)) ++n_nan_rows;
    const int s = static_cast<int>(tab.at(t, "season"));
    const bool exc = tab.at(t, "y") > d.truth.threshold_at(s);
    if (s == 1) {
      ++n1;
      e1 += exc;
    } else {
      ++n2;
      e2 += exc;
    }
  }
  CHECK(static_cast<double>(n_nan_rows) / tab.n_rows() == doctest::Approx(d.missing_fraction));
  CHECK(n1 == n2);
  CHECK(std::abs(static_cast<double>(e1) / n1 - 0.15) < 0.02);
  CHECK(std::abs(static_cast<double>(e2) / n2 - 0.15) < 0.02);
}

TEST_CASE("zero-shape excesses scaled by the true sigma pass an Exp(1) KS test") {
  UnivariateConfig cfg;
  cfg.shape = 0.0;
  int pass = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const UnivariateData d = gen_univariate(cfg, 200 + rep);
    std::vector<double> e;
    for (int t = 0; t < d.table.n_rows(); ++t) {
      const double w = d.table.at(t, "wind");
      if (std::isnan(w)) continue;
      const int s = static_cast<int>(d.table.at(t, "season"));
      const double v = d.truth.threshold_at(s);
      const double y = d.table.at(t, "y");
      if (y > v) e.push_back((y - v) / d.truth.sigma_at(s, w));
    }
    if (ks_stat(ks_exp1(e), static_cast<double>(e.size())) < 1.358) ++pass;
  }
  CHECK(pass >= 18);
}

TEST_CASE("probability integral transform through the truth law is uniform") {
  const UnivariateData d = gen_univariate(UnivariateConfig{}, 300);
  std::vector<double> u;
  for (int t = 0; t < d.table.n_rows(); ++t) {
    const double w = d.table.at(t, "wind");
    if (std::isnan(w)) continue;
    u.push_back(d.truth.conditional_cdf(static_cast<int>(d.table.at(t, "season")), w,
                                        d.table.at(t, "y")));
  }
  CHECK(ks_stat(ks_uniform(u), static_cast<double>(u.size())) < 1.358);
}

TEST_CASE("trivariate margins are exactly exponential under every copula") {
  for (auto kind : {CopulaKind::independent, CopulaKind::gaussian, CopulaKind::logistic,
                    CopulaKind::comonotone}) {
    CAPTURE(to_string(kind));
    TrivariateConfig cfg;
    cfg.copula = kind;
    const TrivariateData d = gen_trivariate(cfg, 77);
    REQUIRE(d.table.n_rows() == 21000);
    for (const char* c : {"y1", "y2", "y3"}) {
      std::vector<double> x = d.table.col(c);
      CHECK(ks_stat(ks_exp1(x), 21000.0) < 1.358);
    }
    if (kind == CopulaKind::comonotone) CHECK(d.table.col("y1") == d.table.col("y3"));
  }
}

TEST_CASE("trivariate truth records carry the analytic dependence summaries") {
  TrivariateConfig cfg;
  SUBCASE("independent") {
    cfg.copula = CopulaKind::independent;
    const TrivariateTruth t = gen_trivariate(cfg, 1).truth;
    CHECK(t.chi_pair() == 0.0);
    CHECK(t.chi_triple() == 0.0);
    CHECK(t.eta_pair() == 0.5);
    CHECK(t.lambda_equal() == 1.0);
  }
  SUBCASE("comonotone") {
    cfg.copula = CopulaKind::comonotone;
    const TrivariateTruth t = gen_trivariate(cfg, 1).truth;
    CHECK(t.chi_pair() == 1.0);
    CHECK(t.eta_pair() == 1.0);
    CHECK(t.lambda_equal() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("gaussian rho 0.5") {
    cfg.copula = CopulaKind::gaussian;
    cfg.rho = 0.5;
    const TrivariateTruth t = gen_trivariate(cfg, 1).truth;
    CHECK(t.chi_pair() == 0.0);
    CHECK(t.eta_pair() == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(t.lambda_equal() == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("logistic theta 0.5") {
    cfg.copula = CopulaKind::logistic;
    cfg.theta = 0.5;
    const TrivariateData d = gen_trivariate(cfg, 88);
    CHECK(d.truth.chi_pair() == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
    CHECK(d.truth.chi_triple() ==
          doctest::Approx(3.0 - 3.0 * std::sqrt(2.0) + std::sqrt(3.0)).epsilon(1e-12));
    CHECK(d.truth.eta_pair() == 1.0);
    CHECK(d.truth.lambda_equal() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // empirical check against the limits at u = 0.95
    CHECK(std::abs(chi_u(d.table, {"y1", "y2"}, 0.95).value - d.truth.chi_pair()) < 0.05);
    CHECK(std::abs(chi_u(d.table, {"y1", "y2", "y3"}, 0.95).value - d.truth.chi_triple()) <
          0.05);
  }
  SUBCASE("logistic theta 1 degenerates to independence") {
    cfg.copula = CopulaKind::logistic;
    cfg.theta = 1.0;
    const TrivariateTruth t = gen_trivariate(cfg, 1).truth;
    CHECK(t.chi_pair() == 0.0);
    CHECK(t.eta_pair() == 0.5);
    CHECK(t.lambda_equal() == 1.0);
  }
  SUBCASE("comonotone rows saturate empirical chi") {
    cfg.copula = CopulaKind::comonotone;
    const TrivariateData d = gen_trivariate(cfg, 90);
    CHECK(chi_u(d.table, {"y1", "y2", "y3"}, 0.95).value == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("monthly atmosphere modulates the gaussian dependence strength") {
  TrivariateConfig cfg;
  cfg.copula = CopulaKind::gaussian;
  cfg.rho = 0.5;
  cfg.atmos_amp = -0.3;
  const TrivariateData d = gen_trivariate(cfg, 91);

  CHECK(d.truth.rho_at(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.truth.rho_at(-10.0) == 0.95);
  CHECK(d.truth.rho_at(10.0) == 0.0);

  // piecewise constant within a calendar month
  for (int t = 1; t < d.table.n_rows(); ++t) {
    if (d.table.at(t, "year") == d.table.at(t - 1, "year") &&
        d.table.at(t, "month") == d.table.at(t - 1, "month"))
      CHECK(d.table.at(t, "atmos") == d.table.at(t - 1, "atmos"));
  }

  SliceSpec slice;
  slice.var = "atmos";
  slice.deciles = true;
  const auto sums = sliced_chi(d.table, {{"y1", "y2", "y3"}}, 0.9, slice, 0, 1);
  REQUIRE(sums.size() == 10);
  CHECK(sums.front().estimate > 0.4);
  CHECK(sums.back().estimate < 0.1);
  CHECK(sums.front().estimate > sums.back().estimate + 0.3);
}

TEST_CASE("planted groups are recovered from the dependence graph") {
  const Grouped50Data d = gen_grouped50(Grouped50Config{}, 42);
  REQUIRE(d.table.n_cols() == 50);
  REQUIRE(d.table.n_rows() == 10000);
  CHECK(d.truth.n_sites() == 50);
  CHECK(d.truth.group_of(3) == 0);
  CHECK(d.truth.group_of(49) == 2);
  CHECK_THROWS_AS(d.truth.group_of(50), std::invalid_argument);

  std::vector<std::string> vars;
  for (int s = 1; s <= 50; ++s) vars.push_back("y" + std::to_string(s));
  const Eigen::MatrixXd chi = chi_matrix(d.table, vars, 0.9);

  double within_min = 1.0, between_max = 0.0;
  for (int i = 0; i < 50; ++i)
    for (int j = i + 1; j < 50; ++j) {
      if (d.truth.group_of(i) == d.truth.group_of(j))
        within_min = std::min(within_min, chi(i, j));
      else
        between_max = std::max(between_max, chi(i, j));
    }
  CHECK(within_min > 0.35);
  CHECK(between_max < 0.25);

  const ClusterResult cl = cluster_by_chi(chi, 0.25);
  REQUIRE(cl.groups.size() == 5);
  // components come back ordered by their smallest member
  const auto& planted = d.truth.config.groups;
  const std::vector<std::vector<int>> expect = {planted[3], planted[1], planted[0],
                                                planted[4], planted[2]};
  CHECK(cl.groups == expect);

  SUBCASE("a single planted group is one cluster") {
    Grouped50Config one;
    one.groups = {{0, 1, 2, 3, 4, 5, 6, 7}};
    one.rho = {0.8};
    const Grouped50Data ds = gen_grouped50(one, 7);
    std::vector<std::string> v8;
    for (int s = 1; s <= 8; ++s) v8.push_back("y" + std::to_string(s));
    const ClusterResult c8 = cluster_by_chi(chi_matrix(ds.table, v8, 0.9), 0.25);
    REQUIRE(c8.groups.size() == 1);
    CHECK(c8.groups[0] == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  }
}

TEST_CASE("generators reject inconsistent configurations") {
  SUBCASE("univariate") {
    UnivariateConfig c;
    c.season_threshold = {10.0};
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
    c = UnivariateConfig{};
    c.exceed_prob = 0.0;
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
    c = UnivariateConfig{};
    c.wind_phi = 1.0;
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
    c = UnivariateConfig{};
    c.missing_rate = 1.0;
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
    c = UnivariateConfig{};
    c.season_threshold = {10.0, -1.0};
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
    c = UnivariateConfig{};
    c.calendar.days_per_year = 301;
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
    c = UnivariateConfig{};
    c.season_log_scale = {0.0};
    CHECK_THROWS_AS(gen_univariate(c, 1), std::invalid_argument);
  }
  SUBCASE("trivariate") {
    TrivariateConfig c;
    c.rho = 0.96;
    CHECK_THROWS_AS(gen_trivariate(c, 1), std::invalid_argument);
    c = TrivariateConfig{};
    c.copula = CopulaKind::logistic;
    c.theta = 0.0;
    CHECK_THROWS_AS(gen_trivariate(c, 1), std::invalid_argument);
    c = TrivariateConfig{};
    c.copula = CopulaKind::independent;
    c.atmos_amp = 0.2;
    CHECK_THROWS_AS(gen_trivariate(c, 1), std::invalid_argument);
  }
  SUBCASE("grouped") {
    Grouped50Config c;
    c.groups = {{0, 1}, {}};
    CHECK_THROWS_AS(gen_grouped50(c, 1), std::invalid_argument);
    c.groups = {{0, 1}, {1, 2}};
    CHECK_THROWS_AS(gen_grouped50(c, 1), std::invalid_argument);
    c.groups = {{0, 1}, {2, 4}};
    CHECK_THROWS_AS(gen_grouped50(c, 1), std::invalid_argument);
    c.groups = {{0, 1}, {2, 3}};
    c.rho = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(gen_grouped50(c, 1), std::invalid_argument);
    c.rho = {1.2};
    CHECK_THROWS_AS(gen_grouped50(c, 1), std::invalid_argument);
  }
  SUBCASE("copula names round trip") {
    for (auto k : {CopulaKind::independent, CopulaKind::gaussian, CopulaKind::logistic,
                   CopulaKind::comonotone})
      CHECK(copula_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(copula_from_string("clayton"), std::invalid_argument);
  }
}

TEST_SUITE_END();
