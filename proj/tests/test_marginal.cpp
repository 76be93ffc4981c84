#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tailkit/marginal.hpp"
#include "tailkit/rng.hpp"

using namespace tailkit;

TEST_SUITE_BEGIN("marginal");

namespace {

GpdGamSpec stepped_spec(const std::string& stratum) {
  GpdGamSpec spec;
  spec.response = "y";
  spec.threshold.kind = ThresholdKind::stepped;
  spec.threshold.stratum_var = stratum;
  spec.scale = Formula::parse("scale ~ 1");
  spec.smoothing.mode = SmoothingSpec::Mode::fixed;
  return spec;
}

// Two strata, exponential tails: F(y) = 1 - mean_t lambda_s exp(-(y - v_s)).
GpdFit two_stratum_fit(Series& tab, int n1, int n2) {
  std::vector<double> season, y;
  for (int i = 0; i < n1; ++i) {
    season.push_back(1.0);
    y.push_back(1.0);
  }
  for (int i = 0; i < n2; ++i) {
    season.push_back(2.0);
    y.push_back(1.5);
  }
  tab = Series();
  tab.add_column("season", season);
  tab.add_column("y", y);
  Eigen::VectorXd beta(1);
  beta[0] = 0.0;
  return assemble_gpd_fit(stepped_spec("season"), tab, {1.0, 2.0}, {2.0, 3.0}, {0.1, 0.2},
                          beta, 0.0);
}

}  // namespace

TEST_CASE("a constant model averages to its own conditional") {
  Series tab;
  tab.add_column("y", {0.1, 0.2, 0.3, 0.4});
  Eigen::VectorXd beta(1);
  beta[0] = std::log(2.0);
  const GpdFit fit =
      assemble_gpd_fit(stepped_spec(""), tab, {0.0}, {1.0}, {0.15}, beta, 0.1);
  for (double y : {1.5, 3.0, 10.0})
    CHECK(marginal_cdf(fit, tab, y) ==
          doctest::Approx(fit.conditional_cdf(tab, 0, y)).epsilon(1e-14));
  CHECK(marginal_cdf(fit, tab, 1e8) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a two-stratum average matches the analytic mixture") {
  Series tab;
  const GpdFit fit = two_stratum_fit(tab, 30, 70);
  for (double y : {3.5, 5.0, 9.0}) {
    const double truth =
        1.0 - (30.0 * 0.1 * std::exp(-(y - 2.0)) + 70.0 * 0.2 * std::exp(-(y - 3.0))) / 100.0;
    CHECK(marginal_cdf(fit, tab, y) == doctest::Approx(truth).epsilon(1e-10));
  }
}

TEST_CASE("the marginal cdf is monotone across the tail") {
  Series tab;
  const GpdFit fit = two_stratum_fit(tab, 50, 50);
  double prev = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double y = 3.0 + 1e-6 + 0.1 * i;
    const double F = marginal_cdf(fit, tab, y);
    CHECK(F >= prev);
    prev = F;
  }
}

TEST_CASE("sub-threshold evaluation is rejected with instructions") {
  Series tab;
  const GpdFit fit = two_stratum_fit(tab, 50, 50);
  CHECK_THROWS_AS(marginal_cdf(fit, tab, 2.5), std::domain_error);  // above v1, below v2
  CHECK_THROWS_WITH_AS(marginal_cdf(fit, tab, 0.5),
                       doctest::Contains("sub-threshold"), std::domain_error);
}

TEST_CASE("quantile and cdf invert each other at challenge-scale levels") {
  Series tab;
  const GpdFit fit = two_stratum_fit(tab, 40, 60);
  for (double p : {0.999, 0.9999, 1.0 - 1.0 / 60000.0}) {
    const double q = marginal_quantile(fit, tab, p);
    CHECK(marginal_cdf(fit, tab, q) == doctest::Approx(p).epsilon(1e-7));
  }
  CHECK(marginal_quantile(fit, tab, 0.9999) > marginal_quantile(fit, tab, 0.999));
}

TEST_CASE("a constant exponential tail inverts in closed form") {
  Series tab;
  tab.add_column("y", {0.5});
  Eigen::VectorXd beta(1);
  beta[0] = 0.0;
  const double lam = 0.1, v0 = 2.0;
  const GpdFit fit = assemble_gpd_fit(stepped_spec(""), tab, {0.0}, {v0}, {lam}, beta, 0.0);
  const double p = 1.0 - lam * std::exp(-5.0);
  CHECK(marginal_quantile(fit, tab, p) == doctest::Approx(v0 + 5.0).epsilon(1e-8));
}

TEST_CASE("central probabilities are refused with the bracket reported") {
  Series tab;
  const GpdFit fit = two_stratum_fit(tab, 50, 50);
  CHECK_THROWS_AS(marginal_quantile(fit, tab, 0.5), NumericError);
  CHECK_THROWS_AS(marginal_quantile(fit, tab, 1.5), std::domain_error);
}

TEST_CASE("the model quantile matches a brute-force simulation") {
  // Half the rows in each stratum; y | stratum: below the threshold with mass
  // 1 - lambda (uniform body), v_s + Exp(1) with mass lambda.
  Series tab;
  const GpdFit fit = two_stratum_fit(tab, 50, 50);
  Rng rng(401);
  const int nsim = 10'000'000;
  std::vector<double> sims(nsim);
  for (int i = 0; i < nsim; ++i) {
    const bool s2 = rng.uniform() < 0.5;
    const double v = s2 ? 3.0 : 2.0;
    const double lam = s2 ? 0.2 : 0.1;
    sims[i] = rng.uniform() < lam ? v + rng.exponential() : rng.uniform(0.0, v);
  }
  const double p = 0.9999;
  const std::size_t k = static_cast<std::size_t>(p * nsim);
  std::nth_element(sims.begin(), sims.begin() + k, sims.end());
  const double empirical = sims[k];
  const double model = marginal_quantile(fit, tab, p);
  CHECK(model == doctest::Approx(empirical).epsilon(0.02));
}

TEST_SUITE_END();
