#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "tailkit/condex.hpp"
#include "tailkit/margins.hpp"
#include "tailkit/rng.hpp"

using namespace tailkit;

TEST_SUITE_BEGIN("condex");

namespace {

double laplace_draw(Rng& rng) {
  const double u = rng.uniform();
  return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
}

Series laplace_pair(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w1(n), w2(n);
  for (int i = 0; i < n; ++i) {
    w1[i] = laplace_draw(rng);
    w2[i] = laplace_draw(rng);
  }
  Series tab;
  tab.add_column("w1", w1);
  tab.add_column("w2", w2);
  return tab;
}

// W2 = 0.5 W1 + |W1|^0.2 (0.3 + 0.8 eps); only rows above the conditioning
// threshold matter for the fit, where |W1| = W1.
Series planted_pair(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w1(n), w2(n);
  for (int i = 0; i < n; ++i) {
    w1[i] = laplace_draw(rng);
    const double wa = std::abs(w1[i]) + 0.01;
    w2[i] = 0.5 * w1[i] + std::pow(wa, 0.2) * (0.3 + 0.8 * rng.normal());
  }
  Series tab;
  tab.add_column("w1", w1);
  tab.add_column("w2", w2);
  return tab;
}

bool has_warning(const CondExtFit& fit, const std::string& needle) {
  for (const auto& w : fit.warnings)
    if (w.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("comonotone pair collapses to alpha one with zero residuals") {
  Rng rng(1);
  const int n = 10000;
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = laplace_draw(rng);
  Series tab;
  tab.add_column("w1", w);
  tab.add_column("w2", w);

  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  CHECK(fit.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(fit.beta[0]) <= 1e-12);
  CHECK(fit.resid_sd[0] <= 1e-10);
  for (const auto& row : fit.residuals) CHECK(std::abs(row[0]) <= 1e-10);
  CHECK(has_warning(fit, "degenerate residual spread"));
  CHECK(has_warning(fit, "dependence boundary"));

  const Series sim = simulate_conditional(fit, 500, 6.0, 2);
  for (int s = 0; s < 500; ++s) {
    CHECK(sim.at(s, 0) == doctest::Approx(sim.at(s, 1)).epsilon(1e-12));
    CHECK(sim.at(s, 0) > 6.0);
  }
}

TEST_CASE("independent pair lands near the independence corner") {
  const Series tab = laplace_pair(100000, 11);
  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  CHECK(std::abs(fit.alpha[0]) <= 0.1);
  CHECK(std::abs(fit.beta[0]) <= 0.2);
  // Unconditioned Laplace residuals keep their sd of sqrt(2).
  CHECK(fit.resid_sd[0] == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
  CHECK(fit.n_exceedances() == 15000);
  CHECK(fit.u_threshold > 0.0);
}

TEST_CASE("planted conditional model is recovered") {
  const Series tab = planted_pair(100000, 21);
  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  CHECK(fit.alpha[0] == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(fit.alpha[0] - 0.5) <= 0.05);
  CHECK(std::abs(fit.beta[0] - 0.2) <= 0.1);
  CHECK(std::abs(fit.resid_mean[0] - 0.3) <= 0.05);
  CHECK(std::abs(fit.resid_sd[0] - 0.8) <= 0.05);
}

TEST_CASE("stored residuals reconstruct the observed coordinates") {
  const Series tab = planted_pair(50000, 22);
  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  int ti = 0;
  for (int t = 0; t < tab.n_rows(); ++t) {
    const double w = tab.at(t, 0);
    if (!(w > fit.u_threshold)) continue;
    const double rec =
        fit.alpha[0] * w + std::pow(w, fit.beta[0]) * fit.residuals[ti][0];
    CHECK(rec == doctest::Approx(tab.at(t, 1)).epsilon(1e-10));
    ++ti;
  }
  CHECK(ti == fit.n_exceedances());
}

TEST_CASE("simulation respects the exponential overshoot and the planted slope") {
  const Series tab = planted_pair(100000, 21);
  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  const int n_sim = 200000;
  const Series sim = simulate_conditional(fit, n_sim, 15.0, 33);

  int above = 0;
  double mean_ratio = 0.0;
  for (int s = 0; s < n_sim; ++s) {
    if (sim.at(s, 0) > 16.0) ++above;
    mean_ratio += sim.at(s, 1) / sim.at(s, 0);
  }
  // Laplace upper tail is memoryless: Pr(W > L + 1 | W > L) = 1/e.
  CHECK(static_cast<double>(above) / n_sim == doctest::Approx(std::exp(-1.0)).epsilon(0.03));
  // W2/W1 = alpha + O(W1^(beta-1)) at high conditioning levels.
  CHECK(std::abs(mean_ratio / n_sim - 0.5) <= 0.05);

  CHECK_THROWS_AS(simulate_conditional(fit, 10, fit.u_threshold - 0.5, 1),
                  std::domain_error);
  CHECK_THROWS_AS(simulate_conditional(fit, 0, 15.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate_conditional(CondExtFit{}, 10, 15.0, 1), FitError);
}

TEST_CASE("group probability is stable across conditioning quantiles") {
  const Series tab = planted_pair(100000, 21);
  const double s1 = laplace_upper_level(1.0 / 300);
  double pmin = 1e300, pmax = 0.0;
  for (double uq : {0.7, 0.75, 0.8, 0.85, 0.9, 0.95}) {
    const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0, uq);
    const GroupProb gp = group_exceedance_probability(fit, {s1, s1}, 200000, 7);
    pmin = std::min(pmin, gp.value);
    pmax = std::max(pmax, gp.value);
  }
  CHECK(pmax / pmin < 10.0);
  CHECK(pmax / pmin < 2.0);  // well-specified data sits far inside the bound
}

TEST_CASE("independent pair joint probability matches the product rule") {
  const Series tab = laplace_pair(100000, 41);
  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  const double s = laplace_upper_level(1.0 / 300);
  const GroupProb gp = group_exceedance_probability(fit, {s, s}, 10000000, 9);
  const double truth = 1.0 / (300.0 * 300.0);
  CHECK(gp.value > 0.5 * truth);
  CHECK(gp.value < 2.0 * truth);
  CHECK(gp.tail == doctest::Approx(1.0 / 300.0).epsilon(1e-12));
  CHECK(gp.se > 0.0);
  CHECK(gp.n_sim == 10000000);
}

TEST_CASE("comonotone group of eight collapses to a single margin") {
  Rng rng(51);
  const int n = 100000;
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = laplace_draw(rng);
  Series tab;
  std::vector<std::string> names;
  for (int j = 0; j < 8; ++j) {
    names.push_back("w" + std::to_string(j + 1));
    tab.add_column(names.back(), w);
  }
  const CondExtFit fit = fit_condext(tab, names, 0);
  const double s = laplace_upper_level(1.0 / 300);
  const GroupProb gp = group_exceedance_probability(fit, std::vector<double>(8, s),
                                                    100000, 3);
  CHECK(gp.fraction == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gp.value == doctest::Approx(1.0 / 300.0).epsilon(1e-12));
}

TEST_CASE("single-site groups need no simulation") {
  Rng rng(5);
  const int n = 2000;
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = laplace_draw(rng);
  Series tab;
  tab.add_column("w1", w);
  const CondExtFit fit = fit_condext(tab, {"w1"}, 0);
  CHECK(fit.alpha.empty());
  CHECK(fit.n_exceedances() == 300);

  const double s = laplace_upper_level(1.0 / 300);
  const GroupProb gp = group_exceedance_probability(fit, {s}, 10, 1);
  CHECK(gp.value == doctest::Approx(1.0 / 300.0).epsilon(1e-12));
  CHECK(gp.n_sim == 0);
}

TEST_CASE("conditioning site choice barely moves symmetric group probabilities") {
  // Equicorrelated Gaussian copula (rho = 0.5) on Laplace margins.
  Rng rng(61);
  const int n = 100000;
  std::vector<std::vector<double>> w(3, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    for (int j = 0; j < 3; ++j) {
      const double x = std::sqrt(0.5) * g + std::sqrt(0.5) * rng.normal();
      const double u = 0.5 * std::erfc(-x / std::sqrt(2.0));
      w[j][i] = transform_margin(u, MarginScale::uniform, MarginScale::laplace);
    }
  }
  Series tab;
  tab.add_column("w1", w[0]);
  tab.add_column("w2", w[1]);
  tab.add_column("w3", w[2]);

  const std::vector<double> levels(3, laplace_upper_level(1.0 / 300));
  std::vector<double> logp;
  for (int c = 0; c < 3; ++c) {
    const CondExtFit fit = fit_condext(tab, {"w1", "w2", "w3"}, c);
    logp.push_back(std::log(
        group_exceedance_probability(fit, levels, 500000, 17).value));
  }
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) CHECK(std::abs(logp[a] - logp[b]) < 1.0);
}

TEST_CASE("group probability rejects misaligned or sub-threshold levels") {
  const Series tab = planted_pair(20000, 77);
  const CondExtFit fit = fit_condext(tab, {"w1", "w2"}, 0);
  CHECK_THROWS_AS(group_exceedance_probability(fit, {5.0}, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_WITH_AS(group_exceedance_probability(fit, {0.5, 5.0}, 100, 1),
                       doctest::Contains("w1"), std::domain_error);
}

TEST_CASE("factorized probability multiplies per-group factors") {
  CHECK(factorized_probability({0.1, 0.2}) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(factorized_probability({0.3, 0.0, 0.9}) == 0.0);
  CHECK(factorized_probability({1.0}) == 1.0);
  CHECK_THROWS_AS(factorized_probability({}), std::invalid_argument);
  CHECK_THROWS_AS(factorized_probability({0.5, 1.5}), std::domain_error);
  CHECK_THROWS_AS(factorized_probability({-0.1}), std::domain_error);
}

TEST_CASE("challenge levels invert the laplace upper tail") {
  const auto [s_year, s_month] = challenge_levels();
  CHECK(s_year == doctest::Approx(std::log(150.0)).epsilon(1e-12));
  CHECK(s_year == doctest::Approx(5.0106).epsilon(1e-4));
  CHECK(s_month == doctest::Approx(std::log(12.5)).epsilon(1e-12));
  CHECK(s_month == doctest::Approx(2.5257).epsilon(1e-4));
  CHECK(laplace_upper_level(0.5) == doctest::Approx(0.0));
  CHECK_THROWS_AS(laplace_upper_level(0.6), std::domain_error);
  CHECK_THROWS_AS(laplace_upper_level(0.0), std::domain_error);
  CHECK_THROWS_AS(challenge_levels(1, 25), std::invalid_argument);
}

TEST_CASE("fit preconditions and sparse-data warnings") {
  const Series tab = laplace_pair(400, 91);
  CHECK_THROWS_AS(fit_condext(tab, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit_condext(tab, {"w1", "w2"}, 2), std::invalid_argument);
  CHECK_THROWS_AS(fit_condext(tab, {"w1", "w2"}, 0, 1.5), std::invalid_argument);

  const CondExtFit sparse = fit_condext(tab, {"w1", "w2"}, 0, 0.85);
  CHECK(sparse.n_exceedances() == 60);
  CHECK(has_warning(sparse, "60 conditioning exceedances"));

  Series tiny = laplace_pair(6, 92);
  CHECK_THROWS_AS(fit_condext(tiny, {"w1", "w2"}, 0, 0.99), FitError);

  Series withnan = laplace_pair(400, 93);
  for (int t = 0; t < withnan.n_rows(); ++t)
    withnan.set(t, 1, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(fit_condext(withnan, {"w1", "w2"}, 0), FitError);
}

TEST_SUITE_END();
