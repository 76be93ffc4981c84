#include "tailkit/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "tailkit/gpd.hpp"
#include "tailkit/rng.hpp"

namespace tailkit {

namespace {

// Exact standard exponential from a standard normal through the survival
// function; stable in both tails.
double exp_margin_from_normal(double g) {
  const double sf = 0.5 * std::erfc(g / std::sqrt(2.0));
  const double z = -std::log(sf);
  return std::max(z, 1e-300);
}

// One-sided positive-stable draw with Laplace transform exp(-t^alpha),
// 0 < alpha < 1 (Chambers-Mallows-Stuck form).
double positive_stable(Rng& rng, double alpha) {
  const double u = M_PI * rng.uniform();
  const double w = rng.exponential();
  return std::pow(std::sin((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha) *
         std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha);
}

void validate_calendar(const CalendarConfig& cal) {
  if (cal.days_per_month < 1 || cal.days_per_year < 1 || cal.n_seasons < 1)
    throw std::invalid_argument("calendar: all counts must be positive");
  if (cal.days_per_year % cal.days_per_month != 0)
    throw std::invalid_argument("calendar: days_per_year must be a multiple of days_per_month");
  const int months = cal.days_per_year / cal.days_per_month;
  if (months % cal.n_seasons != 0)
    throw std::invalid_argument("calendar: months per year must divide into seasons");
}

int season_at(const CalendarConfig& cal, int t) {
  const int months = cal.days_per_year / cal.days_per_month;
  const int m = (t % cal.days_per_year) / cal.days_per_month;
  return m / (months / cal.n_seasons) + 1;
}

}  // namespace

// ---------------------------------------------------------------------------

double UnivariateTruth::threshold_at(int season) const {
  if (season < 1 || season > static_cast<int>(config.season_threshold.size()))
    throw std::invalid_argument("threshold_at: no such season");
  return config.season_threshold[season - 1];
}

double UnivariateTruth::sigma_at(int season, double wind) const {
  if (season < 1 || season > static_cast<int>(config.season_log_scale.size()))
    throw std::invalid_argument("sigma_at: no such season");
  return std::exp(config.scale_base + config.wind_amp * std::sin(2.0 * M_PI * wind) +
                  config.season_log_scale[season - 1]);
}

double UnivariateTruth::conditional_cdf(int season, double wind, double y) const {
  const double v = threshold_at(season);
  const double lam = config.exceed_prob;
  if (y <= 0.0) return 0.0;
  if (y <= v) return (1.0 - lam) * y / v;
  return 1.0 - lam * gpd_survival(y - v, {sigma_at(season, wind), config.shape});
}

double UnivariateTruth::conditional_quantile(int season, double wind, double p) const {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("conditional_quantile: p must lie in [0,1]");
  const double v = threshold_at(season);
  const double lam = config.exceed_prob;
  if (p <= 1.0 - lam) return v * p / (1.0 - lam);
  return v + gpd_quantile((p - (1.0 - lam)) / lam, {sigma_at(season, wind), config.shape});
}

std::string UnivariateTruth::metadata_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "univariate";
  j["seed"] = seed;
  j["n"] = config.n;
  j["days_per_year"] = config.calendar.days_per_year;
  j["days_per_month"] = config.calendar.days_per_month;
  j["n_seasons"] = config.calendar.n_seasons;
  j["season_threshold"] = config.season_threshold;
  j["exceed_prob"] = config.exceed_prob;
  j["shape"] = config.shape;
  j["scale_base"] = config.scale_base;
  j["wind_amp"] = config.wind_amp;
  j["season_log_scale"] = config.season_log_scale;
  j["wind_phi"] = config.wind_phi;
  j["atmos_sd"] = config.atmos_sd;
  j["missing_rate"] = config.missing_rate;
  return j.dump();
}

UnivariateData gen_univariate(const UnivariateConfig& cfg, std::uint64_t seed) {
  validate_calendar(cfg.calendar);
  if (cfg.n < 1) throw std::invalid_argument("gen_univariate: n must be positive");
  if (static_cast<int>(cfg.season_threshold.size()) != cfg.calendar.n_seasons)
    throw std::invalid_argument("gen_univariate: one threshold per season required");
  for (double v : cfg.season_threshold)
    if (!(v > 0.0)) throw std::invalid_argument("gen_univariate: thresholds must be positive");
  if (!(cfg.exceed_prob > 0.0 && cfg.exceed_prob < 1.0))
    throw std::invalid_argument("gen_univariate: exceed_prob must lie in (0,1)");
  if (static_cast<int>(cfg.season_log_scale.size()) != cfg.calendar.n_seasons)
    throw std::invalid_argument("gen_univariate: one log-scale offset per season required");
  if (!(std::abs(cfg.wind_phi) < 1.0))
    throw std::invalid_argument("gen_univariate: |wind_phi| must be < 1");
  if (!(cfg.missing_rate >= 0.0 && cfg.missing_rate < 1.0))
    throw std::invalid_argument("gen_univariate: missing_rate must lie in [0,1)");
  if (!(cfg.atmos_sd > 0.0))
    throw std::invalid_argument("gen_univariate: atmos_sd must be positive");

  UnivariateData out;
  out.truth.config = cfg;
  out.truth.seed = seed;
  Rng rng(seed);

  // Draw order is part of the determinism contract: wind series, monthly
  // atmosphere, response, then the missingness pass.
  std::vector<double> wind(cfg.n);
  wind[0] = rng.normal();
  const double innov = std::sqrt(1.0 - cfg.wind_phi * cfg.wind_phi);
  for (int t = 1; t < cfg.n; ++t)
    wind[t] = cfg.wind_phi * wind[t - 1] + innov * rng.normal();

  const int n_months = (cfg.n + cfg.calendar.days_per_month - 1) / cfg.calendar.days_per_month;
  std::vector<double> monthly(n_months);
  for (int m = 0; m < n_months; ++m) monthly[m] = cfg.atmos_sd * rng.normal();
  std::vector<double> atmos(cfg.n);
  for (int t = 0; t < cfg.n; ++t) atmos[t] = monthly[t / cfg.calendar.days_per_month];

  std::vector<double> y(cfg.n);
  for (int t = 0; t < cfg.n; ++t)
    y[t] = out.truth.conditional_quantile(season_at(cfg.calendar, t), wind[t], rng.uniform());

  out.table.add_column("y", std::move(y));
  out.table.add_column("wind", std::move(wind));
  out.table.add_column("atmos", std::move(atmos));
  add_calendar_columns(out.table, cfg.calendar);

  const int wc = out.table.col_index("wind");
  const int ac = out.table.col_index("atmos");
  int n_missing = 0;
  for (int t = 0; t < cfg.n; ++t) {
    if (rng.uniform() < cfg.missing_rate) {
      out.table.set(t, rng.index(2) == 0 ? wc : ac, std::nan(""));
      ++n_missing;
    }
  }
  out.missing_fraction = static_cast<double>(n_missing) / cfg.n;
  return out;
}

// ---------------------------------------------------------------------------

CopulaKind copula_from_string(const std::string& name) {
  if (name == "independent") return CopulaKind::independent;
  if (name == "gaussian") return CopulaKind::gaussian;
  if (name == "logistic") return CopulaKind::logistic;
  if (name == "comonotone") return CopulaKind::comonotone;
  throw std::invalid_argument("unknown copula: " + name);
}

std::string to_string(CopulaKind k) {
  switch (k) {
    case CopulaKind::independent: return "independent";
    case CopulaKind::gaussian: return "gaussian";
    case CopulaKind::logistic: return "logistic";
    case CopulaKind::comonotone: return "comonotone";
  }
  return "?";
}

double TrivariateTruth::rho_at(double atmos) const {
  const double r = config.rho + config.atmos_amp * atmos;
  return std::min(0.95, std::max(0.0, r));
}

double TrivariateTruth::chi_pair() const {
  switch (config.copula) {
    case CopulaKind::independent: return 0.0;
    case CopulaKind::gaussian: return 0.0;
    case CopulaKind::logistic:
      return config.theta == 1.0 ? 0.0 : 2.0 - std::pow(2.0, config.theta);
    case CopulaKind::comonotone: return 1.0;
  }
  return 0.0;
}

double TrivariateTruth::chi_triple() const {
  switch (config.copula) {
    case CopulaKind::independent: return 0.0;
    case CopulaKind::gaussian: return 0.0;
    case CopulaKind::logistic:
      return config.theta == 1.0
                 ? 0.0
                 : 3.0 - 3.0 * std::pow(2.0, config.theta) + std::pow(3.0, config.theta);
    case CopulaKind::comonotone: return 1.0;
  }
  return 0.0;
}

double TrivariateTruth::eta_pair() const {
  switch (config.copula) {
    case CopulaKind::independent: return 0.5;
    case CopulaKind::gaussian: return 0.5 * (1.0 + config.rho);
    case CopulaKind::logistic: return config.theta == 1.0 ? 0.5 : 1.0;
    case CopulaKind::comonotone: return 1.0;
  }
  return 0.5;
}

double TrivariateTruth::lambda_equal() const {
  switch (config.copula) {
    case CopulaKind::independent: return 1.0;
    case CopulaKind::gaussian: return 1.0 / (1.0 + 2.0 * config.rho);
    case CopulaKind::logistic: return config.theta == 1.0 ? 1.0 : 1.0 / 3.0;
    case CopulaKind::comonotone: return 1.0 / 3.0;
  }
  return 1.0;
}

std::string TrivariateTruth::metadata_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "trivariate";
  j["seed"] = seed;
  j["n"] = config.n;
  j["days_per_year"] = config.calendar.days_per_year;
  j["days_per_month"] = config.calendar.days_per_month;
  j["n_seasons"] = config.calendar.n_seasons;
  j["copula"] = to_string(config.copula);
  j["rho"] = config.rho;
  j["theta"] = config.theta;
  j["atmos_amp"] = config.atmos_amp;
  j["atmos_sd"] = config.atmos_sd;
  j["chi_pair"] = chi_pair();
  j["chi_triple"] = chi_triple();
  j["eta_pair"] = eta_pair();
  j["lambda_equal"] = lambda_equal();
  return j.dump();
}

TrivariateData gen_trivariate(const TrivariateConfig& cfg, std::uint64_t seed) {
  validate_calendar(cfg.calendar);
  if (cfg.n < 1) throw std::invalid_argument("gen_trivariate: n must be positive");
  if (!(cfg.rho >= 0.0 && cfg.rho <= 0.95))
    throw std::invalid_argument("gen_trivariate: rho must lie in [0, 0.95]");
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0))
    throw std::invalid_argument("gen_trivariate: theta must lie in (0, 1]");
  if (cfg.atmos_amp != 0.0 && cfg.copula != CopulaKind::gaussian)
    throw std::invalid_argument(
        "gen_trivariate: atmosphere modulation applies to the gaussian copula only");
  if (!(cfg.atmos_sd > 0.0))
    throw std::invalid_argument("gen_trivariate: atmos_sd must be positive");

  TrivariateData out;
  out.truth.config = cfg;
  out.truth.seed = seed;
  Rng rng(seed);

  const int n_months = (cfg.n + cfg.calendar.days_per_month - 1) / cfg.calendar.days_per_month;
  std::vector<double> monthly(n_months);
  for (int m = 0; m < n_months; ++m) monthly[m] = cfg.atmos_sd * rng.normal();

  std::vector<double> y1(cfg.n), y2(cfg.n), y3(cfg.n), atmos(cfg.n);
  for (int t = 0; t < cfg.n; ++t) {
    atmos[t] = monthly[t / cfg.calendar.days_per_month];
    double z[3] = {0.0, 0.0, 0.0};
    switch (cfg.copula) {
      case CopulaKind::independent:
        for (double& v : z) v = rng.exponential();
        break;
      case CopulaKind::comonotone: {
        const double e = rng.exponential();
        for (double& v : z) v = e;
        break;
      }
      case CopulaKind::gaussian: {
        const double r = out.truth.rho_at(atmos[t]);
        const double g0 = rng.normal();
        for (double& v : z)
          v = exp_margin_from_normal(std::sqrt(r) * g0 + std::sqrt(1.0 - r) * rng.normal());
        break;
      }
      case CopulaKind::logistic: {
        if (cfg.theta == 1.0) {
          for (double& v : z) v = rng.exponential();
          break;
        }
        const double s = positive_stable(rng, cfg.theta);
        for (double& v : z) {
          // Frechet coordinate, then its exact exponential transform.
          const double x = std::pow(s / rng.exponential(), cfg.theta);
          v = std::max(-std::log(-std::expm1(-1.0 / x)), 1e-300);
        }
        break;
      }
    }
    y1[t] = z[0];
    y2[t] = z[1];
    y3[t] = z[2];
  }

  out.table.add_column("y1", std::move(y1));
  out.table.add_column("y2", std::move(y2));
  out.table.add_column("y3", std::move(y3));
  out.table.add_column("atmos", std::move(atmos));
  add_calendar_columns(out.table, cfg.calendar);
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::vector<int>>& default_grouped50_partition() {
  static const std::vector<std::vector<int>> parts = {
      {3, 13, 18, 27, 29, 37, 42, 43},
      {2, 9, 14, 17, 21, 28, 44, 46},
      {7, 20, 24, 25, 31, 32, 33, 39, 40, 41, 47, 48, 49},
      {0, 1, 4, 6, 8, 16, 19, 30, 45},
      {5, 10, 11, 12, 15, 22, 23, 26, 34, 35, 36, 38},
  };
  return parts;
}

int Grouped50Truth::n_sites() const {
  int d = 0;
  for (const auto& g : config.groups) d += static_cast<int>(g.size());
  return d;
}

int Grouped50Truth::group_of(int site) const {
  for (std::size_t gi = 0; gi < config.groups.size(); ++gi)
    for (int s : config.groups[gi])
      if (s == site) return static_cast<int>(gi);
  throw std::invalid_argument("group_of: no such site");
}

std::string Grouped50Truth::metadata_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "grouped";
  j["seed"] = seed;
  j["n"] = config.n;
  j["groups"] = config.groups;
  j["rho"] = config.rho;
  return j.dump();
}

Grouped50Data gen_grouped50(const Grouped50Config& cfg, std::uint64_t seed) {
  Grouped50Config resolved = cfg;
  if (resolved.groups.empty()) resolved.groups = default_grouped50_partition();
  if (resolved.n < 1) throw std::invalid_argument("gen_grouped50: n must be positive");

  int d = 0;
  for (const auto& g : resolved.groups) {
    if (g.empty()) throw std::invalid_argument("gen_grouped50: empty group");
    d += static_cast<int>(g.size());
  }
  std::vector<int> seen(d, 0);
  for (const auto& g : resolved.groups)
    for (int s : g) {
      if (s < 0 || s >= d)
        throw std::invalid_argument("gen_grouped50: site index outside 0..D-1");
      if (seen[s]++) throw std::invalid_argument("gen_grouped50: site listed twice");
    }

  if (resolved.rho.size() == 1)
    resolved.rho.assign(resolved.groups.size(), resolved.rho[0]);
  if (resolved.rho.size() != resolved.groups.size())
    throw std::invalid_argument("gen_grouped50: one rho per group required");
  for (double r : resolved.rho)
    if (!(r >= 0.0 && r <= 1.0))
      throw std::invalid_argument("gen_grouped50: rho must lie in [0,1]");

  Grouped50Data out;
  out.truth.config = resolved;
  out.truth.seed = seed;
  Rng rng(seed);

  std::vector<std::vector<double>> cols(d, std::vector<double>(resolved.n));
  for (int t = 0; t < resolved.n; ++t) {
    for (std::size_t gi = 0; gi < resolved.groups.size(); ++gi) {
      const double r = resolved.rho[gi];
      const double g0 = rng.normal();
      for (int s : resolved.groups[gi])
        cols[s][t] =
            exp_margin_from_normal(std::sqrt(r) * g0 + std::sqrt(1.0 - r) * rng.normal());
    }
  }
  for (int s = 0; s < d; ++s)
    out.table.add_column("y" + std::to_string(s + 1), std::move(cols[s]));
  return out;
}

}  // namespace tailkit
