#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailkit/series.hpp"

namespace tailkit {

// Known-truth generators.  Each returns the data table together with a truth
// record holding the generating configuration and the derived quantities the
// test suites compare against; metadata_json() serializes that record for
// embedding in output files.

// ---------------------------------------------------------------------------
// Univariate response over a daily calendar.  Below the per-season threshold
// v_s the response is uniform on (0, v_s); above it the excess is exactly
// GPD(sigma(x), shape) with log sigma(x) = scale_base
// + wind_amp * sin(2 pi wind) + season_log_scale[s-1].  Each row carries the
// tail with probability exceed_prob.  Covariates: an AR(1) wind series and a
// monthly piecewise-constant atmosphere.  With probability missing_rate a row
// loses one covariate cell (MCAR); the response is never missing.

struct UnivariateConfig {
  int n = 21000;
  CalendarConfig calendar;
  std::vector<double> season_threshold = {10.0, 7.0};  // v_s, one per season
  double exceed_prob = 0.15;
  double shape = 0.1;
  double scale_base = 0.0;
  double wind_amp = 0.5;
  std::vector<double> season_log_scale = {0.0, 0.0};
  double wind_phi = 0.7;      // AR(1) coefficient, |phi| < 1, unit marginal variance
  double atmos_sd = 1.0;
  double missing_rate = 0.117;
};

struct UnivariateTruth {
  UnivariateConfig config;
  std::uint64_t seed = 0;

  double threshold_at(int season) const;  // season is 1-based
  double sigma_at(int season, double wind) const;
  // Closed-form law of Y given (season, wind).
  double conditional_cdf(int season, double wind, double y) const;
  double conditional_quantile(int season, double wind, double p) const;
  std::string metadata_json() const;
};

struct UnivariateData {
  Series table;  // y, wind, atmos + calendar columns
  UnivariateTruth truth;
  double missing_fraction = 0.0;  // realized fraction of rows with a missing cell
};

UnivariateData gen_univariate(const UnivariateConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Three coordinates on exact standard exponential margins under a chosen
// copula, over the same daily calendar.  The gaussian copula is
// equicorrelated; with atmos_amp nonzero its correlation varies with the
// monthly atmosphere as rho_at().  The logistic copula uses the symmetric
// positive-stable construction with dependence theta in (0,1], theta = 1
// reducing to independence.

enum class CopulaKind { independent, gaussian, logistic, comonotone };

CopulaKind copula_from_string(const std::string& name);
std::string to_string(CopulaKind k);

struct TrivariateConfig {
  int n = 21000;
  CalendarConfig calendar;
  CopulaKind copula = CopulaKind::gaussian;
  double rho = 0.5;        // gaussian pairwise correlation, in [0, 0.95]
  double theta = 0.5;      // logistic dependence, in (0, 1]
  double atmos_amp = 0.0;  // gaussian only: rho_t = clamp(rho + atmos_amp * atmos)
  double atmos_sd = 1.0;
};

struct TrivariateTruth {
  TrivariateConfig config;
  std::uint64_t seed = 0;

  double rho_at(double atmos) const;  // clamped to [0, 0.95]
  // Limiting dependence summaries of the base copula.
  double chi_pair() const;
  double chi_triple() const;
  double eta_pair() const;
  double lambda_equal() const;  // decay rate of the equal-weight min-projection
  std::string metadata_json() const;
};

struct TrivariateData {
  Series table;  // y1 y2 y3, atmos + calendar columns
  TrivariateTruth truth;
};

TrivariateData gen_trivariate(const TrivariateConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Many sites split into planted groups: gaussian equicorrelation rho_g inside
// each group, independence between groups, exact exponential margins.
// Columns are y1..yD for D = total site count.

struct Grouped50Config {
  int n = 10000;
  // 0-based site indices; must partition {0..D-1}.  Default: five groups of
  // sizes 8, 8, 13, 9, 12 over 50 sites.
  std::vector<std::vector<int>> groups;
  std::vector<double> rho = {0.7};  // per group, or a single value for all
};

// The default five-group partition (0-based site indices).
const std::vector<std::vector<int>>& default_grouped50_partition();

struct Grouped50Truth {
  Grouped50Config config;
  std::uint64_t seed = 0;

  int n_sites() const;
  int group_of(int site) const;  // index into config.groups
  std::string metadata_json() const;
};

struct Grouped50Data {
  Series table;
  Grouped50Truth truth;
};

Grouped50Data gen_grouped50(const Grouped50Config& cfg, std::uint64_t seed);

}  // namespace tailkit
