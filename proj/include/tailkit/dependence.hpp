#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tailkit/series.hpp"

namespace tailkit {

// One empirical dependence estimate.  All measures are rank-based: the named
// columns are transformed to uniform (or exponential) margins by average
// ranks over the complete rows before anything is counted, so results are
// invariant to strictly monotone changes of the raw margins.
struct DepEstimate {
  double value = 0.0;
  int n_used = 0;         // complete rows entering the estimate
  int n_tail = 0;         // joint exceedances, or threshold excesses for lambda
  bool sparse = false;    // fewer than 20 tail points
  bool lower_bounded = false;  // lambda clamped to its theoretical floor max(omega)
  std::vector<std::string> warnings;
};

// P(all margins > u) / (1 - u), clamped to [0, 1].
DepEstimate chi_u(const Series& data, const std::vector<std::string>& vars, double u);

// log(1 - u) / log joint survival, clamped to (0, 1].
DepEstimate eta_u(const Series& data, const std::vector<std::string>& vars, double u);

// Hill (reciprocal mean excess) estimate of the exponential decay rate of the
// min-projection min_i Z_i / omega_i above its `level` sample quantile, on
// exponential margins.  Estimates below max(omega) are reported at the bound
// with lower_bounded set.
DepEstimate hill_lambda(const Series& data, const std::vector<std::string>& vars,
                        const std::vector<double>& omega, double level);

// Pairwise chi at level u over the named columns; unit diagonal.
Eigen::MatrixXd chi_matrix(const Series& data, const std::vector<std::string>& vars, double u);

struct DepSummary {
  std::string measure;  // "chi" | "eta" | "lambda"
  std::vector<std::string> vars;
  double level = 0.0;
  std::vector<double> omega;  // lambda only
  std::string slice;
  double estimate = 0.0;
  std::vector<double> replicates;  // bootstrap re-estimates, one per replicate
  int n_rows = 0;
  std::vector<std::string> warnings;
};

// Slice layout: every slice is a label plus the rows it owns.
struct SliceSpec {
  std::string var;      // empty: single slice labelled "all"
  bool deciles = false; // false: one slice per distinct value; true: rank bins
  int n_bins = 10;      // decile mode only
};

// Per-slice estimate plus IID row-resampling bootstrap replicates for each
// variable set.  Replicate r of slice s draws from seed + 1000003*s + r.
std::vector<DepSummary> sliced_chi(const Series& data,
                                   const std::vector<std::vector<std::string>>& var_sets,
                                   double u, const SliceSpec& slice, int n_boot,
                                   std::uint64_t seed);

std::vector<DepSummary> sliced_lambda(const Series& data,
                                      const std::vector<std::string>& vars,
                                      const std::vector<std::vector<double>>& omegas,
                                      double level, const SliceSpec& slice, int n_boot,
                                      std::uint64_t seed);

struct ClusterResult {
  std::vector<std::vector<int>> groups;  // ascending members, ordered by first member
  double link = 0.0;
};

// Connected components of the graph with an edge wherever chi(i,j) >= link.
ClusterResult cluster_by_chi(const Eigen::MatrixXd& chi, double link);

}  // namespace tailkit
