#pragma once

#include <string>
#include <vector>

#include "tailkit/gpd_gam.hpp"

namespace tailkit {

struct EqdResult {
  std::vector<double> candidates;   // quantile levels, as given
  std::vector<double> discrepancy;  // NaN where the candidate was skipped
  std::vector<bool> usable;
  int n_boot = 0;
  int chosen_index = -1;
  double chosen_level = 0.0;
  std::vector<std::string> warnings;
};

// Threshold choice by expected quantile discrepancy.  Each candidate level
// re-fits the exceedance model, transforms its excesses to the exponential
// scale, and scores the mean absolute gap between bootstrap sample quantiles
// and unit exponential quantiles over an m-point probability grid.  The
// candidate with the smallest expected gap wins; first minimum on ties.
// Candidates whose fit fails (including fewer than the spec's minimum number
// of excesses) are skipped with a warning.
EqdResult eqd_select(const Series& data, const GpdGamSpec& spec,
                     const std::vector<double>& candidates, int n_boot,
                     std::uint64_t seed = 0, int m_grid = 500);

}  // namespace tailkit
