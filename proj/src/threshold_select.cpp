#include "tailkit/threshold_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailkit/rng.hpp"

namespace tailkit {

EqdResult eqd_select(const Series& data, const GpdGamSpec& spec,
                     const std::vector<double>& candidates, int n_boot,
                     std::uint64_t seed, int m_grid) {
  if (candidates.empty()) throw std::invalid_argument("eqd_select: no candidates");
  for (double c : candidates)
    if (!(c >= 0.5 && c <= 0.99))
      throw std::invalid_argument("eqd_select: candidate level " + std::to_string(c) +
                                  " outside [0.5, 0.99]");
  if (n_boot < 50) throw std::invalid_argument("eqd_select: need at least 50 bootstraps");
  if (m_grid < 2) throw std::invalid_argument("eqd_select: probability grid too small");

  EqdResult out;
  out.candidates = candidates;
  out.n_boot = n_boot;
  out.discrepancy.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());
  out.usable.assign(candidates.size(), false);

  std::vector<double> exp_q(m_grid);
  for (int i = 0; i < m_grid; ++i)
    exp_q[i] = -std::log1p(-static_cast<double>(i + 1) / (m_grid + 1));

  for (std::size_t j = 0; j < candidates.size(); ++j) {
    GpdGamSpec cand = spec;
    cand.threshold.tau = candidates[j];
    std::vector<double> e;
    try {
      const GpdFit fit = fit_nonstationary_gpd(data, cand);
      e = transform_excesses_to_exponential(fit, data);
    } catch (const FitError& err) {
      out.warnings.push_back("candidate " + std::to_string(candidates[j]) +
                             " skipped: " + err.what());
      continue;
    }
    const int ne = static_cast<int>(e.size());

    double total = 0.0;
    std::vector<double> boot(ne);
    for (int r = 0; r < n_boot; ++r) {
      Rng rng(seed + static_cast<std::uint64_t>(r));
      for (int i = 0; i < ne; ++i) boot[i] = e[rng.index(ne)];
      std::sort(boot.begin(), boot.end());
      double d = 0.0;
      for (int i = 0; i < m_grid; ++i) {
        const double p = static_cast<double>(i + 1) / (m_grid + 1);
        d += std::abs(interp_quantile_sorted(boot, p) - exp_q[i]);
      }
      total += d / m_grid;
    }
    out.discrepancy[j] = total / n_boot;
    out.usable[j] = true;
    if (out.chosen_index < 0 || out.discrepancy[j] < out.discrepancy[out.chosen_index])
      out.chosen_index = static_cast<int>(j);
  }

  if (out.chosen_index < 0)
    throw FitError("eqd_select: every candidate was skipped");
  out.chosen_level = candidates[out.chosen_index];
  return out;
}

}  // namespace tailkit
