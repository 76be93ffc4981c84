#include "tailkit/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailkit/margins.hpp"
#include "tailkit/rng.hpp"

namespace tailkit {

namespace {

constexpr int kSparseCount = 20;

// Uniform-margin columns over the given rows (average ranks / (n+1)).
std::vector<std::vector<double>> rank_columns(const Series& data,
                                              const std::vector<std::string>& vars,
                                              const std::vector<int>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(vars.size());
  for (const auto& v : vars) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (int r : rows) col.push_back(data.at(r, v));
    out.push_back(ranks_to_uniform(col));
  }
  return out;
}

std::vector<int> complete_in(const Series& data, const std::vector<std::string>& vars,
                             const std::vector<int>& rows) {
  std::vector<int> out;
  for (int r : rows) {
    bool ok = true;
    for (const auto& v : vars)
      if (std::isnan(data.at(r, v))) {
        ok = false;
        break;
      }
    if (ok) out.push_back(r);
  }
  return out;
}

std::vector<int> every_row(const Series& data) {
  std::vector<int> rows(data.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

DepEstimate chi_on_rows(const Series& data, const std::vector<std::string>& vars, double u,
                        const std::vector<int>& candidate_rows, bool eta) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("dependence: level u must lie in (0,1)");
  if (vars.empty()) throw std::invalid_argument("dependence: empty variable set");
  DepEstimate est;
  const std::vector<int> rows = complete_in(data, vars, candidate_rows);
  est.n_used = static_cast<int>(rows.size());
  if (rows.empty()) {
    est.warnings.push_back("no complete rows");
    est.sparse = true;
    return est;
  }
  const auto cols = rank_columns(data, vars, rows);
  int joint = 0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    bool all = true;
    for (const auto& c : cols)
      if (!(c[t] > u)) {
        all = false;
        break;
      }
    if (all) ++joint;
  }
  est.n_tail = joint;
  if (joint == 0) {
    est.value = 0.0;
    est.sparse = true;
    est.warnings.push_back("no joint exceedances at u=" + std::to_string(u));
    return est;
  }
  if (joint < kSparseCount) {
    est.sparse = true;
    est.warnings.push_back("only " + std::to_string(joint) + " joint exceedances");
  }
  const double psurv = static_cast<double>(joint) / est.n_used;
  if (eta)
    est.value = psurv >= 1.0 ? 1.0 : std::min(1.0, std::log1p(-u) / std::log(psurv));
  else
    est.value = std::min(1.0, psurv / (1.0 - u));
  return est;
}

DepEstimate lambda_on_rows(const Series& data, const std::vector<std::string>& vars,
                           const std::vector<double>& omega, double level,
                           const std::vector<int>& candidate_rows) {
  if (omega.size() != vars.size())
    throw std::invalid_argument("hill_lambda: omega and variable set sizes differ");
  double wsum = 0.0, wmax = 0.0;
  for (double w : omega) {
    if (w < 0.0) throw std::domain_error("hill_lambda: omega components must be >= 0");
    wsum += w;
    wmax = std::max(wmax, w);
  }
  if (std::abs(wsum - 1.0) > 1e-10)
    throw std::domain_error("hill_lambda: omega must sum to 1");
  if (!(level > 0.0 && level < 1.0))
    throw std::domain_error("hill_lambda: level must lie in (0,1)");

  DepEstimate est;
  const std::vector<int> rows = complete_in(data, vars, candidate_rows);
  est.n_used = static_cast<int>(rows.size());
  if (rows.empty()) {
    est.warnings.push_back("no complete rows");
    est.sparse = true;
    return est;
  }
  const auto cols = rank_columns(data, vars, rows);
  std::vector<double> proj(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (omega[i] <= 0.0) continue;
      const double z = -std::log1p(-cols[i][t]);
      m = std::min(m, z / omega[i]);
    }
    proj[t] = m;
  }
  const double thr = interp_quantile(proj, level);
  double excess_sum = 0.0;
  int n_exc = 0;
  for (double t : proj)
    if (t > thr) {
      excess_sum += t - thr;
      ++n_exc;
    }
  est.n_tail = n_exc;
  if (n_exc == 0) {
    est.sparse = true;
    est.warnings.push_back("no excesses above the level-" + std::to_string(level) +
                           " projection quantile");
    est.value = wmax;
    est.lower_bounded = true;
    return est;
  }
  if (n_exc < kSparseCount) {
    est.sparse = true;
    est.warnings.push_back("only " + std::to_string(n_exc) + " projection excesses");
  }
  const double raw = n_exc / excess_sum;
  if (raw < wmax) {
    est.value = wmax;
    est.lower_bounded = true;
    est.warnings.push_back("estimate " + std::to_string(raw) +
                           " below the floor max(omega); reported at the floor");
  } else {
    est.value = raw;
  }
  return est;
}

// Slice labels and row lists for a SliceSpec.
struct Slice {
  std::string label;
  std::vector<int> rows;
};

std::vector<Slice> build_slices(const Series& data, const SliceSpec& spec) {
  if (spec.var.empty()) return {{"all", every_row(data)}};
  const int c = data.col_index(spec.var);
  std::vector<int> rows;
  for (int r = 0; r < data.n_rows(); ++r)
    if (!data.is_missing(r, c)) rows.push_back(r);

  std::vector<Slice> out;
  if (!spec.deciles) {
    std::vector<double> levels;
    for (int r : rows) {
      const double v = data.at(r, c);
      if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
    }
    std::sort(levels.begin(), levels.end());
    for (double lv : levels) {
      Slice s;
      s.label = spec.var + "=" + std::to_string(lv);
      for (int r : rows)
        if (data.at(r, c) == lv) s.rows.push_back(r);
      out.push_back(std::move(s));
    }
  } else {
    if (spec.n_bins < 2) throw std::invalid_argument("sliced summaries: need at least 2 bins");
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
      return data.at(a, c) < data.at(b, c);
    });
    const int n = static_cast<int>(rows.size());
    for (int b = 0; b < spec.n_bins; ++b) {
      Slice s;
      s.label = spec.var + " bin " + std::to_string(b + 1) + "/" +
                std::to_string(spec.n_bins);
      const int lo = static_cast<int>(static_cast<long long>(b) * n / spec.n_bins);
      const int hi = static_cast<int>(static_cast<long long>(b + 1) * n / spec.n_bins);
      for (int i = lo; i < hi; ++i) s.rows.push_back(rows[i]);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<int> resample_rows(Rng& rng, const std::vector<int>& rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[rng.index(rows.size())];
  return out;
}

}  // namespace

DepEstimate chi_u(const Series& data, const std::vector<std::string>& vars, double u) {
  return chi_on_rows(data, vars, u, every_row(data), false);
}

DepEstimate eta_u(const Series& data, const std::vector<std::string>& vars, double u) {
  return chi_on_rows(data, vars, u, every_row(data), true);
}

DepEstimate hill_lambda(const Series& data, const std::vector<std::string>& vars,
                        const std::vector<double>& omega, double level) {
  return lambda_on_rows(data, vars, omega, level, every_row(data));
}

Eigen::MatrixXd chi_matrix(const Series& data, const std::vector<std::string>& vars,
                           double u) {
  const int d = static_cast<int>(vars.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double c = chi_u(data, {vars[i], vars[j]}, u).value;
      m(i, j) = m(j, i) = c;
    }
  return m;
}

std::vector<DepSummary> sliced_chi(const Series& data,
                                   const std::vector<std::vector<std::string>>& var_sets,
                                   double u, const SliceSpec& slice, int n_boot,
                                   std::uint64_t seed) {
  if (n_boot < 0) throw std::invalid_argument("sliced_chi: negative bootstrap count");
  const auto slices = build_slices(data, slice);
  std::vector<DepSummary> out;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    for (const auto& vars : var_sets) {
      DepSummary sum;
      sum.measure = "chi";
      sum.vars = vars;
      sum.level = u;
      sum.slice = slices[s].label;
      sum.n_rows = static_cast<int>(slices[s].rows.size());
      const DepEstimate est = chi_on_rows(data, vars, u, slices[s].rows, false);
      sum.estimate = est.value;
      sum.warnings = est.warnings;
      for (int r = 0; r < n_boot; ++r) {
        Rng rng(seed + 1000003ULL * s + static_cast<std::uint64_t>(r));
        const auto rows = resample_rows(rng, slices[s].rows);
        sum.replicates.push_back(chi_on_rows(data, vars, u, rows, false).value);
      }
      out.push_back(std::move(sum));
    }
  }
  return out;
}

std::vector<DepSummary> sliced_lambda(const Series& data,
                                      const std::vector<std::string>& vars,
                                      const std::vector<std::vector<double>>& omegas,
                                      double level, const SliceSpec& slice, int n_boot,
                                      std::uint64_t seed) {
  if (n_boot < 0) throw std::invalid_argument("sliced_lambda: negative bootstrap count");
  const auto slices = build_slices(data, slice);
  std::vector<DepSummary> out;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    for (const auto& omega : omegas) {
      DepSummary sum;
      sum.measure = "lambda";
      sum.vars = vars;
      sum.level = level;
      sum.omega = omega;
      sum.slice = slices[s].label;
      sum.n_rows = static_cast<int>(slices[s].rows.size());
      const DepEstimate est = lambda_on_rows(data, vars, omega, level, slices[s].rows);
      sum.estimate = est.value;
      sum.warnings = est.warnings;
      for (int r = 0; r < n_boot; ++r) {
        Rng rng(seed + 1000003ULL * s + static_cast<std::uint64_t>(r));
        const auto rows = resample_rows(rng, slices[s].rows);
        sum.replicates.push_back(lambda_on_rows(data, vars, omega, level, rows).value);
      }
      out.push_back(std::move(sum));
    }
  }
  return out;
}

ClusterResult cluster_by_chi(const Eigen::MatrixXd& chi, double link) {
  if (chi.rows() != chi.cols())
    throw std::invalid_argument("cluster_by_chi: matrix must be square");
  if (!(link >= 0.0 && link <= 1.0))
    throw std::invalid_argument("cluster_by_chi: link threshold outside [0,1]");
  const int d = static_cast<int>(chi.rows());
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (std::abs(chi(i, j) - chi(j, i)) > 1e-8)
        throw std::invalid_argument("cluster_by_chi: matrix is not symmetric");

  ClusterResult res;
  res.link = link;
  std::vector<bool> seen(d, false);
  for (int start = 0; start < d; ++start) {
    if (seen[start]) continue;
    std::vector<int> group, queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const int i = queue.back();
      queue.pop_back();
      group.push_back(i);
      for (int j = 0; j < d; ++j)
        if (!seen[j] && j != i && chi(i, j) >= link) {
          seen[j] = true;
          queue.push_back(j);
        }
    }
    std::sort(group.begin(), group.end());
    res.groups.push_back(std::move(group));
  }
  return res;
}

}  // namespace tailkit
