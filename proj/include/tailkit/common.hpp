#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailkit {

// Model fitting failed (non-convergence, degenerate data).  The message
// carries the diagnostic.
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numeric routine could not reach its tolerance (quadrature, bracketing).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input table or formula refers to something that does not exist.
class SchemaError : public std::invalid_argument {
 public:
  explicit SchemaError(const std::string& msg) : std::invalid_argument(msg) {}
};

constexpr double kProbClamp = 1e-12;

inline double clamp_unit(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

// Interpolated sample quantile with plotting positions i/(n+1).
// `sorted` must be ascending; ends are clamped to the extreme order statistics.
inline double interp_quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("interp_quantile: empty sample");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("interp_quantile: p must lie in (0,1)");
  const double h = p * static_cast<double>(n + 1);
  if (h <= 1.0) return sorted.front();
  if (h >= static_cast<double>(n)) return sorted.back();
  const std::size_t i = static_cast<std::size_t>(h);  // 1-based lower index
  const double frac = h - static_cast<double>(i);
  return sorted[i - 1] + frac * (sorted[i] - sorted[i - 1]);
}

inline double interp_quantile(std::vector<double> sample, double p) {
  std::sort(sample.begin(), sample.end());
  return interp_quantile_sorted(sample, p);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean_of: empty");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Fold label for position i of n under k contiguous blocks, rotated by seed.
inline int blocked_fold(int i, int n, int k, std::uint64_t seed) {
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const int shifted = static_cast<int>((static_cast<std::uint64_t>(i) + seed % un) % un);
  return static_cast<int>((static_cast<long long>(shifted) * k) / n);
}

}  // namespace tailkit
