#include "tailkit/marginal.hpp"

#include <cmath>
#include <sstream>

namespace tailkit {

namespace {

double max_threshold(const GpdFit& fit, const Series& data) {
  double vmax = -std::numeric_limits<double>::infinity();
  for (int r : fit.retained_rows) vmax = std::max(vmax, fit.threshold_at(data, r));
  return vmax;
}

}  // namespace

double marginal_cdf(const GpdFit& fit, const Series& data, double y) {
  if (fit.retained_rows.empty())
    throw std::invalid_argument("marginal_cdf: fit has no retained rows");
  double sum = 0.0;
  for (int r : fit.retained_rows) {
    if (!(y > fit.threshold_at(data, r)))
      throw std::domain_error(
          "marginal_cdf: y=" + std::to_string(y) + " is not above the threshold " +
          std::to_string(fit.threshold_at(data, r)) + " at row " + std::to_string(r) +
          "; marginal quantiles this central need a sub-threshold method");
    sum += fit.conditional_cdf(data, r, y);
  }
  return sum / static_cast<double>(fit.retained_rows.size());
}

double marginal_quantile(const GpdFit& fit, const Series& data, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("marginal_quantile: p must lie in (0,1)");
  const double vmax = max_threshold(fit, data);
  const double eps = 1e-10 * std::max(1.0, std::abs(vmax));
  double lo = vmax + eps;
  const double f_lo = marginal_cdf(fit, data, lo);
  if (f_lo > p) {
    std::ostringstream os;
    os << "marginal_quantile: p=" << p << " sits below the tail regime; F("
       << lo << ")=" << f_lo;
    throw NumericError(os.str());
  }

  double span = std::max(1.0, std::abs(vmax));
  double hi = lo + span;
  int tries = 0;
  while (marginal_cdf(fit, data, hi) < p) {
    span *= 2.0;
    hi = lo + span;
    if (++tries > 200) {
      std::ostringstream os;
      os << "marginal_quantile: failed to bracket p=" << p << " in [" << lo << ", " << hi
         << "]";
      throw NumericError(os.str());
    }
  }

  while (hi - lo > 1e-8 * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    (marginal_cdf(fit, data, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace tailkit
