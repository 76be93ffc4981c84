#include "tailkit/margins.hpp"

#include <algorithm>
#include <cmath>

#include "tailkit/gpd.hpp"

namespace tailkit {

MarginScale margin_scale_from_string(const std::string& name) {
  if (name == "uniform") return MarginScale::uniform;
  if (name == "exponential") return MarginScale::exponential;
  if (name == "gumbel") return MarginScale::gumbel;
  if (name == "laplace") return MarginScale::laplace;
  throw SchemaError("unknown margin scale: " + name);
}

std::string to_string(MarginScale m) {
  switch (m) {
    case MarginScale::uniform: return "uniform";
    case MarginScale::exponential: return "exponential";
    case MarginScale::gumbel: return "gumbel";
    case MarginScale::laplace: return "laplace";
  }
  return "?";
}

static void check_support(MarginScale m, double x) {
  if (!std::isfinite(x)) throw std::domain_error("margin transform: non-finite value");
  if (m == MarginScale::uniform && !(x > 0.0 && x < 1.0))
    throw std::domain_error("margin transform: uniform value outside (0,1)");
  if (m == MarginScale::exponential && x < 0.0)
    throw std::domain_error("margin transform: negative value on exponential scale");
}

double margin_cdf(MarginScale m, double x) {
  switch (m) {
    case MarginScale::uniform: return x;
    case MarginScale::exponential: return -std::expm1(-x);
    case MarginScale::gumbel: return std::exp(-std::exp(-x));
    case MarginScale::laplace:
      return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
  }
  return 0.0;
}

double margin_survival(MarginScale m, double x) {
  switch (m) {
    case MarginScale::uniform: return 1.0 - x;
    case MarginScale::exponential: return std::exp(-x);
    case MarginScale::gumbel: return -std::expm1(-std::exp(-x));
    case MarginScale::laplace:
      return x < 0.0 ? 1.0 - 0.5 * std::exp(x) : 0.5 * std::exp(-x);
  }
  return 0.0;
}

double margin_quantile(MarginScale m, double p) {
  switch (m) {
    case MarginScale::uniform: return p;
    case MarginScale::exponential: return -std::log1p(-p);
    case MarginScale::gumbel: return -std::log(-std::log(p));
    case MarginScale::laplace:
      return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
  }
  return 0.0;
}

double margin_quantile_from_survival(MarginScale m, double s) {
  switch (m) {
    case MarginScale::uniform: return 1.0 - s;
    case MarginScale::exponential: return -std::log(s);
    case MarginScale::gumbel: return -std::log(-std::log1p(-s));
    case MarginScale::laplace:
      return s > 0.5 ? std::log(2.0 * (1.0 - s)) : -std::log(2.0 * s);
  }
  return 0.0;
}

double transform_margin(double value, MarginScale from, MarginScale to) {
  check_support(from, value);
  if (from == to) return value;
  const double u = margin_cdf(from, value);
  const double s = margin_survival(from, value);
  // The smaller of the two tails is the accurate one; route through it.
  if (u <= s) return margin_quantile(to, std::max(u, kProbClamp));
  return margin_quantile_from_survival(to, std::max(s, kProbClamp));
}

double empirical_cdf(const std::vector<double>& sample, double x) {
  const std::size_t n = sample.size();
  if (n == 0) throw std::invalid_argument("empirical_cdf: empty sample");
  std::size_t lt = 0, le = 0;
  for (double v : sample) {
    if (v < x) ++lt;
    if (v <= x) ++le;
  }
  // Ties with x get the average of their ranks.
  const double rank = le > lt ? 0.5 * static_cast<double>(lt + 1 + le)
                              : static_cast<double>(le);
  return rank / static_cast<double>(n + 1);
}

std::vector<double> ranks_to_uniform(const std::vector<double>& sample) {
  const std::size_t n = sample.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return sample[a] < sample[b]; });
  std::vector<double> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && sample[idx[j + 1]] == sample[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      out[idx[k]] = avg_rank / static_cast<double>(n + 1);
    i = j + 1;
  }
  return out;
}

BodyCdf::BodyCdf(std::vector<double> values, double upper_anchor) {
  std::sort(values.begin(), values.end());
  if (values.empty()) throw std::invalid_argument("BodyCdf: empty body");
  if (values.back() > upper_anchor)
    throw std::invalid_argument("BodyCdf: values above the upper anchor");
  const std::size_t m = values.size();
  const double spread = std::max(values.back() - values.front(), 1.0);
  const double lower = values.front() - spread / static_cast<double>(m);
  ys_.reserve(m + 2);
  ps_.reserve(m + 2);
  ys_.push_back(lower);
  ps_.push_back(0.0);
  for (std::size_t i = 0; i < m; ++i) {
    // Strictly increasing knots; duplicates are nudged by a relative epsilon.
    double y = values[i];
    if (y <= ys_.back()) y = ys_.back() + 1e-12 * spread;
    ys_.push_back(y);
    ps_.push_back(static_cast<double>(i + 1) / static_cast<double>(m + 1));
  }
  double top = upper_anchor;
  if (top <= ys_.back()) top = ys_.back() + 1e-12 * spread;
  ys_.push_back(top);
  ps_.push_back(1.0);
}

double BodyCdf::cdf(double y) const {
  if (ys_.empty()) throw std::logic_error("BodyCdf: uninitialized");
  if (y <= ys_.front()) return 0.0;
  if (y >= ys_.back()) return 1.0;
  const auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
  const std::size_t j = static_cast<std::size_t>(it - ys_.begin());
  const double t = (y - ys_[j - 1]) / (ys_[j] - ys_[j - 1]);
  return ps_[j - 1] + t * (ps_[j] - ps_[j - 1]);
}

double BodyCdf::quantile(double p) const {
  if (ys_.empty()) throw std::logic_error("BodyCdf: uninitialized");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("BodyCdf: p outside [0,1]");
  if (p <= 0.0) return ys_.front();
  if (p >= 1.0) return ys_.back();
  const auto it = std::upper_bound(ps_.begin(), ps_.end(), p);
  const std::size_t j = static_cast<std::size_t>(it - ps_.begin());
  const double t = (p - ps_[j - 1]) / (ps_[j] - ps_[j - 1]);
  return ys_[j - 1] + t * (ys_[j] - ys_[j - 1]);
}

double SemiParametricCdf::cdf(double y) const {
  if (y > threshold) {
    const GpdParams g{scale, shape};
    return 1.0 - tail_fraction * gpd_survival(y - threshold, g);
  }
  return (1.0 - tail_fraction) * body.cdf(y);
}

double SemiParametricCdf::quantile(double p) const {
  if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("SemiParametricCdf: p outside [0,1)");
  const double body_mass = 1.0 - tail_fraction;
  if (p <= body_mass) return body.quantile(body_mass > 0.0 ? p / body_mass : 0.0);
  const GpdParams g{scale, shape};
  return threshold + gpd_quantile(1.0 - (1.0 - p) / tail_fraction, g);
}

SemiParametricCdf make_semiparametric_cdf(const std::vector<double>& sample,
                                          double threshold, double scale, double shape) {
  std::vector<double> body_vals;
  std::size_t n_tail = 0;
  for (double v : sample) {
    if (v > threshold)
      ++n_tail;
    else
      body_vals.push_back(v);
  }
  if (body_vals.empty()) throw std::invalid_argument("semiparametric cdf: empty body");
  SemiParametricCdf out;
  out.body = BodyCdf(body_vals, threshold);
  out.threshold = threshold;
  out.tail_fraction = static_cast<double>(n_tail) / static_cast<double>(sample.size());
  out.scale = scale;
  out.shape = shape;
  return out;
}

}  // namespace tailkit
