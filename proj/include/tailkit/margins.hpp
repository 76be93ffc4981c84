#pragma once

#include <string>
#include <vector>

#include "tailkit/common.hpp"

namespace tailkit {

enum class MarginScale { uniform, exponential, gumbel, laplace };

MarginScale margin_scale_from_string(const std::string& name);
std::string to_string(MarginScale m);

// F, 1-F, and their inverses.  Survival forms are computed directly so deep
// tails keep relative precision.
double margin_cdf(MarginScale m, double x);
double margin_survival(MarginScale m, double x);
double margin_quantile(MarginScale m, double p);
double margin_quantile_from_survival(MarginScale m, double s);

// Probability-integral transform between margin scales.  Throws
// std::domain_error when value lies outside the support of `from`.
// Probabilities are clamped away from {0,1} by kProbClamp before inversion.
double transform_margin(double value, MarginScale from, MarginScale to);

// rank(x)/(n+1) with tied ranks averaged; x below/above all sample points
// gets rank 0/n.
double empirical_cdf(const std::vector<double>& sample, double x);

// Column of average ranks mapped to (0,1) by r/(n+1).
std::vector<double> ranks_to_uniform(const std::vector<double>& sample);

// Piecewise-linear CDF through the order statistics at i/(m+1), pinned to 1
// at a given upper anchor.  Used for the sub-threshold body of semiparametric
// models; strictly increasing, hence invertible.
class BodyCdf {
 public:
  BodyCdf() = default;
  BodyCdf(std::vector<double> values, double upper_anchor);

  double cdf(double y) const;       // in [0,1], reaches 1 at the anchor
  double quantile(double p) const;  // inverse, p in [0,1]
  bool empty() const { return ys_.empty(); }

 private:
  std::vector<double> ys_;  // lower anchor, sorted values, upper anchor
  std::vector<double> ps_;  // 0, i/(m+1), 1
};

// Body + generalized Pareto tail above a threshold.  tail_fraction is the
// probability mass assigned to the tail component.
struct SemiParametricCdf {
  BodyCdf body;
  double threshold = 0.0;
  double tail_fraction = 0.0;
  double scale = 1.0;
  double shape = 0.0;

  double cdf(double y) const;
  double quantile(double p) const;
};

SemiParametricCdf make_semiparametric_cdf(const std::vector<double>& sample,
                                          double threshold, double scale, double shape);

}  // namespace tailkit
