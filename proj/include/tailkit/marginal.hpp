#pragma once

#include "tailkit/gpd_gam.hpp"

namespace tailkit {

// Marginal CDF of the response: the conditional model averaged uniformly over
// the fit's retained covariate rows.  Only valid in the joint tail region;
// y at or below the threshold of any retained row raises std::domain_error
// (central quantiles need the sub-threshold body instead).
double marginal_cdf(const GpdFit& fit, const Series& data, double y);

// Inverse of marginal_cdf by bracketed bisection, to 1e-8 relative width.
// Throws NumericError with the bracket when p lies outside the tail regime
// or the upper bracket cannot be expanded to cover p.
double marginal_quantile(const GpdFit& fit, const Series& data, double p);

}  // namespace tailkit
