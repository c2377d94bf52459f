#pragma once

namespace scbcov {

double normal_cdf(double x);

/// Inverse of the standard normal distribution function on (0, 1).
/// Rational approximation (relative error ~1e-9) polished by one Halley step
/// against erfc, giving close to full double precision.
double normal_quantile(double p);

}  // namespace scbcov
