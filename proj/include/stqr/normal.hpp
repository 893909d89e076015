#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace stqr::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Standard normal quantile; returns -inf/+inf at 0/1.
inline double quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

inline double logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

inline double pdf(double x, double mean, double sd) { return std::exp(logpdf(x, mean, sd)); }

inline double cdf(double x, double mean, double sd) { return cdf((x - mean) / sd); }

}  // namespace stqr::normal
