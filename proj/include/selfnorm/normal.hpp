#pragma once

#include <cmath>

#include "selfnorm/error.hpp"

namespace selfnorm {

inline double normal_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

// erfc keeps full relative accuracy in the lower tail, which the quantile
// polish below relies on.
inline double normal_cdf(double z) {
  constexpr double inv_sqrt_2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-z * inv_sqrt_2);
}

namespace detail {

// Peter Acklam's rational approximation, |relative error| < 1.2e-9.
// Handles u in (0, 0.5]; callers map the upper half by symmetry.
inline double normal_quantile_estimate(double u) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double u_low = 0.02425;
  if (u < u_low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = u - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline double normal_quantile_lower(double u) {
  double z = normal_quantile_estimate(u);
  // One Newton step against the erfc-based CDF.
  z -= (normal_cdf(z) - u) / normal_pdf(z);
  return z;
}

}  // namespace detail

// Inverse standard-normal CDF. Antisymmetry normal_quantile(u) ==
// -normal_quantile(1-u) holds exactly: the upper half is computed from the
// lower half, and 1-u is exact for u > 0.5.
inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw OutOfRange("normal_quantile: u must lie in (0,1)");
  }
  if (u == 0.5) return 0.0;
  if (u > 0.5) return -detail::normal_quantile_lower(1.0 - u);
  return detail::normal_quantile_lower(u);
}

}  // namespace selfnorm
