#pragma once

// Standard normal density / distribution helpers.
//
// The CDF goes through std::erfc, which glibc evaluates to within a couple of
// ulps over the whole real line; absolute error is far below 1e-12. Upper
// tails are computed directly (never as 1 - cdf) so they keep full relative
// precision down to ~1e-308.

#include <cmath>
#include <numbers>

namespace prisel::normal {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;

inline double pdf(double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z); }

// Gaussian kernel with scale h: phi_h(z) = phi(z / h) / h.
inline double pdf(double z, double h) {
  const double u = z / h;
  return inv_sqrt_2pi * std::exp(-0.5 * u * u) / h;
}

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// 1 - cdf(z) without cancellation.
inline double sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// P(a < Z < b) for a <= b, evaluated on the side of the distribution that
// avoids subtracting two numbers close to one.
inline double prob_between(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a >= 0.0) return sf(a) - sf(b);
  if (b <= 0.0) return cdf(b) - cdf(a);
  return 1.0 - sf(b) - cdf(a);
}

}  // namespace prisel::normal
