#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "gaspipe/core.hpp"

namespace gaspipe {

// ---------------------------------------------------------------------------
// Counter-based noise stream.
//
// Sensor noise is generated from a stateless hash of (seed, stream, step,
// draw) so that replays and paired nominal/attacked twins see identical
// noise regardless of evaluation order.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t step, std::uint64_t draw) {
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ step);
  h = splitmix64(h ^ draw);
  return h;
}

/// Uniform deviate in (0,1), open at both ends.
inline double counter_u01(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t step, std::uint64_t draw) {
  const std::uint64_t h = counter_hash(seed, stream, step, draw);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal deviate, Box-Muller over two counter draws.
inline double counter_gauss(std::uint64_t seed, std::uint64_t stream,
                            std::uint64_t step) {
  const double u1 = counter_u01(seed, stream, step, 0);
  const double u2 = counter_u01(seed, stream, step, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// ---------------------------------------------------------------------------
// Chi-square distribution, used by the whitened bad-data detector.
// ---------------------------------------------------------------------------

namespace detail {

// Regularized lower incomplete gamma P(a,x), series for x < a+1 and
// continued fraction otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw ParameterError("gamma_p: invalid arguments");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * kEps)
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    throw SolverError("gamma_p: series did not converge");
  }
  // Lentz continued fraction for Q(a,x); P = 1 - Q.
  const double kFpMin = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

/// CDF of the chi-square distribution with `dof` degrees of freedom.
inline double chi2_cdf(int dof, double x) {
  if (dof <= 0) throw ParameterError("chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return detail::gamma_p(0.5 * dof, 0.5 * x);
}

/// Inverse chi-square CDF by bisection; p in (0,1).
inline double chi2_quantile(int dof, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("chi2_quantile: p outside (0,1)");
  double lo = 0.0;
  double hi = static_cast<double>(dof);
  while (chi2_cdf(dof, hi) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(dof, mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace gaspipe
