#pragma once

// Log-space special functions used throughout the node integrals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace hapt {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Thread-safe log|Gamma(x)|; glibc's lgamma writes the global signgam.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

// log(Gamma(a + m) / Gamma(a)) for integer m >= 0, a > 0, given log(a).
// Short runs use the product form, which keeps full precision when a is
// large relative to m; long runs fall back to log-gamma differences.
inline double log_rising(double a, double log_a, std::int64_t m) {
  if (m == 0) return 0.0;
  if (!(a > 1e-300)) {
    // a underflows: Gamma(a + m) / Gamma(a) = a * (a+1)...(a+m-1) ~ a * (m-1)!
    return log_a + log_gamma(static_cast<double>(m));
  }
  if (m <= 24 && a < 1e10) {
    double prod = 1.0;
    double acc = 0.0;
    for (std::int64_t j = 0; j < m; ++j) {
      prod *= a + static_cast<double>(j);
      if (prod > 1e250) {
        acc += std::log(prod);
        prod = 1.0;
      }
    }
    return acc + std::log(prod);
  }
  if (a >= 1e4) {
    // Stirling difference; avoids cancelling two huge log-gammas.
    const double md = static_cast<double>(m);
    const double b = a + md;
    auto corr = [](double x) {
      const double r = 1.0 / (x * x);
      return (1.0 / 12.0 - r * (1.0 / 360.0 - r / 1260.0)) / x;
    };
    return (a - 0.5) * std::log1p(md / a) + md * std::log(b) - md + (corr(b) - corr(a));
  }
  return log_gamma(a + static_cast<double>(m)) - log_gamma(a);
}

inline double log_rising(double a, std::int64_t m) { return log_rising(a, std::log(a), m); }

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double log_add(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace hapt
