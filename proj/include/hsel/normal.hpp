#pragma once

#include <cmath>
#include <numbers>

namespace hsel {

inline double norm_pdf(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

// log Phi(u), stable deep into the left tail. erfc underflows around
// u ~ -37; past that an asymptotic expansion of the Mills ratio takes over.
inline double log_norm_cdf(double u) {
  if (u > -36.0) {
    return std::log(0.5 * std::erfc(-u / std::numbers::sqrt2));
  }
  const double u2 = u * u;
  // Phi(u) ~ phi(u)/(-u) * (1 - 1/u^2 + 3/u^4 - 15/u^6)
  const double series = 1.0 - 1.0 / u2 + 3.0 / (u2 * u2) - 15.0 / (u2 * u2 * u2);
  return -0.5 * u2 - std::log(-u) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

// Inverse Mills ratio phi(u)/Phi(u); ~ -u for large negative u.
inline double inverse_mills(double u) {
  if (u < -36.0) {
    const double u2 = u * u;
    const double series = 1.0 - 1.0 / u2 + 3.0 / (u2 * u2) - 15.0 / (u2 * u2 * u2);
    return -u / series;
  }
  const double log_pdf = -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi);
  return std::exp(log_pdf - log_norm_cdf(u));
}

}  // namespace hsel
