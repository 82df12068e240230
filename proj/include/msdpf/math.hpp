#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace msdpf {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(2*pi)/2

// log(sum_i exp(v_i)) with max-shift. Empty input or all -inf gives -inf.
inline double log_sum_exp(std::span<const double> v) {
  double hi = kNegInf;
  for (double a : v) hi = std::max(hi, a);
  if (hi == kNegInf) return kNegInf;
  if (hi == std::numeric_limits<double>::infinity()) return hi;
  double s = 0.0;
  for (double a : v) s += std::exp(a - hi);
  return hi + std::log(s);
}

// Gaussian log-density with the second parameter a variance.
inline double normal_log_pdf(double x, double mean, double variance) {
  const double r = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * r * r / variance;
}

}  // namespace msdpf
