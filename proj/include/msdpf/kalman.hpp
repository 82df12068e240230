#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "msdpf/math.hpp"

namespace msdpf {

// Scalar linear-Gaussian model x_t = a x_{t-1} + N(0, q), y_t = x_t + N(0, r).
struct KalmanState {
  double mean = 0.0;
  double var = 0.0;
};

struct KalmanResult {
  double log_evidence = 0.0;
  KalmanState filtered;  // after the last observation
  std::vector<double> filtered_means;
  std::vector<double> step_log_evidence;
};

// Exact log p(y_{1:T}) via the predictive decomposition sum_t log N(y_t; yhat_t, S_t),
// starting from the filtered state `prior` of the step before y_1.
inline KalmanResult kalman_filter(double a, double q, double r, KalmanState prior, std::span<const double> y) {
  if (!(q > 0.0) || !(r > 0.0)) throw std::domain_error("kalman_filter: q and r must be positive");
  KalmanResult res;
  res.filtered = prior;
  res.filtered_means.reserve(y.size());
  for (double yt : y) {
    const double m_pred = a * res.filtered.mean;
    const double p_pred = a * a * res.filtered.var + q;
    const double s = p_pred + r;
    const double le = normal_log_pdf(yt, m_pred, s);
    const double gain = p_pred / s;
    res.filtered.mean = m_pred + gain * (yt - m_pred);
    res.filtered.var = (1.0 - gain) * p_pred;
    res.log_evidence += le;
    res.step_log_evidence.push_back(le);
    res.filtered_means.push_back(res.filtered.mean);
  }
  return res;
}

inline double kalman_log_evidence(double a, double q, double r, double x0_mean, double x0_var,
                                  std::span<const double> y) {
  return kalman_filter(a, q, r, {x0_mean, x0_var}, y).log_evidence;
}

}  // namespace msdpf
