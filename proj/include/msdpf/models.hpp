#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msdpf/math.hpp"
#include "msdpf/rng.hpp"

namespace msdpf {

using Param = std::vector<double>;

// Axis-aligned box holding the admissible model parameters.
class Box {
 public:
  Box() = default;
  Box(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size())
      throw std::invalid_argument("Box: bound dimensions differ");
    for (std::size_t d = 0; d < lower_.size(); ++d) {
      if (!(lower_[d] <= upper_[d]))
        throw std::invalid_argument("Box: lower bound exceeds upper bound in dimension " +
                                    std::to_string(d));
    }
  }

  std::size_t dim() const { return lower_.size(); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  bool contains(std::span<const double> p) const {
    if (p.size() != dim()) return false;
    for (std::size_t d = 0; d < dim(); ++d) {
      if (!(p[d] >= lower_[d] && p[d] <= upper_[d])) return false;
    }
    return true;
  }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

// Row-major sequence of fixed-dimension vectors indexed by consecutive time
// steps. Row i carries time index start + i.
struct TimeSeries {
  int start = 1;
  std::size_t dim = 1;
  std::vector<double> data;

  TimeSeries() = default;
  TimeSeries(int start_time, std::size_t d) : start(start_time), dim(d) {}

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  bool empty() const { return size() == 0; }
  int time(std::size_t i) const { return start + static_cast<int>(i); }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  void push_back(std::span<const double> v) {
    if (v.size() != dim) throw std::invalid_argument("TimeSeries: row dimension mismatch");
    data.insert(data.end(), v.begin(), v.end());
  }

  // First n rows.
  TimeSeries prefix(std::size_t n) const {
    if (n > size()) throw std::out_of_range("TimeSeries: prefix longer than series");
    TimeSeries out(start, dim);
    out.data.assign(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n * dim));
    return out;
  }
};

using TransitionFn = std::function<void(std::span<const double> theta, std::span<const double> x_prev,
                                        int t, Rng& rng, std::span<double> x_out)>;
using ObsLogDensityFn = std::function<double(std::span<const double> theta, std::span<const double> y,
                                             std::span<const double> x, int t)>;
using ObsSamplerFn = std::function<void(std::span<const double> theta, std::span<const double> x, int t,
                                        Rng& rng, std::span<double> y_out)>;
using InitialStateFn = std::function<void(Rng& rng, std::span<double> x_out)>;

// A parameterized state-space model. Immutable once built; all randomness
// comes through the Rng argument.
struct ModelSpec {
  std::string name;
  Box param_domain;
  std::size_t state_dim = 1;
  std::size_t obs_dim = 1;
  // Time index of the initial state; the first observation is at initial_time + 1.
  int initial_time = 0;
  InitialStateFn initial_state;
  TransitionFn transition;
  ObsLogDensityFn obs_log_density;
  ObsSamplerFn sample_observation;

  void require_param(std::span<const double> theta) const {
    if (!param_domain.contains(theta))
      throw std::domain_error(name + ": parameter outside the model's parameter domain");
  }
};

struct Trajectory {
  TimeSeries states;
  TimeSeries observations;
  Param true_param;
  std::uint64_t seed = 0;

  std::size_t length() const { return observations.size(); }
};

// Draws x_{t0+1:t0+T} and y_{t0+1:t0+T}. Bit-reproducible for a fixed seed.
inline Trajectory simulate(const ModelSpec& model, std::span<const double> theta, std::size_t T,
                           std::uint64_t seed) {
  model.require_param(theta);
  if (T < 1) throw std::invalid_argument("simulate: T must be at least 1");

  Rng rng = make_rng(seed, {0x51u});
  Trajectory traj;
  traj.true_param.assign(theta.begin(), theta.end());
  traj.seed = seed;
  traj.states = TimeSeries(model.initial_time + 1, model.state_dim);
  traj.observations = TimeSeries(model.initial_time + 1, model.obs_dim);
  traj.states.data.reserve(T * model.state_dim);
  traj.observations.data.reserve(T * model.obs_dim);

  std::vector<double> x(model.state_dim), x_next(model.state_dim), y(model.obs_dim);
  model.initial_state(rng, x);
  for (std::size_t i = 0; i < T; ++i) {
    const int t = model.initial_time + 1 + static_cast<int>(i);
    model.transition(theta, x, t, rng, x_next);
    model.sample_observation(theta, x_next, t, rng, y);
    traj.states.push_back(x_next);
    traj.observations.push_back(y);
    x.swap(x_next);
  }
  return traj;
}

// x_t = theta |x_{t-1}| + v_t,  y_t = log(x_t^2) + u_t,  v, u ~ N(0, 1),  x_0 = 0.
inline ModelSpec experiment_I_model() {
  ModelSpec m;
  m.name = "exp1";
  m.param_domain = Box({0.0}, {1.0});
  m.initial_time = 0;
  m.initial_state = [](Rng&, std::span<double> x) { x[0] = 0.0; };
  m.transition = [](std::span<const double> theta, std::span<const double> x_prev, int, Rng& rng,
                    std::span<double> x_out) {
    x_out[0] = theta[0] * std::fabs(x_prev[0]) + std_normal(rng);
  };
  m.obs_log_density = [](std::span<const double>, std::span<const double> y,
                         std::span<const double> x, int) {
    if (x[0] == 0.0 || !std::isfinite(x[0])) return kNegInf;
    const double r = y[0] - std::log(x[0] * x[0]);
    return -kLogSqrt2Pi - 0.5 * r * r;
  };
  m.sample_observation = [](std::span<const double>, std::span<const double> x, int, Rng& rng,
                            std::span<double> y) {
    y[0] = std::log(x[0] * x[0]) + std_normal(rng);
  };
  return m;
}

inline int nonneg_mod(int a, int b) {
  const int r = a % b;
  return r < 0 ? r + b : r;
}

// Deterministic part of the experiment II transition into time t.
inline double exp2_transition_drift(int t) {
  return 1.0 + std::sin(4.0 * std::numbers::pi * nonneg_mod(t, 60) / 100.0);
}

// Measurement mean h_t(x).
inline double exp2_measurement_mean(int t, double x) {
  return nonneg_mod(t, 60) <= 30 ? 0.2 * x * x : 0.2 * x - 2.0;
}

struct Exp2Noise {
  static constexpr double outlier_mean_a = 20.0;
  static constexpr double outlier_mean_b = 22.0;
  static constexpr double outlier_variance = 0.1;
  static constexpr double nominal_variance = 0.01;
  static constexpr double gamma_shape = 3.0;
  static constexpr double gamma_scale = 2.0;
};

// Log of the outlier-contaminated noise density at residual r for outlier
// probability po.
inline double exp2_noise_log_density(double r, double po) {
  const double terms[3] = {
      std::log(0.5 * po) + normal_log_pdf(r, Exp2Noise::outlier_mean_a, Exp2Noise::outlier_variance),
      std::log(0.5 * po) + normal_log_pdf(r, Exp2Noise::outlier_mean_b, Exp2Noise::outlier_variance),
      std::log1p(-po) + normal_log_pdf(r, 0.0, Exp2Noise::nominal_variance)};
  return log_sum_exp(terms);
}

// x_t = 1 + sin(4 pi mod(t,60)/100) + 0.5 x_{t-1} + u_t, u ~ Gamma(3, scale 2), x_1 = 1;
// y_t = h_t(x_t) + n_t with n_t an outlier mixture weighted by theta = P_o.
inline ModelSpec experiment_II_model() {
  ModelSpec m;
  m.name = "exp2";
  m.param_domain = Box({0.0}, {1.0});
  m.initial_time = 1;
  m.initial_state = [](Rng&, std::span<double> x) { x[0] = 1.0; };
  m.transition = [](std::span<const double>, std::span<const double> x_prev, int t, Rng& rng,
                    std::span<double> x_out) {
    std::gamma_distribution<double> u(Exp2Noise::gamma_shape, Exp2Noise::gamma_scale);
    x_out[0] = exp2_transition_drift(t) + 0.5 * x_prev[0] + u(rng);
  };
  m.obs_log_density = [](std::span<const double> theta, std::span<const double> y,
                         std::span<const double> x, int t) {
    return exp2_noise_log_density(y[0] - exp2_measurement_mean(t, x[0]), theta[0]);
  };
  m.sample_observation = [](std::span<const double> theta, std::span<const double> x, int t, Rng& rng,
                            std::span<double> y) {
    double noise;
    if (uniform01(rng) < theta[0]) {
      const double centre =
          uniform01(rng) < 0.5 ? Exp2Noise::outlier_mean_a : Exp2Noise::outlier_mean_b;
      noise = centre + std::sqrt(Exp2Noise::outlier_variance) * std_normal(rng);
    } else {
      noise = std::sqrt(Exp2Noise::nominal_variance) * std_normal(rng);
    }
    y[0] = exp2_measurement_mean(t, x[0]) + noise;
  };
  return m;
}

struct LinearGaussianParams {
  double a = 0.9;
  double q = 1.0;
  double r = 1.0;
  double x0_mean = 0.0;
  double x0_var = 1.0;
};

// x_t = a x_{t-1} + v_t, v ~ N(0, q);  y_t = x_t + n_t, n ~ N(0, r);  x_0 ~ N(x0_mean, x0_var).
// Everything is fixed at construction, so the parameter vector is empty.
inline ModelSpec linear_gaussian_model(const LinearGaussianParams& p) {
  if (!(p.q > 0.0) || !(p.r > 0.0))
    throw std::domain_error("linear_gaussian_model: q and r must be positive");
  if (!(p.x0_var >= 0.0)) throw std::domain_error("linear_gaussian_model: x0_var must be >= 0");
  ModelSpec m;
  m.name = "linear_gaussian";
  m.param_domain = Box({}, {});
  m.initial_time = 0;
  const double sd0 = std::sqrt(p.x0_var), sdq = std::sqrt(p.q), sdr = std::sqrt(p.r);
  // Same constant-first association as normal_log_pdf, hoisted out of the particle loop.
  const double log_norm = -kLogSqrt2Pi - 0.5 * std::log(p.r);
  m.initial_state = [p, sd0](Rng& rng, std::span<double> x) {
    x[0] = p.x0_var > 0.0 ? p.x0_mean + sd0 * std_normal(rng) : p.x0_mean;
  };
  m.transition = [a = p.a, sdq](std::span<const double>, std::span<const double> x_prev, int, Rng& rng,
                                std::span<double> x_out) {
    x_out[0] = a * x_prev[0] + sdq * std_normal(rng);
  };
  m.obs_log_density = [r = p.r, log_norm](std::span<const double>, std::span<const double> y,
                                          std::span<const double> x, int) {
    const double d = y[0] - x[0];
    return log_norm - 0.5 * d * d / r;
  };
  m.sample_observation = [sdr](std::span<const double>, std::span<const double> x, int, Rng& rng,
                               std::span<double> y) {
    y[0] = x[0] + sdr * std_normal(rng);
  };
  return m;
}

inline ModelSpec linear_gaussian_model(double a, double q, double r) {
  return linear_gaussian_model(LinearGaussianParams{a, q, r, 0.0, 1.0});
}

}  // namespace msdpf
