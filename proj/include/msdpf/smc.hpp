#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdpf/math.hpp"
#include "msdpf/models.hpp"
#include "msdpf/rng.hpp"

namespace msdpf {

enum class ResampleScheme { systematic, multinomial };

// Weighted particle set for one model hypothesis at one time step.
// particles is row-major, n rows of dim values.
struct ParticleCloud {
  std::size_t dim = 1;
  std::vector<double> particles;
  std::vector<double> log_weights_unnormalized;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> particle(std::size_t i) const { return {particles.data() + i * dim, dim}; }
  std::span<double> particle(std::size_t i) { return {particles.data() + i * dim, dim}; }

  static ParticleCloud uniform(std::vector<double> states, std::size_t dim) {
    if (dim == 0 || states.empty() || states.size() % dim != 0)
      throw std::invalid_argument("ParticleCloud: state buffer does not hold whole particles");
    ParticleCloud c;
    c.dim = dim;
    c.particles = std::move(states);
    const std::size_t n = c.particles.size() / dim;
    c.weights.assign(n, 1.0 / static_cast<double>(n));
    c.log_weights_unnormalized.assign(n, -std::log(static_cast<double>(n)));
    return c;
  }
};

// Per-(stream, time) generator. Both the single-model filter and the
// multi-model filter draw from these so their outputs coincide at K = 1.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream_id, int t) {
  return make_rng(seed, {stream_id, static_cast<std::uint64_t>(static_cast<std::int64_t>(t))});
}

inline ParticleCloud initial_cloud(const ModelSpec& model, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("initial_cloud: particle count must be >= 1");
  std::vector<double> states(n * model.state_dim);
  for (std::size_t i = 0; i < n; ++i)
    model.initial_state(rng, std::span<double>(states.data() + i * model.state_dim, model.state_dim));
  return ParticleCloud::uniform(std::move(states), model.state_dim);
}

// Advances every particle through the transition; weights untouched.
inline void propagate_in_place(ParticleCloud& cloud, const ModelSpec& model,
                               std::span<const double> theta, int t, Rng& rng) {
  double next_1d;
  std::vector<double> next_nd(cloud.dim > 1 ? cloud.dim : 0);
  const std::span<double> next = cloud.dim > 1 ? std::span<double>(next_nd) : std::span<double>(&next_1d, 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto x = cloud.particle(i);
    model.transition(theta, x, t, rng, next);
    std::copy(next.begin(), next.end(), x.begin());
  }
}

inline ParticleCloud propagate(ParticleCloud cloud, const ModelSpec& model, std::span<const double> theta,
                               int t, Rng& rng) {
  propagate_in_place(cloud, model, theta, t, rng);
  return cloud;
}

// Reweights a cloud whose incoming weights are normalized, given per-particle
// log-likelihoods. Returns log sum_i w_i exp(loglik_i). If every likelihood is
// zero the weights become uniform and -inf is returned.
inline double reweight_in_place(ParticleCloud& cloud, std::span<const double> loglik) {
  const std::size_t n = cloud.size();
  double hi = kNegInf;
  for (double l : loglik) hi = std::max(hi, l);
  cloud.log_weights_unnormalized.resize(n);
  double last_w = -1.0, last_log_w = 0.0;  // weights are usually all equal after resampling
  for (std::size_t i = 0; i < n; ++i) {
    if (cloud.weights[i] != last_w) {
      last_w = cloud.weights[i];
      last_log_w = std::log(last_w);
    }
    cloud.log_weights_unnormalized[i] = last_log_w + loglik[i];
  }

  if (hi == kNegInf || std::isnan(hi)) {
    std::fill(cloud.weights.begin(), cloud.weights.end(), 1.0 / static_cast<double>(n));
    return kNegInf;
  }
  double prior_mass = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    prior_mass += cloud.weights[i];
    cloud.weights[i] *= std::exp(loglik[i] - hi);
    mass += cloud.weights[i];
  }
  if (!(mass > 0.0)) {
    std::fill(cloud.weights.begin(), cloud.weights.end(), 1.0 / static_cast<double>(n));
    return kNegInf;
  }
  for (double& w : cloud.weights) w /= mass;
  // Dividing by the incoming mass cancels its rounding error, so a cloud with
  // identical likelihoods reports exactly that likelihood.
  return hi + std::log(mass / prior_mass);
}

struct WeightedCloud {
  ParticleCloud cloud;
  double log_evidence;
};

inline WeightedCloud weight_and_evidence(ParticleCloud cloud, const ModelSpec& model,
                                         std::span<const double> theta, std::span<const double> y, int t) {
  std::vector<double> loglik(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) loglik[i] = model.obs_log_density(theta, y, cloud.particle(i), t);
  const double le = reweight_in_place(cloud, loglik);
  return {std::move(cloud), le};
}

// Draws n_out equally weighted particles from a discrete weighted mixture into
// out, reusing its storage. Weights need not be normalized but must be
// non-negative with a positive sum. cum is scratch space.
inline void resample_into(std::span<const double> states, std::size_t dim, std::span<const double> weights,
                          std::size_t n_out, ResampleScheme scheme, Rng& rng, ParticleCloud& out,
                          std::vector<double>& cum) {
  const std::size_t n_in = weights.size();
  if (n_out < 1) throw std::invalid_argument("resample: n_out must be >= 1");
  if (dim == 0 || states.size() != n_in * dim)
    throw std::invalid_argument("resample: states and weights disagree in length");

  cum.resize(n_in);
  double total = 0.0;
  std::size_t last_positive = n_in;
  for (std::size_t i = 0; i < n_in; ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw std::invalid_argument("resample: weights must be finite and non-negative");
    total += weights[i];
    cum[i] = total;
    if (weights[i] > 0.0) last_positive = i;
  }
  if (!(total > 0.0)) throw std::invalid_argument("resample: weights sum to zero");

  out.dim = dim;
  out.particles.resize(n_out * dim);
  auto take = [&](std::size_t j, std::size_t src) {
    std::copy_n(states.begin() + static_cast<std::ptrdiff_t>(src * dim), dim,
                out.particles.begin() + static_cast<std::ptrdiff_t>(j * dim));
  };

  if (scheme == ResampleScheme::systematic) {
    const double step = total / static_cast<double>(n_out);
    double pos = uniform01(rng) * step;
    std::size_t i = 0;
    for (std::size_t j = 0; j < n_out; ++j) {
      while (i < last_positive && pos >= cum[i]) ++i;
      take(j, i);
      pos += step;
    }
  } else {
    for (std::size_t j = 0; j < n_out; ++j) {
      const double u = uniform01(rng) * total;
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      std::size_t i = static_cast<std::size_t>(it - cum.begin());
      take(j, std::min(i, last_positive));
    }
  }
  out.weights.assign(n_out, 1.0 / static_cast<double>(n_out));
  out.log_weights_unnormalized.assign(n_out, -std::log(static_cast<double>(n_out)));
}

inline ParticleCloud resample(std::span<const double> states, std::size_t dim, std::span<const double> weights,
                              std::size_t n_out, ResampleScheme scheme, Rng& rng) {
  ParticleCloud out;
  std::vector<double> cum;
  resample_into(states, dim, weights, n_out, scheme, rng, out, cum);
  return out;
}

inline ParticleCloud resample(const ParticleCloud& cloud, std::size_t n_out, ResampleScheme scheme, Rng& rng) {
  return resample(cloud.particles, cloud.dim, cloud.weights, n_out, scheme, rng);
}

inline std::vector<double> weighted_mean(const ParticleCloud& cloud) {
  std::vector<double> m(cloud.dim, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto x = cloud.particle(i);
    for (std::size_t d = 0; d < cloud.dim; ++d) m[d] += cloud.weights[i] * x[d];
  }
  return m;
}

struct PfResult {
  double total_log_evidence = 0.0;
  std::vector<double> step_log_evidence;
  TimeSeries filtered_means;
};

// Bootstrap particle filter resampling at every step. The initial cloud is
// drawn from the model prior at time observations.start - 1.
inline PfResult run_pf(const ModelSpec& model, std::span<const double> theta, const TimeSeries& observations,
                       std::size_t n, std::uint64_t seed, ResampleScheme scheme = ResampleScheme::systematic,
                       std::uint64_t stream_id = 0) {
  model.require_param(theta);
  if (n < 1) throw std::invalid_argument("run_pf: particle count must be >= 1");
  if (observations.empty()) throw std::invalid_argument("run_pf: no observations");
  if (observations.dim != model.obs_dim) throw std::invalid_argument("run_pf: observation dimension mismatch");

  PfResult res;
  res.filtered_means = TimeSeries(observations.start, model.state_dim);
  res.step_log_evidence.reserve(observations.size());

  Rng init_rng = stream_rng(seed, stream_id, observations.start - 1);
  ParticleCloud cloud = initial_cloud(model, n, init_rng);
  ParticleCloud spare;
  std::vector<double> loglik(n), cum;
  for (std::size_t s = 0; s < observations.size(); ++s) {
    const int t = observations.time(s);
    Rng rng = stream_rng(seed, stream_id, t);
    resample_into(cloud.particles, cloud.dim, cloud.weights, n, scheme, rng, spare, cum);
    std::swap(cloud, spare);
    propagate_in_place(cloud, model, theta, t, rng);
    const auto y = observations.row(s);
    for (std::size_t i = 0; i < n; ++i) loglik[i] = model.obs_log_density(theta, y, cloud.particle(i), t);
    const double le = reweight_in_place(cloud, loglik);
    res.step_log_evidence.push_back(le);
    res.total_log_evidence += le;
    res.filtered_means.push_back(weighted_mean(cloud));
  }
  return res;
}

}  // namespace msdpf
