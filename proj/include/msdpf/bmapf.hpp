#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdpf/math.hpp"
#include "msdpf/models.hpp"
#include "msdpf/smc.hpp"

namespace msdpf {

// Where each model's resampling step draws its particles from.
enum class MixtureResampling {
  global_mixture,  // the K-model posterior mixture (default)
  per_model,       // the model's own cloud
};

struct BmapfOptions {
  ResampleScheme scheme = ResampleScheme::systematic;
  MixtureResampling mixing = MixtureResampling::global_mixture;
  // RNG stream per model; defaults to 0..K-1. Equal ids with equal thetas
  // give identical clouds.
  std::vector<std::uint64_t> stream_ids;
  // Lower bound on each model posterior, in log space.
  double log_posterior_floor = std::log(1e-300);
};

// Substitute log-evidence for a model whose every particle has zero likelihood
// while some other model does not.
inline const double kLogTinyEvidence = std::log(std::numeric_limits<double>::denorm_min());

struct BmapfState {
  std::vector<ParticleCloud> clouds;
  std::vector<double> model_log_posteriors;
  std::vector<Param> thetas;
  std::vector<std::size_t> n_per_model;
  std::vector<std::uint64_t> stream_ids;
  std::uint64_t seed = 0;
  int t = 0;
  BmapfOptions options;
  std::vector<std::string> warnings;

  std::size_t num_models() const { return clouds.size(); }
};

struct StepDiagnostics {
  int t = 0;
  std::vector<double> log_evidence;
  // Every model had zero likelihood; posteriors were left unchanged.
  bool degenerate = false;
};

struct PosteriorUpdate {
  std::vector<double> log_posteriors;
  bool degenerate = false;
};

// Model-posterior update pi_k <- pi_k L_k / sum_j pi_j L_j in log space.
// Results depend on the evidences only through their differences from the
// largest one, and the normalizer is summed in value order so relabelling the
// models permutes the output exactly.
inline PosteriorUpdate update_model_posteriors(std::span<const double> log_prior,
                                               std::span<const double> log_evidence,
                                               double log_floor = std::log(1e-300)) {
  const std::size_t K = log_prior.size();
  if (log_evidence.size() != K) throw std::invalid_argument("update_model_posteriors: length mismatch");
  PosteriorUpdate out;
  double hi = kNegInf;
  for (double l : log_evidence) hi = std::max(hi, l);
  if (hi == kNegInf) {
    out.log_posteriors.assign(log_prior.begin(), log_prior.end());
    out.degenerate = true;
    return out;
  }

  std::vector<double> a(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double l = log_evidence[k] == kNegInf ? kLogTinyEvidence : log_evidence[k];
    a[k] = log_prior[k] + (l - hi);
  }
  auto normalize = [](std::vector<double>& v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double z = log_sum_exp(sorted);
    for (double& x : v) x -= z;
  };
  normalize(a);
  bool clamped = false;
  for (double& x : a) {
    if (x < log_floor) {
      x = log_floor;
      clamped = true;
    }
  }
  if (clamped) normalize(a);
  out.log_posteriors = std::move(a);
  return out;
}

namespace detail {

// Model order used to lay out the global mixture: by stream id, then theta,
// then particle count. Independent of how the caller labels the models.
inline std::vector<std::size_t> canonical_model_order(const BmapfState& s) {
  std::vector<std::size_t> order(s.num_models());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (s.stream_ids[i] != s.stream_ids[j]) return s.stream_ids[i] < s.stream_ids[j];
    if (s.thetas[i] != s.thetas[j]) return s.thetas[i] < s.thetas[j];
    return s.n_per_model[i] < s.n_per_model[j];
  });
  return order;
}

}  // namespace detail

// Uniform model priors; every cloud holds n_k draws from the model's initial
// state distribution at time t0.
inline BmapfState init(const ModelSpec& model, std::vector<Param> thetas, std::vector<std::size_t> n_per_model,
                       std::uint64_t seed, BmapfOptions options, int t0) {
  const std::size_t K = thetas.size();
  if (K < 1) throw std::invalid_argument("bmapf init: need at least one model");
  if (n_per_model.size() == 1 && K > 1) n_per_model.assign(K, n_per_model[0]);
  if (n_per_model.size() != K) throw std::invalid_argument("bmapf init: particle counts do not match K");
  for (std::size_t n : n_per_model)
    if (n < 1) throw std::invalid_argument("bmapf init: particle counts must be >= 1");
  for (const auto& th : thetas) model.require_param(th);

  BmapfState s;
  if (options.stream_ids.empty()) {
    options.stream_ids.resize(K);
    std::iota(options.stream_ids.begin(), options.stream_ids.end(), std::uint64_t{0});
  }
  if (options.stream_ids.size() != K) throw std::invalid_argument("bmapf init: stream ids do not match K");
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j)
      if (thetas[i] == thetas[j])
        s.warnings.push_back("models " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                             " share the same parameter");

  s.thetas = std::move(thetas);
  s.n_per_model = std::move(n_per_model);
  s.stream_ids = options.stream_ids;
  s.seed = seed;
  s.t = t0;
  s.options = std::move(options);
  s.model_log_posteriors.assign(K, -std::log(static_cast<double>(K)));
  s.clouds.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    Rng rng = stream_rng(seed, s.stream_ids[k], t0);
    s.clouds.push_back(initial_cloud(model, s.n_per_model[k], rng));
  }
  return s;
}

inline BmapfState init(const ModelSpec& model, std::vector<Param> thetas, std::vector<std::size_t> n_per_model,
                       std::uint64_t seed, BmapfOptions options = {}) {
  return init(model, std::move(thetas), std::move(n_per_model), seed, std::move(options), model.initial_time);
}

// One filtering recursion: resample, propagate and weight each model, then
// update the model posteriors.
inline StepDiagnostics step(BmapfState& s, const ModelSpec& model, std::span<const double> y) {
  const std::size_t K = s.num_models();
  const int t = s.t + 1;
  const std::size_t dim = model.state_dim;

  std::vector<double> mix_states, mix_weights;
  if (s.options.mixing == MixtureResampling::global_mixture) {
    for (std::size_t k : detail::canonical_model_order(s)) {
      const auto& c = s.clouds[k];
      const double pk = std::exp(s.model_log_posteriors[k]);
      mix_states.insert(mix_states.end(), c.particles.begin(), c.particles.end());
      for (double w : c.weights) mix_weights.push_back(pk * w);
    }
  }

  StepDiagnostics diag;
  diag.t = t;
  diag.log_evidence.resize(K);
  std::vector<double> loglik;
  for (std::size_t k = 0; k < K; ++k) {
    Rng rng = stream_rng(s.seed, s.stream_ids[k], t);
    ParticleCloud cloud = s.options.mixing == MixtureResampling::global_mixture
                              ? resample(mix_states, dim, mix_weights, s.n_per_model[k], s.options.scheme, rng)
                              : resample(s.clouds[k], s.n_per_model[k], s.options.scheme, rng);
    propagate_in_place(cloud, model, s.thetas[k], t, rng);
    loglik.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
      loglik[i] = model.obs_log_density(s.thetas[k], y, cloud.particle(i), t);
    diag.log_evidence[k] = reweight_in_place(cloud, loglik);
    s.clouds[k] = std::move(cloud);
  }

  auto upd = update_model_posteriors(s.model_log_posteriors, diag.log_evidence, s.options.log_posterior_floor);
  s.model_log_posteriors = std::move(upd.log_posteriors);
  diag.degenerate = upd.degenerate;
  s.t = t;
  return diag;
}

// Mean of the model-averaged particle approximation.
inline std::vector<double> posterior_mean(const BmapfState& s) {
  const std::size_t dim = s.clouds.front().dim;
  std::vector<double> m(dim, 0.0);
  for (std::size_t k : detail::canonical_model_order(s)) {
    const double pk = std::exp(s.model_log_posteriors[k]);
    const auto mk = weighted_mean(s.clouds[k]);
    for (std::size_t d = 0; d < dim; ++d) m[d] += pk * mk[d];
  }
  return m;
}

struct BmapfRun {
  TimeSeries estimates;
  // T rows of K linear-scale model posteriors.
  std::vector<std::vector<double>> posterior_trace;
  std::vector<std::vector<double>> log_evidence_trace;
  std::vector<int> degenerate_steps;
  std::vector<std::string> warnings;
};

inline BmapfRun run(const ModelSpec& model, std::vector<Param> thetas, const TimeSeries& observations,
                    std::vector<std::size_t> n_per_model, std::uint64_t seed, BmapfOptions options = {}) {
  if (observations.empty()) throw std::invalid_argument("bmapf run: no observations");
  if (observations.dim != model.obs_dim) throw std::invalid_argument("bmapf run: observation dimension mismatch");
  BmapfState s = init(model, std::move(thetas), std::move(n_per_model), seed, std::move(options),
                      observations.start - 1);
  BmapfRun out;
  out.warnings = s.warnings;
  out.estimates = TimeSeries(observations.start, model.state_dim);
  out.posterior_trace.reserve(observations.size());
  out.log_evidence_trace.reserve(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    auto diag = step(s, model, observations.row(i));
    if (diag.degenerate) out.degenerate_steps.push_back(diag.t);
    out.estimates.push_back(posterior_mean(s));
    std::vector<double> pi(s.num_models());
    for (std::size_t k = 0; k < pi.size(); ++k) pi[k] = std::exp(s.model_log_posteriors[k]);
    out.posterior_trace.push_back(std::move(pi));
    out.log_evidence_trace.push_back(std::move(diag.log_evidence));
  }
  return out;
}

}  // namespace msdpf
