#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdpf/bo.hpp"
#include "msdpf/models.hpp"
#include "msdpf/parallel.hpp"
#include "msdpf/smc.hpp"

namespace msdpf {

// Nested sub-dataset lengths m_k = floor(m (K - k + 1) / K), k = 1..K.
struct MsdPlan {
  std::size_t m = 0;
  std::size_t K = 0;
  std::vector<std::size_t> sub_lengths;
};

inline MsdPlan plan(std::size_t m, std::size_t K) {
  if (K < 1) throw std::invalid_argument("plan: K must be >= 1");
  if (m < K)
    throw std::invalid_argument("plan: need at least as many observations as components (m=" + std::to_string(m) +
                                ", K=" + std::to_string(K) + ")");
  MsdPlan p{m, K, {}};
  p.sub_lengths.reserve(K);
  for (std::size_t k = 1; k <= K; ++k) p.sub_lengths.push_back(m * (K - k + 1) / K);
  return p;
}

// PF estimate of log p_theta(y_{1:m_k}).
inline double objective_eval(const ModelSpec& model, std::span<const double> theta, const TimeSeries& prefix,
                             std::size_t n, std::uint64_t seed) {
  return run_pf(model, theta, prefix, n, seed).total_log_evidence;
}

// BO defaults for noisy log-evidence objectives on a unit parameter range.
inline BoConfig default_design_bo_config() {
  BoConfig cfg;
  cfg.budget = 40;
  cfg.kernel.length_scales = {0.1};
  cfg.kernel.noise_variance = 1.0;
  return cfg;
}

struct DesignedComponent {
  std::size_t k = 0;  // 1-based
  std::size_t m_k = 0;
  Param theta;
  double f_best = 0.0;
  BoResult bo;
};

struct ModelSet {
  std::vector<DesignedComponent> components;

  std::vector<Param> thetas() const {
    std::vector<Param> out;
    out.reserve(components.size());
    for (const auto& c : components) out.push_back(c.theta);
    return out;
  }
};

// One GP-UCB search per nested prefix y_{1:m_k}. Every objective query gets a
// fresh PF seed derived from (seed, k, query index), and each search its own
// BO stream, so the result does not depend on `threads`.
inline ModelSet design_model_set(const ModelSpec& model, const TimeSeries& observations, std::size_t K,
                                 const BoConfig& bo_cfg, std::size_t n, std::uint64_t seed,
                                 std::size_t threads = 1) {
  const MsdPlan pl = plan(observations.size(), K);
  if (model.param_domain.dim() == 0) throw std::invalid_argument("design_model_set: model has no parameters");
  ModelSet set;
  set.components.resize(K);
  parallel_for(K, threads, [&](std::size_t idx) {
    const std::size_t k = idx + 1;
    const TimeSeries prefix = observations.prefix(pl.sub_lengths[idx]);
    std::uint64_t query = 0;
    const Objective f = [&](std::span<const double> theta) {
      return objective_eval(model, theta, prefix, n, derive_seed(seed, {k, query++}));
    };
    BoConfig cfg = bo_cfg;
    cfg.seed = derive_seed(seed, {k, 0xB0B0u});
    BoResult bo = maximize(f, model.param_domain, cfg);
    auto& comp = set.components[idx];
    comp.k = k;
    comp.m_k = pl.sub_lengths[idx];
    comp.theta = bo.theta_best;
    comp.f_best = bo.f_best;
    comp.bo = std::move(bo);
  });
  return set;
}

}  // namespace msdpf
