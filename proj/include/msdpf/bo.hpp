#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdpf/gp.hpp"
#include "msdpf/models.hpp"
#include "msdpf/rng.hpp"

namespace msdpf {

struct BoConfig {
  double alpha = 2.0;
  std::size_t budget = 40;
  std::size_t n_init = 5;
  std::size_t acq_grid = 512;
  // noise_variance is in objective units; it is rescaled together with the
  // values when they are standardized.
  KernelConfig kernel;
  std::uint64_t seed = 0;
  bool standardize = true;

  void validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("BoConfig: alpha must be >= 0");
    if (n_init < 1) throw std::invalid_argument("BoConfig: n_init must be >= 1");
    if (budget < n_init) throw std::invalid_argument("BoConfig: budget must be >= n_init");
    if (acq_grid < 2) throw std::invalid_argument("BoConfig: acq_grid must be >= 2");
    kernel.validate();
  }
};

inline double ucb(double mean, double stddev, double alpha) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("ucb: stddev must be >= 0");
  return mean + alpha * stddev;
}

struct BoRecord {
  std::size_t iter = 0;
  Param theta;
  double value = 0.0;  // as returned by the objective
  bool is_incumbent = false;
};

struct BoResult {
  Param theta_best;
  double f_best = 0.0;
  // Evaluated points with -inf values clamped as they were for GP fitting.
  GpDataset history;
  std::vector<BoRecord> records;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline Param uniform_point(const Box& box, Rng& rng) {
  Param p(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d)
    p[d] = box.lower()[d] + uniform01(rng) * (box.upper()[d] - box.lower()[d]);
  return p;
}

// Latin-hypercube design; in one dimension a jittered grid in shuffled order.
inline std::vector<Param> stratified_design(const Box& box, std::size_t n, Rng& rng) {
  std::vector<Param> pts(n, Param(box.dim()));
  std::vector<std::size_t> strata(n);
  for (std::size_t d = 0; d < box.dim(); ++d) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(strata[i - 1], strata[std::min(j, i - 1)]);
    }
    const double width = box.upper()[d] - box.lower()[d];
    for (std::size_t i = 0; i < n; ++i)
      pts[i][d] = box.lower()[d] + width * (static_cast<double>(strata[i]) + uniform01(rng)) / static_cast<double>(n);
  }
  return pts;
}

// Replaces -inf by (smallest finite value - 100); all -inf becomes 0.
inline std::vector<double> clamp_values(std::span<const double> raw) {
  double lo = std::numeric_limits<double>::infinity();
  for (double v : raw)
    if (std::isfinite(v)) lo = std::min(lo, v);
  const double floor_value = std::isfinite(lo) ? lo - 100.0 : 0.0;
  std::vector<double> out(raw.begin(), raw.end());
  for (double& v : out)
    if (!std::isfinite(v)) v = floor_value;
  return out;
}

}  // namespace detail

// GP-UCB maximization over a box: a stratified initial design of n_init
// points, then one UCB-argmax query per iteration over a fresh uniform
// candidate set until budget evaluations exist. Returns the best observed
// point.
inline BoResult maximize(const Objective& objective, const Box& domain, const BoConfig& cfg) {
  cfg.validate();
  if (domain.dim() == 0) throw std::invalid_argument("maximize: empty domain");
  if (cfg.kernel.length_scales.size() != domain.dim())
    throw std::invalid_argument("maximize: kernel dimension does not match domain");
  for (std::size_t d = 0; d < domain.dim(); ++d)
    if (!(domain.lower()[d] < domain.upper()[d])) throw std::invalid_argument("maximize: degenerate domain");

  constexpr int kMaxRetries = 3;
  Rng rng = make_rng(cfg.seed, {0xB0u});
  std::vector<Param> points;
  std::vector<double> raw;

  auto evaluate = [&](Param p) {
    for (int attempt = 0;; ++attempt) {
      const double v = objective(p);
      if (!std::isnan(v) && v != std::numeric_limits<double>::infinity()) {
        points.push_back(std::move(p));
        raw.push_back(v);
        return;
      }
      if (attempt == kMaxRetries)
        throw std::runtime_error("maximize: objective returned NaN after " + std::to_string(kMaxRetries) +
                                 " retries");
      p = detail::uniform_point(domain, rng);
    }
  };

  for (auto& p : detail::stratified_design(domain, cfg.n_init, rng)) evaluate(std::move(p));

  while (points.size() < cfg.budget) {
    auto values = detail::clamp_values(raw);
    GpDataset data;
    data.points = points;
    data.kernel = cfg.kernel;
    if (cfg.standardize) {
      const double n = static_cast<double>(values.size());
      const double mu = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double var = 0.0;
      for (double v : values) var += (v - mu) * (v - mu);
      double sd = std::sqrt(var / n);
      if (!(sd > 0.0)) sd = 1.0;
      for (double& v : values) v = (v - mu) / sd;
      data.kernel.noise_variance = cfg.kernel.noise_variance / (sd * sd);
    }
    data.values = std::move(values);
    const GpPosterior gp(data);

    Param best_candidate;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cfg.acq_grid; ++c) {
      Param cand = detail::uniform_point(domain, rng);
      const auto pred = gp.predict(cand);
      const double score = ucb(pred.mean, std::sqrt(pred.variance), cfg.alpha);
      if (score > best_score) {
        best_score = score;
        best_candidate = std::move(cand);
      }
    }
    evaluate(std::move(best_candidate));
  }

  BoResult res;
  std::size_t best = 0;
  for (std::size_t i = 1; i < raw.size(); ++i)
    if (raw[i] > raw[best]) best = i;
  res.theta_best = points[best];
  res.f_best = raw[best];
  res.history.points = points;
  res.history.values = detail::clamp_values(raw);
  res.history.kernel = cfg.kernel;
  res.records.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) res.records.push_back({i + 1, points[i], raw[i], i == best});
  return res;
}

}  // namespace msdpf
