#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdpf/bmapf.hpp"
#include "msdpf/bo.hpp"
#include "msdpf/bomsd.hpp"
#include "msdpf/io.hpp"
#include "msdpf/kalman.hpp"
#include "msdpf/models.hpp"
#include "msdpf/parallel.hpp"

namespace msdpf::bench {

enum class Experiment { exp1, exp2, linear_gaussian_oracle };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::exp1: return "exp1";
    case Experiment::exp2: return "exp2";
    case Experiment::linear_gaussian_oracle: return "linear_gaussian_oracle";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "exp1") return Experiment::exp1;
  if (s == "exp2") return Experiment::exp2;
  if (s == "linear_gaussian_oracle") return Experiment::linear_gaussian_oracle;
  throw std::invalid_argument("unknown experiment '" + s + "'");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::exp1;
  std::vector<std::size_t> K_values;
  std::vector<double> Po_values;
  std::size_t runs = 100;
  std::size_t T = 500;
  std::size_t m_hist = 200;
  std::size_t n_particles = 200;         // per model, in the filters under test
  std::size_t design_particles = 500;    // per objective evaluation in model-set design
  double theta_star = 0.657;             // exp1 generating parameter
  BoConfig bo = default_design_bo_config();
  LinearGaussianParams linear_gaussian;  // oracle experiment only
  std::uint64_t root_seed = 1;
  std::size_t threads = 1;

  static ExperimentConfig exp1_defaults() {
    ExperimentConfig c;
    c.experiment = Experiment::exp1;
    for (std::size_t k = 2; k <= 20; ++k) c.K_values.push_back(k);
    c.T = 500;
    return c;
  }
  static ExperimentConfig exp2_defaults() {
    ExperimentConfig c;
    c.experiment = Experiment::exp2;
    c.K_values = {3};
    c.Po_values = {0.1, 0.3, 0.5, 0.7, 0.9};
    c.T = 599;
    return c;
  }
  static ExperimentConfig oracle_defaults() {
    ExperimentConfig c;
    c.experiment = Experiment::linear_gaussian_oracle;
    c.K_values = {1};
    c.T = 20;
    c.runs = 50;
    return c;
  }

  void validate() const {
    if (runs < 1) throw std::invalid_argument("ExperimentConfig: runs must be >= 1");
    if (T < 1) throw std::invalid_argument("ExperimentConfig: T must be >= 1");
    if (n_particles < 1 || design_particles < 1)
      throw std::invalid_argument("ExperimentConfig: particle counts must be >= 1");
    if (K_values.empty()) throw std::invalid_argument("ExperimentConfig: no K values");
    if (experiment != Experiment::linear_gaussian_oracle) {
      for (std::size_t K : K_values) {
        if (K < 2) throw std::invalid_argument("ExperimentConfig: comparisons need K >= 2");
        if (m_hist < K) throw std::invalid_argument("ExperimentConfig: m_hist must be >= K");
      }
    }
    if (experiment == Experiment::exp2) {
      if (Po_values.empty()) throw std::invalid_argument("ExperimentConfig: no P_o values");
      for (double p : Po_values)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ExperimentConfig: P_o outside [0, 1]");
    }
    bo.validate();
  }
};

struct RunRow {
  std::string method;
  std::size_t K = 0;
  std::optional<double> Po;
  std::size_t run = 0;
  double mse = 0.0;
};

struct Cell {
  std::string method;
  std::size_t K = 0;
  std::optional<double> Po;
  double mse_mean = 0.0;
  double mse_std = 0.0;  // sample standard deviation across runs
  std::size_t n_runs = 0;
};

struct BenchResult {
  Experiment experiment = Experiment::exp1;
  std::vector<RunRow> rows;
  std::vector<Cell> cells;

  // Per-run MSEs of one (method, K, Po) cell, ordered by run index.
  std::vector<double> series(const std::string& method, std::size_t K, std::optional<double> Po = {}) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.method == method && r.K == K && r.Po == Po) out.push_back(r.mse);
    return out;
  }
};

inline double mse(const TimeSeries& estimates, const TimeSeries& truth) {
  if (estimates.size() != truth.size() || estimates.dim != truth.dim)
    throw std::invalid_argument("mse: estimate and truth sequences differ in shape");
  if (truth.empty()) throw std::invalid_argument("mse: empty sequences");
  double s = 0.0;
  for (std::size_t i = 0; i < estimates.data.size(); ++i) {
    const double e = estimates.data[i] - truth.data[i];
    s += e * e;
  }
  return s / static_cast<double>(truth.size());
}

namespace detail {

enum SeedTag : std::uint64_t { kTest = 1, kHist = 2, kBaseline = 3, kDesign = 4, kFilter = 5 };

inline std::vector<Param> uniform_thetas(const Box& box, std::size_t K, std::uint64_t seed) {
  Rng rng = make_rng(seed, {});
  std::vector<Param> out;
  for (std::size_t k = 0; k < K; ++k) out.push_back(msdpf::detail::uniform_point(box, rng));
  return out;
}

inline void aggregate(BenchResult& res) {
  res.cells.clear();
  for (const auto& r : res.rows) {
    bool seen = false;
    for (const auto& c : res.cells) seen = seen || (c.method == r.method && c.K == r.K && c.Po == r.Po);
    if (seen) continue;
    const auto v = res.series(r.method, r.K, r.Po);
    Cell c{r.method, r.K, r.Po, 0.0, 0.0, v.size()};
    c.mse_mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - c.mse_mean) * (x - c.mse_mean);
      c.mse_std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    res.cells.push_back(c);
  }
}

struct PairedOutcome {
  double baseline = 0.0;
  double msd = 0.0;
};

// One paired run: both filters see the same test trajectory and filter seed.
inline PairedOutcome paired_run(const ModelSpec& model, const Param& truth_param, std::size_t K,
                                const ExperimentConfig& cfg, std::uint64_t run_seed) {
  const Trajectory test = simulate(model, truth_param, cfg.T, derive_seed(run_seed, {kTest}));
  const Trajectory hist = simulate(model, truth_param, cfg.m_hist, derive_seed(run_seed, {kHist}));
  const auto baseline_thetas = uniform_thetas(model.param_domain, K, derive_seed(run_seed, {kBaseline}));
  const auto designed =
      design_model_set(model, hist.observations, K, cfg.bo, cfg.design_particles, derive_seed(run_seed, {kDesign}));
  const std::uint64_t filter_seed = derive_seed(run_seed, {kFilter});
  const auto base = run(model, baseline_thetas, test.observations, {cfg.n_particles}, filter_seed);
  const auto msd = run(model, designed.thetas(), test.observations, {cfg.n_particles}, filter_seed);
  return {mse(base.estimates, test.states), mse(msd.estimates, test.states)};
}

inline BenchResult run_paired_grid(const ExperimentConfig& cfg, const ModelSpec& model,
                                   const std::vector<std::size_t>& Ks, const std::vector<Param>& truths,
                                   const std::vector<std::optional<double>>& po_labels) {
  const std::size_t cells = Ks.size();
  std::vector<PairedOutcome> out(cells * cfg.runs);
  parallel_for(out.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t c = job / cfg.runs, r = job % cfg.runs;
    out[job] = paired_run(model, truths[c], Ks[c], cfg, derive_seed(cfg.root_seed, {c, r}));
  });
  BenchResult res;
  res.experiment = cfg.experiment;
  for (std::size_t c = 0; c < cells; ++c) {
    for (const char* method : {"baseline", "msd"}) {
      for (std::size_t r = 0; r < cfg.runs; ++r) {
        const auto& o = out[c * cfg.runs + r];
        res.rows.push_back({method, Ks[c], po_labels[c], r, std::string(method) == "msd" ? o.msd : o.baseline});
      }
    }
  }
  aggregate(res);
  return res;
}

}  // namespace detail

// MSD-BMAPF vs. baseline BMAPF across K on the experiment I model.
inline BenchResult run_experiment_1(const ExperimentConfig& cfg) {
  if (cfg.experiment != Experiment::exp1) throw std::invalid_argument("run_experiment_1: wrong experiment");
  cfg.validate();
  const ModelSpec model = experiment_I_model();
  std::vector<Param> truths(cfg.K_values.size(), Param{cfg.theta_star});
  std::vector<std::optional<double>> labels(cfg.K_values.size());
  return detail::run_paired_grid(cfg, model, cfg.K_values, truths, labels);
}

// MSD-BMAPF vs. baseline BMAPF across the true outlier probability P_o, K fixed.
inline BenchResult run_experiment_2(const ExperimentConfig& cfg) {
  if (cfg.experiment != Experiment::exp2) throw std::invalid_argument("run_experiment_2: wrong experiment");
  cfg.validate();
  const ModelSpec model = experiment_II_model();
  const std::size_t K = cfg.K_values.front();
  std::vector<std::size_t> Ks(cfg.Po_values.size(), K);
  std::vector<Param> truths;
  std::vector<std::optional<double>> labels;
  for (double p : cfg.Po_values) {
    truths.push_back({p});
    labels.emplace_back(p);
  }
  return detail::run_paired_grid(cfg, model, Ks, truths, labels);
}

// Single-model PF against the exact Kalman filter on the linear-Gaussian model.
inline BenchResult run_linear_gaussian_oracle(const ExperimentConfig& cfg) {
  if (cfg.experiment != Experiment::linear_gaussian_oracle)
    throw std::invalid_argument("run_linear_gaussian_oracle: wrong experiment");
  cfg.validate();
  const auto& p = cfg.linear_gaussian;
  const ModelSpec model = linear_gaussian_model(p);
  std::vector<std::pair<double, double>> out(cfg.runs);
  parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(cfg.root_seed, {0, r});
    const Trajectory traj = simulate(model, Param{}, cfg.T, derive_seed(seed, {detail::kTest}));
    const auto pf = run(model, {Param{}}, traj.observations, {cfg.n_particles}, derive_seed(seed, {detail::kFilter}));
    const auto kf = kalman_filter(p.a, p.q, p.r, {p.x0_mean, p.x0_var}, traj.observations.data);
    TimeSeries kf_means(traj.states.start, 1);
    kf_means.data = kf.filtered_means;
    out[r] = {mse(pf.estimates, traj.states), mse(kf_means, traj.states)};
  });
  BenchResult res;
  res.experiment = cfg.experiment;
  for (std::size_t r = 0; r < cfg.runs; ++r) res.rows.push_back({"pf", 1, std::nullopt, r, out[r].first});
  for (std::size_t r = 0; r < cfg.runs; ++r) res.rows.push_back({"kalman", 1, std::nullopt, r, out[r].second});
  detail::aggregate(res);
  return res;
}

inline BenchResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::exp1: return run_experiment_1(cfg);
    case Experiment::exp2: return run_experiment_2(cfg);
    case Experiment::linear_gaussian_oracle: return run_linear_gaussian_oracle(cfg);
  }
  throw std::invalid_argument("run_experiment: unknown experiment");
}

inline std::string optional_field(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

// `experiment,method,K,Po,run,mse`
inline std::string results_csv(const BenchResult& res) {
  std::string s = "experiment,method,K,Po,run,mse\n";
  for (const auto& r : res.rows)
    s += to_string(res.experiment) + "," + r.method + "," + std::to_string(r.K) + "," + optional_field(r.Po) + "," +
         std::to_string(r.run) + "," + io::format_double(r.mse) + "\n";
  return s;
}

// `experiment,method,K,Po,mse_mean,mse_std,n_runs`
inline std::string aggregate_csv(const BenchResult& res) {
  std::string s = "experiment,method,K,Po,mse_mean,mse_std,n_runs\n";
  for (const auto& c : res.cells)
    s += to_string(res.experiment) + "," + c.method + "," + std::to_string(c.K) + "," + optional_field(c.Po) + "," +
         io::format_double(c.mse_mean) + "," + io::format_double(c.mse_std) + "," + std::to_string(c.n_runs) + "\n";
  return s;
}

}  // namespace msdpf::bench
