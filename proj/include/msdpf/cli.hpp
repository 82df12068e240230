#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msdpf/bench.hpp"
#include "msdpf/bmapf.hpp"
#include "msdpf/bomsd.hpp"
#include "msdpf/io.hpp"
#include "msdpf/models.hpp"
#include "msdpf/svg.hpp"

namespace msdpf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  fs::path config_path;
  fs::path output_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::size_t threads = default_thread_count();
  std::optional<fs::path> input;  // plot only
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline json load_config(const RunConfig& rc) {
  if (rc.config_path.empty()) return json::object();
  std::string text;
  try {
    text = io::read_file(rc.config_path);
  } catch (const io::InputError&) {
    throw UsageError("config file not found: " + rc.config_path.string());
  }
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw UsageError("config must be a JSON object: " + rc.config_path.string());
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError("cannot parse config " + rc.config_path.string() + ": " + e.what());
  }
}

// Paths inside a config are relative to the config file.
inline fs::path resolve(const RunConfig& rc, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || rc.config_path.empty()) return path;
  return rc.config_path.parent_path() / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline std::uint64_t seed_of(const RunConfig& rc, const json& cfg, const char* key = "seed") {
  return rc.seed_override ? *rc.seed_override : get_or<std::uint64_t>(cfg, key, 1);
}

inline ModelSpec model_from(const json& cfg) {
  const auto name = get_or<std::string>(cfg, "model", "");
  if (name == "exp1") return experiment_I_model();
  if (name == "exp2") return experiment_II_model();
  if (name == "linear_gaussian") {
    const json lg = cfg.value("linear_gaussian", json::object());
    LinearGaussianParams p;
    p.a = get_or(lg, "a", p.a);
    p.q = get_or(lg, "q", p.q);
    p.r = get_or(lg, "r", p.r);
    p.x0_mean = get_or(lg, "x0_mean", p.x0_mean);
    p.x0_var = get_or(lg, "x0_var", p.x0_var);
    try {
      return linear_gaussian_model(p);
    } catch (const std::domain_error& e) {
      throw UsageError(e.what());
    }
  }
  throw UsageError("unknown model '" + name + "' (expected exp1, exp2 or linear_gaussian)");
}

inline Param param_from(const json& v) {
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    Param p;
    for (const auto& x : v) {
      if (!x.is_number()) throw UsageError("parameter values must be numbers");
      p.push_back(x.get<double>());
    }
    return p;
  }
  throw UsageError("parameter must be a number or an array of numbers");
}

inline std::string param_text(const Param& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? ";" : "") + io::format_double(p[i]);
  return s;
}

inline Param parse_param_text(const std::string& s) {
  Param p;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    io::CsvTable one;
    one.rows = {{tok}};
    one.line_numbers = {0};
    p.push_back(one.number(0, 0));
  }
  return p;
}

inline BoConfig bo_from(const json& cfg) {
  BoConfig b = default_design_bo_config();
  if (!cfg.contains("bo")) return b;
  const json& j = cfg.at("bo");
  b.alpha = get_or(j, "alpha", b.alpha);
  b.budget = get_or(j, "budget", b.budget);
  b.n_init = get_or(j, "n_init", b.n_init);
  b.acq_grid = get_or(j, "acq_grid", b.acq_grid);
  b.kernel.length_scales = {get_or(j, "length_scale", b.kernel.length_scales[0])};
  b.kernel.signal_variance = get_or(j, "signal_variance", b.kernel.signal_variance);
  b.kernel.noise_variance = get_or(j, "noise_variance", b.kernel.noise_variance);
  const auto kind = get_or<std::string>(j, "kernel", "gaussian");
  if (kind == "matern52") b.kernel.kind = KernelKind::matern52;
  else if (kind != "gaussian") throw UsageError("unknown kernel '" + kind + "'");
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return b;
}

// Provenance sidecar next to a primary output. Only the timestamp varies
// between identical runs.
inline void write_meta(const fs::path& artifact, const RunConfig& rc, const json& cfg, std::uint64_t seed) {
  json meta;
  meta["command"] = rc.command;
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(cfg.dump())));
  meta["config_hash"] = hash;
  meta["seed"] = seed;
  meta["version"] = kVersion;
  meta["artifact"] = artifact.filename().string();
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char ts[32];
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  meta["timestamp"] = ts;
  io::write_file(artifact.string() + ".meta.json", meta.dump(2) + "\n");
}

inline int cmd_simulate(const RunConfig& rc, std::ostream& out) {
  const json cfg = load_config(rc);
  const ModelSpec model = model_from(cfg);
  const auto T = get_or<long long>(cfg, "T", 0);
  if (T < 1) throw UsageError("simulate: T must be >= 1 (got " + std::to_string(T) + ")");
  Param theta = cfg.contains("theta") ? param_from(cfg.at("theta")) : Param{};
  if (!model.param_domain.contains(theta))
    throw UsageError("simulate: theta outside the parameter domain of " + model.name);
  const std::uint64_t seed = seed_of(rc, cfg);
  const Trajectory traj = simulate(model, theta, static_cast<std::size_t>(T), seed);
  const fs::path path = rc.output_dir / get_or<std::string>(cfg, "output", "trajectory.csv");
  io::write_file(path, io::trajectory_csv(traj));
  write_meta(path, rc, cfg, seed);
  out << path.string() << "\n";
  return kOk;
}

inline TimeSeries design_data(const RunConfig& rc, const json& cfg, const ModelSpec& model) {
  if (cfg.contains("data")) {
    const fs::path p = resolve(rc, cfg.at("data").get<std::string>());
    if (!fs::exists(p)) throw UsageError("data file not found: " + p.string());
    return io::read_observations(p).observations;
  }
  if (cfg.contains("simulate")) {
    const json& s = cfg.at("simulate");
    const Param theta = s.contains("theta") ? param_from(s.at("theta")) : Param{};
    if (!model.param_domain.contains(theta)) throw UsageError("design: simulate.theta outside the parameter domain");
    const auto T = get_or<long long>(s, "T", 0);
    if (T < 1) throw UsageError("design: simulate.T must be >= 1");
    return simulate(model, theta, static_cast<std::size_t>(T), get_or<std::uint64_t>(s, "seed", 1)).observations;
  }
  throw UsageError("design: config needs either 'data' or 'simulate'");
}

inline std::string model_set_csv(const ModelSet& set) {
  std::string s = "k,m_k,theta,f_best\n";
  for (const auto& c : set.components)
    s += std::to_string(c.k) + "," + std::to_string(c.m_k) + "," + param_text(c.theta) + "," +
         io::format_double(c.f_best) + "\n";
  return s;
}

inline std::string bo_history_csv(const BoResult& bo) {
  std::string s = "iter,theta,f_value,is_incumbent\n";
  for (const auto& r : bo.records)
    s += std::to_string(r.iter) + "," + param_text(r.theta) + "," + io::format_double(r.value) + "," +
         (r.is_incumbent ? "1" : "0") + "\n";
  return s;
}

inline int cmd_design(const RunConfig& rc, std::ostream& out) {
  const json cfg = load_config(rc);
  const ModelSpec model = model_from(cfg);
  if (model.param_domain.dim() == 0) throw UsageError("design: model " + model.name + " has no free parameters");
  const TimeSeries data = design_data(rc, cfg, model);
  const auto K = get_or<long long>(cfg, "K", 0);
  if (K < 1) throw UsageError("design: K must be >= 1");
  if (data.size() < static_cast<std::size_t>(K))
    throw std::runtime_error("design: m=" + std::to_string(data.size()) + " observations is fewer than K=" +
                             std::to_string(K) + " components");
  const BoConfig bo = bo_from(cfg);
  const auto n = get_or<std::size_t>(cfg, "n_particles", 500);
  const std::uint64_t seed = seed_of(rc, cfg);
  const ModelSet set = design_model_set(model, data, static_cast<std::size_t>(K), bo, n, seed, rc.threads);

  const fs::path path = rc.output_dir / get_or<std::string>(cfg, "output", "model_set.csv");
  io::write_file(path, model_set_csv(set));
  for (const auto& c : set.components)
    io::write_file(rc.output_dir / ("bo_history_k" + std::to_string(c.k) + ".csv"), bo_history_csv(c.bo));
  write_meta(path, rc, cfg, seed);
  out << path.string() << "\n";
  return kOk;
}

inline std::vector<Param> read_model_set(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("model set file not found: " + p.string());
  const auto tab = io::read_csv(p);
  const auto col = tab.column("theta");
  std::vector<Param> out;
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    try {
      out.push_back(parse_param_text(tab.rows[r][col]));
    } catch (const io::CsvError&) {
      throw io::CsvError(p.string(), tab.line_numbers[r], "cannot parse theta '" + tab.rows[r][col] + "'");
    }
  }
  return out;
}

inline std::string diagnostics_header(std::size_t K, std::size_t dim) {
  std::string s = "t";
  if (dim == 1) s += ",estimate";
  else
    for (std::size_t d = 0; d < dim; ++d) s += ",estimate_" + std::to_string(d + 1);
  for (std::size_t k = 1; k <= K; ++k) s += ",pi_" + std::to_string(k);
  for (std::size_t k = 1; k <= K; ++k) s += ",logL_" + std::to_string(k);
  return s + "\n";
}

inline int cmd_filter(const RunConfig& rc, std::ostream& out) {
  const json cfg = load_config(rc);
  const ModelSpec model = model_from(cfg);
  if (!cfg.contains("observations")) throw UsageError("filter: config needs 'observations'");
  const fs::path obs_path = resolve(rc, cfg.at("observations").get<std::string>());
  if (!fs::exists(obs_path)) throw UsageError("observations file not found: " + obs_path.string());
  const io::ObservationFile obs = io::read_observations(obs_path);

  std::vector<Param> thetas;
  if (cfg.contains("thetas")) {
    const json& jt = cfg.at("thetas");
    if (!jt.is_array()) throw UsageError("filter: 'thetas' must be an array");
    for (const auto& v : jt) thetas.push_back(param_from(v));
  } else if (cfg.contains("model_set")) {
    thetas = read_model_set(resolve(rc, cfg.at("model_set").get<std::string>()));
  } else if (model.param_domain.dim() == 0) {
    thetas = {Param{}};
  } else {
    throw UsageError("filter: config needs 'thetas' or 'model_set'");
  }
  if (cfg.contains("K") && cfg.at("K").get<std::size_t>() != thetas.size())
    throw UsageError("filter: declared K=" + std::to_string(cfg.at("K").get<std::size_t>()) + " but " +
                     std::to_string(thetas.size()) + " parameter values given");
  for (const auto& th : thetas)
    if (!model.param_domain.contains(th)) throw UsageError("filter: theta outside the parameter domain");

  std::vector<std::size_t> n;
  if (cfg.contains("n_particles") && cfg.at("n_particles").is_array()) n = cfg.at("n_particles").get<std::vector<std::size_t>>();
  else n = {get_or<std::size_t>(cfg, "n_particles", 200)};
  if (n.size() != 1 && n.size() != thetas.size()) throw UsageError("filter: particle counts do not match K");

  BmapfOptions opt;
  const auto mixing = get_or<std::string>(cfg, "mixing", "global");
  if (mixing == "per_model") opt.mixing = MixtureResampling::per_model;
  else if (mixing != "global") throw UsageError("filter: unknown mixing '" + mixing + "'");
  const auto scheme = get_or<std::string>(cfg, "scheme", "systematic");
  if (scheme == "multinomial") opt.scheme = ResampleScheme::multinomial;
  else if (scheme != "systematic") throw UsageError("filter: unknown scheme '" + scheme + "'");

  const std::uint64_t seed = seed_of(rc, cfg);
  const BmapfRun res = run(model, thetas, obs.observations, n, seed, opt);
  const std::size_t K = thetas.size();

  std::string est = model.state_dim == 1 ? "t,estimate\n" : diagnostics_header(0, model.state_dim);
  std::string diag = diagnostics_header(K, model.state_dim);
  for (std::size_t i = 0; i < res.estimates.size(); ++i) {
    std::string row = std::to_string(res.estimates.time(i));
    for (double v : res.estimates.row(i)) row += "," + io::format_double(v);
    est += row + "\n";
    for (double p : res.posterior_trace[i]) row += "," + io::format_double(p);
    for (double l : res.log_evidence_trace[i]) row += "," + io::format_double(l);
    diag += row + "\n";
  }
  const fs::path est_path = rc.output_dir / get_or<std::string>(cfg, "output", "estimates.csv");
  const fs::path diag_path = rc.output_dir / get_or<std::string>(cfg, "diagnostics", "diagnostics.csv");
  io::write_file(est_path, est);
  io::write_file(diag_path, diag);
  write_meta(est_path, rc, cfg, seed);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  out << est_path.string() << "\n" << diag_path.string() << "\n";
  if (obs.states) out << "mse=" << io::format_double(bench::mse(res.estimates, *obs.states)) << "\n";
  return kOk;
}

inline bench::ExperimentConfig experiment_from(const RunConfig& rc, const json& cfg) {
  const auto name = get_or<std::string>(cfg, "experiment", "");
  bench::ExperimentConfig c;
  try {
    switch (bench::parse_experiment(name)) {
      case bench::Experiment::exp1: c = bench::ExperimentConfig::exp1_defaults(); break;
      case bench::Experiment::exp2: c = bench::ExperimentConfig::exp2_defaults(); break;
      case bench::Experiment::linear_gaussian_oracle: c = bench::ExperimentConfig::oracle_defaults(); break;
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.contains("K_values")) c.K_values = cfg.at("K_values").get<std::vector<std::size_t>>();
  if (cfg.contains("K")) c.K_values = {cfg.at("K").get<std::size_t>()};
  if (cfg.contains("Po_values")) c.Po_values = cfg.at("Po_values").get<std::vector<double>>();
  c.runs = get_or(cfg, "runs", c.runs);
  c.T = get_or(cfg, "T", c.T);
  c.m_hist = get_or(cfg, "m_hist", c.m_hist);
  c.n_particles = get_or(cfg, "n_particles", c.n_particles);
  c.design_particles = get_or(cfg, "design_particles", c.design_particles);
  c.theta_star = get_or(cfg, "theta_star", c.theta_star);
  c.bo = bo_from(cfg);
  c.root_seed = seed_of(rc, cfg, "root_seed");
  c.threads = rc.threads;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

inline int cmd_bench(const RunConfig& rc, std::ostream& out) {
  const json cfg = load_config(rc);
  const bench::ExperimentConfig ec = experiment_from(rc, cfg);
  const bench::BenchResult res = bench::run_experiment(ec);
  const std::string stem = bench::to_string(ec.experiment);
  const fs::path results = rc.output_dir / (stem + "_results.csv");
  const fs::path aggregate = rc.output_dir / (stem + "_aggregate.csv");
  io::write_file(results, bench::results_csv(res));
  io::write_file(aggregate, bench::aggregate_csv(res));
  write_meta(aggregate, rc, cfg, ec.root_seed);
  out << results.string() << "\n" << aggregate.string() << "\n";
  return kOk;
}

inline std::vector<svg::AggregatePoint> read_aggregate(const fs::path& p, std::string& experiment) {
  const auto tab = io::read_csv(p);
  if (tab.header.empty() || tab.rows.empty()) return {};
  const auto ce = tab.column("experiment"), cm = tab.column("method"), ck = tab.column("K"), cp = tab.column("Po"),
             cmean = tab.column("mse_mean"), cstd = tab.column("mse_std");
  std::vector<svg::AggregatePoint> pts;
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    svg::AggregatePoint a;
    experiment = tab.rows[r][ce];
    a.method = tab.rows[r][cm];
    a.K = tab.number(r, ck);
    if (!tab.rows[r][cp].empty()) a.Po = tab.number(r, cp);
    a.mean = tab.number(r, cmean);
    a.stddev = tab.number(r, cstd);
    pts.push_back(a);
  }
  return pts;
}

inline int cmd_plot(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const json cfg = load_config(rc);
  fs::path input;
  if (rc.input) input = *rc.input;
  else if (cfg.contains("aggregate")) input = resolve(rc, cfg.at("aggregate").get<std::string>());
  else throw UsageError("plot: pass --input or set 'aggregate' in the config");
  if (!fs::exists(input)) throw UsageError("aggregate file not found: " + input.string());

  std::string experiment;
  const auto pts = read_aggregate(input, experiment);
  if (pts.empty()) {
    err << "plot: " << input.string() << " has no result rows\n";
    return kRuntimeFailure;
  }
  fs::path path;
  std::string doc;
  if (experiment == "exp2") {
    doc = svg::mse_bars_vs_po(pts, "Experiment II: MSE vs. true P_o");
    path = rc.output_dir / "fig_exp2.svg";
  } else {
    doc = svg::mse_vs_k(pts, experiment == "exp1" ? "Experiment I: averaged MSE vs. K" : "Averaged MSE vs. K");
    path = rc.output_dir / ("fig_" + experiment + ".svg");
  }
  io::write_file(path, doc);
  out << path.string() << "\n";
  return kOk;
}

// Parses argv and dispatches. Exit status: 0 success, 1 runtime or numerical
// failure, 2 usage or input error.
inline int main_entry(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Model-set design and Bayesian-model-averaged particle filtering"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  RunConfig rc;
  std::string config, outdir = ".", input;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON configuration file");
    sub->add_option("--out", outdir, "output directory");
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "worker threads (results do not depend on this)");
  };
  std::vector<CLI::App*> subs = {
      app.add_subcommand("simulate", "simulate a trajectory to t,x,y CSV"),
      app.add_subcommand("design", "design a model set by Bayesian optimization"),
      app.add_subcommand("filter", "run the model-averaged particle filter on observations"),
      app.add_subcommand("bench", "run a benchmark experiment"),
      app.add_subcommand("plot", "render SVG figures from an aggregate CSV")};
  for (auto* s : subs) add_common(s);
  subs[4]->add_option("--input", input, "aggregate CSV to plot");
  for (std::size_t i = 0; i < 4; ++i) subs[i]->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  for (auto* s : subs)
    if (s->parsed()) rc.command = s->get_name();
  rc.config_path = config;
  rc.output_dir = outdir;
  if (subs[0]->count("--seed") + subs[1]->count("--seed") + subs[2]->count("--seed") + subs[3]->count("--seed") +
      subs[4]->count("--seed"))
    rc.seed_override = seed;
  if (threads > 0) rc.threads = threads;
  if (!input.empty()) rc.input = fs::path(input);

  try {
    if (rc.command == "simulate") return cmd_simulate(rc, out);
    if (rc.command == "design") return cmd_design(rc, out);
    if (rc.command == "filter") return cmd_filter(rc, out);
    if (rc.command == "bench") return cmd_bench(rc, out);
    return cmd_plot(rc, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const io::InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const json::exception& e) {
    err << "error: bad config: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace msdpf::cli
