// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msdpf/bench.hpp"
#include "msdpf/bmapf.hpp"
#include "msdpf/bo.hpp"
#include "msdpf/bomsd.hpp"
#include "msdpf/gp.hpp"
#include "msdpf/io.hpp"
#include "msdpf/kalman.hpp"
#include "msdpf/smc.hpp"

namespace fs = std::filesystem;
using namespace msdpf;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// One-sided paired t-test of mean(a - b) > 0.
double paired_p_value(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) return mean > 0.0 ? 0.0 : 1.0;
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  return boost::math::cdf(boost::math::complement(boost::math::students_t(static_cast<double>(n - 1)), t));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// --- 1 -----------------------------------------------------------------------
Verdict evidence_oracle() {
  const auto m = linear_gaussian_model(0.9, 1.0, 1.0);
  int within = 0;
  double worst = 0.0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto traj = simulate(m, Param{}, 20, derive_seed(101, {r}));
    const double exact = kalman_log_evidence(0.9, 1.0, 1.0, 0.0, 1.0, traj.observations.data);
    const double est = run_pf(m, {}, traj.observations, 100000, derive_seed(102, {r})).total_log_evidence;
    within += std::fabs(est - exact) <= 0.5;
    worst = std::max(worst, std::fabs(est - exact));
  }
  return {within >= 95, fmt("%.0f/100 runs within 0.5 nats (max error %.3f)", within, worst)};
}

// --- 2 -----------------------------------------------------------------------
Verdict unbiasedness() {
  const auto m = linear_gaussian_model(0.9, 1.0, 1.0);
  const auto traj = simulate(m, Param{}, 20, 201);
  const double exact = kalman_log_evidence(0.9, 1.0, 1.0, 0.0, 1.0, traj.observations.data);
  double ratio = 0.0;
  for (std::uint64_t r = 0; r < 200; ++r)
    ratio += std::exp(run_pf(m, {}, traj.observations, 500, derive_seed(202, {r})).total_log_evidence - exact);
  ratio /= 200.0;
  return {ratio >= 0.8 && ratio <= 1.2, fmt("mean likelihood ratio %.4f", ratio)};
}

// --- 3 -----------------------------------------------------------------------
std::vector<long double> solve(std::vector<long double> A, std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A[r * n + c]) > std::fabs(A[piv * n + c])) piv = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(A[c * n + k], A[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = A[r * n + c] / A[c * n + c];
      for (std::size_t k = c; k < n; ++k) A[r * n + k] -= f * A[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i * n + k] * x[k];
    x[i] = s / A[i * n + i];
  }
  return x;
}

Verdict gp_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> nn(1, 30);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    GpDataset d;
    d.kernel.length_scales = {0.1 + 0.3 * u(rng)};
    d.kernel.signal_variance = 0.5 + 2.0 * u(rng);
    d.kernel.noise_variance = 0.01 + 0.5 * u(rng);
    const std::size_t n = nn(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = u(rng);
      d.add({x}, std::sin(6.0 * x) + 0.3 * u(rng));
    }
    auto k = [&](double a, double b) {
      const long double z = (static_cast<long double>(a) - b) / d.kernel.length_scales[0];
      return d.kernel.signal_variance * std::exp(-0.5L * z * z);
    };
    std::vector<long double> A(n * n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        A[i * n + j] = k(d.points[i][0], d.points[j][0]) + (i == j ? d.kernel.noise_variance : 0.0);
      y[i] = d.values[i];
    }
    const auto alpha = solve(A, y);
    const GpPosterior gp(d);
    for (int j = 0; j < 10; ++j) {
      const double q = u(rng);
      std::vector<long double> kq(n);
      for (std::size_t i = 0; i < n; ++i) kq[i] = k(d.points[i][0], q);
      const auto v = solve(A, kq);
      long double mean = 0.0L, red = 0.0L;
      for (std::size_t i = 0; i < n; ++i) {
        mean += kq[i] * alpha[i];
        red += kq[i] * v[i];
      }
      const long double var = k(q, q) - red;
      const double at[] = {q};
      const auto p = gp.predict(at);
      worst_mean = std::max(worst_mean, static_cast<double>(std::fabs(p.mean - mean) / std::fabs(mean)));
      worst_var = std::max(worst_var, static_cast<double>(std::fabs(p.variance - var) / var));
    }
  }
  return {worst_mean <= 1e-8 && worst_var <= 1e-8,
          fmt("max relative error: mean %.2e, variance %.2e", worst_mean, worst_var)};
}

// --- 4 -----------------------------------------------------------------------
Verdict bo_sanity() {
  int hits = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    BoConfig c;
    c.budget = 30;
    c.seed = derive_seed(404, {s});
    const auto r = maximize([](std::span<const double> t) { return -(t[0] - 0.657) * (t[0] - 0.657); },
                            Box({0.0}, {1.0}), c);
    hits += std::fabs(r.theta_best[0] - 0.657) <= 0.02;
  }
  return {hits >= 95, fmt("%.0f/100 seeds within 0.02", hits)};
}

// --- 5 -----------------------------------------------------------------------
Verdict bomsd_recovery() {
  const auto m = experiment_I_model();
  std::vector<double> theta1(100);
  parallel_for(100, default_thread_count(), [&](std::size_t r) {
    const auto hist = simulate(m, Param{0.657}, 200, derive_seed(505, {r}));
    BoConfig cfg = default_design_bo_config();
    cfg.budget = 40;
    const auto set = design_model_set(m, hist.observations, 5, cfg, 500, derive_seed(506, {r}));
    theta1[r] = set.components[0].theta[0];
  });
  int hits = 0;
  double err = 0.0;
  for (double t : theta1) {
    hits += std::fabs(t - 0.657) <= 0.1;
    err += std::fabs(t - 0.657);
  }
  return {hits >= 90, fmt("%.0f/100 repetitions within 0.1 (mean |error| %.3f)", hits, err / 100.0)};
}

// --- 6 -----------------------------------------------------------------------
Verdict experiment_one_ordering() {
  auto cfg = bench::ExperimentConfig::exp1_defaults();
  cfg.K_values = {2, 5, 10, 20};
  cfg.runs = 50;
  cfg.root_seed = 606;
  cfg.threads = default_thread_count();
  const auto res = bench::run_experiment_1(cfg);
  bool ok = true;
  std::string detail;
  for (std::size_t K : cfg.K_values) {
    const auto base = res.series("baseline", K), msd = res.series("msd", K);
    const double p = paired_p_value(base, msd);
    const bool cell = mean_of(msd) < mean_of(base) && p < 0.01;
    ok = ok && cell;
    if (!detail.empty()) detail += "; ";
    detail += fmt("K=%.0f baseline %.3f", double(K), mean_of(base)) + fmt(" msd %.3f p=%.1e", mean_of(msd), p);
  }
  return {ok, detail};
}

// --- 7 -----------------------------------------------------------------------
Verdict experiment_two_ordering() {
  auto cfg = bench::ExperimentConfig::exp2_defaults();
  cfg.Po_values = {0.1, 0.5, 0.9};
  cfg.runs = 50;
  cfg.root_seed = 707;
  cfg.threads = default_thread_count();
  const auto res = bench::run_experiment_2(cfg);
  bool ok = true;
  std::string detail;
  for (double po : cfg.Po_values) {
    const auto base = res.series("baseline", 3, po), msd = res.series("msd", 3, po);
    const double p = paired_p_value(base, msd);
    const bool cell = mean_of(msd) < mean_of(base) && p < 0.01;
    ok = ok && cell;
    if (!detail.empty()) detail += "; ";
    detail += fmt("Po=%.1f baseline %.4f", po, mean_of(base)) + fmt(" msd %.4f p=%.1e", mean_of(msd), p);
  }
  return {ok, detail};
}

// --- 8 -----------------------------------------------------------------------
Verdict invariants() {
  std::vector<std::string> failed;
  auto check = [&](bool cond, const char* what) {
    if (!cond) failed.emplace_back(what);
  };

  // Simplex, weight normalization and flat-sum posterior mean along a run.
  {
    const auto m = experiment_II_model();
    const auto traj = simulate(m, Param{0.5}, 300, 801);
    auto s = init(m, {{0.1}, {0.5}, {0.9}}, {200, 120, 160}, 802, {}, traj.observations.start - 1);
    bool simplex = true, weights = true, flat = true;
    for (std::size_t i = 0; i < traj.observations.size(); ++i) {
      step(s, m, traj.observations.row(i));
      double sum = 0.0;
      for (double l : s.model_log_posteriors) sum += std::exp(l);
      simplex = simplex && std::fabs(sum - 1.0) <= 1e-10;
      long double oracle = 0.0L;
      for (std::size_t k = 0; k < s.num_models(); ++k) {
        double w = 0.0;
        for (double x : s.clouds[k].weights) w += x;
        weights = weights && std::fabs(w - 1.0) <= 1e-12;
        const long double pk = std::exp(static_cast<long double>(s.model_log_posteriors[k]));
        for (std::size_t j = 0; j < s.clouds[k].size(); ++j)
          oracle += pk * s.clouds[k].weights[j] * s.clouds[k].particles[j];
      }
      const double pm = posterior_mean(s)[0];
      flat = flat && std::fabs(pm - static_cast<double>(oracle)) <= 1e-12 * std::max(1.0, std::fabs(pm));
    }
    check(simplex, "pi simplex");
    check(weights, "weight normalization");
    check(flat, "posterior_mean flat sum");
  }

  // Scale invariance of the model-posterior update, bit-exact.
  {
    std::mt19937_64 rng(803);
    std::uniform_int_distribution<int> quarter(-400, 100);
    bool exact = true;
    for (int rep = 0; rep < 1000; ++rep) {
      const std::size_t K = 2 + static_cast<std::size_t>(rep % 19);
      std::vector<double> prior(K), le(K);
      for (std::size_t k = 0; k < K; ++k) {
        prior[k] = quarter(rng) * 0.25;
        le[k] = quarter(rng) * 0.25;
      }
      const auto base = update_model_posteriors(prior, le).log_posteriors;
      for (double c : {1e100, 1e-100}) {
        auto scaled = le;
        for (double& l : scaled) l += std::log(c);
        exact = exact && update_model_posteriors(prior, scaled).log_posteriors == base;
      }
    }
    check(exact, "scale invariance");
  }

  // K = 1 reduction.
  {
    const auto m = experiment_I_model();
    const auto traj = simulate(m, Param{0.657}, 300, 804);
    const double th[] = {0.657};
    const auto pf = run_pf(m, th, traj.observations, 300, 805);
    const auto bm = run(m, {{0.657}}, traj.observations, {300}, 805);
    check(bm.estimates.data == pf.filtered_means.data, "K=1 reduction");
  }

  // plan() against an independent formula.
  {
    std::mt19937_64 rng(806);
    std::uniform_int_distribution<std::size_t> d(1, 60);
    bool same = true;
    for (int rep = 0; rep < 2000; ++rep) {
      const std::size_t K = d(rng), m = K + d(rng) * d(rng);
      const auto p = plan(m, K);
      for (std::size_t k = 1; k <= K; ++k) {
        std::size_t j = 0;
        while ((j + 1) * K <= m * (K - k + 1)) ++j;
        same = same && p.sub_lengths[k - 1] == j;
      }
    }
    check(same, "plan formula");
  }

  std::string detail = failed.empty() ? "all invariants hold" : "violated:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

// --- 9 -----------------------------------------------------------------------
int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSDPF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "msdpf_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_file(dir / "simulate.json", R"({"model":"exp2","theta":0.3,"T":150,"seed":11})");
  io::write_file(dir / "design.json", R"({"model":"exp2","K":3,"n_particles":150,"seed":12,
    "simulate":{"theta":0.3,"T":60,"seed":13},"bo":{"budget":10}})");
  io::write_file(dir / "bench.json", R"({"experiment":"exp1","K_values":[2,4],"runs":3,"T":60,"m_hist":30,
    "n_particles":60,"design_particles":100,"root_seed":14,"bo":{"budget":8}})");

  const std::vector<std::string> variants{"a1", "a4", "b1"};
  bool ok = true;
  for (const auto& v : variants) {
    const fs::path out = dir / v;
    const std::string threads = " --threads " + std::string(v == "a4" ? "4" : "1");
    ok = ok && run_cli("simulate --config " + (dir / "simulate.json").string() + " --out " + out.string() + threads) == 0;
    ok = ok && run_cli("design --config " + (dir / "design.json").string() + " --out " + out.string() + threads) == 0;
    io::write_file(out / "filter.json", R"({"model":"exp2","observations":"trajectory.csv","model_set":"model_set.csv",
      "n_particles":200,"seed":15})");
    ok = ok && run_cli("filter --config " + (out / "filter.json").string() + " --out " + out.string() + threads) == 0;
    ok = ok && run_cli("bench --config " + (dir / "bench.json").string() + " --out " + out.string() + threads) == 0;
    ok = ok && run_cli("plot --input " + (out / "exp1_aggregate.csv").string() + " --out " + out.string()) == 0;
  }
  if (!ok) return {false, "a CLI command failed"};

  std::size_t compared = 0;
  std::string mismatch;
  for (const auto& entry : fs::directory_iterator(dir / "a1")) {
    const auto name = entry.path().filename().string();
    const auto ext = entry.path().extension().string();
    if (ext != ".csv" && ext != ".svg") continue;
    const std::string ref = io::read_file(entry.path());
    for (const char* other : {"a4", "b1"}) {
      ++compared;
      if (!fs::exists(dir / other / name) || io::read_file(dir / other / name) != ref) mismatch += " " + name;
    }
  }
  fs::remove_all(dir);
  if (!mismatch.empty()) return {false, "differing outputs:" + mismatch};
  return {compared >= 20, fmt("%.0f artifact comparisons byte-identical across reruns and --threads 1/4", compared)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number; the default runs all of them.
  std::vector<bool> selected(10, argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= 9) selected[static_cast<std::size_t>(k)] = true;
  }
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Verdict()> fn;
  };
  const std::vector<Criterion> criteria{
      {"evidence estimator vs Kalman", 30, evidence_oracle},
      {"evidence unbiasedness", 10, unbiasedness},
      {"GP regression vs dense solve", 1, gp_oracle},
      {"BO sanity on a quadratic", 5, bo_sanity},
      {"BOMSD parameter recovery", 300, bomsd_recovery},
      {"experiment I: MSD beats baseline", 1200, experiment_one_ordering},
      {"experiment II: MSD beats baseline", 1200, experiment_two_ordering},
      {"invariant suite", 60, invariants},
      {"determinism across reruns and threads", 300, determinism},
  };
  int failures = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i + 1]) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < criteria[i].budget_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("[%s] %zu %s: %s; %.1f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                v.detail.c_str(), secs, criteria[i].budget_s, in_time ? "" : " OVER TIME");
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
