#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "msdpf/bo.hpp"

using namespace msdpf;

namespace {

const Box kUnit({0.0}, {1.0});

double quad(std::span<const double> th) { return -(th[0] - 0.657) * (th[0] - 0.657); }

double min_pairwise(const std::vector<BoRecord>& r, std::size_t from) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = from; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j) best = std::min(best, std::fabs(r[i].theta[0] - r[j].theta[0]));
  return best;
}

}  // namespace

TEST(Bo, UcbArithmetic) {
  EXPECT_NEAR(ucb(0.5, 0.2, 2.0), 0.9, 1e-15);
  EXPECT_EQ(ucb(0.5, 0.2, 0.0), 0.5);
  EXPECT_EQ(ucb(-3.0, 0.0, 7.0), -3.0);
  EXPECT_THROW(ucb(0.0, -1.0, 1.0), std::invalid_argument);
}

TEST(Bo, ConfigValidation) {
  BoConfig c;
  c.n_init = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.budget = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.acq_grid = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Bo, FindsQuadraticOptimum) {
  BoConfig c;
  c.budget = 30;
  c.seed = 5;
  const auto r = maximize(quad, kUnit, c);
  EXPECT_NEAR(r.theta_best[0], 0.657, 0.02);
  EXPECT_LE(r.f_best, 0.0);
}

TEST(Bo, BudgetEqualToInitialDesign) {
  BoConfig c;
  c.budget = 5;
  c.seed = 3;
  std::size_t calls = 0;
  const auto r = maximize([&](std::span<const double> th) { ++calls; return quad(th); }, kUnit, c);
  EXPECT_EQ(calls, 5u);
  EXPECT_EQ(r.records.size(), 5u);
  // One design point per fifth of the interval.
  std::vector<int> strata;
  for (const auto& rec : r.records) strata.push_back(static_cast<int>(rec.theta[0] * 5.0));
  std::sort(strata.begin(), strata.end());
  EXPECT_EQ(strata, (std::vector<int>{0, 1, 2, 3, 4}));
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& rec : r.records) best = std::max(best, rec.value);
  EXPECT_EQ(r.f_best, best);
}

TEST(Bo, ConstantObjective) {
  BoConfig c;
  c.budget = 12;
  const auto r = maximize([](std::span<const double>) { return 4.25; }, kUnit, c);
  EXPECT_EQ(r.f_best, 4.25);
  EXPECT_TRUE(kUnit.contains(r.theta_best));
}

TEST(Bo, IncumbentInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BoConfig c;
    c.budget = 20;
    c.seed = seed;
    c.kernel.noise_variance = 0.05;
    Rng noise(seed);
    std::normal_distribution<double> z(0.0, 0.2);
    const auto r = maximize([&](std::span<const double> th) { return std::sin(9.0 * th[0]) + z(noise); }, kUnit, c);
    ASSERT_EQ(r.records.size(), 20u);
    EXPECT_TRUE(kUnit.contains(r.theta_best));
    double run_max = -std::numeric_limits<double>::infinity(), prev = run_max;
    std::size_t incumbents = 0;
    for (const auto& rec : r.records) {
      EXPECT_TRUE(kUnit.contains(rec.theta));
      run_max = std::max(run_max, rec.value);
      EXPECT_GE(run_max, prev);
      prev = run_max;
      if (rec.is_incumbent) {
        ++incumbents;
        EXPECT_EQ(rec.theta, r.theta_best);
      }
    }
    EXPECT_EQ(incumbents, 1u);
    EXPECT_EQ(r.f_best, run_max);
  }
}

TEST(Bo, NanIsRetriedThenFails) {
  BoConfig c;
  c.budget = 8;
  int calls = 0;
  const auto r = maximize(
      [&](std::span<const double> th) { return ++calls % 3 == 0 ? std::nan("") : quad(th); }, kUnit, c);
  EXPECT_EQ(r.records.size(), 8u);
  for (const auto& rec : r.records) EXPECT_FALSE(std::isnan(rec.value));

  EXPECT_THROW(maximize([](std::span<const double>) { return std::nan(""); }, kUnit, c), std::runtime_error);
}

TEST(Bo, NegativeInfinityIsClamped) {
  BoConfig c;
  c.budget = 15;
  c.seed = 1;
  const auto r = maximize(
      [](std::span<const double> th) {
        return th[0] < 0.3 ? -std::numeric_limits<double>::infinity() : quad(th);
      },
      kUnit, c);
  EXPECT_TRUE(std::isfinite(r.f_best));
  double lo = std::numeric_limits<double>::infinity();
  for (double v : r.history.values) {
    EXPECT_TRUE(std::isfinite(v));
    lo = std::min(lo, v);
  }
  bool had_inf = false;
  double lo_finite = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.records) {
    if (std::isinf(rec.value)) had_inf = true;
    else lo_finite = std::min(lo_finite, rec.value);
  }
  if (had_inf) EXPECT_EQ(lo, lo_finite - 100.0);
}

TEST(Bo, ClampHelper) {
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(detail::clamp_values(std::vector<double>{-3.0, ninf, 2.0}), (std::vector<double>{-3.0, -103.0, 2.0}));
  EXPECT_EQ(detail::clamp_values(std::vector<double>{ninf, ninf}), (std::vector<double>{0.0, 0.0}));
}

TEST(Bo, LargeAlphaExplores) {
  int wider = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BoConfig greedy, wide;
    greedy.budget = wide.budget = 15;
    greedy.seed = wide.seed = seed;
    greedy.alpha = 0.0;
    wide.alpha = 1e6;
    const auto a = maximize(quad, kUnit, greedy);
    const auto b = maximize(quad, kUnit, wide);
    if (min_pairwise(b.records, 0) > min_pairwise(a.records, 0)) ++wider;
  }
  EXPECT_GE(wider, 18);
}

TEST(Bo, DeterministicForSeed) {
  BoConfig c;
  c.budget = 15;
  c.seed = 99;
  const auto a = maximize(quad, kUnit, c);
  const auto b = maximize(quad, kUnit, c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].theta, b.records[i].theta);
}

TEST(Bo, RejectsMismatchedDomain) {
  BoConfig c;
  EXPECT_THROW(maximize(quad, Box({0.0, 0.0}, {1.0, 1.0}), c), std::invalid_argument);
  EXPECT_THROW(maximize(quad, Box({0.5}, {0.5}), c), std::invalid_argument);
}
