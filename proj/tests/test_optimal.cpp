// SPDX-License-Identifier: Apache-2.0

#include "sloth/optimal.hpp"

#include <cmath>

#include "doctest.h"
#include "sloth/common.hpp"
#include "sloth/design.hpp"
#include "sloth/synth.hpp"
#include "support/oracles.hpp"

using namespace sloth;

namespace {

AllocationProblem base_problem() {
  AllocationProblem p;
  p.slopes << 0.4, 0.3, 0.02;
  p.intercept = -1.0;
  p.budget = 1e22;
  p.u_lo = std::log(0.16e9);
  p.u_hi = std::log(72e9);
  p.v_lo = std::log(0.18e12);
  p.v_hi = std::log(15e12);
  return p;
}

}  // namespace

TEST_CASE("linear objective picks the correct edge") {
  AllocationProblem p = base_problem();
  p.slopes << 1.0, 0.2, 0.0;  // increasing in u
  const Allocation a = optimal_allocation(p);
  const auto [lo, hi] = feasible_interval(p);
  CHECK(a.u == hi);
  CHECK(a.flag == BoundaryFlag::upper_edge);

  p.slopes << 0.2, 1.0, 0.0;  // decreasing in u
  const Allocation b = optimal_allocation(p);
  CHECK(b.u == lo);
  CHECK(b.flag == BoundaryFlag::lower_edge);
}

TEST_CASE("flat objective ties break to the interval midpoint") {
  AllocationProblem p = base_problem();
  p.slopes << 1.0, 1.0, 0.0;
  const auto [lo, hi] = feasible_interval(p);
  const Allocation a = optimal_allocation(p);
  CHECK(a.u == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-14));
  CHECK(a.flag == BoundaryFlag::interior_vertex);
}

TEST_CASE("concave case lands on the vertex when interior") {
  AllocationProblem p = base_problem();
  p.slopes << 0.5, 0.3, 0.05;
  const Allocation a = optimal_allocation(p);
  const double l = std::log(p.budget) - std::log(6.0);
  const double vertex =
      (p.slopes(0) - p.slopes(1) + p.slopes(2) * l) / (2.0 * p.slopes(2));
  const auto [lo, hi] = feasible_interval(p);
  if (vertex >= lo && vertex <= hi) {
    CHECK(a.u == doctest::Approx(vertex).epsilon(1e-14));
    CHECK(a.flag == BoundaryFlag::interior_vertex);
  }
  // optimality certificate: no candidate beats the returned point
  for (const double candidate : {lo, hi, vertex}) {
    if (candidate < lo || candidate > hi) continue;
    CHECK(allocation_objective(p, a.u) >=
          allocation_objective(p, candidate) - 1e-12);
  }
}

TEST_CASE("random problems match a dense grid oracle") {
  oracle::Rand rng(2024);
  int tested = 0;
  while (tested < 100) {
    AllocationProblem p;
    p.slopes << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
        rng.uniform(-0.5, 0.5);
    p.intercept = rng.uniform(-2.0, 2.0);
    p.u_lo = rng.uniform(18.0, 20.0);
    p.u_hi = p.u_lo + rng.uniform(0.5, 2.0);
    p.v_lo = rng.uniform(25.0, 27.0);
    p.v_hi = p.v_lo + rng.uniform(0.5, 2.0);
    const double l = rng.uniform(p.u_lo + p.v_lo, p.u_hi + p.v_hi);
    p.budget = 6.0 * std::exp(l);

    Allocation a;
    try {
      a = optimal_allocation(p);
    } catch (const error&) {
      continue;  // numerically infeasible draw
    }
    ++tested;

    const auto [lo, hi] = feasible_interval(p);
    const auto [u_grid, g_grid] = oracle::grid_max(
        [&](double u) { return allocation_objective(p, u); }, lo, hi, 1e-5);
    CHECK(allocation_objective(p, a.u) >= g_grid - 1e-8);
    if (std::abs(p.slopes(2)) > 1e-3 ||
        std::abs(p.slopes(0) - p.slopes(1)) > 1e-3)
      CHECK(std::abs(a.u - u_grid) <= 2e-5);

    // budget identity in log space and in raw FLOPs
    CHECK(std::abs(a.u + a.v - l) < 1e-12);
    CHECK(std::abs(6.0 * a.size_s * a.tokens_t - p.budget) / p.budget < 1e-9);
  }
}

TEST_CASE("infeasible budgets raise errors naming the violated side") {
  AllocationProblem p = base_problem();
  p.budget = 1e40;  // too large for any in-bounds allocation
  try {
    optimal_allocation(p);
    FAIL("expected infeasible error");
  } catch (const error& e) {
    CHECK(e.code() == "infeasible");
    CHECK(std::string(e.what()).find("large") != std::string::npos);
  }
  p.budget = 1.0;  // too small
  try {
    optimal_allocation(p);
    FAIL("expected infeasible error");
  } catch (const error& e) {
    CHECK(e.code() == "infeasible");
    CHECK(std::string(e.what()).find("small") != std::string::npos);
  }
}

TEST_CASE("training bounds") {
  SUBCASE("min-max policy recovers the observed extremes") {
    std::vector<ModelRecord> recs;
    auto rec = [&](double s, double t, int i) {
      ModelRecord r;
      r.model_id = "m" + std::to_string(i);
      r.family_id = "f";
      r.base_family_id = "f";
      r.version_group = "f";
      r.size_s = s;
      r.tokens_t = t;
      r.scores["b"] = 0.5;
      return r;
    };
    recs.push_back(rec(0.16e9, 1.04e12, 0));
    recs.push_back(rec(7e9, 0.18e12, 1));
    recs.push_back(rec(72e9, 15e12, 2));
    const ScoreTable table = ScoreTable::make(recs, {"b"});
    const TrainingBounds bounds = training_bounds(table);
    CHECK(std::exp(bounds.u_lo) == doctest::Approx(0.16e9).epsilon(1e-12));
    CHECK(std::exp(bounds.u_hi) == doctest::Approx(72e9).epsilon(1e-12));
    CHECK(std::exp(bounds.v_lo) == doctest::Approx(0.18e12).epsilon(1e-12));
    CHECK(std::exp(bounds.v_hi) == doctest::Approx(15e12).epsilon(1e-12));
  }
  SUBCASE("single model pins the allocation completely") {
    ModelRecord r;
    r.model_id = "solo";
    r.family_id = "f";
    r.base_family_id = "f";
    r.version_group = "f";
    r.size_s = 3e9;
    r.tokens_t = 2e12;
    r.scores["b"] = 0.5;
    const ScoreTable table = ScoreTable::make({r}, {"b"});
    const TrainingBounds bounds = training_bounds(table);
    CHECK(bounds.u_lo == bounds.u_hi);
    CHECK(bounds.v_lo == bounds.v_hi);

    AllocationProblem p;
    p.slopes << 0.4, 0.3, 0.02;
    p.budget = 6.0 * (3e9 * 2e12);
    p.u_lo = bounds.u_lo;
    p.u_hi = bounds.u_hi;
    p.v_lo = bounds.v_lo;
    p.v_hi = bounds.v_hi;
    const Allocation a = optimal_allocation(p);
    CHECK(a.size_s == doctest::Approx(3e9).epsilon(1e-12));
    CHECK(a.tokens_t == doctest::Approx(2e12).epsilon(1e-12));
  }
  SUBCASE("quantile policy matches a sort-based oracle") {
    std::vector<ModelRecord> recs;
    oracle::Rand rng(55);
    std::vector<double> log_s, log_t;
    for (int i = 0; i < 100; ++i) {
      ModelRecord r;
      r.model_id = "m" + std::to_string(i);
      r.family_id = "f";
      r.base_family_id = "f";
      r.version_group = "f";
      r.size_s = std::exp(rng.uniform(19.0, 25.0));
      r.tokens_t = std::exp(rng.uniform(25.0, 30.0));
      r.scores["b"] = 0.5;
      log_s.push_back(std::log(r.size_s));
      log_t.push_back(std::log(r.tokens_t));
      recs.push_back(std::move(r));
    }
    const ScoreTable table = ScoreTable::make(recs, {"b"});
    BoundsPolicy policy;
    policy.kind = BoundsPolicy::Kind::quantile;
    policy.q_lo = 0.05;
    policy.q_hi = 0.95;
    const TrainingBounds bounds = training_bounds(table, policy);
    CHECK(bounds.u_lo ==
          doctest::Approx(oracle::quantile_sorted(log_s, 0.05)).epsilon(1e-14));
    CHECK(bounds.u_hi ==
          doctest::Approx(oracle::quantile_sorted(log_s, 0.95)).epsilon(1e-14));
    CHECK(bounds.v_lo ==
          doctest::Approx(oracle::quantile_sorted(log_t, 0.05)).epsilon(1e-14));
    CHECK(bounds.v_hi ==
          doctest::Approx(oracle::quantile_sorted(log_t, 0.95)).epsilon(1e-14));
  }
}

TEST_CASE("allocation tables") {
  SynthSpec spec;
  spec.families = 4;
  spec.models_per_family = 5;
  spec.benchmarks = 6;
  spec.d = 2;
  spec.seed = 21;
  const SynthResult fx = generate(spec);
  const TrainingBounds bounds = training_bounds(fx.table);

  const std::vector<double> budgets = {1e21, 5.78e21, 3.346e22};
  const auto rows = allocation_table(fx.truth, 0, budgets, bounds);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::abs(6.0 * rows[i].size_s * rows[i].tokens_t - budgets[i]) /
              budgets[i] < 1e-9);
  }

  SUBCASE("argmax does not depend on the family") {
    for (int family = 0; family < 4; ++family) {
      const auto other = allocation_table(fx.truth, 0, budgets, bounds, family);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(other[i].u == rows[i].u);
        CHECK(other[i].v == rows[i].v);
        CHECK(other[i].flag == rows[i].flag);
      }
    }
  }
  SUBCASE("monotone in budget when concave with interior vertex") {
    AllocationProblem p;
    p.slopes << 0.5, 0.3, 0.05;
    p.intercept = 0.0;
    p.u_lo = 18.0;
    p.u_hi = 28.0;
    p.v_lo = 25.0;
    p.v_hi = 32.0;
    double prev_s = 0.0;
    for (double l = 44.5; l <= 49.5; l += 0.5) {
      p.budget = 6.0 * std::exp(l);
      const Allocation a = optimal_allocation(p);
      if (a.flag == BoundaryFlag::interior_vertex) {
        CHECK(a.size_s >= prev_s);
        prev_s = a.size_s;
      }
    }
  }
}

TEST_CASE("budget saturation at the caps uses both extremes exactly") {
  AllocationProblem p;
  p.slopes << 0.5, 0.3, 0.05;  // increasing in both inputs over the range
  p.u_lo = std::log(0.16e9);
  p.u_hi = std::log(72e9);
  p.v_lo = std::log(0.18e12);
  p.v_hi = std::log(15e12);
  p.budget = 648000.0 * 1e19;  // exactly 6 * 72e9 * 15e12
  const Allocation a = optimal_allocation(p);
  CHECK(std::abs(a.size_s - 72e9) / 72e9 < 1e-12);
  CHECK(std::abs(a.tokens_t - 15e12) / 15e12 < 1e-12);
}
