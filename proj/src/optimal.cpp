// SPDX-License-Identifier: Apache-2.0

#include "sloth/optimal.hpp"

#include <algorithm>
#include <cmath>

#include "sloth/common.hpp"
#include "sloth/design.hpp"

namespace sloth {

std::string boundary_flag_name(BoundaryFlag flag) {
  switch (flag) {
    case BoundaryFlag::interior_vertex: return "interior-vertex";
    case BoundaryFlag::lower_edge: return "lower-edge";
    case BoundaryFlag::upper_edge: return "upper-edge";
  }
  throw error("internal", "unknown boundary flag");
}

double allocation_objective(const AllocationProblem& problem, double u) {
  const double l = std::log(problem.budget) - std::log(6.0);
  const double b0 = problem.slopes(0), b1 = problem.slopes(1),
               b2 = problem.slopes(2);
  return -b2 * u * u + (b0 - b1 + b2 * l) * u + (problem.intercept + b1 * l);
}

std::pair<double, double> feasible_interval(const AllocationProblem& problem) {
  if (!(problem.budget > 0.0))
    throw error("validation", "budget must be positive");
  if (problem.u_lo > problem.u_hi || problem.v_lo > problem.v_hi)
    throw error("validation", "bounds must satisfy lo <= hi");
  const double l = std::log(problem.budget) - std::log(6.0);
  double lo = std::max(l - problem.v_hi, problem.u_lo);
  double hi = std::min(l - problem.v_lo, problem.u_hi);
  // collapse rounding-level violations of degenerate intervals
  if (lo > hi && lo - hi <= 1e-9 * std::max(1.0, std::abs(lo))) {
    lo = hi = 0.5 * (lo + hi);
  }
  if (lo > hi) {
    const bool too_small = l - problem.v_hi > problem.u_hi;
    throw error("infeasible",
                too_small
                    ? "budget too large: even at the token cap, log-params "
                      "would exceed its upper bound"
                    : "budget too small: even at the token floor, log-params "
                      "would fall below its lower bound");
  }
  return {lo, hi};
}

Allocation optimal_allocation(const AllocationProblem& problem) {
  const auto [lo, hi] = feasible_interval(problem);
  const double l = std::log(problem.budget) - std::log(6.0);
  const double b0 = problem.slopes(0), b1 = problem.slopes(1),
               b2 = problem.slopes(2);

  Allocation out;
  if (b2 > 0.0) {
    // concave parabola: vertex, clipped to the interval
    const double vertex = (b0 - b1 + b2 * l) / (2.0 * b2);
    if (vertex < lo) {
      out.u = lo;
      out.flag = BoundaryFlag::lower_edge;
    } else if (vertex > hi) {
      out.u = hi;
      out.flag = BoundaryFlag::upper_edge;
    } else {
      out.u = vertex;
      out.flag = BoundaryFlag::interior_vertex;
    }
  } else if (b2 < 0.0) {
    // convex: an endpoint wins; ties go to the lower edge
    const double g_lo = allocation_objective(problem, lo);
    const double g_hi = allocation_objective(problem, hi);
    if (g_hi > g_lo) {
      out.u = hi;
      out.flag = BoundaryFlag::upper_edge;
    } else {
      out.u = lo;
      out.flag = BoundaryFlag::lower_edge;
    }
  } else {
    const double slope = b0 - b1;
    if (slope > 0.0) {
      out.u = hi;
      out.flag = BoundaryFlag::upper_edge;
    } else if (slope < 0.0) {
      out.u = lo;
      out.flag = BoundaryFlag::lower_edge;
    } else {
      // flat objective: documented tie-break to the interval midpoint
      out.u = 0.5 * (lo + hi);
      out.flag = BoundaryFlag::interior_vertex;
    }
  }
  out.v = l - out.u;
  out.size_s = std::exp(out.u);
  out.tokens_t = std::exp(out.v);
  out.skill_value = allocation_objective(problem, out.u);
  return out;
}

TrainingBounds training_bounds(const ScoreTable& table,
                               const BoundsPolicy& policy) {
  if (table.records.empty())
    throw error("validation", "cannot derive bounds from an empty table");
  std::vector<double> log_s, log_t;
  for (const auto& rec : table.records) {
    log_s.push_back(std::log(rec.size_s));
    log_t.push_back(std::log(rec.tokens_t));
  }
  TrainingBounds bounds;
  if (policy.kind == BoundsPolicy::Kind::min_max) {
    bounds.u_lo = *std::min_element(log_s.begin(), log_s.end());
    bounds.u_hi = *std::max_element(log_s.begin(), log_s.end());
    bounds.v_lo = *std::min_element(log_t.begin(), log_t.end());
    bounds.v_hi = *std::max_element(log_t.begin(), log_t.end());
  } else {
    bounds.u_lo = quantile(log_s, policy.q_lo);
    bounds.u_hi = quantile(log_s, policy.q_hi);
    bounds.v_lo = quantile(log_t, policy.q_lo);
    bounds.v_hi = quantile(log_t, policy.q_hi);
  }
  return bounds;
}

std::vector<Allocation> allocation_table(const SlothParams& params, int skill,
                                         const std::vector<double>& budgets,
                                         const TrainingBounds& bounds,
                                         int family) {
  if (skill < 0 || skill >= params.d)
    throw error("validation", "skill index out of range");
  if (family < 0 || family >= params.intercept_rows())
    throw error("validation", "family index out of range");
  AllocationProblem problem;
  problem.skill = skill;
  problem.family = family;
  problem.slopes << params.coeffs(0, skill), params.coeffs(1, skill),
      params.coeffs(2, skill);
  problem.intercept = params.coeffs(3 + family, skill);
  problem.u_lo = bounds.u_lo;
  problem.u_hi = bounds.u_hi;
  problem.v_lo = bounds.v_lo;
  problem.v_hi = bounds.v_hi;

  std::vector<Allocation> out;
  for (const double budget : budgets) {
    problem.budget = budget;
    out.push_back(optimal_allocation(problem));
  }
  return out;
}

}  // namespace sloth
