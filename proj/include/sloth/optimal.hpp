// SPDX-License-Identifier: Apache-2.0
//
// Compute-optimal allocation of a FLOPs budget between parameters and
// tokens for one skill. With u = log s, v = log t and l = log(c/6), the
// budget constraint is u + v = l and the skill reduces to the quadratic
//   g(u) = -b2 u^2 + (b0 - b1 + b2 l) u + (alpha + b1 l)
// maximized over U = [max(l - v_hi, u_lo), min(l - v_lo, u_hi)].

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sloth/dataset.hpp"
#include "sloth/model.hpp"

namespace sloth {

struct AllocationProblem {
  int skill = 0;   // index into the skill columns
  int family = 0;  // shifts the objective's constant only
  Eigen::Vector3d slopes = Eigen::Vector3d::Zero();  // b0, b1, b2
  double intercept = 0.0;                            // alpha_ik
  double budget = 0.0;                               // c in FLOPs
  double u_lo = 0.0, u_hi = 0.0;                     // log-params bounds
  double v_lo = 0.0, v_hi = 0.0;                     // log-tokens bounds
};

enum class BoundaryFlag { interior_vertex, lower_edge, upper_edge };

std::string boundary_flag_name(BoundaryFlag flag);

struct Allocation {
  double size_s = 0.0;
  double tokens_t = 0.0;
  double skill_value = 0.0;
  double u = 0.0;  // log size, for exact budget-identity checks
  double v = 0.0;  // log tokens
  BoundaryFlag flag = BoundaryFlag::interior_vertex;
};

/// g(u) for a problem; exposed so optimality certificates can enumerate
/// candidates.
double allocation_objective(const AllocationProblem& problem, double u);

/// Feasible interval [lo, hi]; throws "infeasible" naming the violated bound.
std::pair<double, double> feasible_interval(const AllocationProblem& problem);

Allocation optimal_allocation(const AllocationProblem& problem);

struct BoundsPolicy {
  enum class Kind { min_max, quantile };
  Kind kind = Kind::min_max;
  double q_lo = 0.05;
  double q_hi = 0.95;
};

struct TrainingBounds {
  double u_lo = 0.0, u_hi = 0.0;  // log params
  double v_lo = 0.0, v_hi = 0.0;  // log tokens
};

TrainingBounds training_bounds(const ScoreTable& table,
                               const BoundsPolicy& policy = {});

/// One allocation per budget for the chosen skill; the family index only
/// shifts reported skill values, never the argmax.
std::vector<Allocation> allocation_table(const SlothParams& params, int skill,
                                         const std::vector<double>& budgets,
                                         const TrainingBounds& bounds,
                                         int family = 0);

}  // namespace sloth
