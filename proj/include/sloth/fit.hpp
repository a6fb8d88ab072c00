// SPDX-License-Identifier: Apache-2.0
//
// Robust fitting of the scaling-law parameters: summed Huber loss over
// observed cells, Adam with decaying learning rate on standardized compute
// features, constraint projection after every step, multiple restarts.

#pragma once

#include <cstdint>
#include <vector>

#include "sloth/dataset.hpp"
#include "sloth/design.hpp"
#include "sloth/model.hpp"

namespace sloth {

struct FitConfig {
  double delta = 0.01;   // Huber threshold
  int d = 3;             // latent skill count (forced to J for size-and-tokens)
  int max_steps = 20000;
  double initial_lr = 0.05;
  double lr_decay = 0.999;
  int restarts = 5;
  uint64_t seed = 0;
  Variant variant = Variant::basic;
  double tol = 1e-11;    // stop when best-loss improvement per window drops below
  int check_every = 500;
  int link_hidden = 8;
  int workers = 1;
  bool run_gradient_check = true;

  void check() const;
};

struct FitReport {
  double final_loss = 0.0;
  std::vector<double> restart_losses;  // +inf for discarded restarts
  int chosen_restart = -1;
  long steps_run = 0;                          // steps of the chosen restart
  double gradient_check_max_rel_error = -1.0;  // -1 when skipped
  Standardization standardization;
  std::vector<double> best_loss_trace;  // best-so-far at checkpoints, chosen restart
  std::vector<int> discarded_restarts;  // diverged (non-finite loss)
};

/// Huber loss of a residual: r^2/2 inside |r| <= delta, delta(|r| - delta/2)
/// outside. The linear-branch derivative is used at |r| == delta.
double huber(double residual, double delta);
double huber_deriv(double residual, double delta);

/// Sum of huber(mu_ij - Y_ij, delta) over present cells.
double total_loss(const SlothParams& params, const DesignMatrix& design,
                  const ScoreTable& table, double delta);

/// Best-of-restarts fit. Monotone-net weights are clamped nonnegative after
/// every step; trainable gammas stay in [0,1) via their sigmoid storage.
std::pair<SlothParams, FitReport> fit(const ScoreTable& table,
                                      const FitConfig& config,
                                      const AsymptoteConfig& asymptotes);

/// Max relative deviation between the analytic gradient of total_loss and
/// central finite differences (step 1e-5 on the standardized internal
/// parameters), with absolute floor 1e-8.
double gradient_check(const SlothParams& params, const DesignMatrix& design,
                      const ScoreTable& table, double delta);

/// Constraint projection used after every optimizer step (and exposed for
/// idempotence checks): clamps monotone-net weights to the nonnegative
/// orthant and refreshes trainable gammas.
void project_constraints(SlothParams& params);

}  // namespace sloth
