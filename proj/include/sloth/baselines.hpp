// SPDX-License-Identifier: Apache-2.0
//
// Comparison estimators: sigmoid-on-log-FLOPs scaling laws with three
// parameter-sharing modes, and principal-component regression on log-FLOPs.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sloth/dataset.hpp"
#include "sloth/model.hpp"

namespace sloth {

enum class Sharing { shared_all, family_intercept, family_both };

std::string sharing_name(Sharing s);

/// Per-benchmark eta = alpha + beta * log c(s,t) behind the usual
/// asymptote-adjusted sigmoid.
struct FlopsParams {
  Sharing sharing = Sharing::family_intercept;
  std::vector<std::string> benchmarks;
  std::vector<std::string> families;
  Eigen::VectorXd gammas;    // J
  Eigen::MatrixXd alpha;     // J x 1 (shared) or J x m
  Eigen::MatrixXd beta;      // J x 1 (shared) or J x m

  int J() const { return static_cast<int>(benchmarks.size()); }
};

struct FlopsFitConfig {
  double delta = 0.01;
  int max_steps = 4000;
  double initial_lr = 0.05;
  double lr_decay = 0.999;
  int restarts = 2;  // additional random restarts beyond the warm start
  uint64_t seed = 0;
};

FlopsParams fit_flops(const ScoreTable& table, Sharing sharing,
                      const AsymptoteConfig& asymptotes,
                      const FlopsFitConfig& config = {});

/// Training Huber loss of a FLOPs model on a table (for nesting checks).
double flops_loss(const FlopsParams& params, const ScoreTable& table,
                  double delta);

struct PcaFlopsParams {
  std::vector<std::string> benchmarks;
  std::vector<std::string> families;  // families with complete training rows
  int d = 0;
  Sharing sharing = Sharing::family_intercept;  // family_both adds slopes
  Eigen::MatrixXd eigenvectors;  // J x J, descending eigenvalue order
  Eigen::VectorXd eigenvalues;   // J, descending
  Eigen::VectorXd col_means;     // J
  Eigen::MatrixXd intercepts;    // d x m
  Eigen::MatrixXd slopes;        // d x 1 (shared) or d x m

  int J() const { return static_cast<int>(benchmarks.size()); }
};

/// PCA on the raw score covariance over complete rows, then per-component
/// least squares on log-FLOPs (ridge 1e-10 for conditioning).
PcaFlopsParams fit_pca_flops(const ScoreTable& table, int d, Sharing sharing);

/// Projects centered scores onto the retained components (rows x d).
Eigen::MatrixXd pca_project(const PcaFlopsParams& params,
                            const Eigen::MatrixXd& scores);
/// Maps component scores back to the score scale (adds the column means).
Eigen::MatrixXd pca_reconstruct(const PcaFlopsParams& params,
                                const Eigen::MatrixXd& components);

/// FLOPs predictions are bounded in [gamma_j, 1); PCA predictions are
/// unbounded here and clipped only at report time.
Eigen::MatrixXd predict_baseline(const FlopsParams& params,
                                 const std::vector<ModelRecord>& records);
Eigen::MatrixXd predict_baseline(const PcaFlopsParams& params,
                                 const std::vector<ModelRecord>& records);

/// Appendix-style trainable-scalar audit for the FLOPs family of baselines
/// (one bias and one asymptote per benchmark plus slope/intercept blocks).
ParamCountBreakdown flops_skeleton_count(Sharing sharing, int J, int f);

}  // namespace sloth
