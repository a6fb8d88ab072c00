// SPDX-License-Identifier: Apache-2.0
//
// Output-preserving post-fit identification: whiten skills to identity
// covariance, Geomin oblique rotation of the loadings, zero-mean
// standardization with a compensating bias translation. Every stage leaves
// predictions unchanged; only the skill basis moves.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sloth/design.hpp"
#include "sloth/model.hpp"

namespace sloth {

struct GeominOptions {
  double epsilon = 0.01;
  int max_iterations = 500;
  double tol = 1e-6;      // projected-gradient Frobenius norm
  int random_starts = 16;  // in addition to the identity start
  uint64_t seed = 7;
};

struct GeominResult {
  Eigen::MatrixXd loadings;  // rotated
  Eigen::MatrixXd rotation;  // M with rows of M^{-1} unit-normalized
  double criterion = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> trace;  // accepted criterion values, best start
};

struct RotationResult {
  Eigen::MatrixXd rotation;   // M
  Eigen::MatrixXd whitening;  // A
  Eigen::MatrixXd loadings;   // final
  Eigen::MatrixXd coeffs;     // final
  Eigen::VectorXd bias;       // final
  Eigen::MatrixXd skill_correlation;  // d x d
  double geomin_criterion = 0.0;
  std::vector<double> iteration_trace;
  bool rotation_converged = true;
};

/// Geomin criterion q(L) = sum_j (prod_k (L_jk^2 + eps))^(1/d).
double geomin_criterion(const Eigen::MatrixXd& loadings, double epsilon);

/// Minimizes the Geomin criterion over oblique rotations by gradient
/// projection. Criterion at the output never exceeds the criterion at the
/// input; d = 1 returns the identity rotation.
GeominResult geomin_rotate(const Eigen::MatrixXd& loadings, double epsilon,
                           const GeominOptions& options = {});

/// B <- B A and Lambda <- Lambda (A^T)^-1 with A chosen so the skill sample
/// covariance (1/n convention) becomes the identity.
SlothParams whiten(const SlothParams& params, const DesignMatrix& design);
std::pair<SlothParams, Eigen::MatrixXd> whiten_with_transform(
    const SlothParams& params, const DesignMatrix& design);

/// Centers skill columns; the bias absorbs the shift so outputs are fixed.
SlothParams standardize_skills(const SlothParams& params,
                               const DesignMatrix& design);

/// whiten -> geomin rotation (with deterministic column order and signs)
/// -> zero-mean standardization.
std::pair<SlothParams, RotationResult> interpret_pipeline(
    const SlothParams& params, const DesignMatrix& design,
    const GeominOptions& options = {});

}  // namespace sloth
