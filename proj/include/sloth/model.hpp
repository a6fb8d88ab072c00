// SPDX-License-Identifier: Apache-2.0
//
// Forward model for latent-skill scaling laws.
//
//   mu_ij    = gamma_j + (1 - gamma_j) * sigma_j(eta_ij)
//   eta_i    = Lambda * theta_i + b
//   theta_ik = alpha_ik + beta_k . (log s, log t, log s log t)
//
// Coefficients live in B (p x d): three shared slope rows, then one
// intercept row per family (a single shared row for the shared-intercept
// variant). Skills are the rows of X * B.

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sloth/design.hpp"

namespace sloth {

enum class Variant { basic, trainable_link, shared_intercept, size_and_tokens };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

enum class LinkKind { fixed_sigmoid, monotone_net };

/// Two-hidden-layer monotone network: elementwise-nonnegative weights,
/// unconstrained biases, tanh hidden activations, sigmoid output.
struct MonotoneNet {
  Eigen::VectorXd w1;  // hidden
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // hidden x hidden
  Eigen::VectorXd b2;  // hidden
  Eigen::VectorXd w3;  // hidden
  double b3 = 0.0;

  static MonotoneNet zero(int hidden);
  int hidden() const { return static_cast<int>(w1.size()); }
  double eval(double eta) const;
  /// Projects multiplicative weights onto the nonnegative orthant.
  void clamp_weights();
};

struct LinkFunction {
  LinkKind kind = LinkKind::fixed_sigmoid;
  MonotoneNet net;  // used only for monotone_net

  double eval(double eta) const;
};

/// Monotone non-decreasing map R -> (0,1).
double link_eval(const LinkFunction& link, double eta);

struct GammaParam {
  double value = 0.0;        // in [0,1)
  bool trainable = false;
  double pre_sigmoid = 0.0;  // value == sigmoid(pre_sigmoid) when trainable
};

/// Informational record of the feature scaling used during optimization.
/// Reported coefficients are always in raw (unstandardized) coordinates.
struct Standardization {
  bool applied = false;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d std = Eigen::Vector3d::Ones();
};

struct SlothParams {
  Variant variant = Variant::basic;
  std::vector<std::string> benchmarks;  // J
  std::vector<std::string> families;    // m
  int d = 0;
  Eigen::MatrixXd loadings;             // J x d (identity for size_and_tokens)
  Eigen::VectorXd bias;                 // J
  Eigen::MatrixXd coeffs;               // (3 + intercept rows) x d
  std::vector<GammaParam> gammas;       // J
  std::vector<LinkFunction> links;      // J
  Standardization standardization;

  /// Zero-initialized parameter set with consistent shapes.
  static SlothParams make(Variant variant, std::vector<std::string> benchmarks,
                          std::vector<std::string> families, int d,
                          int link_hidden = 8);

  int J() const { return static_cast<int>(benchmarks.size()); }
  int n_families() const { return static_cast<int>(families.size()); }
  int intercept_rows() const {
    return variant == Variant::shared_intercept ? 1 : n_families();
  }
  bool identity_loadings() const { return variant == Variant::size_and_tokens; }
  bool trainable_links() const {
    return variant == Variant::trainable_link ||
           variant == Variant::size_and_tokens;
  }

  /// Expands coeffs to a p x d matrix aligned with a family design (the
  /// shared intercept row is replicated for every family column).
  Eigen::MatrixXd full_coeffs(const DesignMatrix& design) const;

  /// Refreshes `value` from `pre_sigmoid` for trainable gammas.
  void sync_gammas();

  void check_shapes() const;
};

struct SkillMatrix {
  Eigen::MatrixXd values;      // n x d
  Eigen::VectorXd col_means;   // d
  Eigen::MatrixXd covariance;  // d x d, population (1/n) convention

  static SkillMatrix from_values(Eigen::MatrixXd values);
};

/// theta = X B.
SkillMatrix skills(const SlothParams& params, const DesignMatrix& design);

/// eta = theta Lambda^T + b per row.
Eigen::MatrixXd linear_predictors(const SlothParams& params,
                                  const SkillMatrix& skill_matrix);

/// mu_ij in [gamma_j, 1).
Eigen::MatrixXd predict_scores(const SlothParams& params,
                               const DesignMatrix& design);

/// Trainable-scalar audit (loadings + bias + asymptote per benchmark plus
/// slope/intercept blocks; link-network weights excluded by convention).
struct ParamCountBreakdown {
  long loadings = 0;
  long bias = 0;
  long gammas = 0;
  long slopes = 0;
  long intercepts = 0;
  long total() const { return loadings + bias + gammas + slopes + intercepts; }
};

ParamCountBreakdown skeleton_param_count(Variant variant, int J, int d, int f);
ParamCountBreakdown skeleton_param_count(const SlothParams& params);

// --- serialization (versioned JSON envelope) ---
std::string params_to_json(const SlothParams& params);
SlothParams params_from_json(const std::string& text);
void save_params(const std::string& path, const SlothParams& params);
SlothParams load_params(const std::string& path);

}  // namespace sloth
