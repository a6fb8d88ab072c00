// SPDX-License-Identifier: Apache-2.0
//
// Compute features and the fixed design matrix: three shared translog
// columns (log s, log t, log s * log t) followed by one 0/1 intercept
// column per model family.

#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sloth/dataset.hpp"

namespace sloth {

struct FeatureVector {
  double log_s = 0.0;
  double log_t = 0.0;
  double interaction = 0.0;  // log_s * log_t
};

struct DesignMatrix {
  Eigen::MatrixXd matrix;                    // n x p, p = 3 + #families
  std::vector<std::string> column_roles;     // "log_s","log_t","log_s*log_t", then families
  std::map<std::string, int> family_index;   // family_id -> column
  std::vector<std::string> row_ids;          // model ids, table order
  std::vector<int> row_family;               // family column per row
  std::optional<int> rank_warning;           // numerical rank when deficient

  int n() const { return static_cast<int>(matrix.rows()); }
  int p() const { return static_cast<int>(matrix.cols()); }
  int n_families() const { return p() - 3; }
};

FeatureVector feature_vector(double size_s, double tokens_t);

/// Training compute approximation c(s,t) = 6 s t.
double flops(double size_s, double tokens_t);

DesignMatrix build_design(const ScoreTable& table);

/// Numerical rank at tolerance 1e-9 * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m);

}  // namespace sloth
