// SPDX-License-Identifier: Apache-2.0

#include "sloth/design.hpp"

#include <cmath>

#include "sloth/common.hpp"

namespace sloth {

FeatureVector feature_vector(double size_s, double tokens_t) {
  if (!(size_s > 0.0) || !(tokens_t > 0.0))
    throw error("domain", "feature_vector requires positive size and tokens");
  FeatureVector f;
  f.log_s = std::log(size_s);
  f.log_t = std::log(tokens_t);
  f.interaction = f.log_s * f.log_t;
  return f;
}

double flops(double size_s, double tokens_t) {
  if (!(size_s > 0.0) || !(tokens_t > 0.0))
    throw error("domain", "flops requires positive size and tokens");
  return 6.0 * (size_s * tokens_t);
}

int numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double tol = 1e-9 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank;
}

DesignMatrix build_design(const ScoreTable& table) {
  if (table.records.empty())
    throw error("validation", "cannot build a design from an empty table");

  DesignMatrix design;
  design.column_roles = {"log_s", "log_t", "log_s*log_t"};
  const auto families = table.families();
  for (const auto& fam : families) {
    design.family_index[fam] = static_cast<int>(design.column_roles.size());
    design.column_roles.push_back(fam);
  }

  const int n = static_cast<int>(table.records.size());
  const int p = static_cast<int>(design.column_roles.size());
  design.matrix = Eigen::MatrixXd::Zero(n, p);
  design.row_ids.reserve(n);
  design.row_family.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& rec = table.records[i];
    const FeatureVector f = feature_vector(rec.size_s, rec.tokens_t);
    design.matrix(i, 0) = f.log_s;
    design.matrix(i, 1) = f.log_t;
    design.matrix(i, 2) = f.interaction;
    const int col = design.family_index.at(rec.family_id);
    design.matrix(i, col) = 1.0;
    design.row_ids.push_back(rec.model_id);
    design.row_family.push_back(col);
  }

  const int rank = numerical_rank(design.matrix);
  if (rank < p) design.rank_warning = rank;
  return design;
}

}  // namespace sloth
