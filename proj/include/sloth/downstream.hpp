// SPDX-License-Identifier: Apache-2.0
//
// Downstream-task prediction from estimated skills: squared-error logistic
// regressions on skill vectors (scalar tasks and per-question item models)
// and pass@k curves from predicted per-question success probabilities.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace sloth {

/// Scalar task outcomes per model.
struct TaskDataset {
  std::vector<std::string> model_ids;
  Eigen::VectorXd outcomes;  // in [0,1]
};

/// Per-question outcomes per model (success rates or 0/1 samples).
struct ItemDataset {
  std::vector<std::string> model_ids;
  std::vector<std::string> question_ids;
  Eigen::MatrixXd outcomes;  // models x questions, in [0,1]
};

struct SkillRegression {
  Eigen::VectorXd weights;  // d
  double intercept = 0.0;
  double lambda = 0.0;
  bool degenerate = false;           // constant outcomes
  bool small_sample_warning = false;  // fewer than d + 2 models
};

struct RegressionConfig {
  int max_steps = 5000;
  double initial_lr = 0.05;
  double lr_decay = 0.999;
  uint64_t seed = 0;
  int workers = 1;
};

/// Minimizes sum (sigmoid(w0 + w.theta) - y)^2 + lambda ||w||^2.
SkillRegression fit_task_regression(const Eigen::MatrixXd& skill_rows,
                                    const Eigen::VectorXd& outcomes,
                                    double lambda,
                                    const RegressionConfig& config = {});

double predict_task(const SkillRegression& reg, const Eigen::VectorXd& skill);

/// Independent regression per question (small-sample L2 is essential).
std::vector<SkillRegression> fit_item_models(const Eigen::MatrixXd& skill_rows,
                                             const Eigen::MatrixXd& item_outcomes,
                                             double lambda,
                                             const RegressionConfig& config = {});

/// Per-question success probabilities for one model.
Eigen::VectorXd predict_items(const std::vector<SkillRegression>& models,
                              const Eigen::VectorXd& skill);

/// pass@k = mean_j (1 - (1 - p_j)^k); non-decreasing in k, pass@1 = mean(p).
Eigen::VectorXd predict_pass_at_k(const Eigen::VectorXd& p_hat,
                                  const std::vector<long>& k_values);

TaskDataset load_task_csv(const std::string& path);
ItemDataset load_item_csv(const std::string& path);

}  // namespace sloth
