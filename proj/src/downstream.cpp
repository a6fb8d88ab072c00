// SPDX-License-Identifier: Apache-2.0

#include "sloth/downstream.hpp"

#include <algorithm>
#include <cmath>

#include "sloth/common.hpp"
#include "sloth/csv.hpp"
#include "sloth/optim.hpp"

namespace sloth {

SkillRegression fit_task_regression(const Eigen::MatrixXd& skill_rows,
                                    const Eigen::VectorXd& outcomes,
                                    double lambda,
                                    const RegressionConfig& config) {
  const int n = static_cast<int>(skill_rows.rows());
  const int d = static_cast<int>(skill_rows.cols());
  if (n == 0) throw error("validation", "no training models");
  if (outcomes.size() != n)
    throw error("dimension", "outcome count does not match skill rows");
  if (lambda < 0.0) throw error("validation", "lambda must be >= 0");
  for (int i = 0; i < n; ++i)
    if (!(outcomes(i) >= 0.0 && outcomes(i) <= 1.0))
      throw error("validation", "outcomes must lie in [0,1]");

  SkillRegression reg;
  reg.lambda = lambda;
  reg.small_sample_warning = n < d + 2;

  const double mean = outcomes.mean();
  if ((outcomes.array() - outcomes(0)).abs().maxCoeff() == 0.0) {
    reg.weights = Eigen::VectorXd::Zero(d);
    reg.intercept = logit(std::clamp(mean, 1e-6, 1.0 - 1e-6));
    reg.degenerate = true;
    return reg;
  }

  // Parameters packed as [w0, w].
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d + 1);
  x(0) = logit(std::clamp(mean, 0.01, 0.99));
  auto loss_grad = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
    if (grad) grad->setZero();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = p(0) + skill_rows.row(i).dot(p.tail(d));
      const double s = sigmoid(z);
      const double r = s - outcomes(i);
      loss += r * r;
      if (grad) {
        const double gz = 2.0 * r * s * (1.0 - s);
        (*grad)(0) += gz;
        grad->tail(d) += gz * skill_rows.row(i).transpose();
      }
    }
    loss += lambda * p.tail(d).squaredNorm();
    if (grad) grad->tail(d) += 2.0 * lambda * p.tail(d);
    return loss;
  };

  AdamConfig adam_config;
  adam_config.initial_lr = config.initial_lr;
  adam_config.lr_decay = config.lr_decay;
  Adam adam(d + 1, adam_config);
  Eigen::VectorXd grad(d + 1);
  Eigen::VectorXd best = x;
  double best_loss = loss_grad(x, nullptr);
  for (int step = 0; step < config.max_steps; ++step) {
    const double loss = loss_grad(x, &grad);
    if (!std::isfinite(loss)) break;
    if (loss < best_loss) {
      best_loss = loss;
      best = x;
    }
    adam.step(x, grad);
  }
  if (const double last = loss_grad(x, nullptr);
      std::isfinite(last) && last < best_loss)
    best = x;

  reg.intercept = best(0);
  reg.weights = best.tail(d);
  return reg;
}

double predict_task(const SkillRegression& reg, const Eigen::VectorXd& skill) {
  if (skill.size() != reg.weights.size())
    throw error("dimension", "skill dimension does not match regression");
  return sigmoid(reg.intercept + reg.weights.dot(skill));
}

std::vector<SkillRegression> fit_item_models(const Eigen::MatrixXd& skill_rows,
                                             const Eigen::MatrixXd& item_outcomes,
                                             double lambda,
                                             const RegressionConfig& config) {
  if (skill_rows.rows() != item_outcomes.rows())
    throw error("dimension", "skill rows and outcome rows do not match");
  if (skill_rows.rows() < 2)
    throw error("validation", "need at least 2 training models");
  const int q = static_cast<int>(item_outcomes.cols());
  std::vector<SkillRegression> models(q);
  parallel_for(q, config.workers, [&](std::size_t j) {
    models[j] = fit_task_regression(skill_rows, item_outcomes.col(j), lambda,
                                    config);
  });
  return models;
}

Eigen::VectorXd predict_items(const std::vector<SkillRegression>& models,
                              const Eigen::VectorXd& skill) {
  Eigen::VectorXd p(models.size());
  for (std::size_t j = 0; j < models.size(); ++j)
    p(j) = predict_task(models[j], skill);
  return p;
}

Eigen::VectorXd predict_pass_at_k(const Eigen::VectorXd& p_hat,
                                  const std::vector<long>& k_values) {
  const int q = static_cast<int>(p_hat.size());
  if (q == 0) throw error("validation", "empty question set");
  for (int j = 0; j < q; ++j)
    if (!(p_hat(j) >= 0.0 && p_hat(j) <= 1.0))
      throw error("validation", "probabilities must lie in [0,1]");
  Eigen::VectorXd out(k_values.size());
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    const long k = k_values[i];
    if (k < 1) throw error("validation", "k must be >= 1");
    double sum = 0.0;
    for (int j = 0; j < q; ++j) {
      // k = 1 reduces to the plain mean; keep it exact
      sum += k == 1 ? p_hat(j)
                    : 1.0 - std::pow(1.0 - p_hat(j), static_cast<double>(k));
    }
    out(i) = sum / static_cast<double>(q);
  }
  return out;
}

TaskDataset load_task_csv(const std::string& path) {
  const csv::Table raw = csv::read_file(path);
  const int c_model = raw.column("model");
  const int c_score = raw.column("score");
  if (c_model < 0 || c_score < 0)
    throw error("validation",
                "task file needs 'model' and 'score' columns: " + path);
  TaskDataset ds;
  ds.outcomes.resize(raw.rows.size());
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    ds.model_ids.push_back(raw.rows[i][c_model]);
    ds.outcomes(i) = std::stod(raw.rows[i][c_score]);
    if (!(ds.outcomes(i) >= 0.0 && ds.outcomes(i) <= 1.0))
      throw error("validation", "task score out of [0,1] in row " +
                                    std::to_string(i + 2) + " of " + path);
  }
  return ds;
}

ItemDataset load_item_csv(const std::string& path) {
  const csv::Table raw = csv::read_file(path);
  const int c_model = raw.column("model");
  if (c_model < 0)
    throw error("validation", "item file needs a 'model' column: " + path);
  ItemDataset ds;
  for (std::size_t c = 0; c < raw.header.size(); ++c)
    if (static_cast<int>(c) != c_model)
      ds.question_ids.push_back(raw.header[c]);
  const int q = static_cast<int>(ds.question_ids.size());
  if (q == 0) throw error("validation", "item file has no question columns");
  ds.outcomes.resize(raw.rows.size(), q);
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    ds.model_ids.push_back(raw.rows[i][c_model]);
    int col = 0;
    for (std::size_t c = 0; c < raw.header.size(); ++c) {
      if (static_cast<int>(c) == c_model) continue;
      const double v = std::stod(raw.rows[i][c]);
      if (!(v >= 0.0 && v <= 1.0))
        throw error("validation", "item outcome out of [0,1] in row " +
                                      std::to_string(i + 2) + " of " + path);
      ds.outcomes(i, col++) = v;
    }
  }
  return ds;
}

}  // namespace sloth
