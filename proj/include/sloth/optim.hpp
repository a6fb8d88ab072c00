// SPDX-License-Identifier: Apache-2.0
//
// Adam with exponentially decaying learning rate, over a flat parameter
// vector. Shared by the scaling-law fit, the FLOPs baselines, and the
// downstream skill regressions.

#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace sloth {

struct AdamConfig {
  double initial_lr = 0.05;
  double lr_decay = 0.999;  // lr_k = initial_lr * lr_decay^k
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(Eigen::Index size, AdamConfig config = {})
      : config_(config),
        m_(Eigen::VectorXd::Zero(size)),
        v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
    const double lr = config_.initial_lr * std::pow(config_.lr_decay, t_);
    ++t_;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config_.beta1, t_);
    const double c2 = 1.0 - std::pow(config_.beta2, t_);
    x.array() -= lr * (m_.array() / c1) /
                 ((v_.array() / c2).sqrt() + config_.epsilon);
  }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace sloth
