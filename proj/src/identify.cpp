// SPDX-License-Identifier: Apache-2.0

#include "sloth/identify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sloth/common.hpp"

namespace sloth {

double geomin_criterion(const Eigen::MatrixXd& loadings, double epsilon) {
  const double inv_d = 1.0 / static_cast<double>(loadings.cols());
  double q = 0.0;
  for (int j = 0; j < loadings.rows(); ++j) {
    double log_prod = 0.0;
    for (int k = 0; k < loadings.cols(); ++k)
      log_prod += std::log(loadings(j, k) * loadings(j, k) + epsilon);
    q += std::exp(inv_d * log_prod);
  }
  return q;
}

namespace {

// Criterion and its gradient with respect to the rotated loadings.
double geomin_with_grad(const Eigen::MatrixXd& L, double epsilon,
                        Eigen::MatrixXd& grad) {
  const int J = static_cast<int>(L.rows());
  const int d = static_cast<int>(L.cols());
  const double inv_d = 1.0 / static_cast<double>(d);
  grad.resize(J, d);
  double q = 0.0;
  for (int j = 0; j < J; ++j) {
    double log_prod = 0.0;
    for (int k = 0; k < d; ++k)
      log_prod += std::log(L(j, k) * L(j, k) + epsilon);
    const double pro = std::exp(inv_d * log_prod);
    q += pro;
    for (int k = 0; k < d; ++k)
      grad(j, k) = 2.0 * inv_d * L(j, k) / (L(j, k) * L(j, k) + epsilon) * pro;
  }
  return q;
}

void normalize_columns(Eigen::MatrixXd& t) {
  for (int c = 0; c < t.cols(); ++c) {
    const double norm = t.col(c).norm();
    if (norm <= 1e-14)
      throw error("numeric", "degenerate rotation column during Geomin");
    t.col(c) /= norm;
  }
}

struct GpaRun {
  Eigen::MatrixXd t;
  double criterion = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// Oblique gradient-projection iterations: loadings L = A (T^T)^{-1} with
// unit-norm columns of T; backtracking halving from step 1.
GpaRun gpa_oblique(const Eigen::MatrixXd& a, double epsilon,
                   Eigen::MatrixXd t, int max_iterations, double tol) {
  GpaRun run;
  normalize_columns(t);
  Eigen::MatrixXd ti = t.inverse();
  Eigen::MatrixXd l = a * ti.transpose();
  Eigen::MatrixXd gq;
  double f = geomin_with_grad(l, epsilon, gq);
  Eigen::MatrixXd g = -(l.transpose() * gq * ti).transpose();
  run.trace.push_back(f);

  for (int iter = 0; iter < max_iterations; ++iter) {
    run.iterations = iter + 1;
    const Eigen::VectorXd tg = (t.array() * g.array()).colwise().sum();
    const Eigen::MatrixXd gp = g - t * tg.asDiagonal();
    const double s = gp.norm();
    if (s < tol) {
      run.converged = true;
      run.iterations = iter;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      Eigen::MatrixXd tt = t - step * gp;
      bool bad = false;
      for (int c = 0; c < tt.cols() && !bad; ++c)
        if (tt.col(c).norm() <= 1e-14) bad = true;
      if (!bad) {
        normalize_columns(tt);
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(tt);
        if (lu.isInvertible()) {
          const Eigen::MatrixXd tti = lu.inverse();
          const Eigen::MatrixXd lt = a * tti.transpose();
          Eigen::MatrixXd gqt;
          const double ft = geomin_with_grad(lt, epsilon, gqt);
          if (ft < f - 0.5 * s * s * step) {
            t = tt;
            ti = tti;
            l = lt;
            f = ft;
            g = -(l.transpose() * gqt * ti).transpose();
            run.trace.push_back(f);
            accepted = true;
            break;
          }
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled; report best iterate
  }
  run.t = t;
  run.criterion = f;
  return run;
}

}  // namespace

GeominResult geomin_rotate(const Eigen::MatrixXd& loadings, double epsilon,
                           const GeominOptions& options) {
  if (!(epsilon > 0.0)) throw error("validation", "Geomin epsilon must be > 0");
  const int d = static_cast<int>(loadings.cols());
  GeominResult result;
  if (d <= 1) {
    result.loadings = loadings;
    result.rotation = Eigen::MatrixXd::Identity(std::max(d, 1), std::max(d, 1));
    result.criterion = geomin_criterion(loadings, epsilon);
    result.converged = true;
    return result;
  }

  Rng rng(options.seed);
  GpaRun best;
  bool have_best = false;
  for (int start = 0; start <= options.random_starts; ++start) {
    Eigen::MatrixXd t0(d, d);
    if (start == 0) {
      t0.setIdentity();
    } else {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t0(i, j) = rng.normal();
    }
    GpaRun run;
    try {
      run = gpa_oblique(loadings, epsilon, t0, options.max_iterations,
                        options.tol);
    } catch (const error&) {
      continue;  // degenerate start
    }
    if (!have_best || run.criterion < best.criterion) {
      best = std::move(run);
      have_best = true;
    }
  }
  if (!have_best)
    throw error("numeric", "Geomin rotation failed from every start");

  result.rotation = best.t.inverse().transpose();  // M = (T^T)^{-1}
  result.loadings = loadings * result.rotation;
  result.criterion = best.criterion;
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.trace = std::move(best.trace);
  return result;
}

std::pair<SlothParams, Eigen::MatrixXd> whiten_with_transform(
    const SlothParams& params, const DesignMatrix& design) {
  const SkillMatrix theta = skills(params, design);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(theta.covariance);
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, max_eig))
    throw error("numeric",
                "skill covariance is numerically singular; the latent "
                "dimension d is likely too large for this data");
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd sqrt_vals = eig.eigenvalues().cwiseSqrt();
  const Eigen::MatrixXd a =
      eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::MatrixXd a_inv =
      eig.eigenvectors() * sqrt_vals.asDiagonal() * eig.eigenvectors().transpose();

  SlothParams out = params;
  out.coeffs = params.coeffs * a;
  out.loadings = params.loadings * a_inv.transpose();  // (A^T)^{-1} = A^{-1}
  return {std::move(out), a};
}

SlothParams whiten(const SlothParams& params, const DesignMatrix& design) {
  return whiten_with_transform(params, design).first;
}

SlothParams standardize_skills(const SlothParams& params,
                               const DesignMatrix& design) {
  const SkillMatrix theta = skills(params, design);
  SlothParams out = params;
  out.bias += params.loadings * theta.col_means;
  for (int r = 3; r < out.coeffs.rows(); ++r)
    out.coeffs.row(r) -= theta.col_means.transpose();
  return out;
}

std::pair<SlothParams, RotationResult> interpret_pipeline(
    const SlothParams& params, const DesignMatrix& design,
    const GeominOptions& options) {
  auto [whitened, a] = whiten_with_transform(params, design);

  GeominResult rotation =
      geomin_rotate(whitened.loadings, options.epsilon, options);
  Eigen::MatrixXd m = rotation.rotation;
  Eigen::MatrixXd rotated = rotation.loadings;
  const int d = static_cast<int>(rotated.cols());

  // Deterministic reporting convention: columns ordered by descending sum of
  // squared loadings, each flipped so its largest-magnitude entry is positive.
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd ssq = rotated.array().square().colwise().sum();
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return ssq(x) > ssq(y); });
  Eigen::MatrixXd signed_perm = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    int arg = 0;
    rotated.col(order[k]).cwiseAbs().maxCoeff(&arg);
    const double sign = rotated(arg, order[k]) >= 0.0 ? 1.0 : -1.0;
    signed_perm(order[k], k) = sign;
  }
  m = m * signed_perm;
  rotated = whitened.loadings * m;

  SlothParams rotated_params = whitened;
  rotated_params.loadings = rotated;
  rotated_params.coeffs =
      whitened.coeffs * m.transpose().inverse().eval();

  SlothParams final_params = standardize_skills(rotated_params, design);

  RotationResult result;
  result.rotation = std::move(m);
  result.whitening = std::move(a);
  result.loadings = final_params.loadings;
  result.coeffs = final_params.coeffs;
  result.bias = final_params.bias;
  result.skill_correlation = skills(final_params, design).covariance;
  result.geomin_criterion = geomin_criterion(final_params.loadings, options.epsilon);
  result.iteration_trace = std::move(rotation.trace);
  result.rotation_converged = rotation.converged;
  return {std::move(final_params), std::move(result)};
}

}  // namespace sloth
