// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles. Everything here is written independently of the
// library code paths it checks: naive loops, cyclic Jacobi, grid search,
// Monte-Carlo simulation, exhaustive sign/permutation alignment.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

inline Eigen::MatrixXd naive_matmul(const Eigen::MatrixXd& a,
                                    const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j)
      for (int k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

/// Cyclic Jacobi eigensolver for symmetric matrices. Returns eigenvalues in
/// descending order with matching eigenvector columns.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_symmetric_eig(
    Eigen::MatrixXd a, double tol = 1e-14, int max_sweeps = 100) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < tol * std::max(1.0, a.norm())) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  Eigen::VectorXd values(n);
  for (int i = 0; i < n; ++i) values(i) = a(i, i);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return values(x) > values(y); });
  Eigen::VectorXd sorted_values(n);
  Eigen::MatrixXd sorted_vectors(n, n);
  for (int i = 0; i < n; ++i) {
    sorted_values(i) = values(order[i]);
    sorted_vectors.col(i) = v.col(order[i]);
  }
  return {sorted_values, sorted_vectors};
}

/// Numerical rank from the Jacobi eigenvalues of X^T X at the usual
/// singular-value tolerance (1e-9 * sigma_max).
inline int jacobi_rank(const Eigen::MatrixXd& x) {
  const auto [values, vectors] = jacobi_symmetric_eig(x.transpose() * x);
  const double sigma_max = std::sqrt(std::max(values(0), 0.0));
  int rank = 0;
  for (int i = 0; i < values.size(); ++i)
    if (std::sqrt(std::max(values(i), 0.0)) > 1e-9 * sigma_max) ++rank;
  return rank;
}

/// Sort-based quantile with linear interpolation between closest ranks.
inline double quantile_sorted(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Dense grid maximization of a callable over [lo, hi].
template <typename F>
std::pair<double, double> grid_max(F&& f, double lo, double hi, double step) {
  double best_u = lo;
  double best_v = f(lo);
  for (double u = lo; u <= hi; u += step) {
    const double v = f(u);
    if (v > best_v) {
      best_v = v;
      best_u = u;
    }
  }
  const double v_hi = f(hi);
  if (v_hi > best_v) {
    best_v = v_hi;
    best_u = hi;
  }
  return {best_u, best_v};
}

/// Best max-abs loading discrepancy over all signed column permutations
/// (both inputs compared entrywise in absolute value after alignment).
inline double aligned_loading_error(const Eigen::MatrixXd& estimate,
                                    const Eigen::MatrixXd& truth) {
  const int d = static_cast<int>(truth.cols());
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    for (int signs = 0; signs < (1 << d); ++signs) {
      double worst = 0.0;
      for (int k = 0; k < d; ++k) {
        const double sign = (signs >> k) & 1 ? -1.0 : 1.0;
        for (int j = 0; j < truth.rows(); ++j) {
          worst = std::max(worst,
                           std::abs(sign * estimate(j, perm[k]) - truth(j, k)));
        }
      }
      best = std::min(best, worst);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// 64-bit splitmix generator local to the oracles (kept separate from the
/// library RNG on purpose).
struct Rand {
  uint64_t state;
  explicit Rand(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586477 * uniform());
  }
};

/// Monte-Carlo pass@k over independent attempt streams: per trial and
/// question, Bernoulli attempts run until the first success (capped at
/// max k), and pass@k counts trials whose first success came within k.
inline std::vector<double> passk_monte_carlo(const Eigen::VectorXd& p,
                                             const std::vector<long>& ks,
                                             long samples, uint64_t seed) {
  const long max_k = *std::max_element(ks.begin(), ks.end());
  Rand rng(seed);
  std::vector<double> hits(ks.size(), 0.0);
  for (long trial = 0; trial < samples; ++trial) {
    for (int j = 0; j < p.size(); ++j) {
      long first_success = max_k + 1;
      for (long attempt = 1; attempt <= max_k; ++attempt) {
        if (rng.uniform() < p(j)) {
          first_success = attempt;
          break;
        }
      }
      for (std::size_t i = 0; i < ks.size(); ++i)
        if (first_success <= ks[i]) hits[i] += 1.0;
    }
  }
  for (auto& h : hits)
    h /= static_cast<double>(samples) * static_cast<double>(p.size());
  return hits;
}

/// Random orthogonal matrix via Gram-Schmidt on Gaussian columns.
inline Eigen::MatrixXd random_orthogonal(int d, Rand& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  for (int c = 0; c < d; ++c) {
    for (int prev = 0; prev < c; ++prev)
      m.col(c) -= m.col(prev).dot(m.col(c)) * m.col(prev);
    m.col(c).normalize();
  }
  return m;
}

/// Random invertible matrix with bounded condition number.
inline Eigen::MatrixXd random_invertible(int d, Rand& rng) {
  for (;;) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin > 1e-2 && smax / smin < 1e3) return m;
  }
}

}  // namespace oracle
