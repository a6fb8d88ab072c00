// SPDX-License-Identifier: Apache-2.0

#include "sloth/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sloth/common.hpp"
#include "sloth/design.hpp"

namespace sloth {

void SynthSpec::check() const {
  if (families < 1 || models_per_family < 1 || benchmarks < 1 || d < 1)
    throw error("validation", "synthetic geometry fields must be positive");
  if (d > benchmarks)
    throw error("validation", "synthetic d must not exceed benchmark count");
  const int n = families * models_per_family;
  const int p = 3 + families;
  if (!(n >= p && p >= d))
    throw error("dimension",
                "synthetic geometry violates n >= p >= d (n=" +
                    std::to_string(n) + ", p=" + std::to_string(p) +
                    ", d=" + std::to_string(d) + ")");
  if (noise_std < 0.0) throw error("validation", "noise std must be >= 0");
}

namespace {

std::string index_name(const char* stem, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02d", stem, i);
  return buf;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  spec.check();
  Rng rng(spec.seed);

  const int I = spec.families, M = spec.models_per_family;
  const int J = spec.benchmarks, d = spec.d;

  std::vector<std::string> benchmarks, families;
  for (int j = 0; j < J; ++j) benchmarks.push_back(index_name("bench", j));
  for (int f = 0; f < I; ++f) families.push_back(index_name("fam", f));

  SlothParams truth =
      SlothParams::make(Variant::basic, benchmarks, families, d);

  // Asymptotes cycle through typical guess-rate floors.
  const double gamma_cycle[4] = {0.25, 0.0, 0.5, 0.1};
  for (int j = 0; j < J; ++j) truth.gammas[j].value = gamma_cycle[j % 4];

  // Size/token grids with independent variation so the design is full rank.
  std::vector<ModelRecord> records;
  for (int f = 0; f < I; ++f) {
    for (int m = 0; m < M; ++m) {
      ModelRecord rec;
      rec.model_id = families[f] + "-m" + std::to_string(m);
      rec.family_id = families[f];
      rec.base_family_id = families[f];
      rec.version_group = index_name("line", f);
      rec.size_s = 0.2e9 * std::pow(1.35, f) * std::pow(2.2, m);
      rec.tokens_t = 0.15e12 * std::pow(1.9, (2 * m + f) % 5) *
                     std::pow(1.15, (m + 2 * f) % 3);
      records.push_back(std::move(rec));
    }
  }

  // Raw coefficients, then canonicalize so skills are exactly standardized.
  for (int k = 0; k < d; ++k) {
    truth.coeffs(0, k) = rng.uniform(0.2, 0.5);
    truth.coeffs(1, k) = rng.uniform(0.1, 0.3);
    truth.coeffs(2, k) = rng.uniform(0.005, 0.02);
    for (int f = 0; f < I; ++f)
      truth.coeffs(3 + f, k) = rng.normal(0.0, 0.6);
  }

  const int n = I * M;
  Eigen::MatrixXd X(n, 3 + I);
  X.setZero();
  for (int i = 0; i < n; ++i) {
    const auto& rec = records[i];
    const FeatureVector fv = feature_vector(rec.size_s, rec.tokens_t);
    X(i, 0) = fv.log_s;
    X(i, 1) = fv.log_t;
    X(i, 2) = fv.interaction;
    X(i, 3 + i / M) = 1.0;
  }

  Eigen::MatrixXd theta = X * truth.coeffs;
  const Eigen::RowVectorXd mean = theta.colwise().mean();
  const Eigen::MatrixXd centered = theta.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.eigenvalues().minCoeff() <= 1e-12)
    throw error("numeric", "degenerate synthetic skill covariance");
  const Eigen::MatrixXd whitener =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  truth.coeffs *= whitener;
  const Eigen::RowVectorXd shifted_mean = mean * whitener;
  for (int r = 3; r < truth.coeffs.rows(); ++r)
    truth.coeffs.row(r) -= shifted_mean;

  // Simple-structure loadings on the canonical (standardized) skill basis.
  for (int j = 0; j < J; ++j)
    truth.loadings(j, j % d) = rng.uniform(0.7, 1.5);
  for (int j = 0; j < J; ++j) truth.bias(j) = rng.uniform(-1.0, 1.0);

  // Forward model plus truncated additive noise.
  theta = X * truth.coeffs;
  Eigen::MatrixXd eta = theta * truth.loadings.transpose();
  eta.rowwise() += truth.bias.transpose();
  int truncations = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j) {
      const double g = truth.gammas[j].value;
      const double mu = g + (1.0 - g) * sigmoid(eta(i, j));
      double y = mu;
      if (spec.noise_std > 0.0) {
        y = mu + rng.normal(0.0, spec.noise_std);
        bool truncated = false;
        for (int attempt = 0; (y < 0.0 || y > 1.0) && attempt < 64; ++attempt) {
          truncated = true;
          y = mu + rng.normal(0.0, spec.noise_std);
        }
        if (y < 0.0 || y > 1.0) y = std::clamp(y, 0.0, 1.0);
        truncations += truncated ? 1 : 0;
      }
      records[i].scores[benchmarks[j]] = y;
    }
  }

  SynthResult result;
  result.table = ScoreTable::make(std::move(records), benchmarks);
  result.truncation_events = truncations;
  result.design_rank = numerical_rank(X);
  if (result.design_rank < 3 + I)
    throw error("numeric",
                "synthetic design is rank deficient (rank " +
                    std::to_string(result.design_rank) + " < p=" +
                    std::to_string(3 + I) + "); adjust the grids");
  if (numerical_rank(truth.loadings) < d)
    throw error("numeric", "synthetic loadings are rank deficient");
  result.asymptotes = AsymptoteConfig{};
  for (int j = 0; j < J; ++j)
    result.asymptotes.entries[benchmarks[j]] =
        GammaEntry{truth.gammas[j].value, GammaMode::fixed};
  result.truth = std::move(truth);
  return result;
}

}  // namespace sloth
