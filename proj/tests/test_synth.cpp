// SPDX-License-Identifier: Apache-2.0

#include "sloth/synth.hpp"

#include <cmath>

#include "doctest.h"
#include "sloth/common.hpp"
#include "sloth/design.hpp"
#include "sloth/fit.hpp"

using namespace sloth;

TEST_CASE("noiseless generation reproduces the truth exactly") {
  SynthSpec spec;
  spec.families = 5;
  spec.models_per_family = 4;
  spec.benchmarks = 8;
  spec.d = 3;
  spec.noise_std = 0.0;
  spec.seed = 7;
  const SynthResult fx = generate(spec);
  const DesignMatrix design = build_design(fx.table);
  CHECK(total_loss(fx.truth, design, fx.table, 0.01) == 0.0);
  CHECK(fx.truncation_events == 0);
  CHECK(fx.design_rank == design.p());
}

TEST_CASE("same seed gives identical tables") {
  SynthSpec spec;
  spec.noise_std = 0.05;
  spec.seed = 123;
  const SynthResult a = generate(spec);
  const SynthResult b = generate(spec);
  REQUIRE(a.table.n_models() == b.table.n_models());
  for (std::size_t i = 0; i < a.table.records.size(); ++i)
    CHECK(a.table.records[i].scores == b.table.records[i].scores);  // bitwise

  SynthSpec other = spec;
  other.seed = 124;
  const SynthResult c = generate(other);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.table.records.size(); ++i)
    if (a.table.records[i].scores != c.table.records[i].scores)
      any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("noise standard deviation is close to nominal over 10^4 cells") {
  SynthSpec spec;
  spec.families = 14;
  spec.models_per_family = 60;
  spec.benchmarks = 12;
  spec.d = 3;
  spec.noise_std = 0.02;
  spec.seed = 31;
  const SynthResult noisy = generate(spec);

  SynthSpec clean = spec;
  clean.noise_std = 0.0;
  const SynthResult base = generate(clean);

  double sum_sq = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < noisy.table.records.size(); ++i) {
    for (const auto& bench : noisy.table.benchmarks) {
      const double diff = noisy.table.records[i].scores.at(bench) -
                          base.table.records[i].scores.at(bench);
      sum_sq += diff * diff;
      ++count;
    }
  }
  REQUIRE(count >= 10000);
  const double std_hat = std::sqrt(sum_sq / static_cast<double>(count));
  CHECK(std_hat > 0.015);
  CHECK(std_hat < 0.025);
}

TEST_CASE("noiseless scores respect the gamma floors") {
  SynthSpec spec;
  spec.seed = 3;
  const SynthResult fx = generate(spec);
  for (const auto& rec : fx.table.records) {
    for (std::size_t j = 0; j < fx.table.benchmarks.size(); ++j) {
      const double gamma = fx.truth.gammas[j].value;
      CHECK(rec.scores.at(fx.table.benchmarks[j]) >= gamma);
      CHECK(rec.scores.at(fx.table.benchmarks[j]) <= 1.0);
    }
  }
}

TEST_CASE("positive slopes and loadings give monotone noiseless scores") {
  SlothParams p = SlothParams::make(Variant::basic, {"b0", "b1"}, {"f"}, 2);
  p.loadings << 1.0, 0.2, 0.0, 0.8;
  p.coeffs.row(0) << 0.3, 0.2;    // log_s
  p.coeffs.row(1) << 0.15, 0.25;  // log_t
  p.coeffs.row(2) << 0.01, 0.02;  // interaction
  p.coeffs.row(3) << -8.0, -9.0;
  p.gammas[0].value = 0.25;

  auto record_at = [](double s, double t) {
    ModelRecord rec;
    rec.model_id = "m";
    rec.family_id = "f";
    rec.base_family_id = "f";
    rec.version_group = "f";
    rec.size_s = s;
    rec.tokens_t = t;
    return rec;
  };
  for (double t : {0.5e12, 2e12, 8e12}) {
    double prev0 = -1.0, prev1 = -1.0;
    for (double s = 0.3e9; s < 1e12; s *= 2.7) {
      const ScoreTable table =
          ScoreTable::make({record_at(s, t)}, {"b0", "b1"});
      const Eigen::MatrixXd mu = predict_scores(p, build_design(table));
      CHECK(mu(0, 0) >= prev0);
      CHECK(mu(0, 1) >= prev1);
      prev0 = mu(0, 0);
      prev1 = mu(0, 1);
    }
  }
}

TEST_CASE("heavy noise reports truncation events") {
  SynthSpec spec;
  spec.noise_std = 0.5;
  spec.seed = 17;
  const SynthResult fx = generate(spec);
  CHECK(fx.truncation_events > 0);
  for (const auto& rec : fx.table.records)
    for (const auto& [bench, score] : rec.scores) {
      CHECK(score >= 0.0);
      CHECK(score <= 1.0);
    }
}

TEST_CASE("infeasible geometry is rejected before emission") {
  SynthSpec spec;
  spec.families = 1;
  spec.models_per_family = 2;  // n=2 < p=4
  CHECK_THROWS_AS(generate(spec), error);

  SynthSpec bad_d;
  bad_d.d = 20;  // d > J
  CHECK_THROWS_AS(generate(bad_d), error);
}

TEST_CASE("emitted truth skills are exactly standardized") {
  SynthSpec spec;
  spec.seed = 55;
  const SynthResult fx = generate(spec);
  const SkillMatrix theta = skills(fx.truth, build_design(fx.table));
  CHECK(theta.col_means.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((theta.covariance -
         Eigen::MatrixXd::Identity(fx.truth.d, fx.truth.d))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}
