// SPDX-License-Identifier: Apache-2.0

#include "sloth/design.hpp"

#include <cmath>

#include "doctest.h"
#include "sloth/common.hpp"
#include "support/oracles.hpp"

using namespace sloth;

namespace {

ModelRecord record(const std::string& id, const std::string& family, double s,
                   double t) {
  ModelRecord rec;
  rec.model_id = id;
  rec.family_id = family;
  rec.base_family_id = family;
  rec.version_group = family;
  rec.size_s = s;
  rec.tokens_t = t;
  return rec;
}

}  // namespace

TEST_CASE("feature vector basics") {
  const FeatureVector zero = feature_vector(1.0, 1.0);
  CHECK(zero.log_s == 0.0);
  CHECK(zero.log_t == 0.0);
  CHECK(zero.interaction == 0.0);

  const double e = std::exp(1.0);
  const FeatureVector f = feature_vector(e, e * e);
  CHECK(f.log_s == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f.log_t == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(f.interaction == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(feature_vector(0.0, 1.0), error);
  CHECK_THROWS_AS(feature_vector(1.0, -2.0), error);
}

TEST_CASE("feature vector matches a high-precision log oracle") {
  // Reference values computed with 40-digit arbitrary-precision arithmetic.
  const double ref_log_s = 22.66917598600172446126728;
  const double ref_log_t = 28.32416829648849351763313;
  const double ref_inter = 642.0855557702283293064007;
  const FeatureVector f = feature_vector(7e9, 2e12);
  CHECK(std::abs(f.log_s - ref_log_s) / ref_log_s < 1e-12);
  CHECK(std::abs(f.log_t - ref_log_t) / ref_log_t < 1e-12);
  CHECK(std::abs(f.interaction - ref_inter) / ref_inter < 1e-12);
  CHECK(f.interaction == f.log_s * f.log_t);  // exact as computed
}

TEST_CASE("flops budget approximation") {
  CHECK(flops(1.0, 1.0) == 6.0);
  // Allocation-table rows: 100e19 and 648000e19 budgets.
  CHECK(flops(0.16e9, 1.04e12) == doctest::Approx(9.984e20).epsilon(1e-12));
  CHECK(std::abs(flops(0.16e9, 1.04e12) - 100.0 * 1e19) / 1e21 < 0.01);
  CHECK(flops(72e9, 15e12) == doctest::Approx(6.48e24).epsilon(1e-12));
  CHECK(flops(72e9, 15e12) ==
        doctest::Approx(648000.0 * 1e19).epsilon(1e-12));
}

TEST_CASE("flops is symmetric under argument swap and strictly increasing") {
  oracle::Rand rng(11);
  for (int i = 0; i < 200; ++i) {
    const double s = std::exp(rng.uniform(15.0, 26.0));
    const double t = std::exp(rng.uniform(24.0, 31.0));
    CHECK(flops(s, t) == flops(t, s));
    CHECK(flops(s * 1.01, t) > flops(s, t));
    CHECK(flops(s, t * 1.01) > flops(s, t));
  }
}

TEST_CASE("build_design layouts") {
  SUBCASE("two models, two families") {
    const ScoreTable table = ScoreTable::make(
        {record("a", "f1", 1e9, 1e12), record("b", "f2", 2e9, 2e12)}, {"x"});
    const DesignMatrix d = build_design(table);
    CHECK(d.n() == 2);
    CHECK(d.p() == 5);
    for (int i = 0; i < 2; ++i)
      CHECK(d.matrix.row(i).tail(2).sum() == 1.0);
    CHECK(d.matrix(0, d.family_index.at("f1")) == 1.0);
    CHECK(d.matrix(1, d.family_index.at("f2")) == 1.0);
  }
  SUBCASE("single family keeps a constant intercept column") {
    const ScoreTable table =
        ScoreTable::make({record("a", "f", 1e9, 1e12),
                          record("b", "f", 2e9, 3e12),
                          record("c", "f", 5e9, 2e12)},
                         {"x"});
    const DesignMatrix d = build_design(table);
    CHECK(d.p() == 4);
    CHECK(d.matrix.col(3).minCoeff() == 1.0);
    CHECK(d.matrix.col(3).maxCoeff() == 1.0);
  }
}

TEST_CASE("design rank matches the Jacobi singular-value oracle") {
  std::vector<ModelRecord> recs;
  oracle::Rand rng(3);
  for (int f = 0; f < 3; ++f) {
    for (int m = 0; m < 4; ++m) {
      if (f == 2 && m >= 2) break;  // 10 models over 3 families
      recs.push_back(record("m" + std::to_string(f) + std::to_string(m),
                            "fam" + std::to_string(f),
                            std::exp(rng.uniform(19.0, 25.0)),
                            std::exp(rng.uniform(26.0, 30.0))));
    }
  }
  const ScoreTable table = ScoreTable::make(recs, {"x"});
  const DesignMatrix d = build_design(table);
  REQUIRE(d.n() == 10);
  REQUIRE(d.p() == 6);
  CHECK(numerical_rank(d.matrix) == 6);
  CHECK(oracle::jacobi_rank(d.matrix) == 6);
  CHECK_FALSE(d.rank_warning.has_value());
}

TEST_CASE("rank deficiency is a warning, not an error") {
  // tokens proportional to size makes log_t affine in log_s
  std::vector<ModelRecord> recs;
  for (int m = 0; m < 5; ++m) {
    const double s = 1e9 * std::pow(2.0, m);
    recs.push_back(record("m" + std::to_string(m), "f", s, 20.0 * s));
  }
  const ScoreTable table = ScoreTable::make(recs, {"x"});
  const DesignMatrix d = build_design(table);
  REQUIRE(d.rank_warning.has_value());
  CHECK(*d.rank_warning < d.p());
  CHECK(*d.rank_warning == oracle::jacobi_rank(d.matrix));
}

TEST_CASE("rows of X reproduce the translog skill map for any B") {
  oracle::Rand rng(17);
  std::vector<ModelRecord> recs;
  for (int f = 0; f < 3; ++f)
    for (int m = 0; m < 3; ++m)
      recs.push_back(record("m" + std::to_string(f) + std::to_string(m),
                            "fam" + std::to_string(f),
                            std::exp(rng.uniform(19.0, 25.0)),
                            std::exp(rng.uniform(26.0, 30.0))));
  const ScoreTable table = ScoreTable::make(recs, {"x"});
  const DesignMatrix design = build_design(table);

  const int d = 2;
  Eigen::MatrixXd coeffs(design.p(), d);
  for (int r = 0; r < coeffs.rows(); ++r)
    for (int k = 0; k < d; ++k) coeffs(r, k) = rng.uniform(-1.0, 1.0);

  const Eigen::MatrixXd theta = design.matrix * coeffs;
  for (int i = 0; i < design.n(); ++i) {
    const auto& rec = table.records[i];
    const FeatureVector fv = feature_vector(rec.size_s, rec.tokens_t);
    const int fam_col = design.family_index.at(rec.family_id);
    for (int k = 0; k < d; ++k) {
      const double expected = coeffs(fam_col, k) + coeffs(0, k) * fv.log_s +
                              coeffs(1, k) * fv.log_t +
                              coeffs(2, k) * fv.interaction;
      CHECK(theta(i, k) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("permuting records permutes design rows identically") {
  std::vector<ModelRecord> recs = {record("a", "f1", 1e9, 1e12),
                                   record("b", "f2", 2e9, 3e12),
                                   record("c", "f1", 4e9, 2e12)};
  const DesignMatrix d1 = build_design(ScoreTable::make(recs, {"x"}));
  std::swap(recs[0], recs[2]);
  const DesignMatrix d2 = build_design(ScoreTable::make(recs, {"x"}));
  CHECK(d1.matrix.row(0) == d2.matrix.row(2));
  CHECK(d1.matrix.row(2) == d2.matrix.row(0));
  CHECK(d1.matrix.row(1) == d2.matrix.row(1));
}
