// SPDX-License-Identifier: Apache-2.0
//
// Family-level leave-one-out experiment harness: split construction under
// the base/instruct sibling and version-exclusion rules, estimator
// refitting per split, and MAE/MAPE aggregation (within-family mean first,
// then unweighted mean across families).

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sloth/baselines.hpp"
#include "sloth/dataset.hpp"
#include "sloth/fit.hpp"

namespace sloth {

struct ExclusionEntry {
  std::string subject;
  std::string reason;
};

struct SplitPlan {
  std::string test_family;
  std::vector<std::string> train_ids;
  std::vector<std::string> observed_ids;  // the k smallest test-family models
  std::vector<std::string> heldout_ids;
  std::vector<ExclusionEntry> exclusions;
};

/// One plan per eligible test family. Families with fewer than
/// k_observed + 1 models, or with a newer same-line family in train, are
/// skipped (logged via `skip_log` when given).
std::vector<SplitPlan> make_splits(const ScoreTable& table, int k_observed,
                                   std::vector<ExclusionEntry>* skip_log = nullptr);

/// Numeric-aware ordering used to decide which family generation is newer.
bool natural_less(const std::string& a, const std::string& b);

using PredictFn =
    std::function<Eigen::MatrixXd(const std::vector<ModelRecord>&)>;

struct Estimator {
  std::string name;
  int min_k_observed = 1;
  bool clip_at_report = false;  // unbounded predictions, clip when scoring
  std::function<PredictFn(const ScoreTable& train,
                          const AsymptoteConfig& asymptotes, uint64_t seed)>
      fit;
};

struct EstimatorConfig {
  FitConfig fit;             // template for scaling-law estimators
  FlopsFitConfig flops;      // template for FLOPs baselines
  int pca_d = 3;
};

/// Parses "sloth:d=3", "sloth-shared", "szt", "flops-shared", "flops",
/// "flops-both", "pca:d=3", "pca-both:d=3".
Estimator make_estimator(const std::string& spec,
                         const EstimatorConfig& config);
std::vector<Estimator> make_estimators(const std::vector<std::string>& specs,
                                       const EstimatorConfig& config);

struct CVCell {
  std::string estimator;
  std::string family;
  std::string benchmark;
  std::string model;
  double abs_error_pp = 0.0;  // percentage points
  double ape_pp = 0.0;        // |err|/Y in percentage points
  bool ape_valid = false;     // false when Y == 0
};

struct CVInapplicable {
  std::string estimator;
  std::string family;
  std::string reason;
};

struct CVReport {
  std::vector<std::string> estimators;
  std::vector<CVCell> cells;
  std::vector<CVInapplicable> inapplicable;
  int mape_zero_cells = 0;  // cells excluded from MAPE because Y == 0
  std::map<std::string, bool> clipped;  // estimator -> any prediction clipped
  std::map<std::string, std::string> metadata;
};

CVReport run_cv(const ScoreTable& table, const std::vector<Estimator>& estimators,
                const std::vector<SplitPlan>& splits,
                const AsymptoteConfig& asymptotes, uint64_t seed = 0,
                int workers = 1);

enum class Metric { mae, mape };
enum class AggLevel { overall, per_family, per_benchmark };

struct AggregateRow {
  std::string estimator;
  std::string group;  // family or benchmark id; empty for overall
  double value = 0.0;
  long cells = 0;
};

/// Within-family mean first, then unweighted mean across families.
std::vector<AggregateRow> aggregate(const CVReport& report, Metric metric,
                                    AggLevel level);

/// Plain global mean over cells (non-default alternative view).
std::vector<AggregateRow> aggregate_global_mean(const CVReport& report,
                                                Metric metric, AggLevel level);

/// Overall aggregate for one estimator; throws if it has no cells.
double overall_score(const CVReport& report, const std::string& estimator,
                     Metric metric);

// --- emission ---
std::string cv_report_to_json(const CVReport& report);
void write_cv_csv(const std::string& path, const CVReport& report);

}  // namespace sloth
