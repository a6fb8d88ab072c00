// SPDX-License-Identifier: Apache-2.0

#include "sloth/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sloth/common.hpp"
#include "sloth/csv.hpp"
#include "sloth/design.hpp"

namespace sloth {

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie])))
        ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je])))
        ++je;
      const unsigned long long va = std::stoull(a.substr(i, ie - i));
      const unsigned long long vb = std::stoull(b.substr(j, je - j));
      if (va != vb) return va < vb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

namespace {

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<const ModelRecord*> family_records(const ScoreTable& table,
                                               const std::string& family) {
  std::vector<const ModelRecord*> out;
  for (const auto& rec : table.records)
    if (rec.family_id == family) out.push_back(&rec);
  return out;
}

// Smallest first: by size, ties by fewer tokens, then model id.
void sort_by_size(std::vector<const ModelRecord*>& recs) {
  std::sort(recs.begin(), recs.end(),
            [](const ModelRecord* x, const ModelRecord* y) {
              if (x->size_s != y->size_s) return x->size_s < y->size_s;
              if (x->tokens_t != y->tokens_t) return x->tokens_t < y->tokens_t;
              return x->model_id < y->model_id;
            });
}

}  // namespace

std::vector<SplitPlan> make_splits(const ScoreTable& table, int k_observed,
                                   std::vector<ExclusionEntry>* skip_log) {
  if (k_observed != 1 && k_observed != 2)
    throw error("validation", "k_observed must be 1 or 2");

  const auto families = table.families();
  std::map<std::string, std::string> base_of, version_of;
  for (const auto& rec : table.records) {
    base_of[rec.family_id] = rec.base_family_id;
    version_of[rec.family_id] = rec.version_group;
  }

  std::vector<SplitPlan> plans;
  for (const auto& test_family : families) {
    auto recs = family_records(table, test_family);
    if (static_cast<int>(recs.size()) < k_observed + 1) {
      if (skip_log)
        skip_log->push_back({test_family,
                             "fewer than " + std::to_string(k_observed + 1) +
                                 " models; cannot hold any out"});
      continue;
    }

    // Do not test an older generation while a newer same-line family would
    // sit in the training set.
    bool superseded = false;
    std::string newer;
    for (const auto& other : families) {
      if (other == test_family) continue;
      if (version_of[other] != version_of[test_family]) continue;
      if (base_of[other] == base_of[test_family]) continue;  // sibling
      if (natural_less(base_of[test_family], base_of[other])) {
        superseded = true;
        newer = other;
        break;
      }
    }
    if (superseded) {
      if (skip_log)
        skip_log->push_back({test_family, "older generation; newer family '" +
                                              newer + "' is in training data"});
      continue;
    }

    sort_by_size(recs);
    SplitPlan plan;
    plan.test_family = test_family;
    for (int i = 0; i < static_cast<int>(recs.size()); ++i) {
      if (i < k_observed)
        plan.observed_ids.push_back(recs[i]->model_id);
      else
        plan.heldout_ids.push_back(recs[i]->model_id);
    }

    std::set<std::string> sibling_families;
    for (const auto& other : families) {
      if (other != test_family && base_of[other] == base_of[test_family]) {
        sibling_families.insert(other);
        plan.exclusions.push_back(
            {other, "base/instruct sibling of the test family"});
      }
    }

    const std::set<std::string> heldout(plan.heldout_ids.begin(),
                                        plan.heldout_ids.end());
    for (const auto& rec : table.records) {
      if (heldout.count(rec.model_id)) continue;
      if (sibling_families.count(rec.family_id)) continue;
      plan.train_ids.push_back(rec.model_id);
    }

    for (const auto& id : plan.heldout_ids) {
      if (std::find(plan.train_ids.begin(), plan.train_ids.end(), id) !=
          plan.train_ids.end())
        throw error("internal", "leakage: held-out record in train set");
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

Estimator make_estimator(const std::string& spec,
                         const EstimatorConfig& config) {
  std::string name = spec;
  std::map<std::string, std::string> options;
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    name = spec.substr(0, colon);
    std::istringstream opts(spec.substr(colon + 1));
    std::string pair;
    while (std::getline(opts, pair, ',')) {
      const auto eq = pair.find('=');
      if (eq == std::string::npos)
        throw error("validation",
                    "estimator option '" + pair + "' is not key=value");
      options[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
  }

  Estimator est;
  est.name = spec;

  auto fit_config = config.fit;
  if (options.count("d")) fit_config.d = std::stoi(options.at("d"));
  auto flops_config = config.flops;
  int pca_d = options.count("d") ? std::stoi(options.at("d")) : config.pca_d;

  if (name == "sloth" || name == "sloth-shared" || name == "szt") {
    if (name == "sloth") {
      fit_config.variant = Variant::basic;
      if (options.count("variant"))
        fit_config.variant = variant_from_name(options.at("variant"));
    } else if (name == "sloth-shared") {
      fit_config.variant = Variant::shared_intercept;
    } else {
      fit_config.variant = Variant::size_and_tokens;
    }
    est.fit = [fit_config](const ScoreTable& train,
                           const AsymptoteConfig& asymptotes,
                           uint64_t seed) -> PredictFn {
      FitConfig local = fit_config;
      local.seed = seed;
      auto [params, report] = fit(train, local, asymptotes);
      auto shared = std::make_shared<SlothParams>(std::move(params));
      return [shared](const std::vector<ModelRecord>& records) {
        // Design columns for families come from the parameters, so build
        // via the fitted family list to keep unknown-family errors crisp.
        DesignMatrix design;
        design.column_roles = {"log_s", "log_t", "log_s*log_t"};
        for (std::size_t f = 0; f < shared->families.size(); ++f) {
          design.family_index[shared->families[f]] =
              static_cast<int>(3 + f);
          design.column_roles.push_back(shared->families[f]);
        }
        const int n = static_cast<int>(records.size());
        const int p = static_cast<int>(design.column_roles.size());
        design.matrix = Eigen::MatrixXd::Zero(n, p);
        for (int i = 0; i < n; ++i) {
          const auto& rec = records[i];
          const FeatureVector fv = feature_vector(rec.size_s, rec.tokens_t);
          design.matrix(i, 0) = fv.log_s;
          design.matrix(i, 1) = fv.log_t;
          design.matrix(i, 2) = fv.interaction;
          auto it = design.family_index.find(rec.family_id);
          if (it == design.family_index.end())
            throw error("validation", "family '" + rec.family_id +
                                          "' was not in the training set");
          design.matrix(i, it->second) = 1.0;
          design.row_ids.push_back(rec.model_id);
          design.row_family.push_back(it->second);
        }
        return predict_scores(*shared, design);
      };
    };
    return est;
  }

  if (name == "flops-shared" || name == "flops" || name == "flops-both") {
    Sharing sharing = Sharing::family_intercept;
    if (name == "flops-shared") sharing = Sharing::shared_all;
    if (name == "flops-both") {
      sharing = Sharing::family_both;
      est.min_k_observed = 2;
    }
    est.fit = [flops_config, sharing](const ScoreTable& train,
                                      const AsymptoteConfig& asymptotes,
                                      uint64_t seed) -> PredictFn {
      FlopsFitConfig local = flops_config;
      local.seed = seed;
      auto params = std::make_shared<FlopsParams>(
          fit_flops(train, sharing, asymptotes, local));
      return [params](const std::vector<ModelRecord>& records) {
        return predict_baseline(*params, records);
      };
    };
    return est;
  }

  if (name == "pca" || name == "pca-both") {
    Sharing sharing =
        name == "pca" ? Sharing::family_intercept : Sharing::family_both;
    if (name == "pca-both") est.min_k_observed = 2;
    est.clip_at_report = true;
    est.fit = [pca_d, sharing](const ScoreTable& train,
                               const AsymptoteConfig&,
                               uint64_t) -> PredictFn {
      auto params =
          std::make_shared<PcaFlopsParams>(fit_pca_flops(train, pca_d, sharing));
      return [params](const std::vector<ModelRecord>& records) {
        return predict_baseline(*params, records);
      };
    };
    return est;
  }

  throw error("validation", "unknown estimator '" + name + "'");
}

std::vector<Estimator> make_estimators(const std::vector<std::string>& specs,
                                       const EstimatorConfig& config) {
  std::vector<Estimator> out;
  for (const auto& spec : specs) out.push_back(make_estimator(spec, config));
  return out;
}

CVReport run_cv(const ScoreTable& table,
                const std::vector<Estimator>& estimators,
                const std::vector<SplitPlan>& splits,
                const AsymptoteConfig& asymptotes, uint64_t seed,
                int workers) {
  CVReport report;
  for (const auto& est : estimators) {
    report.estimators.push_back(est.name);
    report.clipped[est.name] = false;
  }

  struct JobResult {
    std::vector<CVCell> cells;
    std::vector<CVInapplicable> inapplicable;
    int mape_zero = 0;
    bool clipped = false;
  };
  const std::size_t n_jobs = splits.size() * estimators.size();
  std::vector<JobResult> results(n_jobs);

  parallel_for(n_jobs, workers, [&](std::size_t job) {
    const std::size_t si = job / estimators.size();
    const std::size_t ei = job % estimators.size();
    const SplitPlan& plan = splits[si];
    const Estimator& est = estimators[ei];
    JobResult& out = results[job];

    for (const auto& id : plan.heldout_ids) {
      if (std::find(plan.train_ids.begin(), plan.train_ids.end(), id) !=
          plan.train_ids.end())
        throw error("internal", "leakage: held-out record in train set");
    }
    if (static_cast<int>(plan.observed_ids.size()) < est.min_k_observed) {
      out.inapplicable.push_back(
          {est.name, plan.test_family,
           "needs k_observed >= " + std::to_string(est.min_k_observed)});
      return;
    }

    ScoreTable train = table.subset(plan.train_ids);
    std::vector<ModelRecord> heldout;
    for (const auto& id : plan.heldout_ids)
      heldout.push_back(table.record_by_id(id));

    Eigen::MatrixXd preds;
    try {
      const uint64_t job_seed = seed ^ fnv1a(est.name) ^
                                (fnv1a(plan.test_family) * 0x9e3779b9ULL);
      PredictFn predict = est.fit(train, asymptotes, job_seed);
      preds = predict(heldout);
    } catch (const error& e) {
      out.inapplicable.push_back({est.name, plan.test_family, e.what()});
      return;
    }

    for (std::size_t r = 0; r < heldout.size(); ++r) {
      for (std::size_t j = 0; j < table.benchmarks.size(); ++j) {
        auto it = heldout[r].scores.find(table.benchmarks[j]);
        if (it == heldout[r].scores.end()) continue;
        double pred = preds(r, j);
        if (est.clip_at_report) {
          const double clipped_pred = std::clamp(pred, 0.0, 1.0);
          if (clipped_pred != pred) out.clipped = true;
          pred = clipped_pred;
        }
        CVCell cell;
        cell.estimator = est.name;
        cell.family = plan.test_family;
        cell.benchmark = table.benchmarks[j];
        cell.model = heldout[r].model_id;
        cell.abs_error_pp = std::abs(pred - it->second) * 100.0;
        if (it->second > 0.0) {
          cell.ape_valid = true;
          cell.ape_pp = std::abs(pred - it->second) / it->second * 100.0;
        } else {
          ++out.mape_zero;
        }
        out.cells.push_back(std::move(cell));
      }
    }
  });

  for (std::size_t job = 0; job < n_jobs; ++job) {
    auto& r = results[job];
    report.cells.insert(report.cells.end(), r.cells.begin(), r.cells.end());
    report.inapplicable.insert(report.inapplicable.end(),
                               r.inapplicable.begin(), r.inapplicable.end());
    report.mape_zero_cells += r.mape_zero;
    if (r.clipped) {
      const std::size_t ei = job % estimators.size();
      report.clipped[estimators[ei].name] = true;
    }
  }
  return report;
}

namespace {

struct CellValue {
  double value = 0.0;
  bool valid = false;
};

CellValue metric_value(const CVCell& cell, Metric metric) {
  if (metric == Metric::mae) return {cell.abs_error_pp, true};
  return {cell.ape_pp, cell.ape_valid};
}

// group key per level; family always tracked for the nested mean
std::string level_group(const CVCell& cell, AggLevel level) {
  switch (level) {
    case AggLevel::overall: return "";
    case AggLevel::per_family: return cell.family;
    case AggLevel::per_benchmark: return cell.benchmark;
  }
  return "";
}

}  // namespace

std::vector<AggregateRow> aggregate(const CVReport& report, Metric metric,
                                    AggLevel level) {
  // (estimator, group) -> family -> (sum, count)
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, std::pair<double, long>>>
      acc;
  for (const auto& cell : report.cells) {
    const CellValue v = metric_value(cell, metric);
    if (!v.valid) continue;
    auto& fam = acc[{cell.estimator, level_group(cell, level)}][cell.family];
    fam.first += v.value;
    fam.second += 1;
  }
  std::vector<AggregateRow> rows;
  for (const auto& est : report.estimators) {
    for (const auto& [key, fams] : acc) {
      if (key.first != est) continue;
      double sum = 0.0;
      long total_cells = 0;
      long n_fams = 0;
      for (const auto& [family, sc] : fams) {
        sum += sc.first / static_cast<double>(sc.second);
        total_cells += sc.second;
        ++n_fams;
      }
      rows.push_back({est, key.second, sum / static_cast<double>(n_fams),
                      total_cells});
    }
  }
  return rows;
}

std::vector<AggregateRow> aggregate_global_mean(const CVReport& report,
                                                Metric metric, AggLevel level) {
  std::map<std::pair<std::string, std::string>, std::pair<double, long>> acc;
  for (const auto& cell : report.cells) {
    const CellValue v = metric_value(cell, metric);
    if (!v.valid) continue;
    auto& slot = acc[{cell.estimator, level_group(cell, level)}];
    slot.first += v.value;
    slot.second += 1;
  }
  std::vector<AggregateRow> rows;
  for (const auto& est : report.estimators) {
    for (const auto& [key, sc] : acc) {
      if (key.first != est) continue;
      rows.push_back(
          {est, key.second, sc.first / static_cast<double>(sc.second),
           sc.second});
    }
  }
  return rows;
}

double overall_score(const CVReport& report, const std::string& estimator,
                     Metric metric) {
  for (const auto& row : aggregate(report, metric, AggLevel::overall))
    if (row.estimator == estimator) return row.value;
  throw error("validation",
              "estimator '" + estimator + "' has no recorded cells");
}

std::string cv_report_to_json(const CVReport& report) {
  nlohmann::json doc;
  doc["format"] = "sloth-cv-report";
  doc["version"] = 1;
  doc["estimators"] = report.estimators;
  doc["mape_zero_cells"] = report.mape_zero_cells;
  doc["metadata"] = report.metadata;
  doc["clipped"] = report.clipped;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : report.cells) {
    cells.push_back({{"estimator", cell.estimator},
                     {"family", cell.family},
                     {"benchmark", cell.benchmark},
                     {"model", cell.model},
                     {"abs_error_pp", cell.abs_error_pp},
                     {"ape_pp", cell.ape_valid ? nlohmann::json(cell.ape_pp)
                                               : nlohmann::json()}});
  }
  doc["cells"] = std::move(cells);
  nlohmann::json inap = nlohmann::json::array();
  for (const auto& entry : report.inapplicable)
    inap.push_back({{"estimator", entry.estimator},
                    {"family", entry.family},
                    {"reason", entry.reason}});
  doc["inapplicable"] = std::move(inap);
  nlohmann::json aggregates;
  for (const auto& [metric, name] :
       std::vector<std::pair<Metric, std::string>>{{Metric::mae, "mae"},
                                                   {Metric::mape, "mape"}}) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : aggregate(report, metric, AggLevel::overall))
      rows.push_back({{"estimator", row.estimator},
                      {"value_pp", row.value},
                      {"cells", row.cells}});
    aggregates[name] = std::move(rows);
  }
  doc["aggregates"] = std::move(aggregates);
  return doc.dump(2);
}

void write_cv_csv(const std::string& path, const CVReport& report) {
  csv::Table out;
  out.header = {"estimator", "family", "benchmark", "model", "abs_error_pp",
                "ape_pp"};
  for (const auto& cell : report.cells) {
    out.rows.push_back({cell.estimator, cell.family, cell.benchmark,
                        cell.model, csv::format_double(cell.abs_error_pp),
                        cell.ape_valid ? csv::format_double(cell.ape_pp)
                                       : std::string()});
  }
  csv::write_file(path, out);
}

}  // namespace sloth
