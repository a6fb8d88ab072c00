// SPDX-License-Identifier: Apache-2.0
//
// Benchmark score tables and per-benchmark lower-asymptote configuration.
// Immutable after construction; safe for concurrent readers.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sloth {

/// One leaderboard row: a model with its provenance and scores.
struct ModelRecord {
  std::string model_id;
  std::string family_id;
  std::string base_family_id;   // groups base + instruct variants
  std::string version_group;    // groups generations of one vendor line
  double size_s = 0.0;          // parameters, absolute count
  double tokens_t = 0.0;        // training tokens, absolute count
  std::map<std::string, double> scores;  // benchmark_id -> [0,1]; absent = missing

  bool has_score(const std::string& benchmark) const {
    return scores.count(benchmark) > 0;
  }
};

struct ScoreTable {
  std::vector<ModelRecord> records;
  std::vector<std::string> benchmarks;

  /// Validates the type invariants (uniqueness, ranges, score keys).
  static ScoreTable make(std::vector<ModelRecord> records,
                         std::vector<std::string> benchmarks);

  std::size_t n_models() const { return records.size(); }
  std::size_t n_benchmarks() const { return benchmarks.size(); }

  std::vector<std::string> families() const;        // order of first appearance
  std::vector<std::string> base_families() const;   // order of first appearance
  int benchmark_index(const std::string& id) const;  // -1 when absent

  /// Sub-table restricted to the given model ids (table record order kept).
  ScoreTable subset(const std::vector<std::string>& model_ids) const;

  const ModelRecord& record_by_id(const std::string& model_id) const;
};

enum class GammaMode { fixed, trainable };

struct GammaEntry {
  double gamma = 0.0;  // in [0,1)
  GammaMode mode = GammaMode::fixed;
};

/// Per-benchmark lower asymptotes (guess-rate floors).
struct AsymptoteConfig {
  std::map<std::string, GammaEntry> entries;

  bool has(const std::string& benchmark) const {
    return entries.count(benchmark) > 0;
  }
  double gamma(const std::string& benchmark) const;
  /// Uniform-gamma convenience constructor.
  static AsymptoteConfig uniform(const std::vector<std::string>& benchmarks,
                                 double gamma,
                                 GammaMode mode = GammaMode::fixed);
};

/// How a benchmark's floor is derived.
struct GammaSpec {
  enum class Kind { multiple_choice, subsections, generative, percentile, explicit_value };
  std::string benchmark;
  Kind kind = Kind::generative;
  int choices = 0;                                  // multiple_choice
  std::vector<std::pair<int, double>> subsections;  // (choices, weight)
  double value = 0.0;                               // explicit_value
  GammaMode mode = GammaMode::fixed;
};

/// Column-role mapping for delimited score files. Any column not mapped to a
/// role is treated as a benchmark unless `benchmarks` is set explicitly.
struct ColumnMapping {
  std::string model = "model";
  std::string family = "family";
  std::string base_family = "base_family";
  std::string version_group = "version_group";
  std::string params = "params";
  std::string tokens = "tokens";
  std::optional<std::vector<std::string>> benchmarks;
};

struct Diagnostic {
  enum class Severity { warning, note };
  Severity severity = Severity::warning;
  std::string code;
  std::string message;
};

ScoreTable load_scores(const std::string& path,
                       const ColumnMapping& schema = {});
ScoreTable parse_scores(const std::string& text,
                        const ColumnMapping& schema = {});
void write_scores(const std::string& path, const ScoreTable& table,
                  const ColumnMapping& schema = {});

/// gamma = 1/#choices for multiple choice, weighted average over subsections,
/// 0 for generative, empirical 1st percentile in percentile mode.
AsymptoteConfig default_asymptotes(
    const std::vector<GammaSpec>& specs,
    const std::map<std::string, std::vector<double>>& percentile_scores = {});

std::vector<GammaSpec> load_gamma_specs(const std::string& path);
std::vector<GammaSpec> parse_gamma_specs(const std::string& text);

/// Consistency report; never throws, never mutates.
std::vector<Diagnostic> validate(const ScoreTable& table,
                                 const AsymptoteConfig& config);

/// Linear-interpolation empirical quantile (q in [0,1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

}  // namespace sloth
