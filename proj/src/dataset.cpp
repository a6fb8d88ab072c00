// SPDX-License-Identifier: Apache-2.0

#include "sloth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sloth/common.hpp"
#include "sloth/csv.hpp"

namespace sloth {

namespace {

double parse_number(const std::string& text, std::size_t row,
                    const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << "malformed value '" << text << "' in row " << row << ", column '"
        << column << "'";
    throw error("validation", msg.str());
  }
}

}  // namespace

ScoreTable ScoreTable::make(std::vector<ModelRecord> records,
                            std::vector<std::string> benchmarks) {
  std::set<std::string> bench_set(benchmarks.begin(), benchmarks.end());
  if (bench_set.size() != benchmarks.size())
    throw error("validation", "duplicate benchmark id in benchmark list");
  std::set<std::string> ids;
  for (const auto& rec : records) {
    if (!ids.insert(rec.model_id).second)
      throw error("validation", "duplicate model_id '" + rec.model_id + "'");
    if (!(rec.size_s > 0.0))
      throw error("validation",
                  "model '" + rec.model_id + "': params must be positive");
    if (!(rec.tokens_t > 0.0))
      throw error("validation",
                  "model '" + rec.model_id + "': tokens must be positive");
    for (const auto& [bench, score] : rec.scores) {
      if (!bench_set.count(bench))
        throw error("validation", "model '" + rec.model_id +
                                      "' scores unknown benchmark '" + bench +
                                      "'");
      if (!(score >= 0.0 && score <= 1.0))
        throw error("validation",
                    "score " + csv::format_double(score) + " out of [0,1] for model '" +
                        rec.model_id + "', benchmark '" + bench + "'");
    }
  }
  ScoreTable table;
  table.records = std::move(records);
  table.benchmarks = std::move(benchmarks);
  return table;
}

std::vector<std::string> ScoreTable::families() const {
  std::vector<std::string> out;
  for (const auto& rec : records) {
    if (std::find(out.begin(), out.end(), rec.family_id) == out.end())
      out.push_back(rec.family_id);
  }
  return out;
}

std::vector<std::string> ScoreTable::base_families() const {
  std::vector<std::string> out;
  for (const auto& rec : records) {
    if (std::find(out.begin(), out.end(), rec.base_family_id) == out.end())
      out.push_back(rec.base_family_id);
  }
  return out;
}

int ScoreTable::benchmark_index(const std::string& id) const {
  for (std::size_t j = 0; j < benchmarks.size(); ++j)
    if (benchmarks[j] == id) return static_cast<int>(j);
  return -1;
}

ScoreTable ScoreTable::subset(const std::vector<std::string>& model_ids) const {
  std::set<std::string> wanted(model_ids.begin(), model_ids.end());
  std::vector<ModelRecord> kept;
  for (const auto& rec : records)
    if (wanted.count(rec.model_id)) kept.push_back(rec);
  if (kept.size() != wanted.size())
    throw error("validation", "subset references model ids absent from table");
  return ScoreTable::make(std::move(kept), benchmarks);
}

const ModelRecord& ScoreTable::record_by_id(const std::string& model_id) const {
  for (const auto& rec : records)
    if (rec.model_id == model_id) return rec;
  throw error("validation", "unknown model_id '" + model_id + "'");
}

double AsymptoteConfig::gamma(const std::string& benchmark) const {
  auto it = entries.find(benchmark);
  if (it == entries.end())
    throw error("validation", "no asymptote configured for benchmark '" +
                                  benchmark + "'");
  return it->second.gamma;
}

AsymptoteConfig AsymptoteConfig::uniform(
    const std::vector<std::string>& benchmarks, double gamma, GammaMode mode) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw error("validation", "gamma must lie in [0,1)");
  AsymptoteConfig config;
  for (const auto& b : benchmarks) config.entries[b] = GammaEntry{gamma, mode};
  return config;
}

ScoreTable parse_scores(const std::string& text, const ColumnMapping& schema) {
  const csv::Table raw = csv::read_string(text);

  auto require = [&](const std::string& name) {
    const int idx = raw.column(name);
    if (idx < 0)
      throw error("validation", "required column '" + name + "' not found");
    return idx;
  };
  const int c_model = require(schema.model);
  const int c_family = require(schema.family);
  const int c_base = require(schema.base_family);
  const int c_version = require(schema.version_group);
  const int c_params = require(schema.params);
  const int c_tokens = require(schema.tokens);

  std::vector<std::string> benchmarks;
  std::vector<int> bench_cols;
  if (schema.benchmarks) {
    for (const auto& b : *schema.benchmarks) {
      bench_cols.push_back(require(b));
      benchmarks.push_back(b);
    }
  } else {
    const std::set<int> role_cols = {c_model, c_family, c_base,
                                     c_version, c_params, c_tokens};
    for (std::size_t i = 0; i < raw.header.size(); ++i) {
      if (!role_cols.count(static_cast<int>(i))) {
        bench_cols.push_back(static_cast<int>(i));
        benchmarks.push_back(raw.header[i]);
      }
    }
  }

  std::vector<ModelRecord> records;
  records.reserve(raw.rows.size());
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const std::size_t line = r + 2;  // header is line 1
    if (row.size() != raw.header.size()) {
      std::ostringstream msg;
      msg << "row " << line << " has " << row.size() << " fields, expected "
          << raw.header.size();
      throw error("validation", msg.str());
    }
    ModelRecord rec;
    rec.model_id = row[c_model];
    rec.family_id = row[c_family];
    rec.base_family_id = row[c_base];
    rec.version_group = row[c_version];
    rec.size_s = parse_number(row[c_params], line, schema.params);
    rec.tokens_t = parse_number(row[c_tokens], line, schema.tokens);
    if (rec.model_id.empty()) {
      std::ostringstream msg;
      msg << "row " << line << " has an empty model id";
      throw error("validation", msg.str());
    }
    for (std::size_t k = 0; k < bench_cols.size(); ++k) {
      const std::string& cell = row[bench_cols[k]];
      if (cell.empty()) continue;  // missing score, never coerced to 0
      const double v = parse_number(cell, line, benchmarks[k]);
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream msg;
        msg << "score " << cell << " out of [0,1] in row " << line
            << ", column '" << benchmarks[k] << "'";
        throw error("validation", msg.str());
      }
      rec.scores[benchmarks[k]] = v;
    }
    records.push_back(std::move(rec));
  }
  return ScoreTable::make(std::move(records), std::move(benchmarks));
}

ScoreTable load_scores(const std::string& path, const ColumnMapping& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("io", "cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_scores(buffer.str(), schema);
  } catch (const error& e) {
    throw error(e.code(), path + ": " + e.what());
  }
}

void write_scores(const std::string& path, const ScoreTable& table,
                  const ColumnMapping& schema) {
  csv::Table out;
  out.header = {schema.model,         schema.family, schema.base_family,
                schema.version_group, schema.params, schema.tokens};
  for (const auto& b : table.benchmarks) out.header.push_back(b);
  for (const auto& rec : table.records) {
    std::vector<std::string> row = {rec.model_id,
                                    rec.family_id,
                                    rec.base_family_id,
                                    rec.version_group,
                                    csv::format_double(rec.size_s),
                                    csv::format_double(rec.tokens_t)};
    for (const auto& b : table.benchmarks) {
      auto it = rec.scores.find(b);
      row.push_back(it == rec.scores.end() ? std::string()
                                           : csv::format_double(it->second));
    }
    out.rows.push_back(std::move(row));
  }
  csv::write_file(path, out);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw error("validation", "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

AsymptoteConfig default_asymptotes(
    const std::vector<GammaSpec>& specs,
    const std::map<std::string, std::vector<double>>& percentile_scores) {
  AsymptoteConfig config;
  for (const auto& spec : specs) {
    GammaEntry entry;
    entry.mode = spec.mode;
    switch (spec.kind) {
      case GammaSpec::Kind::multiple_choice:
        if (spec.choices < 2)
          throw error("validation", "benchmark '" + spec.benchmark +
                                        "': choice count must be >= 2");
        entry.gamma = 1.0 / static_cast<double>(spec.choices);
        break;
      case GammaSpec::Kind::subsections: {
        if (spec.subsections.empty())
          throw error("validation", "benchmark '" + spec.benchmark +
                                        "': no subsections given");
        double num = 0.0, den = 0.0;
        for (const auto& [choices, weight] : spec.subsections) {
          if (choices < 2)
            throw error("validation", "benchmark '" + spec.benchmark +
                                          "': choice count must be >= 2");
          if (!(weight > 0.0))
            throw error("validation", "benchmark '" + spec.benchmark +
                                          "': weights must be positive");
          num += weight / static_cast<double>(choices);
          den += weight;
        }
        entry.gamma = num / den;
        break;
      }
      case GammaSpec::Kind::generative:
        entry.gamma = 0.0;
        break;
      case GammaSpec::Kind::percentile: {
        auto it = percentile_scores.find(spec.benchmark);
        if (it == percentile_scores.end() || it->second.empty())
          throw error("validation",
                      "benchmark '" + spec.benchmark +
                          "': percentile mode requires a non-empty score list");
        entry.gamma = quantile(it->second, 0.01);
        break;
      }
      case GammaSpec::Kind::explicit_value:
        entry.gamma = spec.value;
        break;
    }
    if (!(entry.gamma >= 0.0 && entry.gamma < 1.0))
      throw error("validation", "benchmark '" + spec.benchmark +
                                    "': derived gamma outside [0,1)");
    config.entries[spec.benchmark] = entry;
  }
  return config;
}

std::vector<GammaSpec> parse_gamma_specs(const std::string& text) {
  std::vector<GammaSpec> specs;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string benchmark;
    if (!(fields >> benchmark)) continue;
    GammaSpec spec;
    spec.benchmark = benchmark;
    bool kind_set = false;
    std::string token;
    while (fields >> token) {
      if (token == "generative") {
        spec.kind = GammaSpec::Kind::generative;
        kind_set = true;
      } else if (token == "percentile") {
        spec.kind = GammaSpec::Kind::percentile;
        kind_set = true;
      } else if (token == "trainable") {
        spec.mode = GammaMode::trainable;
      } else if (token.rfind("choices=", 0) == 0) {
        spec.kind = GammaSpec::Kind::multiple_choice;
        spec.choices = std::stoi(token.substr(8));
        kind_set = true;
      } else if (token.rfind("gamma=", 0) == 0) {
        spec.kind = GammaSpec::Kind::explicit_value;
        spec.value = std::stod(token.substr(6));
        kind_set = true;
      } else if (token.rfind("sections=", 0) == 0) {
        spec.kind = GammaSpec::Kind::subsections;
        kind_set = true;
        std::istringstream list(token.substr(9));
        std::string pair;
        while (std::getline(list, pair, ',')) {
          const auto colon = pair.find(':');
          if (colon == std::string::npos)
            throw error("validation",
                        "asymptote config line " + std::to_string(line_no) +
                            ": sections entries must be choices:weight");
          spec.subsections.emplace_back(std::stoi(pair.substr(0, colon)),
                                        std::stod(pair.substr(colon + 1)));
        }
      } else {
        throw error("validation", "asymptote config line " +
                                      std::to_string(line_no) +
                                      ": unknown token '" + token + "'");
      }
    }
    if (!kind_set)
      throw error("validation", "asymptote config line " +
                                    std::to_string(line_no) + " (benchmark '" +
                                    benchmark + "'): no gamma rule given");
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<GammaSpec> load_gamma_specs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("io", "cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_gamma_specs(buffer.str());
}

std::vector<Diagnostic> validate(const ScoreTable& table,
                                 const AsymptoteConfig& config) {
  std::vector<Diagnostic> out;
  for (const auto& b : table.benchmarks) {
    if (!config.has(b))
      out.push_back({Diagnostic::Severity::warning, "missing-asymptote",
                     "benchmark '" + b + "' has no configured asymptote"});
  }
  std::map<std::string, int> complete_rows;
  for (const auto& rec : table.records) {
    bool complete = true;
    for (const auto& b : table.benchmarks)
      if (!rec.has_score(b)) complete = false;
    complete_rows[rec.family_id] += complete ? 1 : 0;
    for (const auto& [bench, score] : rec.scores) {
      if (config.has(bench) && score < config.gamma(bench)) {
        out.push_back({Diagnostic::Severity::warning, "score-below-gamma",
                       "model '" + rec.model_id + "' scores " +
                           csv::format_double(score) + " on '" + bench +
                           "', below its asymptote " +
                           csv::format_double(config.gamma(bench))});
      }
    }
  }
  for (const auto& [family, count] : complete_rows) {
    if (count == 0)
      out.push_back({Diagnostic::Severity::warning, "no-complete-rows",
                     "family '" + family + "' has no row with all benchmarks"});
  }
  return out;
}

}  // namespace sloth
