// SPDX-License-Identifier: Apache-2.0

#include "sloth/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "sloth/common.hpp"
#include "sloth/design.hpp"
#include "sloth/fit.hpp"
#include "sloth/optim.hpp"

namespace sloth {

std::string sharing_name(Sharing s) {
  switch (s) {
    case Sharing::shared_all: return "shared-all";
    case Sharing::family_intercept: return "family-intercept";
    case Sharing::family_both: return "family-both";
  }
  throw error("internal", "unknown sharing mode");
}

namespace {

struct BenchCell {
  int family;
  double x;  // standardized log flops
  double y;
};

// One benchmark's parameters in standardized-logc space. Layout:
// [alpha (1 or m), beta (1 or m)].
struct BenchProblem {
  std::vector<BenchCell> cells;
  double gamma = 0.0;
  int n_alpha = 1;
  int n_beta = 1;

  int dim() const { return n_alpha + n_beta; }

  double loss_grad(const Eigen::VectorXd& x, double delta,
                   Eigen::VectorXd* grad) const {
    if (grad) grad->setZero();
    double loss = 0.0;
    for (const auto& cell : cells) {
      const int ia = n_alpha == 1 ? 0 : cell.family;
      const int ib = n_beta == 1 ? 0 : cell.family;
      const double eta = x(ia) + x(n_alpha + ib) * cell.x;
      const double s = sigmoid(eta);
      const double mu = gamma + (1.0 - gamma) * s;
      const double r = mu - cell.y;
      loss += huber(r, delta);
      if (grad) {
        const double geta = huber_deriv(r, delta) * (1.0 - gamma) * s * (1.0 - s);
        (*grad)(ia) += geta;
        (*grad)(n_alpha + ib) += geta * cell.x;
      }
    }
    return loss;
  }
};

// Adam descent with best-so-far tracking; the returned loss never exceeds
// the loss at the initial point.
std::pair<Eigen::VectorXd, double> minimize(const BenchProblem& problem,
                                            Eigen::VectorXd x,
                                            const FlopsFitConfig& config) {
  AdamConfig adam_config;
  adam_config.initial_lr = config.initial_lr;
  adam_config.lr_decay = config.lr_decay;
  Adam adam(x.size(), adam_config);
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd best = x;
  double best_loss = problem.loss_grad(x, config.delta, nullptr);
  for (int step = 0; step < config.max_steps; ++step) {
    const double loss = problem.loss_grad(x, config.delta, &grad);
    if (!std::isfinite(loss)) break;
    if (loss < best_loss) {
      best_loss = loss;
      best = x;
    }
    adam.step(x, grad);
  }
  const double final_loss = problem.loss_grad(x, config.delta, nullptr);
  if (std::isfinite(final_loss) && final_loss < best_loss) {
    best_loss = final_loss;
    best = x;
  }
  return {best, best_loss};
}

// Solves one benchmark for a sharing mode; nested modes warm-start from the
// full solution of the next-simpler mode so training losses nest.
std::pair<Eigen::VectorXd, double> solve_benchmark(const BenchProblem& problem,
                                                   Sharing sharing, int m,
                                                   double warm_alpha,
                                                   const FlopsFitConfig& config,
                                                   Rng rng) {
  Eigen::VectorXd warm(problem.dim());
  if (sharing == Sharing::shared_all) {
    warm << warm_alpha, 0.5;
  } else {
    BenchProblem simpler = problem;
    Sharing simpler_mode;
    if (sharing == Sharing::family_intercept) {
      simpler_mode = Sharing::shared_all;
      simpler.n_alpha = 1;
      simpler.n_beta = 1;
    } else {
      simpler_mode = Sharing::family_intercept;
      simpler.n_alpha = m;
      simpler.n_beta = 1;
    }
    const auto [sol, loss] =
        solve_benchmark(simpler, simpler_mode, m, warm_alpha, config, rng);
    for (int f = 0; f < problem.n_alpha; ++f)
      warm(f) = sol(simpler.n_alpha == 1 ? 0 : f);
    for (int f = 0; f < problem.n_beta; ++f)
      warm(problem.n_alpha + f) = sol(simpler.n_alpha);
  }
  auto [best, best_loss] = minimize(problem, warm, config);
  for (int r = 0; r < config.restarts; ++r) {
    Eigen::VectorXd x0(problem.dim());
    for (int i = 0; i < x0.size(); ++i) x0(i) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < problem.n_alpha; ++i) x0(i) += warm_alpha;
    const auto [sol, loss] = minimize(problem, x0, config);
    if (loss < best_loss) {
      best_loss = loss;
      best = sol;
    }
  }
  return {best, best_loss};
}

struct LogcStats {
  double mean = 0.0;
  double std = 1.0;
};

LogcStats logc_statistics(const ScoreTable& table) {
  LogcStats st;
  double sum = 0.0;
  for (const auto& rec : table.records)
    sum += std::log(flops(rec.size_s, rec.tokens_t));
  st.mean = sum / static_cast<double>(table.records.size());
  double var = 0.0;
  for (const auto& rec : table.records) {
    const double lc = std::log(flops(rec.size_s, rec.tokens_t));
    var += (lc - st.mean) * (lc - st.mean);
  }
  var /= static_cast<double>(table.records.size());
  st.std = std::sqrt(std::max(var, 1e-12));
  return st;
}

int family_count_check(const ScoreTable& table, Sharing sharing) {
  const auto families = table.families();
  if (sharing == Sharing::family_both) {
    std::map<std::string, int> counts;
    for (const auto& rec : table.records) counts[rec.family_id]++;
    std::string offenders;
    for (const auto& fam : families) {
      if (counts[fam] < 2) offenders += (offenders.empty() ? "" : ", ") + fam;
    }
    if (!offenders.empty())
      throw error("validation",
                  "family-both sharing needs >= 2 models per family; "
                  "offending families: " + offenders);
  }
  return static_cast<int>(families.size());
}

}  // namespace

FlopsParams fit_flops(const ScoreTable& table, Sharing sharing,
                      const AsymptoteConfig& asymptotes,
                      const FlopsFitConfig& config) {
  if (table.records.empty()) throw error("validation", "empty score table");
  const int m = family_count_check(table, sharing);
  const int J = static_cast<int>(table.benchmarks.size());

  FlopsParams params;
  params.sharing = sharing;
  params.benchmarks = table.benchmarks;
  params.families = table.families();
  params.gammas.resize(J);
  const int n_alpha = sharing == Sharing::shared_all ? 1 : m;
  const int n_beta = sharing == Sharing::family_both ? m : 1;
  params.alpha.resize(J, n_alpha);
  params.beta.resize(J, n_beta);

  std::map<std::string, int> fam_index;
  for (int f = 0; f < m; ++f) fam_index[params.families[f]] = f;
  const LogcStats stats = logc_statistics(table);

  for (int j = 0; j < J; ++j) {
    const auto& bench = table.benchmarks[j];
    if (!asymptotes.has(bench))
      throw error("validation",
                  "no asymptote configured for benchmark '" + bench + "'");
    const double gamma = asymptotes.gamma(bench);
    params.gammas(j) = gamma;

    BenchProblem problem;
    problem.gamma = gamma;
    problem.n_alpha = n_alpha;
    problem.n_beta = n_beta;
    double mean_y = 0.0;
    for (const auto& rec : table.records) {
      auto it = rec.scores.find(bench);
      if (it == rec.scores.end()) continue;
      BenchCell cell;
      cell.family = fam_index.at(rec.family_id);
      cell.x = (std::log(flops(rec.size_s, rec.tokens_t)) - stats.mean) /
               stats.std;
      cell.y = it->second;
      mean_y += (cell.y - gamma) / (1.0 - gamma);
      problem.cells.push_back(cell);
    }
    Eigen::VectorXd best;
    if (problem.cells.empty()) {
      best = Eigen::VectorXd::Zero(problem.dim());
    } else {
      mean_y /= static_cast<double>(problem.cells.size());
      const double warm_alpha = logit(std::clamp(mean_y, 0.01, 0.99));
      Rng rng(config.seed + static_cast<uint64_t>(j) * 1315423911ULL);
      best = solve_benchmark(problem, sharing, m, warm_alpha, config, rng)
                 .first;
    }
    // Un-standardize: eta = a + b*(lc-mean)/std = (a - b*mean/std) + (b/std)*lc.
    for (int i = 0; i < n_beta; ++i) {
      const double b_std = best(n_alpha + i);
      params.beta(j, i) = b_std / stats.std;
    }
    for (int i = 0; i < n_alpha; ++i) {
      const double b_std = best(n_alpha + (n_beta == 1 ? 0 : i));
      params.alpha(j, i) = best(i) - b_std * stats.mean / stats.std;
    }
  }
  return params;
}

Eigen::MatrixXd predict_baseline(const FlopsParams& params,
                                 const std::vector<ModelRecord>& records) {
  std::map<std::string, int> fam_index;
  for (std::size_t f = 0; f < params.families.size(); ++f)
    fam_index[params.families[f]] = static_cast<int>(f);
  Eigen::MatrixXd out(records.size(), params.J());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    int fam = 0;
    if (params.sharing != Sharing::shared_all) {
      auto it = fam_index.find(rec.family_id);
      if (it == fam_index.end())
        throw error("validation", "family '" + rec.family_id +
                                      "' unknown to the FLOPs baseline");
      fam = it->second;
    }
    const double lc = std::log(flops(rec.size_s, rec.tokens_t));
    for (int j = 0; j < params.J(); ++j) {
      const double a =
          params.sharing == Sharing::shared_all ? params.alpha(j, 0)
                                                : params.alpha(j, fam);
      const double b = params.sharing == Sharing::family_both
                           ? params.beta(j, fam)
                           : params.beta(j, 0);
      const double g = params.gammas(j);
      out(i, j) = g + (1.0 - g) * sigmoid(a + b * lc);
    }
  }
  return out;
}

double flops_loss(const FlopsParams& params, const ScoreTable& table,
                  double delta) {
  const Eigen::MatrixXd mu = predict_baseline(params, table.records);
  double loss = 0.0;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    for (int j = 0; j < params.J(); ++j) {
      auto it = table.records[i].scores.find(params.benchmarks[j]);
      if (it != table.records[i].scores.end())
        loss += huber(mu(i, j) - it->second, delta);
    }
  }
  return loss;
}

PcaFlopsParams fit_pca_flops(const ScoreTable& table, int d, Sharing sharing) {
  const int J = static_cast<int>(table.benchmarks.size());
  if (d < 1 || d > J)
    throw error("dimension", "PCA dimension d must lie in [1, J]");
  if (sharing == Sharing::shared_all)
    throw error("validation",
                "PCA baseline supports family-intercept or family-both");

  // Complete rows only.
  std::vector<const ModelRecord*> rows;
  for (const auto& rec : table.records) {
    bool complete = true;
    for (const auto& b : table.benchmarks)
      if (!rec.has_score(b)) complete = false;
    if (complete) rows.push_back(&rec);
  }
  const int n = static_cast<int>(rows.size());
  if (n == 0)
    throw error("validation", "PCA baseline needs complete score rows");

  PcaFlopsParams params;
  params.benchmarks = table.benchmarks;
  params.d = d;
  params.sharing = sharing;
  for (const auto* rec : rows) {
    if (std::find(params.families.begin(), params.families.end(),
                  rec->family_id) == params.families.end())
      params.families.push_back(rec->family_id);
  }
  const int m = static_cast<int>(params.families.size());
  std::map<std::string, int> fam_index;
  for (int f = 0; f < m; ++f) fam_index[params.families[f]] = f;

  const int reg_params = sharing == Sharing::family_intercept ? m + 1 : 2 * m;
  if (n < reg_params)
    throw error("dimension", "PCA regression needs at least " +
                                 std::to_string(reg_params) +
                                 " complete rows, found " + std::to_string(n));

  Eigen::MatrixXd Y(n, J);
  Eigen::VectorXd lc(n);
  Eigen::VectorXi fam(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j)
      Y(i, j) = rows[i]->scores.at(table.benchmarks[j]);
    lc(i) = std::log(flops(rows[i]->size_s, rows[i]->tokens_t));
    fam(i) = fam_index.at(rows[i]->family_id);
  }

  params.col_means = Y.colwise().mean();
  const Eigen::MatrixXd centered = Y.rowwise() - params.col_means.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  params.eigenvectors.resize(J, J);
  params.eigenvalues.resize(J);
  for (int c = 0; c < J; ++c) {  // descending order, deterministic signs
    params.eigenvalues(c) = eig.eigenvalues()(J - 1 - c);
    Eigen::VectorXd v = eig.eigenvectors().col(J - 1 - c);
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    params.eigenvectors.col(c) = v;
  }

  const Eigen::MatrixXd pcs = centered * params.eigenvectors.leftCols(d);

  params.intercepts.resize(d, m);
  params.slopes.resize(d, sharing == Sharing::family_intercept ? 1 : m);
  const double ridge = 1e-10;
  if (sharing == Sharing::family_intercept) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, m + 1);
    for (int i = 0; i < n; ++i) {
      X(i, fam(i)) = 1.0;
      X(i, m) = lc(i);
    }
    Eigen::MatrixXd xtx = X.transpose() * X;
    xtx.diagonal().array() += ridge;
    const Eigen::MatrixXd solved = xtx.ldlt().solve(X.transpose() * pcs);
    for (int c = 0; c < d; ++c) {
      for (int f = 0; f < m; ++f) params.intercepts(c, f) = solved(f, c);
      params.slopes(c, 0) = solved(m, c);
    }
  } else {
    for (int f = 0; f < m; ++f) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i)
        if (fam(i) == f) members.push_back(i);
      if (members.size() < 2)
        throw error("dimension",
                    "family-both PCA regression needs >= 2 complete rows for "
                    "family '" + params.families[f] + "'");
      Eigen::MatrixXd X(members.size(), 2);
      Eigen::MatrixXd target(members.size(), d);
      for (std::size_t r = 0; r < members.size(); ++r) {
        X(r, 0) = 1.0;
        X(r, 1) = lc(members[r]);
        target.row(r) = pcs.row(members[r]);
      }
      Eigen::MatrixXd xtx = X.transpose() * X;
      xtx.diagonal().array() += ridge;
      const Eigen::MatrixXd solved = xtx.ldlt().solve(X.transpose() * target);
      for (int c = 0; c < d; ++c) {
        params.intercepts(c, f) = solved(0, c);
        params.slopes(c, f) = solved(1, c);
      }
    }
  }
  return params;
}

Eigen::MatrixXd pca_project(const PcaFlopsParams& params,
                            const Eigen::MatrixXd& scores) {
  const Eigen::MatrixXd centered =
      scores.rowwise() - params.col_means.transpose();
  return centered * params.eigenvectors.leftCols(params.d);
}

Eigen::MatrixXd pca_reconstruct(const PcaFlopsParams& params,
                                const Eigen::MatrixXd& components) {
  Eigen::MatrixXd out =
      components * params.eigenvectors.leftCols(params.d).transpose();
  out.rowwise() += params.col_means.transpose();
  return out;
}

Eigen::MatrixXd predict_baseline(const PcaFlopsParams& params,
                                 const std::vector<ModelRecord>& records) {
  std::map<std::string, int> fam_index;
  for (std::size_t f = 0; f < params.families.size(); ++f)
    fam_index[params.families[f]] = static_cast<int>(f);
  Eigen::MatrixXd pcs(records.size(), params.d);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = fam_index.find(records[i].family_id);
    if (it == fam_index.end())
      throw error("validation", "family '" + records[i].family_id +
                                    "' unknown to the PCA baseline");
    const double lc = std::log(flops(records[i].size_s, records[i].tokens_t));
    for (int c = 0; c < params.d; ++c) {
      const double slope = params.sharing == Sharing::family_intercept
                               ? params.slopes(c, 0)
                               : params.slopes(c, it->second);
      pcs(i, c) = params.intercepts(c, it->second) + slope * lc;
    }
  }
  return pca_reconstruct(params, pcs);
}

ParamCountBreakdown flops_skeleton_count(Sharing sharing, int J, int f) {
  ParamCountBreakdown c;
  c.bias = J;
  c.gammas = J;
  const int n_alpha = sharing == Sharing::shared_all ? 1 : f;
  const int n_beta = sharing == Sharing::family_both ? f : 1;
  c.intercepts = static_cast<long>(J) * n_alpha;
  c.slopes = static_cast<long>(J) * n_beta;
  return c;
}

}  // namespace sloth
