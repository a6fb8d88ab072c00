// SPDX-License-Identifier: Apache-2.0

#include "sloth/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sloth/common.hpp"

namespace sloth {

using nlohmann::json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::basic: return "basic";
    case Variant::trainable_link: return "trainable-link";
    case Variant::shared_intercept: return "shared-intercept";
    case Variant::size_and_tokens: return "size-and-tokens";
  }
  throw error("internal", "unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "basic") return Variant::basic;
  if (name == "trainable-link") return Variant::trainable_link;
  if (name == "shared-intercept") return Variant::shared_intercept;
  if (name == "size-and-tokens") return Variant::size_and_tokens;
  throw error("validation", "unknown variant '" + name + "'");
}

MonotoneNet MonotoneNet::zero(int hidden) {
  MonotoneNet net;
  net.w1 = Eigen::VectorXd::Zero(hidden);
  net.b1 = Eigen::VectorXd::Zero(hidden);
  net.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
  net.b2 = Eigen::VectorXd::Zero(hidden);
  net.w3 = Eigen::VectorXd::Zero(hidden);
  net.b3 = 0.0;
  return net;
}

double MonotoneNet::eval(double eta) const {
  const Eigen::VectorXd h1 = (w1 * eta + b1).array().tanh();
  const Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh();
  return sigmoid(w3.dot(h2) + b3);
}

void MonotoneNet::clamp_weights() {
  w1 = w1.cwiseMax(0.0);
  w2 = w2.cwiseMax(0.0);
  w3 = w3.cwiseMax(0.0);
}

double LinkFunction::eval(double eta) const {
  return kind == LinkKind::fixed_sigmoid ? sigmoid(eta) : net.eval(eta);
}

double link_eval(const LinkFunction& link, double eta) { return link.eval(eta); }

SlothParams SlothParams::make(Variant variant,
                              std::vector<std::string> benchmarks,
                              std::vector<std::string> families, int d,
                              int link_hidden) {
  SlothParams p;
  p.variant = variant;
  p.benchmarks = std::move(benchmarks);
  p.families = std::move(families);
  const int J = p.J();
  if (variant == Variant::size_and_tokens) {
    if (d != 0 && d != J)
      throw error("dimension", "size-and-tokens requires d = J");
    d = J;
  }
  if (d < 1) throw error("dimension", "skill count d must be >= 1");
  p.d = d;
  if (p.identity_loadings())
    p.loadings = Eigen::MatrixXd::Identity(J, d);
  else
    p.loadings = Eigen::MatrixXd::Zero(J, d);
  p.bias = Eigen::VectorXd::Zero(J);
  p.coeffs = Eigen::MatrixXd::Zero(3 + p.intercept_rows(), d);
  p.gammas.assign(J, GammaParam{});
  LinkFunction link;
  if (p.trainable_links()) {
    link.kind = LinkKind::monotone_net;
    link.net = MonotoneNet::zero(link_hidden);
  }
  p.links.assign(J, link);
  return p;
}

Eigen::MatrixXd SlothParams::full_coeffs(const DesignMatrix& design) const {
  check_shapes();
  const int p = design.p();
  if (variant == Variant::shared_intercept) {
    Eigen::MatrixXd full(p, d);
    full.topRows(3) = coeffs.topRows(3);
    for (int r = 3; r < p; ++r) full.row(r) = coeffs.row(3);
    return full;
  }
  if (design.n_families() != n_families())
    throw error("dimension", "design family count does not match parameters");
  // Columns of the design beyond position 2 follow design.column_roles; map
  // parameter intercept rows (ordered by `families`) onto those columns.
  Eigen::MatrixXd full(p, d);
  full.topRows(3) = coeffs.topRows(3);
  for (int f = 0; f < n_families(); ++f) {
    auto it = design.family_index.find(families[f]);
    if (it == design.family_index.end())
      throw error("dimension",
                  "design lacks intercept column for family '" + families[f] + "'");
    full.row(it->second) = coeffs.row(3 + f);
  }
  return full;
}

void SlothParams::sync_gammas() {
  for (auto& g : gammas)
    if (g.trainable) g.value = sigmoid(g.pre_sigmoid);
}

void SlothParams::check_shapes() const {
  const int Jn = J();
  if (loadings.rows() != Jn || loadings.cols() != d)
    throw error("dimension", "loadings shape mismatch");
  if (bias.size() != Jn) throw error("dimension", "bias shape mismatch");
  if (coeffs.rows() != 3 + intercept_rows() || coeffs.cols() != d)
    throw error("dimension", "coefficient shape mismatch");
  if (static_cast<int>(gammas.size()) != Jn)
    throw error("dimension", "gamma count mismatch");
  if (static_cast<int>(links.size()) != Jn)
    throw error("dimension", "link count mismatch");
  if (identity_loadings() && d != Jn)
    throw error("dimension", "size-and-tokens requires d = J");
  for (const auto& g : gammas)
    if (!(g.value >= 0.0 && g.value < 1.0))
      throw error("validation", "gamma outside [0,1)");
}

SkillMatrix SkillMatrix::from_values(Eigen::MatrixXd values) {
  SkillMatrix sm;
  sm.values = std::move(values);
  const double n = static_cast<double>(sm.values.rows());
  sm.col_means = sm.values.colwise().mean();
  const Eigen::MatrixXd centered = sm.values.rowwise() - sm.col_means.transpose();
  sm.covariance = centered.transpose() * centered / n;
  return sm;
}

SkillMatrix skills(const SlothParams& params, const DesignMatrix& design) {
  const Eigen::MatrixXd full = params.full_coeffs(design);
  if (design.matrix.cols() != full.rows())
    throw error("dimension", "design and coefficient shapes are incompatible");
  return SkillMatrix::from_values(design.matrix * full);
}

Eigen::MatrixXd linear_predictors(const SlothParams& params,
                                  const SkillMatrix& skill_matrix) {
  if (skill_matrix.values.cols() != params.loadings.cols())
    throw error("dimension", "skill and loading shapes are incompatible");
  Eigen::MatrixXd eta = skill_matrix.values * params.loadings.transpose();
  eta.rowwise() += params.bias.transpose();
  return eta;
}

Eigen::MatrixXd predict_scores(const SlothParams& params,
                               const DesignMatrix& design) {
  const SkillMatrix theta = skills(params, design);
  const Eigen::MatrixXd eta = linear_predictors(params, theta);
  Eigen::MatrixXd mu(eta.rows(), eta.cols());
  for (int i = 0; i < eta.rows(); ++i) {
    for (int j = 0; j < eta.cols(); ++j) {
      const double e = eta(i, j);
      if (!std::isfinite(e))
        throw error("numeric", "non-finite linear predictor for model '" +
                                   design.row_ids[i] + "', benchmark '" +
                                   params.benchmarks[j] + "'");
      const double g = params.gammas[j].value;
      mu(i, j) = g + (1.0 - g) * params.links[j].eval(e);
    }
  }
  return mu;
}

ParamCountBreakdown skeleton_param_count(Variant variant, int J, int d, int f) {
  ParamCountBreakdown c;
  c.bias = J;
  c.gammas = J;
  switch (variant) {
    case Variant::basic:
    case Variant::trainable_link:
      c.loadings = static_cast<long>(J) * d;
      c.slopes = 3L * d;
      c.intercepts = static_cast<long>(f) * d;
      break;
    case Variant::shared_intercept:
      c.loadings = static_cast<long>(J) * d;
      c.slopes = 3L * d;
      c.intercepts = d;
      break;
    case Variant::size_and_tokens:
      c.loadings = 0;  // fixed identity
      c.slopes = 3L * J;
      c.intercepts = static_cast<long>(f) * J;
      break;
  }
  return c;
}

ParamCountBreakdown skeleton_param_count(const SlothParams& params) {
  return skeleton_param_count(params.variant, params.J(), params.d,
                              params.n_families());
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[i].size()) != c)
      throw error("validation", "ragged matrix in params file");
    for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

}  // namespace

std::string params_to_json(const SlothParams& params) {
  params.check_shapes();
  json doc;
  doc["format"] = "sloth-params";
  doc["version"] = 1;
  doc["variant"] = variant_name(params.variant);
  doc["d"] = params.d;
  doc["benchmarks"] = params.benchmarks;
  doc["families"] = params.families;
  doc["loadings"] = matrix_to_json(params.loadings);
  doc["bias"] = vector_to_json(params.bias);
  doc["coefficients"] = matrix_to_json(params.coeffs);
  json gammas = json::array();
  for (const auto& g : params.gammas) {
    gammas.push_back({{"value", g.value},
                      {"trainable", g.trainable},
                      {"pre_sigmoid", g.pre_sigmoid}});
  }
  doc["gammas"] = std::move(gammas);
  json links = json::array();
  for (const auto& link : params.links) {
    if (link.kind == LinkKind::fixed_sigmoid) {
      links.push_back({{"kind", "fixed-sigmoid"}});
    } else {
      links.push_back({{"kind", "monotone-net"},
                       {"hidden", link.net.hidden()},
                       {"w1", vector_to_json(link.net.w1)},
                       {"b1", vector_to_json(link.net.b1)},
                       {"w2", matrix_to_json(link.net.w2)},
                       {"b2", vector_to_json(link.net.b2)},
                       {"w3", vector_to_json(link.net.w3)},
                       {"b3", link.net.b3}});
    }
  }
  doc["links"] = std::move(links);
  doc["standardization"] = {
      {"applied", params.standardization.applied},
      {"mean", {params.standardization.mean(0), params.standardization.mean(1),
                params.standardization.mean(2)}},
      {"std", {params.standardization.std(0), params.standardization.std(1),
               params.standardization.std(2)}}};
  return doc.dump(2);
}

SlothParams params_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& e) {
    throw error("io", std::string("params JSON parse failure: ") + e.what());
  }
  if (doc.value("format", "") != "sloth-params")
    throw error("validation", "not a sloth-params document");
  if (doc.value("version", 0) != 1)
    throw error("validation", "unsupported sloth-params version");
  SlothParams p;
  p.variant = variant_from_name(doc.at("variant").get<std::string>());
  p.d = doc.at("d").get<int>();
  p.benchmarks = doc.at("benchmarks").get<std::vector<std::string>>();
  p.families = doc.at("families").get<std::vector<std::string>>();
  p.loadings = matrix_from_json(doc.at("loadings"));
  p.bias = vector_from_json(doc.at("bias"));
  p.coeffs = matrix_from_json(doc.at("coefficients"));
  for (const auto& g : doc.at("gammas")) {
    GammaParam gp;
    gp.value = g.at("value").get<double>();
    gp.trainable = g.at("trainable").get<bool>();
    gp.pre_sigmoid = g.at("pre_sigmoid").get<double>();
    p.gammas.push_back(gp);
  }
  for (const auto& l : doc.at("links")) {
    LinkFunction link;
    if (l.at("kind").get<std::string>() == "fixed-sigmoid") {
      link.kind = LinkKind::fixed_sigmoid;
    } else {
      link.kind = LinkKind::monotone_net;
      link.net.w1 = vector_from_json(l.at("w1"));
      link.net.b1 = vector_from_json(l.at("b1"));
      link.net.w2 = matrix_from_json(l.at("w2"));
      link.net.b2 = vector_from_json(l.at("b2"));
      link.net.w3 = vector_from_json(l.at("w3"));
      link.net.b3 = l.at("b3").get<double>();
    }
    p.links.push_back(std::move(link));
  }
  const auto& st = doc.at("standardization");
  p.standardization.applied = st.at("applied").get<bool>();
  for (int i = 0; i < 3; ++i) {
    p.standardization.mean(i) = st.at("mean")[i].get<double>();
    p.standardization.std(i) = st.at("std")[i].get<double>();
  }
  p.check_shapes();
  return p;
}

void save_params(const std::string& path, const SlothParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("io", "cannot open file for writing: " + path);
  out << params_to_json(params) << '\n';
  if (!out) throw error("io", "write failed: " + path);
}

SlothParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("io", "cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return params_from_json(buffer.str());
}

}  // namespace sloth
