#include "scm/spec_io.hpp"

#include <fstream>

#include "scm/errors.hpp"

namespace scm {

namespace {

using nlohmann::json;

DesignLaw parse_design(const json& j) {
  const std::string kind = j.value("kind", "gaussian");
  if (kind == "rademacher") return DesignLaw::rademacher(j.at("d").get<Eigen::Index>());
  if (kind != "gaussian") throw InvalidArgument("spec: unknown design kind '" + kind + "'");
  if (j.contains("sigma")) {
    const auto& rows = j.at("sigma");
    const auto d = static_cast<Eigen::Index>(rows.size());
    Matrix s(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) throw InvalidArgument("spec: sigma must be square");
      for (Eigen::Index k = 0; k < d; ++k) s(i, k) = rows[i][k].get<double>();
    }
    return DesignLaw::gaussian(s);
  }
  const auto d = j.at("d").get<Eigen::Index>();
  return DesignLaw::gaussian(Matrix::Identity(d, d));
}

ResponseMechanism parse_mechanism(const json& j) {
  const std::string kind = j.value("kind", "glm_well_specified");
  if (kind == "glm_well_specified") return ResponseMechanism::glm(parse_family(j.value("family", "logistic")));
  if (kind == "label_flip") return ResponseMechanism::label_flip(j.value("eps", 0.0));
  if (kind == "linear_plus_noise") {
    const json& nj = j.at("noise");
    const NoiseKind nk = parse_noise_kind(nj.value("kind", "gaussian"));
    const double df = nj.value("df", 3.0);
    if (nj.contains("variance")) return ResponseMechanism::linear_plus_noise(NoiseLaw::with_variance(nk, nj.at("variance").get<double>(), df));
    return ResponseMechanism::linear_plus_noise(NoiseLaw{nk, nj.value("scale", 1.0), df});
  }
  throw InvalidArgument("spec: unknown mechanism kind '" + kind + "'");
}

}  // namespace

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "laplace") return NoiseKind::Laplace;
  if (s == "student_t") return NoiseKind::StudentT;
  throw InvalidArgument("spec: unknown noise kind '" + s + "'");
}

std::string family_name(LossKind k) {
  switch (k) {
    case LossKind::Logistic:
      return "logistic";
    case LossKind::Poisson:
      return "poisson";
    case LossKind::ExponentialResponse:
      return "exponential_response";
    default:
      throw InvalidArgument("not a GLM family");
  }
}

LossKind parse_family(const std::string& s) {
  if (s == "logistic") return LossKind::Logistic;
  if (s == "poisson") return LossKind::Poisson;
  if (s == "exponential_response") return LossKind::ExponentialResponse;
  throw InvalidArgument("spec: unknown GLM family '" + s + "'");
}

ExperimentSpec parse_experiment_spec(const json& j) {
  ExperimentSpec spec;
  spec.model.design = parse_design(j.at("design"));
  spec.model.mechanism = parse_mechanism(j.value("mechanism", json::object()));
  const Eigen::Index d = spec.model.design.dim();
  const json& th = j.at("theta");
  if (th.is_array()) {
    if (static_cast<Eigen::Index>(th.size()) != d) throw InvalidArgument("spec: theta must have length d");
    spec.model.theta_gen.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) spec.model.theta_gen[k] = th[k].get<double>();
  } else {
    spec.model.theta_gen = Vector::Zero(d);
    spec.model.theta_gen[0] = th.at("norm").get<double>();
  }
  spec.model.theta_star = spec.model.theta_gen;
  const json& lj = j.at("loss");
  spec.loss = make_loss(lj.at("name").get<std::string>(), lj.value("scale", 1.0));
  for (const auto& n : j.at("n_grid")) spec.n_grid.push_back(n.get<Eigen::Index>());
  spec.trials = j.value("trials", std::size_t{1});
  spec.delta = j.value("delta", 0.05);
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.outputs = j.value("outputs", std::string("out"));
  if (j.contains("oracle")) {
    const json& oj = j.at("oracle");
    const std::string m = oj.value("method", "quadrature");
    if (m == "quadrature") {
      spec.oracle = OracleMethod::quadrature();
    } else if (m == "monte_carlo") {
      spec.oracle = OracleMethod::monte_carlo(oj.value("samples", std::size_t{1'000'000}), oj.value("seed", spec.seed));
    } else {
      throw InvalidArgument("spec: unknown oracle method '" + m + "'");
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open spec file " + path);
  return parse_experiment_spec(json::parse(in));
}

json to_json(const ExperimentSpec& spec) {
  json j;
  j["design"] = {{"kind", to_string(spec.model.design.kind)}, {"d", spec.model.design.dim()}};
  if (spec.model.design.kind == DesignKind::Gaussian) {
    const Matrix& sg = spec.model.design.sigma;
    json rows = json::array();
    for (Eigen::Index i = 0; i < sg.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < sg.cols(); ++k) row.push_back(sg(i, k));
      rows.push_back(row);
    }
    j["design"]["sigma"] = rows;
  }
  const ResponseMechanism& m = spec.model.mechanism;
  j["mechanism"] = {{"kind", to_string(m.kind)}};
  if (m.kind == MechanismKind::GlmWellSpecified) j["mechanism"]["family"] = family_name(m.family);
  if (m.kind == MechanismKind::LabelFlip) j["mechanism"]["eps"] = m.flip_prob;
  if (m.kind == MechanismKind::LinearPlusNoise) {
    j["mechanism"]["noise"] = {{"kind", to_string(m.noise.kind)}, {"scale", m.noise.scale}, {"df", m.noise.df}};
  }
  j["theta"] = std::vector<double>(spec.model.theta_gen.data(), spec.model.theta_gen.data() + spec.model.theta_gen.size());
  j["loss"] = {{"name", spec.loss.name()}, {"scale", spec.loss.scale()}};
  j["n_grid"] = spec.n_grid;
  j["trials"] = spec.trials;
  j["delta"] = spec.delta;
  j["seed"] = spec.seed;
  j["outputs"] = spec.outputs;
  const OracleMethod om = spec.oracle_method();
  if (om.kind == OracleMethodKind::Quadrature) {
    j["oracle"] = {{"method", "quadrature"}};
  } else {
    j["oracle"] = {{"method", "monte_carlo"}, {"samples", om.samples}, {"seed", om.seed}};
  }
  return j;
}

SparseSweepSpec parse_sparse_spec(const json& j) {
  SparseSweepSpec s;
  s.d = j.value("d", s.d);
  s.s = j.value("s", s.s);
  s.n = j.value("n", s.n);
  s.trials = j.value("trials", s.trials);
  s.signal = j.value("signal", s.signal);
  if (j.contains("lambda_factors")) s.lambda_factors = j.at("lambda_factors").get<std::vector<double>>();
  if (j.contains("sketch_size")) s.sketch_size = j.at("sketch_size").get<std::size_t>();
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace scm
