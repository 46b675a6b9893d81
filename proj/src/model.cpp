#include "scm/model.hpp"

#include <cmath>

#include "scm/errors.hpp"
#include "scm/quadrature.hpp"

namespace scm {

DesignLaw DesignLaw::gaussian(Matrix sigma) {
  check_symmetric(sigma, sigma.rows(), "DesignLaw::gaussian: Sigma");
  cholesky(sigma, "DesignLaw::gaussian: Sigma");
  return {DesignKind::Gaussian, std::move(sigma)};
}

DesignLaw DesignLaw::rademacher(Eigen::Index d) {
  if (d < 1) throw InvalidArgument("DesignLaw::rademacher: d must be positive");
  return {DesignKind::Rademacher, Matrix::Identity(d, d)};
}

double NoiseLaw::variance() const {
  switch (kind) {
    case NoiseKind::Gaussian:
      return scale * scale;
    case NoiseKind::Laplace:
      return 2.0 * scale * scale;
    case NoiseKind::StudentT:
      return df > 2.0 ? scale * scale * df / (df - 2.0) : INFINITY;
  }
  return NAN;
}

NoiseLaw NoiseLaw::with_variance(NoiseKind kind, double variance, double df) {
  if (!(variance > 0.0)) throw InvalidArgument("NoiseLaw::with_variance: variance must be positive");
  NoiseLaw law{kind, 1.0, df};
  switch (kind) {
    case NoiseKind::Gaussian:
      law.scale = std::sqrt(variance);
      break;
    case NoiseKind::Laplace:
      law.scale = std::sqrt(variance / 2.0);
      break;
    case NoiseKind::StudentT:
      if (!(df > 2.0)) throw InvalidArgument("NoiseLaw::with_variance: Student-t needs df > 2");
      law.scale = std::sqrt(variance * (df - 2.0) / df);
      break;
  }
  return law;
}

std::vector<std::pair<double, double>> noise_mixture(const NoiseLaw& law, std::size_t nodes) {
  if (!(law.scale > 0.0)) throw InvalidArgument("noise_mixture: scale must be positive");
  std::vector<std::pair<double, double>> out;
  switch (law.kind) {
    case NoiseKind::Gaussian:
      out.emplace_back(1.0, law.scale * law.scale);
      break;
    case NoiseKind::Laplace: {
      // Laplace(b) = N(0, V) with V ~ Exp(mean 2 b^2)
      const QuadratureRule r = gauss_laguerre_gamma(nodes, 0.0);
      for (std::size_t k = 0; k < r.size(); ++k) out.emplace_back(r.weights[k], 2.0 * law.scale * law.scale * r.nodes[k]);
      break;
    }
    case NoiseKind::StudentT: {
      // t_nu(s) = N(0, s^2 nu / W), W ~ chi^2_nu = 2 Gamma(nu/2)
      if (!(law.df > 0.0)) throw InvalidArgument("noise_mixture: df must be positive");
      const double s2nu = law.scale * law.scale * law.df;
      if (law.df > 2.0) {
        // E_{Gamma(a+1)}[f(W)] = E_{Gamma(a)}[W f(W)] / a; keeps E[V] exact
        const double a = 0.5 * law.df - 1.0;
        const QuadratureRule r = gauss_laguerre_gamma(nodes, a - 1.0);
        for (std::size_t k = 0; k < r.size(); ++k) {
          out.emplace_back(r.weights[k] * r.nodes[k] / a, s2nu / (2.0 * r.nodes[k]));
        }
      } else {
        const QuadratureRule r = gauss_laguerre_gamma(nodes, 0.5 * law.df - 1.0);
        for (std::size_t k = 0; k < r.size(); ++k) out.emplace_back(r.weights[k], s2nu / (2.0 * r.nodes[k]));
      }
      break;
    }
  }
  return out;
}

ResponseMechanism ResponseMechanism::glm(LossKind family) {
  if (family != LossKind::Logistic && family != LossKind::Poisson && family != LossKind::ExponentialResponse) {
    throw InvalidArgument("ResponseMechanism::glm: family must be logistic, poisson or exponential_response");
  }
  ResponseMechanism m;
  m.kind = MechanismKind::GlmWellSpecified;
  m.family = family;
  return m;
}

ResponseMechanism ResponseMechanism::linear_plus_noise(NoiseLaw noise) {
  if (!(noise.scale > 0.0)) throw InvalidArgument("linear_plus_noise: noise scale must be positive");
  ResponseMechanism m;
  m.kind = MechanismKind::LinearPlusNoise;
  m.noise = noise;
  return m;
}

ResponseMechanism ResponseMechanism::label_flip(double eps) {
  if (!(eps >= 0.0 && eps < 0.5)) throw InvalidArgument("label_flip: flip probability must lie in [0, 1/2)");
  ResponseMechanism m;
  m.kind = MechanismKind::LabelFlip;
  m.family = LossKind::Logistic;
  m.flip_prob = eps;
  return m;
}

bool ResponseMechanism::binary() const {
  return kind == MechanismKind::LabelFlip || (kind == MechanismKind::GlmWellSpecified && family == LossKind::Logistic);
}

void PopulationModel::validate() const {
  const Eigen::Index d = design.dim();
  if (d < 1) throw InvalidArgument("PopulationModel: empty design law");
  if (theta_gen.size() != d) throw InvalidArgument("PopulationModel: theta_gen has wrong dimension");
  if (theta_star.size() != d) throw InvalidArgument("PopulationModel: theta_star has wrong dimension");
  if (!theta_gen.allFinite() || !theta_star.allFinite()) throw InvalidArgument("PopulationModel: non-finite parameter");
  if (mechanism.kind == MechanismKind::LabelFlip && !(mechanism.flip_prob >= 0.0 && mechanism.flip_prob < 0.5)) {
    throw InvalidArgument("PopulationModel: flip probability must lie in [0, 1/2)");
  }
}

std::string to_string(DesignKind k) { return k == DesignKind::Gaussian ? "gaussian" : "rademacher"; }

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gaussian:
      return "gaussian";
    case NoiseKind::Laplace:
      return "laplace";
    case NoiseKind::StudentT:
      return "student_t";
  }
  return "?";
}

std::string to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::GlmWellSpecified:
      return "glm_well_specified";
    case MechanismKind::LinearPlusNoise:
      return "linear_plus_noise";
    case MechanismKind::LabelFlip:
      return "label_flip";
  }
  return "?";
}

}  // namespace scm
