#pragma once

// Synthetic population models: a design law for X, a response mechanism for
// Y | X, and the data-generating parameter.

#include <string>
#include <utility>
#include <vector>

#include "scm/linalg.hpp"
#include "scm/loss.hpp"

namespace scm {

enum class DesignKind { Gaussian, Rademacher };

struct DesignLaw {
  DesignKind kind = DesignKind::Gaussian;
  Matrix sigma;  // population second moment; identity for Rademacher

  static DesignLaw gaussian(Matrix sigma);
  static DesignLaw rademacher(Eigen::Index d);
  Eigen::Index dim() const { return sigma.rows(); }
};

enum class NoiseKind { Gaussian, Laplace, StudentT };

/// Symmetric noise laws. scale is the standard deviation for Gaussian, the
/// Laplace scale b, or the Student-t scale s (with df degrees of freedom).
struct NoiseLaw {
  NoiseKind kind = NoiseKind::Gaussian;
  double scale = 1.0;
  double df = 3.0;

  double variance() const;
  /// Law of the given kind rescaled to the requested variance.
  static NoiseLaw with_variance(NoiseKind kind, double variance, double df = 3.0);
};

/// Gaussian scale-mixture form of a noise law: pairs (weight, variance)
/// with eps = sqrt(V) Z. Gaussian noise has a single atom.
std::vector<std::pair<double, double>> noise_mixture(const NoiseLaw& law, std::size_t nodes = 96);

enum class MechanismKind { GlmWellSpecified, LinearPlusNoise, LabelFlip };

struct ResponseMechanism {
  MechanismKind kind = MechanismKind::GlmWellSpecified;
  /// GLM family generating Y: Logistic, Poisson or ExponentialResponse.
  LossKind family = LossKind::Logistic;
  NoiseLaw noise;
  double flip_prob = 0.0;

  static ResponseMechanism glm(LossKind family);
  static ResponseMechanism linear_plus_noise(NoiseLaw noise);
  static ResponseMechanism label_flip(double eps);

  bool binary() const;
};

struct PopulationModel {
  DesignLaw design;
  ResponseMechanism mechanism;
  /// parameter of the data-generating mechanism
  Vector theta_gen;
  /// population risk minimizer for the loss in use; equals theta_gen when the
  /// loss matches the mechanism
  Vector theta_star;

  void validate() const;
};

std::string to_string(DesignKind k);
std::string to_string(NoiseKind k);
std::string to_string(MechanismKind k);

}  // namespace scm
