#include "scm/sampling.hpp"

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/laplace_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>
#include <cmath>

#include "scm/errors.hpp"
#include "scm/rng.hpp"

namespace scm {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Matrix gen_design(const DesignLaw& law, Eigen::Index n, std::uint64_t seed, std::uint64_t stream) {
  const Eigen::Index d = law.dim();
  if (n < 1 || d < 1) throw InvalidArgument("gen_design: n and d must be positive");
  CounterRng rng(seed, static_cast<std::uint64_t>(n), stream, StreamTag::Design);
  Matrix x(n, d);
  if (law.kind == DesignKind::Rademacher) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = (rng() >> 63) ? 1.0 : -1.0;
    }
    return x;
  }
  const auto llt = cholesky(law.sigma, "gen_design: Sigma");
  boost::random::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
  }
  // rows z_i -> L z_i
  return x * llt.matrixU();
}

void check_compatible(const ResponseMechanism& mech, const LossModel& loss) {
  const ResponseSpace rs = loss.response_space();
  if (mech.binary()) {
    if (rs != ResponseSpace::Binary01 && rs != ResponseSpace::SignedBinary) {
      throw InvalidArgument(to_string(mech.kind) + " produces binary labels; " + loss.name() + " is not a classification loss");
    }
    return;
  }
  if (mech.kind == MechanismKind::LinearPlusNoise) {
    if (rs != ResponseSpace::Reals || loss.eta_domain() != EtaDomain::AllReals) {
      throw InvalidArgument("linear_plus_noise needs a regression loss on the real line; got " + loss.name());
    }
    return;
  }
  if (mech.family == LossKind::Poisson) {
    if (rs != ResponseSpace::NonnegIntegers && rs != ResponseSpace::Reals) {
      throw InvalidArgument("poisson responses are incompatible with " + loss.name());
    }
    return;
  }
  if (mech.family == LossKind::ExponentialResponse) {
    if (rs != ResponseSpace::Reals) throw InvalidArgument("exponential responses are incompatible with " + loss.name());
    return;
  }
  throw InvalidArgument("unsupported response mechanism");
}

Vector gen_response(const ResponseMechanism& mech, const Matrix& x, const LossModel& loss, const Vector& theta,
                    std::uint64_t seed, std::uint64_t stream) {
  if (theta.size() != x.cols()) throw InvalidArgument("gen_response: theta has wrong dimension");
  check_compatible(mech, loss);
  const Eigen::Index n = x.rows();
  const Vector eta = x * theta;
  const auto un = static_cast<std::uint64_t>(n);
  CounterRng rng(seed, un, stream, StreamTag::Response);
  Vector y(n);

  if (mech.binary()) {
    const bool signed_labels = loss.response_space() == ResponseSpace::SignedBinary;
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform() < sigmoid(eta[i]) ? 1.0 : 0.0;
    if (mech.kind == MechanismKind::LabelFlip) {
      CounterRng flips(seed, un, stream, StreamTag::ResponseFlip);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (flips.uniform() < mech.flip_prob) y[i] = 1.0 - y[i];
      }
    }
    if (signed_labels) y = y.unaryExpr([](double v) { return to_signed_label(v); });
    return y;
  }

  if (mech.kind == MechanismKind::LinearPlusNoise) {
    const NoiseLaw& nl = mech.noise;
    switch (nl.kind) {
      case NoiseKind::Gaussian: {
        boost::random::normal_distribution<double> dist(0.0, nl.scale);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = eta[i] + dist(rng);
        break;
      }
      case NoiseKind::Laplace: {
        boost::random::laplace_distribution<double> dist(0.0, nl.scale);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = eta[i] + dist(rng);
        break;
      }
      case NoiseKind::StudentT: {
        boost::random::student_t_distribution<double> dist(nl.df);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = eta[i] + nl.scale * dist(rng);
        break;
      }
    }
    return y;
  }

  if (mech.family == LossKind::Poisson) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (eta[i] > 700.0) throw DomainError("gen_response: Poisson mean overflows", static_cast<std::size_t>(i));
      const double mean = std::exp(eta[i]);
      if (mean < 1e-300) {
        y[i] = 0.0;
        continue;
      }
      boost::random::poisson_distribution<long long, double> dist(mean);
      y[i] = static_cast<double>(dist(rng));
    }
    return y;
  }

  // exponential family in canonical form -y*eta - log(eta): Y = -E, E ~ Exp(rate eta)
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(eta[i] > 0.0)) throw DomainError("gen_response: exponential rate X_i^T theta <= 0", static_cast<std::size_t>(i));
    boost::random::exponential_distribution<double> dist(eta[i]);
    y[i] = -dist(rng);
  }
  return y;
}

}  // namespace scm
