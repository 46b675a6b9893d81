#include "scm/stat_oracle.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <limits>

#include "scm/erm.hpp"
#include "scm/errors.hpp"
#include "scm/parallel.hpp"
#include "scm/quadrature.hpp"
#include "scm/rng.hpp"
#include "scm/sampling.hpp"

namespace scm {

namespace {

constexpr std::size_t kChunk = 1 << 16;

std::uint64_t mc_seed(std::uint64_t seed) { return stream_key(seed, 0, 0, StreamTag::MonteCarlo); }

struct Draw {
  Matrix x;
  Vector y;
};

Draw draw_chunk(const PopulationModel& model, const LossModel& loss, std::uint64_t seed, std::size_t chunk,
                std::size_t size) {
  Draw d;
  d.x = gen_design(model.design, static_cast<Eigen::Index>(size), mc_seed(seed), chunk);
  d.y = gen_response(model.mechanism, d.x, loss, model.theta_gen, mc_seed(seed), chunk);
  return d;
}

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }
std::size_t chunk_size(std::size_t n, std::size_t k) { return std::min(kChunk, n - k * kChunk); }

Draw draw_sample(const PopulationModel& model, const LossModel& loss, std::uint64_t seed, std::size_t n) {
  Draw out;
  out.x.resize(static_cast<Eigen::Index>(n), model.design.dim());
  out.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < chunk_count(n); ++k) {
    const std::size_t m = chunk_size(n, k);
    Draw c = draw_chunk(model, loss, seed, k, m);
    const auto off = static_cast<Eigen::Index>(k * kChunk);
    out.x.middleRows(off, static_cast<Eigen::Index>(m)) = c.x;
    out.y.segment(off, static_cast<Eigen::Index>(m)) = c.y;
  }
  return out;
}

// Whitened coordinates: X = L Z, Z ~ N(0, I). Linear predictors along the
// given directions only depend on the projection of Z onto an orthonormal
// basis B of span{L^T v_j}.
struct Subspace {
  Matrix chol;
  Matrix basis;
  std::vector<Vector> coords;
};

Subspace make_subspace(const Matrix& chol, const std::vector<Vector>& dirs) {
  Subspace s;
  s.chol = chol;
  const Eigen::Index d = chol.rows();
  std::vector<Vector> white;
  double scale = 0.0;
  for (const Vector& v : dirs) {
    white.push_back(chol.transpose() * v);
    scale = std::max(scale, white.back().norm());
  }
  std::vector<Vector> basis;
  for (const Vector& w : white) {
    Vector r = w;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& b : basis) r -= b.dot(r) * b;
    }
    if (r.norm() > 1e-10 * scale && r.norm() > 0.0) basis.push_back(r / r.norm());
  }
  if (basis.size() > 3) throw UnsupportedMethod("quadrature: more than three independent directions");
  s.basis.resize(d, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) s.basis.col(static_cast<Eigen::Index>(j)) = basis[j];
  for (const Vector& w : white) s.coords.push_back(s.basis.transpose() * w);
  return s;
}

// Calls f(eta, u, weight) at every tensor node of the Gauss-Hermite rule.
template <class F>
void integrate(const Subspace& s, F&& f) {
  const QuadratureRule& rule = gauss_hermite_normal();
  const std::size_t r = static_cast<std::size_t>(s.basis.cols());
  const std::size_t k = s.coords.size();
  std::array<double, 3> u{};
  std::vector<double> eta(k, 0.0);
  if (r == 0) {
    f(eta.data(), u.data(), 1.0);
    return;
  }
  const std::size_t q = rule.size();
  std::array<std::size_t, 3> idx{};
  for (;;) {
    double w = 1.0;
    for (std::size_t a = 0; a < r; ++a) {
      u[a] = rule.nodes[idx[a]];
      w *= rule.weights[idx[a]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      double e = 0.0;
      for (std::size_t a = 0; a < r; ++a) e += s.coords[j][static_cast<Eigen::Index>(a)] * u[a];
      eta[j] = e;
    }
    f(eta.data(), u.data(), w);
    std::size_t a = 0;
    while (a < r && ++idx[a] == q) idx[a++] = 0;
    if (a == r) break;
  }
}

// E[f X X^T] from m0 = E[f] and m = E[f u u^T] in subspace coordinates.
Matrix outer_from_moments(const Subspace& s, double m0, const Matrix& m) {
  const Eigen::Index d = s.chol.rows();
  const Matrix& b = s.basis;
  Matrix z = m0 * (Matrix::Identity(d, d) - b * b.transpose());
  if (b.cols() > 0) z += b * m * b.transpose();
  Matrix out = s.chol * z * s.chol.transpose();
  return 0.5 * (out + out.transpose());
}

void require_gaussian(const PopulationModel& model, const char* what) {
  if (model.design.kind != DesignKind::Gaussian) {
    throw UnsupportedMethod(std::string(what) + ": quadrature needs a Gaussian design; use Monte Carlo");
  }
  if (model.mechanism.kind == MechanismKind::GlmWellSpecified && model.mechanism.family == LossKind::ExponentialResponse) {
    throw UnsupportedMethod(std::string(what) + ": exponential responses need a positive design");
  }
}

Matrix lower_chol(const Matrix& m, const char* what) { return cholesky(m, what).matrixL(); }

// Solves L^{-1} M L^{-T} for H = L L^T.
Matrix whiten(const Eigen::LLT<Matrix>& llt, const Matrix& m) {
  const Matrix a = llt.matrixL().solve(m);
  Matrix b = llt.matrixL().solve(a.transpose());
  return 0.5 * (b + b.transpose());
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::string to_string(const OracleMethod& m) {
  if (m.kind == OracleMethodKind::Quadrature) return "quadrature";
  return "monte_carlo(" + std::to_string(m.samples) + ")";
}

ConditionalLaw::ConditionalLaw(const ResponseMechanism& mech, const LossModel& loss) : mech_(mech), loss_(loss) {
  check_compatible(mech, loss);
  if (mech.kind == MechanismKind::LinearPlusNoise) {
    mixture_ = noise_mixture(mech.noise);
  } else if (!mech.binary()) {
    if (loss.kind() != mech.family && loss.kind() != LossKind::Quadratic) {
      throw UnsupportedMethod("conditional moments: " + loss.name() + " under this GLM family are not available");
    }
  }
}

CondMoments ConditionalLaw::at(double eta, double eta_gen) const {
  CondMoments m;
  if (mech_.binary()) {
    double p = sigmoid(eta_gen);
    if (mech_.kind == MechanismKind::LabelFlip) p = (1.0 - mech_.flip_prob) * p + mech_.flip_prob * (1.0 - p);
    const double y0 = loss_.response_space() == ResponseSpace::SignedBinary ? -1.0 : 0.0;
    const LossDerivs a = loss_.eval_unchecked(1.0, eta);
    const LossDerivs b = loss_.eval_unchecked(y0, eta);
    m.loss = p * a.value + (1.0 - p) * b.value;
    m.d1 = p * a.d1 + (1.0 - p) * b.d1;
    m.d2 = p * a.d2 + (1.0 - p) * b.d2;
    m.d1sq = p * a.d1 * a.d1 + (1.0 - p) * b.d1 * b.d1;
    return m;
  }
  if (mech_.kind == MechanismKind::LinearPlusNoise) {
    const QuadratureRule& rule = gauss_hermite_normal();
    for (const auto& [wk, v] : mixture_) {
      const double sd = std::sqrt(v);
      for (std::size_t j = 0; j < rule.size(); ++j) {
        const double w = wk * rule.weights[j];
        const LossDerivs l = loss_.eval_unchecked(eta_gen + sd * rule.nodes[j], eta);
        m.loss += w * l.value;
        m.d1 += w * l.d1;
        m.d2 += w * l.d2;
        m.d1sq += w * l.d1 * l.d1;
      }
    }
    return m;
  }
  // GLM responses: only the mean and variance of Y enter
  double mean = 0.0, var = 0.0;
  if (mech_.family == LossKind::Poisson) {
    mean = std::exp(eta_gen);
    var = mean;
  } else {
    if (!(eta_gen > 0.0)) throw DomainError("conditional moments: exponential rate X^T theta_gen <= 0");
    mean = -1.0 / eta_gen;
    var = 1.0 / (eta_gen * eta_gen);
  }
  if (loss_.kind() == LossKind::Quadratic) {
    const double s2 = loss_.scale() * loss_.scale();
    const double r = mean - eta;
    m.loss = (r * r + var) / (2.0 * s2);
    m.d1 = -r / s2;
    m.d2 = 1.0 / s2;
    m.d1sq = (r * r + var) / (s2 * s2);
    return m;
  }
  // canonical form -y eta + a(eta): l' = a'(eta) - y
  const LossDerivs a = loss_.eval_unchecked(0.0, eta);
  m.loss = a.value - mean * eta;
  m.d1 = a.d1 - mean;
  m.d2 = a.d2;
  m.d1sq = m.d1 * m.d1 + var;
  return m;
}

PopulationMatrices population_matrices(const PopulationModel& model, const LossModel& loss, const Vector& theta,
                                       const OracleMethod& method) {
  model.validate();
  const Eigen::Index d = model.design.dim();
  if (theta.size() != d || !theta.allFinite()) throw InvalidArgument("population_matrices: bad theta");
  PopulationMatrices out;
  out.sigma = model.design.sigma;

  if (method.kind == OracleMethodKind::Quadrature) {
    require_gaussian(model, "population_matrices");
    const ConditionalLaw cl(model.mechanism, loss);
    const bool resid = cl.residual_only();
    const Subspace s = make_subspace(lower_chol(model.design.sigma, "population_matrices: Sigma"),
                                     resid ? std::vector<Vector>{model.theta_gen - theta}
                                           : std::vector<Vector>{theta, model.theta_gen});
    const Eigen::Index r = s.basis.cols();
    double h0 = 0.0, g0 = 0.0;
    Matrix hm = Matrix::Zero(r, r), gm = Matrix::Zero(r, r);
    integrate(s, [&](const double* eta, const double* u, double w) {
      const CondMoments c = resid ? cl.at(0.0, eta[0]) : cl.at(eta[0], eta[1]);
      h0 += w * c.d2;
      g0 += w * c.d1sq;
      for (Eigen::Index a = 0; a < r; ++a) {
        for (Eigen::Index b = 0; b < r; ++b) {
          hm(a, b) += w * c.d2 * u[a] * u[b];
          gm(a, b) += w * c.d1sq * u[a] * u[b];
        }
      }
    });
    out.h = outer_from_moments(s, h0, hm);
    out.g = outer_from_moments(s, g0, gm);
    out.h_se = out.g_se = out.g_minus_h_se = Matrix::Zero(d, d);
    return out;
  }

  const std::size_t n = method.samples;
  if (n < 2) throw InvalidArgument("population_matrices: need at least two Monte Carlo samples");
  struct Sums {
    Matrix h, h2, g, g2, gh2;
  };
  const std::size_t chunks = chunk_count(n);
  std::vector<Sums> parts(chunks);
  parallel_for(chunks, method.threads, [&](std::size_t k) {
    const Draw dr = draw_chunk(model, loss, method.seed, k, chunk_size(n, k));
    const Vector eta = dr.x * theta;
    const Eigen::Index m = dr.x.rows();
    Vector w2(m), w1sq(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const LossDerivs l = loss.eval(dr.y[i], eta[i]);
      w2[i] = l.d2;
      w1sq[i] = l.d1 * l.d1;
    }
    const Matrix xx = dr.x.array().square().matrix();
    Sums& s = parts[k];
    s.h = dr.x.transpose() * (dr.x.array().colwise() * w2.array()).matrix();
    s.g = dr.x.transpose() * (dr.x.array().colwise() * w1sq.array()).matrix();
    s.h2 = xx.transpose() * (xx.array().colwise() * w2.array().square()).matrix();
    s.g2 = xx.transpose() * (xx.array().colwise() * w1sq.array().square()).matrix();
    s.gh2 = xx.transpose() * (xx.array().colwise() * (w1sq - w2).array().square()).matrix();
  });
  Sums tot{Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d)};
  for (const Sums& s : parts) {
    tot.h += s.h;
    tot.h2 += s.h2;
    tot.g += s.g;
    tot.g2 += s.g2;
    tot.gh2 += s.gh2;
  }
  const double nn = static_cast<double>(n);
  out.h = tot.h / nn;
  out.g = tot.g / nn;
  out.h = 0.5 * (out.h + out.h.transpose());
  out.g = 0.5 * (out.g + out.g.transpose());
  auto se = [nn](const Matrix& mean, const Matrix& second) {
    return ((second / nn - mean.cwiseAbs2()).cwiseMax(0.0) / nn).cwiseSqrt().eval();
  };
  out.h_se = se(out.h, tot.h2);
  out.g_se = se(out.g, tot.g2);
  out.g_minus_h_se = se(out.g - out.h, tot.gh2);
  return out;
}

MinimizerResult population_minimizer(const PopulationModel& model, const LossModel& loss, const OracleMethod& method) {
  const Eigen::Index d = model.design.dim();
  if (model.theta_gen.size() != d) throw InvalidArgument("population_minimizer: theta_gen has wrong dimension");
  check_compatible(model.mechanism, loss);
  const ResponseMechanism& mech = model.mechanism;
  MinimizerResult res;
  res.std_error = Vector::Zero(d);

  const bool matched = (mech.kind == MechanismKind::GlmWellSpecified && loss.kind() == mech.family) ||
                       (mech.kind == MechanismKind::LabelFlip && mech.flip_prob == 0.0 && loss.kind() == LossKind::Logistic);
  // symmetric noise around an even contrast: E[phi'(eps)] = 0
  const bool symmetric = mech.kind == MechanismKind::LinearPlusNoise && loss.is_contrast();
  if (matched || symmetric) {
    res.theta = model.theta_gen;
    res.exact = true;
    return res;
  }

  if (mech.binary() && model.design.kind == DesignKind::Gaussian && method.kind == OracleMethodKind::Quadrature) {
    // theta* = c theta_gen: the score is orthogonal to every direction
    // Sigma-orthogonal to theta_gen by symmetry of the Gaussian design.
    const double t = std::sqrt(model.theta_gen.dot(model.design.sigma * model.theta_gen));
    res.exact = true;
    if (t == 0.0) {
      res.theta = Vector::Zero(d);
      return res;
    }
    const ConditionalLaw cl(mech, loss);
    const QuadratureRule& rule = gauss_hermite_normal();
    auto score = [&](double c) {
      double s = 0.0;
      for (std::size_t j = 0; j < rule.size(); ++j) {
        const double eg = t * rule.nodes[j];
        s += rule.weights[j] * cl.at(c * eg, eg).d1 * eg;
      }
      return s;
    };
    double lo = 0.0, hi = 1.0;
    while (score(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e8) throw UnsupportedMethod("population_minimizer: no finite minimizer along theta_gen");
    }
    if (score(lo) > 0.0) {
      hi = lo;
      lo = -1.0;
      while (score(lo) > 0.0) {
        lo *= 2.0;
        if (lo < -1e8) throw UnsupportedMethod("population_minimizer: no finite minimizer along theta_gen");
      }
    }
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve(score, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    res.theta = 0.5 * (root.first + root.second) * model.theta_gen;
    return res;
  }

  if (method.kind != OracleMethodKind::MonteCarlo) {
    throw UnsupportedMethod("population_minimizer: no quadrature route for this model; use Monte Carlo");
  }
  const Draw dr = draw_sample(model, loss, method.seed, method.samples);
  const Dataset data(dr.x, dr.y);
  SolverOpts opts;
  if (loss.eta_domain() == EtaDomain::PositiveReals) opts.start = model.theta_gen;
  const FitResult fit = fit_erm(loss, data, opts);
  if (!fit.converged) throw UnsupportedMethod("population_minimizer: Monte Carlo ERM did not converge");
  res.theta = fit.theta_hat;
  // sandwich H^{-1} G H^{-1} / N
  const RiskEval ev = empirical_risk(loss, data, fit.theta_hat, EvalLevel::Hessian);
  const Vector eta = dr.x * fit.theta_hat;
  Vector w1sq(dr.x.rows());
  for (Eigen::Index i = 0; i < dr.x.rows(); ++i) w1sq[i] = std::pow(loss.eval(dr.y[i], eta[i]).d1, 2);
  const Matrix g = dr.x.transpose() * (dr.x.array().colwise() * w1sq.array()).matrix() / static_cast<double>(dr.x.rows());
  const Matrix hinv = cholesky(ev.hessian, "population_minimizer: H_N").solve(Matrix::Identity(d, d));
  const Matrix cov = hinv * g * hinv / static_cast<double>(dr.x.rows());
  res.std_error = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

double effective_dimension(const Matrix& h, const Matrix& g) {
  check_symmetric(h, h.rows(), "effective_dimension: H");
  check_symmetric(g, h.rows(), "effective_dimension: G");
  return whiten(cholesky(h, "effective_dimension: H"), g).trace();
}

double curvature_rho(const Matrix& sigma, const Matrix& h) {
  check_symmetric(h, h.rows(), "curvature_rho: H");
  check_symmetric(sigma, h.rows(), "curvature_rho: Sigma");
  const Matrix m = whiten(cholesky(h, "curvature_rho: H"), sigma);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double psi2_estimate(const Matrix& samples, std::size_t directions, std::uint64_t seed) {
  if (samples.rows() < 1000) throw InvalidArgument("psi2_estimate: need at least 1000 samples");
  if (directions < 1) throw InvalidArgument("psi2_estimate: need at least one direction");
  CounterRng rng(seed, static_cast<std::uint64_t>(samples.cols()), directions, StreamTag::Directions);
  boost::random::normal_distribution<double> normal;
  const double nn = static_cast<double>(samples.rows());
  double best = 0.0;
  Vector u(samples.cols());
  for (std::size_t k = 0; k < directions; ++k) {
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
    u /= u.norm();
    const Eigen::ArrayXd a2 = (samples * u).array().square();
    const Eigen::ArrayXd a4 = a2.square();
    const double m2 = a2.sum() / nn;
    const double m4 = a4.sum() / nn;
    const double m6 = (a4 * a2).sum() / nn;
    const double m8 = a4.square().sum() / nn;
    best = std::max({best, std::sqrt(m2) / std::sqrt(2.0), std::pow(m4, 0.25) / 2.0,
                     std::pow(m6, 1.0 / 6.0) / std::sqrt(6.0), std::pow(m8, 0.125) / std::sqrt(8.0)});
  }
  return best;
}

LogisticGaussianConstants logistic_gaussian_constants(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("logistic_gaussian_constants: t must be finite and >= 0");
  const double inv_sqrt_2pi = 0.3989422804014327;
  auto app = [](double x) {
    const double e = std::exp(-std::abs(x));
    return e / ((1.0 + e) * (1.0 + e));
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  // even integrands: twice the half line, split where the curvature peaks;
  // past 50/t the logistic factor is below e^-50
  auto half = [&](auto&& f) {
    const double end = t > 0.0 ? std::min(12.0, 50.0 / t) : 12.0;
    const double knee = std::min(end, t > 1.0 ? 8.0 / t : 12.0);
    double v = GK::integrate(f, 0.0, knee, 20, 1e-13);
    if (knee < end) v += GK::integrate(f, knee, end, 20, 1e-13);
    return 2.0 * v;
  };
  LogisticGaussianConstants c;
  c.kappa = half([&](double u) { return app(t * u) * u * u * inv_sqrt_2pi * std::exp(-0.5 * u * u); });
  c.kappa_perp = half([&](double u) { return app(t * u) * inv_sqrt_2pi * std::exp(-0.5 * u * u); });
  c.rho_bound = 1.0 / std::min(c.kappa, c.kappa_perp);
  return c;
}

struct ExcessRiskEvaluator::Impl {
  PopulationModel model;
  LossModel loss;
  Vector theta_star;
  OracleMethod method;
  ConditionalLaw cl;
  bool quadrature = false;
  Matrix chol;
  // residual mechanism with theta_star = theta_gen under a Gaussian design
  bool residual_fast = false;
  std::vector<std::pair<double, double>> mixture;
  double base = 0.0;
  // Monte Carlo sample
  Matrix x;
  Vector eta_gen, y, star;

  Impl(const PopulationModel& m, const LossModel& l, const Vector& ts, const OracleMethod& me)
      : model(m), loss(l), theta_star(ts), method(me), cl(m.mechanism, l) {}

  double residual_value(double s2) const {
    const QuadratureRule& rule = gauss_hermite_normal();
    double v = 0.0;
    for (const auto& [wk, var] : mixture) {
      const double sd = std::sqrt(s2 + var);
      for (std::size_t j = 0; j < rule.size(); ++j) v += wk * rule.weights[j] * loss.eval_unchecked(sd * rule.nodes[j], 0.0).value;
    }
    return v;
  }
};

ExcessRiskEvaluator::ExcessRiskEvaluator(const PopulationModel& model, const LossModel& loss, const Vector& theta_star,
                                         const OracleMethod& method)
    : impl_(std::make_unique<Impl>(model, loss, theta_star, method)) {
  model.validate();
  if (theta_star.size() != model.design.dim() || !theta_star.allFinite()) {
    throw InvalidArgument("excess_risk: bad theta_star");
  }
  Impl& im = *impl_;
  if (method.kind == OracleMethodKind::Quadrature) {
    require_gaussian(model, "excess_risk");
    im.quadrature = true;
    im.chol = lower_chol(model.design.sigma, "excess_risk: Sigma");
    if (im.cl.residual_only() && theta_star == model.theta_gen) {
      im.residual_fast = true;
      im.mixture = noise_mixture(model.mechanism.noise);
      im.base = im.residual_value(0.0);
    }
    return;
  }
  if (method.samples < 2) throw InvalidArgument("excess_risk: need at least two Monte Carlo samples");
  Draw dr = draw_sample(model, loss, method.seed, method.samples);
  im.x = std::move(dr.x);
  im.y = std::move(dr.y);
  im.eta_gen = im.x * model.theta_gen;
  const Vector eta_star = im.x * theta_star;
  im.star.resize(im.x.rows());
  for (Eigen::Index i = 0; i < im.x.rows(); ++i) {
    im.star[i] = im.cl.residual_only() ? loss.eval(im.y[i], eta_star[i]).value : im.cl.at(eta_star[i], im.eta_gen[i]).loss;
  }
}

ExcessRiskEvaluator::~ExcessRiskEvaluator() = default;
ExcessRiskEvaluator::ExcessRiskEvaluator(ExcessRiskEvaluator&&) noexcept = default;
ExcessRiskEvaluator& ExcessRiskEvaluator::operator=(ExcessRiskEvaluator&&) noexcept = default;

RiskEstimate ExcessRiskEvaluator::operator()(const Vector& theta) const {
  const Impl& im = *impl_;
  if (theta.size() != im.theta_star.size() || !theta.allFinite()) throw InvalidArgument("excess_risk: bad theta");
  RiskEstimate out;
  if (im.quadrature) {
    if (im.residual_fast) {
      const Vector diff = im.model.theta_gen - theta;
      const double s2 = diff.dot(im.model.design.sigma * diff);
      out.value = im.residual_value(s2) - im.base;
      return out;
    }
    const bool resid = im.cl.residual_only();
    const Subspace s = make_subspace(im.chol, resid ? std::vector<Vector>{im.model.theta_gen - theta, im.model.theta_gen - im.theta_star}
                                                    : std::vector<Vector>{theta, im.theta_star, im.model.theta_gen});
    double v = 0.0;
    integrate(s, [&](const double* eta, const double*, double w) {
      if (resid) {
        v += w * (im.cl.at(0.0, eta[0]).loss - im.cl.at(0.0, eta[1]).loss);
      } else {
        v += w * (im.cl.at(eta[0], eta[2]).loss - im.cl.at(eta[1], eta[2]).loss);
      }
    });
    out.value = v;
    return out;
  }
  const Vector eta = im.x * theta;
  const bool resid = im.cl.residual_only();
  double sum = 0.0, sum2 = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double cur = resid ? im.loss.eval(im.y[i], eta[i]).value : im.cl.at(eta[i], im.eta_gen[i]).loss;
    const double diff = cur - im.star[i];
    sum += diff;
    sum2 += diff * diff;
  }
  const double nn = static_cast<double>(eta.size());
  out.value = sum / nn;
  out.std_error = std::sqrt(std::max(0.0, sum2 / nn - out.value * out.value) / nn);
  return out;
}

RiskEstimate excess_risk(const PopulationModel& model, const LossModel& loss, const Vector& theta,
                         const Vector& theta_star, const OracleMethod& method) {
  return ExcessRiskEvaluator(model, loss, theta_star, method)(theta);
}

RestrictedRisk restricted_excess_risk(const PopulationModel& model, const LossModel& loss, const Vector& theta,
                                      const Vector& theta_star, double radius, RestrictionKind which,
                                      const RestrictedOptions& opts) {
  if (!(radius > 0.0)) throw InvalidArgument("restricted_excess_risk: radius must be positive");
  model.validate();
  const Eigen::Index d = model.design.dim();
  if (theta.size() != d || theta_star.size() != d) throw InvalidArgument("restricted_excess_risk: dimension mismatch");
  if (opts.samples < 2) throw InvalidArgument("restricted_excess_risk: need at least two samples");
  const ConditionalLaw cl(model.mechanism, loss);

  Eigen::LLT<Matrix> metric;
  if (which == RestrictionKind::Design) {
    metric = cholesky(model.design.sigma, "restricted_excess_risk: Sigma");
  } else {
    Matrix h;
    if (opts.h) {
      h = *opts.h;
    } else {
      const OracleMethod m = model.design.kind == DesignKind::Gaussian ? OracleMethod::quadrature()
                                                                       : OracleMethod::monte_carlo(opts.samples, opts.seed);
      h = population_matrices(model, loss, theta_star, m).h;
    }
    metric = cholesky(h, "restricted_excess_risk: H");
  }

  const Draw dr = draw_sample(model, loss, opts.seed, opts.samples);
  const Vector eta = dr.x * theta;
  const Vector eta_star = dr.x * theta_star;
  const Vector eta_gen = dr.x * model.theta_gen;
  const Matrix white = metric.matrixL().solve(dr.x.transpose());
  double sum = 0.0, sum2 = 0.0;
  std::size_t kept = 0;
  for (Eigen::Index i = 0; i < dr.x.rows(); ++i) {
    double norm = white.col(i).norm();
    if (which == RestrictionKind::Calibrated) norm *= std::sqrt(std::max(0.0, loss.eval(dr.y[i], eta_star[i]).d2));
    if (!(norm <= radius)) continue;
    ++kept;
    const double diff = cl.residual_only()
                            ? loss.eval(dr.y[i], eta[i]).value - loss.eval(dr.y[i], eta_star[i]).value
                            : cl.at(eta[i], eta_gen[i]).loss - cl.at(eta_star[i], eta_gen[i]).loss;
    sum += diff;
    sum2 += diff * diff;
  }
  const double nn = static_cast<double>(opts.samples);
  RestrictedRisk out;
  out.value = sum / nn;
  out.std_error = std::sqrt(std::max(0.0, sum2 / nn - out.value * out.value) / nn);
  out.kept_fraction = static_cast<double>(kept) / nn;
  out.low_mass_warning = out.kept_fraction < 0.01;
  return out;
}

double calibrated_psi2_dikin(const PopulationModel& model, const LossModel& loss, const Matrix& h, double r,
                             std::size_t samples, std::size_t probes, std::uint64_t seed) {
  if (!(r >= 0.0)) throw InvalidArgument("calibrated_psi2_dikin: radius must be >= 0");
  const auto llt = cholesky(h, "calibrated_psi2_dikin: H");
  const Draw dr = draw_sample(model, loss, seed, samples);
  const Eigen::Index d = model.design.dim();
  std::vector<Vector> points{model.theta_star};
  if (r > 0.0) {
    CounterRng rng(seed, static_cast<std::uint64_t>(d), probes, StreamTag::Misc);
    boost::random::normal_distribution<double> normal;
    for (std::size_t k = 0; k < probes; ++k) {
      Vector u(d);
      for (Eigen::Index j = 0; j < d; ++j) u[j] = normal(rng);
      u /= u.norm();
      // ||L^{-T} u||_H = ||u|| = 1
      points.push_back(model.theta_star + r * llt.matrixU().solve(u));
    }
  }
  const Matrix white = llt.matrixL().solve(dr.x.transpose()).transpose();
  double best = 0.0;
  for (const Vector& th : points) {
    const Vector eta = dr.x * th;
    Vector s(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) s[i] = std::sqrt(std::max(0.0, loss.eval(dr.y[i], eta[i]).d2));
    best = std::max(best, psi2_estimate(white.array().colwise() * s.array(), 50, seed));
  }
  return best;
}

TheoryReport theory_report(const PopulationModel& model, const LossModel& loss, const TheoryOptions& opts) {
  if (!(opts.delta > 0.0 && opts.delta < 1.0)) throw InvalidArgument("theory_report: delta must lie in (0, 1)");
  model.validate();
  TheoryReport rep;
  rep.method = opts.method;
  rep.delta = opts.delta;
  rep.theta_star = model.theta_star;
  const PopulationMatrices pm = population_matrices(model, loss, model.theta_star, opts.method);
  rep.sigma = pm.sigma;
  rep.h = pm.h;
  rep.g = pm.g;
  rep.h_se = pm.h_se;
  rep.g_se = pm.g_se;
  rep.d_eff = effective_dimension(pm.h, pm.g);
  rep.rho = curvature_rho(pm.sigma, pm.h);

  const Draw dr = draw_sample(model, loss, opts.seed ^ 0x7073692D32ULL, opts.psi_samples);
  const Vector eta = dr.x * model.theta_star;
  Vector w1(eta.size()), s2(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const LossDerivs l = loss.eval(dr.y[i], eta[i]);
    w1[i] = l.d1;
    s2[i] = std::sqrt(std::max(0.0, l.d2));
  }
  const auto ls = cholesky(pm.sigma, "theory_report: Sigma");
  const auto lh = cholesky(pm.h, "theory_report: H");
  const Matrix z0 = ls.matrixL().solve(dr.x.transpose()).transpose();
  const Matrix z2 = lh.matrixL().solve(dr.x.transpose()).transpose().array().colwise() * s2.array();
  rep.k0 = psi2_estimate(z0, opts.directions, opts.seed);
  rep.k2 = psi2_estimate(z2, opts.directions, opts.seed);
  try {
    const auto lg = cholesky(pm.g, "theory_report: G");
    const Matrix z1 = lg.matrixL().solve(dr.x.transpose()).transpose().array().colwise() * w1.array();
    rep.k1 = psi2_estimate(z1, opts.directions, opts.seed);
  } catch (const NotPositiveDefinite&) {
    rep.k1 = NAN;
  }
  std::vector<double> n0(static_cast<std::size_t>(eta.size())), n2(n0.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    n0[static_cast<std::size_t>(i)] = z0.row(i).norm();
    n2[static_cast<std::size_t>(i)] = z2.row(i).norm();
  }
  rep.b0 = quantile(n0, 1.0 - opts.delta);
  rep.b2 = quantile(n2, 1.0 - opts.delta);
  return rep;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

nlohmann::json to_json(const TheoryReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"method", to_string(r.method)},
          {"Sigma", matrix_to_json(r.sigma)},
          {"H", matrix_to_json(r.h)},
          {"G", matrix_to_json(r.g)},
          {"H_se", matrix_to_json(r.h_se)},
          {"G_se", matrix_to_json(r.g_se)},
          {"theta_star", matrix_to_json(r.theta_star)},
          {"d_eff", num(r.d_eff)},
          {"rho", num(r.rho)},
          {"K0", num(r.k0)},
          {"K1", num(r.k1)},
          {"K2", num(r.k2)},
          {"B0", num(r.b0)},
          {"B2", num(r.b2)},
          {"delta", r.delta}};
}

}  // namespace scm
