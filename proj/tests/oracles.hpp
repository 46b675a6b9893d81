#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "scm/linalg.hpp"
#include "scm/loss.hpp"
#include "scm/rng.hpp"
#include "scm/sc_calculus.hpp"

namespace oracle {

/// g(t) = sum_i w_i l(y_i, a_i + t b_i).
struct Restriction {
  scm::LossModel loss;
  std::vector<double> y, a, b, w;

  double d2(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * loss.eval(y[i], a[i] + t * b[i]).d2 * b[i] * b[i];
    return s;
  }
  double value(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * loss.eval(y[i], a[i] + t * b[i]).value;
    return s;
  }
  double d1(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * loss.eval(y[i], a[i] + t * b[i]).d1 * b[i];
    return s;
  }
  /// max_i |b_i|
  double spread() const {
    double m = 0.0;
    for (double v : b) m = std::max(m, std::abs(v));
    return m;
  }
  /// max_i |b_i| sqrt(l''(y_i, a_i))
  double calibrated_spread() const {
    double m = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) m = std::max(m, std::abs(b[i]) * std::sqrt(loss.eval(y[i], a[i]).d2));
    return m;
  }
};

/// g(T) - g(0) - T g'(0) = int_0^T (T - t) g''(t) dt by adaptive Gauss-Kronrod.
inline double remainder(const Restriction& r, double T) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double t) { return (T - t) * r.d2(t); }, 0.0, T, 12, 1e-13, &err);
}

struct SandwichCheck {
  double remainder = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool applicable = true;
  bool inside(double slack = 1e-9) const {
    const double tol = slack * std::max(1.0, std::abs(remainder));
    return remainder >= lower - tol && remainder <= upper + tol;
  }
};

/// Remainder of g against the bracket for the loss's class:
/// Pseudo: S = c max|b_i|, remainder at t = 1.
/// Aux: S = c max|b_i| sqrt(l''_i(0)) for SCb losses, remainder at t = 1 (needs S < 2).
/// Canonical: same S, remainder at t = 1/S.
inline SandwichCheck sandwich(const Restriction& r, scm::BracketCase which) {
  const double c = r.loss.sc_class().c;
  const double g0 = r.d2(0.0);
  SandwichCheck out;
  switch (which) {
    case scm::BracketCase::Pseudo: {
      const auto b = scm::bracket_pseudo(c * r.spread());
      out.remainder = remainder(r, 1.0);
      out.lower = b.lower_coeff * g0;
      out.upper = b.upper_coeff * g0;
      break;
    }
    case scm::BracketCase::Aux: {
      const double S = c * r.calibrated_spread();
      out.applicable = S < 2.0;
      if (!out.applicable) return out;
      const auto b = scm::bracket_aux(S);
      out.remainder = remainder(r, 1.0);
      out.lower = b.lower_coeff * g0;
      out.upper = b.upper_coeff * g0;
      break;
    }
    case scm::BracketCase::Canonical: {
      const double S = c * r.calibrated_spread();
      const auto b = scm::bracket_canonical(S);
      out.remainder = remainder(r, 1.0 / S);
      out.lower = b.lower_coeff * g0;
      out.upper = b.upper_coeff * g0;
      break;
    }
  }
  return out;
}

/// Random restriction with responses valid for the loss.
inline Restriction random_restriction(const scm::LossModel& loss, scm::CounterRng& rng, std::size_t terms) {
  Restriction r{loss, {}, {}, {}, {}};
  auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  double wsum = 0.0;
  for (std::size_t i = 0; i < terms; ++i) {
    double y = 0.0, a = 0.0, b = unif(-1.0, 1.0) * std::pow(10.0, unif(-1.0, 0.7));
    switch (loss.response_space()) {
      case scm::ResponseSpace::Binary01:
        y = rng.uniform() < 0.5 ? 0.0 : 1.0;
        a = unif(-4.0, 4.0);
        break;
      case scm::ResponseSpace::SignedBinary:
        y = rng.uniform() < 0.5 ? -1.0 : 1.0;
        a = unif(-4.0, 4.0);
        break;
      case scm::ResponseSpace::NonnegIntegers:
        y = std::floor(unif(0.0, 6.0));
        a = unif(-2.0, 2.0);
        b = unif(-1.0, 1.0) * std::pow(10.0, unif(-1.0, 0.3));
        break;
      case scm::ResponseSpace::Reals:
        if (loss.eta_domain() == scm::EtaDomain::PositiveReals) {
          y = -unif(0.0, 3.0);
          a = std::pow(10.0, unif(-1.0, 1.0));
          b = unif(-1.0, 1.0) * a * 3.0;
        } else {
          y = unif(-5.0, 5.0) * loss.scale();
          a = unif(-5.0, 5.0) * loss.scale();
          b *= loss.scale();
        }
        break;
    }
    r.y.push_back(y);
    r.a.push_back(a);
    r.b.push_back(b);
    r.w.push_back(unif(0.1, 1.0));
    wsum += r.w.back();
  }
  for (double& w : r.w) w /= wsum;
  return r;
}

/// Plain cyclic coordinate descent for
///   (1/(2 n sigma^2)) ||y - X theta||^2 + lambda ||theta||_1
/// with full residual updates, run until no coordinate moves by more than tol.
inline scm::Vector cd_lasso(const scm::Matrix& x, const scm::Vector& y, double sigma, double lambda,
                            double tol = 1e-13, int max_sweeps = 200000) {
  const auto n = x.rows(), d = x.cols();
  const double scale = 1.0 / (static_cast<double>(n) * sigma * sigma);
  scm::Vector theta = scm::Vector::Zero(d);
  scm::Vector resid = y;
  std::vector<double> col_sq(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) col_sq[static_cast<std::size_t>(j)] = scale * x.col(j).squaredNorm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double a = col_sq[static_cast<std::size_t>(j)];
      const double rho = scale * x.col(j).dot(resid) + a * theta[j];
      const double z = rho > lambda ? (rho - lambda) / a : (rho < -lambda ? (rho + lambda) / a : 0.0);
      const double delta = z - theta[j];
      if (delta != 0.0) {
        resid -= delta * x.col(j);
        theta[j] = z;
        moved = std::max(moved, std::abs(delta));
      }
    }
    if (moved <= tol) break;
  }
  return theta;
}

inline double lasso_objective(const scm::Matrix& x, const scm::Vector& y, double sigma, double lambda,
                              const scm::Vector& theta) {
  const double n = static_cast<double>(x.rows());
  return (y - x * theta).squaredNorm() / (2.0 * n * sigma * sigma) + lambda * theta.lpNorm<1>();
}

}  // namespace oracle
