#include "scm/erm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "scm/errors.hpp"

namespace scm {

Dataset::Dataset(Matrix design, Vector responses)
    : design_(std::move(design)), responses_(std::move(responses)) {
  if (design_.rows() != responses_.size()) {
    throw InvalidArgument("Dataset: design has " + std::to_string(design_.rows()) + " rows but " +
                          std::to_string(responses_.size()) + " responses");
  }
  if (design_.rows() < 1 || design_.cols() < 1) throw InvalidArgument("Dataset: empty design");
  if (!design_.allFinite() || !responses_.allFinite()) {
    throw InvalidArgument("Dataset: non-finite entries");
  }
}

RiskEval empirical_risk(const LossModel& loss, const Dataset& data, const Vector& theta, EvalLevel level) {
  if (theta.size() != data.d()) {
    throw InvalidArgument("empirical_risk: theta has dimension " + std::to_string(theta.size()) +
                          ", design has " + std::to_string(data.d()));
  }
  const Eigen::Index n = data.n();
  const Vector eta = data.design() * theta;
  const Vector& y = data.responses();
  const bool positive = loss.eta_domain() == EtaDomain::PositiveReals;

  double total = 0.0;
  Vector w1(level >= EvalLevel::Gradient ? n : 0);
  Vector w2(level >= EvalLevel::Hessian ? n : 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!loss.response_valid(y[i])) {
      throw DomainError(loss.name() + ": response at row " + std::to_string(i) + " outside the response space",
                        static_cast<std::size_t>(i));
    }
    if (positive && !(eta[i] > 0.0)) {
      throw DomainError(loss.name() + ": X_i^T theta <= 0 at row " + std::to_string(i),
                        static_cast<std::size_t>(i));
    }
    const LossDerivs l = loss.eval_unchecked(y[i], eta[i]);
    total += l.value;
    if (level >= EvalLevel::Gradient) w1[i] = l.d1;
    if (level >= EvalLevel::Hessian) w2[i] = l.d2;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  RiskEval out;
  out.value = total * inv_n;
  if (level >= EvalLevel::Gradient) out.gradient = data.design().transpose() * w1 * inv_n;
  if (level >= EvalLevel::Hessian) {
    const Matrix scaled = data.design().array().colwise() * w2.array().cwiseMax(0.0).sqrt();
    Matrix h = scaled.transpose() * scaled * inv_n;
    out.hessian = 0.5 * (h + h.transpose());
  }
  return out;
}

Vector feasible_start(const Dataset& data) {
  const Vector row_sums = data.design().rowwise().sum();
  const double m = row_sums.minCoeff();
  if (!(m > 0.0)) {
    throw DomainError("feasible_start: design has a row with nonpositive sum; supply a start point",
                      static_cast<std::size_t>(std::min_element(row_sums.data(), row_sums.data() + row_sums.size()) -
                                               row_sums.data()));
  }
  return Vector::Constant(data.d(), 1.0 / m);
}

namespace {

double condition_estimate(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 0.0 ? hi / lo : INFINITY;
}

bool feasible(const LossModel& loss, const Dataset& data, const Vector& theta) {
  if (loss.eta_domain() != EtaDomain::PositiveReals) return true;
  return (data.design() * theta).minCoeff() > 0.0;
}

}  // namespace

FitResult fit_erm(const LossModel& loss, const Dataset& data, const SolverOpts& opts) {
  Vector theta;
  if (opts.start) {
    theta = *opts.start;
  } else if (loss.eta_domain() == EtaDomain::PositiveReals) {
    theta = feasible_start(data);
  } else {
    theta = Vector::Zero(data.d());
  }
  if (theta.size() != data.d()) throw InvalidArgument("fit_erm: start point has wrong dimension");

  const bool damped = loss.sc_class().kind == ScKind::Canonical;
  FitResult res;

  for (int iter = 0;; ++iter) {
    const RiskEval ev = empirical_risk(loss, data, theta, EvalLevel::Hessian);
    Eigen::LLT<Matrix> llt(ev.hessian);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const auto diag = llt.matrixLLT().diagonal().cwiseAbs();
      ok = diag.minCoeff() > 1e-8 * diag.maxCoeff() && diag.minCoeff() > 1e-150;
    }
    if (!ok) throw SingularHessian("fit_erm: empirical Hessian is singular", condition_estimate(ev.hessian));

    const Vector newton = llt.solve(ev.gradient);
    const double dec2 = std::max(0.0, ev.gradient.dot(newton));
    const double dec = std::sqrt(dec2);
    const double tnorm = theta.norm();
    res.trace.push_back({iter, ev.value, dec, 0.0, tnorm});
    res.final_decrement = dec;

    if (dec2 <= opts.tolerance && newton.norm() <= 1e-4 * std::max(1.0, tnorm)) {
      res.converged = true;
      break;
    }
    if (iter >= opts.max_iterations) break;

    double t = damped ? 1.0 / (1.0 + dec) : 1.0;
    bool accepted = false;
    bool any_feasible = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving, t *= opts.backtrack) {
      const Vector cand = theta - t * newton;
      if (!feasible(loss, data, cand)) continue;
      any_feasible = true;
      const double v = empirical_risk(loss, data, cand, EvalLevel::Value).value;
      if (v <= ev.value - opts.armijo_c1 * t * dec2) {
        theta = cand;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_feasible) {
        throw DomainError("fit_erm: no feasible step after " + std::to_string(opts.max_halvings) + " halvings");
      }
      break;  // no descent possible: report as not converged
    }
    res.trace.back().step = t;
    res.iterations = iter + 1;
  }

  res.theta_hat = theta;
  if (!res.converged && res.trace.size() > 10) {
    const std::size_t k = res.trace.size();
    bool growing = true;
    for (std::size_t i = k - 10; i < k; ++i) growing = growing && res.trace[i].theta_norm > res.trace[i - 1].theta_norm;
    res.diverging = growing;
  }
  return res;
}

double score_norm(const LossModel& loss, const Dataset& data, const Vector& theta_star, const Matrix& h) {
  check_symmetric(h, data.d(), "score_norm");
  const auto llt = cholesky(h, "score_norm: H");
  const RiskEval ev = empirical_risk(loss, data, theta_star, EvalLevel::Gradient);
  return inverse_norm(llt, ev.gradient);
}

MomResult mom_aggregate(const std::vector<std::pair<Vector, Matrix>>& fits) {
  if (fits.empty()) throw InvalidArgument("mom_aggregate: need at least one fit");
  const std::size_t k = fits.size();
  const Eigen::Index d = fits.front().first.size();
  std::vector<Eigen::LLT<Matrix>> factors;
  factors.reserve(k);
  for (const auto& [theta, h] : fits) {
    if (theta.size() != d) throw InvalidArgument("mom_aggregate: inconsistent dimensions");
    check_symmetric(h, d, "mom_aggregate");
    factors.push_back(cholesky(h, "mom_aggregate: H_hat"));
  }

  MomResult out;
  out.median_distance.resize(k);
  std::vector<double> dist(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      // ||x||_H = ||L^T x|| for H = L L^T
      dist[j] = (factors[j].matrixU() * (fits[i].first - fits[j].first)).norm();
    }
    std::sort(dist.begin(), dist.end());
    out.median_distance[i] = k % 2 == 1 ? dist[k / 2] : 0.5 * (dist[k / 2 - 1] + dist[k / 2]);
  }
  out.index = static_cast<std::size_t>(
      std::min_element(out.median_distance.begin(), out.median_distance.end()) - out.median_distance.begin());
  out.theta = fits[out.index].first;
  return out;
}

}  // namespace scm
