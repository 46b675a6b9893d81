#include "scm/sparse.hpp"

#include <algorithm>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <cmath>
#include <numeric>

#include "scm/errors.hpp"
#include "scm/rng.hpp"

namespace scm {

Vector soft_threshold(const Vector& v, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("soft_threshold: threshold must be >= 0");
  return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

std::vector<std::size_t> support_of(const Vector& theta, double threshold) {
  std::vector<std::size_t> s;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (std::abs(theta[j]) > threshold) s.push_back(static_cast<std::size_t>(j));
  }
  return s;
}

double l1_objective(const LossModel& loss, const Dataset& data, const Vector& theta, double lambda) {
  return empirical_risk(loss, data, theta, EvalLevel::Value).value + lambda * theta.lpNorm<1>();
}

namespace {

double kkt_violation(const Vector& grad, const Vector& theta, double lambda, double* on, double* off) {
  double a = 0.0, b = -INFINITY;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (std::abs(theta[j]) > 1e-10) {
      a = std::max(a, std::abs(grad[j] + lambda * (theta[j] > 0 ? 1.0 : -1.0)));
    } else {
      b = std::max(b, std::abs(grad[j]) - lambda);
    }
  }
  if (b == -INFINITY) b = 0.0;
  if (on) *on = a;
  if (off) *off = b;
  return std::max(a, b);
}

std::vector<Eigen::Index> sketch_rows(Eigen::Index n, std::size_t m, std::uint64_t seed, int outer) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  CounterRng rng(seed, static_cast<std::uint64_t>(outer), m, StreamTag::Sketch);
  for (std::size_t i = 0; i < m; ++i) {
    boost::random::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

KktReport kkt_certificate(const LossModel& loss, const Dataset& data, const Vector& theta, double lambda, double tol) {
  const RiskEval ev = empirical_risk(loss, data, theta, EvalLevel::Gradient);
  KktReport r;
  kkt_violation(ev.gradient, theta, lambda, &r.support_violation, &r.off_support_excess);
  r.holds = r.support_violation <= tol && r.off_support_excess <= tol;
  return r;
}

SparseFit fit_l1(const LossModel& loss, const Dataset& data, double lambda, const SparseOpts& opts) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("fit_l1: lambda must be positive");
  const Eigen::Index n = data.n(), d = data.d();
  if (opts.sketch_size && (*opts.sketch_size < 1 || *opts.sketch_size > static_cast<std::size_t>(n))) {
    throw InvalidArgument("fit_l1: sketch size must lie in [1, n]");
  }
  Vector theta = opts.start ? *opts.start : Vector::Zero(d);
  if (theta.size() != d) throw InvalidArgument("fit_l1: start has wrong dimension");
  const Matrix& x = data.design();
  const Vector& y = data.responses();

  SparseFit fit;
  fit.lambda = lambda;
  fit.sketch_size = opts.sketch_size;
  double obj = l1_objective(loss, data, theta, lambda);
  fit.objective_trace.push_back(obj);

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const RiskEval ev = empirical_risk(loss, data, theta, EvalLevel::Gradient);
    const Vector& g = ev.gradient;

    // rows of the quadratic model and their curvature weights
    std::vector<Eigen::Index> rows;
    const bool sketched = opts.sketch_size && *opts.sketch_size < static_cast<std::size_t>(n);
    if (sketched) rows = sketch_rows(n, *opts.sketch_size, opts.seed, outer);
    const Matrix xs = sketched ? Matrix(x(rows, Eigen::all)) : x;
    const Vector ys = sketched ? Vector(y(rows)) : y;
    const Eigen::Index m = xs.rows();
    const Vector eta_s = xs * theta;
    Vector w(m);
    for (Eigen::Index i = 0; i < m; ++i) w[i] = std::max(0.0, loss.eval_unchecked(ys[i], eta_s[i]).d2);
    const double inv_m = 1.0 / static_cast<double>(m);
    Vector hdiag = (xs.array().square().colwise() * w.array()).colwise().sum().transpose() * inv_m;
    double jitter = 0.0;
    if (hdiag.minCoeff() <= 0.0) {
      jitter = 1e-10 * hdiag.sum() / static_cast<double>(d);
      fit.jittered = true;
      if (!(jitter > 0.0)) break;
      hdiag.array() += jitter;
    }

    // coordinate descent on z
    const Matrix wx = xs.array().colwise() * w.array();
    Vector z = theta;
    Vector wr = Vector::Zero(m);  // W X_s (z - theta)
    std::vector<Eigen::Index> active;
    bool full = true;
    for (int sweep = 0; sweep < opts.max_inner_sweeps; ++sweep) {
      ++fit.inner_iterations;
      double max_change = 0.0;
      auto update = [&](Eigen::Index j) {
        const double delta_j = z[j] - theta[j];
        const double grad_j = g[j] + xs.col(j).dot(wr) * inv_m + jitter * delta_j;
        const double hj = hdiag[j];
        const double v = z[j] * hj - grad_j;
        const double nz = v > lambda ? (v - lambda) / hj : (v < -lambda ? (v + lambda) / hj : 0.0);
        const double diff = nz - z[j];
        if (diff != 0.0) {
          wr += diff * wx.col(j);
          z[j] = nz;
          max_change = std::max(max_change, hj * diff * diff);
        }
      };
      if (full) {
        for (Eigen::Index j = 0; j < d; ++j) update(j);
        active.clear();
        for (Eigen::Index j = 0; j < d; ++j) {
          if (z[j] != 0.0) active.push_back(j);
        }
        if (max_change <= opts.inner_tol) break;
        full = false;
      } else {
        for (Eigen::Index j : active) update(j);
        if (max_change <= opts.inner_tol) full = true;
      }
    }

    const Vector delta = z - theta;
    const double dec2 = (xs * delta).cwiseAbs2().dot(w) * inv_m + jitter * delta.squaredNorm();
    const double kkt = kkt_violation(g, theta, lambda, nullptr, nullptr);
    if (dec2 <= opts.outer_tol && kkt <= 1e-7) {
      fit.converged = true;
      break;
    }

    const double descent = g.dot(delta) + lambda * (z.lpNorm<1>() - theta.lpNorm<1>());
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      const Vector cand = theta + t * delta;
      double cobj;
      try {
        cobj = l1_objective(loss, data, cand, lambda);
      } catch (const DomainError&) {
        continue;
      }
      if (cobj <= obj + opts.armijo_c1 * t * std::min(descent, 0.0)) {
        if (cobj <= obj) {
          theta = cand;
          obj = cobj;
          accepted = true;
        }
        break;
      }
    }
    fit.outer_iterations = outer + 1;
    if (!accepted) {
      // no descent: accept only if already stationary
      fit.converged = kkt_certificate(loss, data, theta, lambda).holds;
      break;
    }
    fit.objective_trace.push_back(obj);
  }

  fit.theta_hat = theta;
  fit.objective = obj;
  fit.support = support_of(theta);
  if (fit.converged) fit.converged = kkt_certificate(loss, data, theta, lambda).holds;
  return fit;
}

std::vector<SparseFit> fit_l1_path(const LossModel& loss, const Dataset& data, const std::vector<double>& lambdas,
                                   const SparseOpts& opts) {
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    if (!(lambdas[k] < lambdas[k - 1])) throw InvalidArgument("fit_l1_path: lambdas must be strictly decreasing");
  }
  std::vector<SparseFit> out;
  SparseOpts o = opts;
  for (double lam : lambdas) {
    out.push_back(fit_l1(loss, data, lam, o));
    o.start = out.back().theta_hat;
  }
  return out;
}

ConeReport cone_quotients(const Matrix& a, const Matrix& b, std::size_t s, std::size_t trials, std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(a.rows());
  if (a.cols() != a.rows() || b.rows() != a.rows() || b.cols() != a.cols()) {
    throw InvalidArgument("cone_quotients: matrices must be square and of equal size");
  }
  if (s < 1 || s > d) throw InvalidArgument("cone_quotients: need 1 <= s <= d");
  if (trials < 1) throw InvalidArgument("cone_quotients: need at least one trial");
  CounterRng rng(seed, s, trials, StreamTag::Support);
  boost::random::normal_distribution<double> normal;
  boost::random::exponential_distribution<double> expo;
  ConeReport rep;
  rep.s = s;
  rep.re_lower = INFINITY;
  rep.re_upper = -INFINITY;
  std::vector<std::size_t> idx(d);
  Vector delta(static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < trials; ++t) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < s; ++i) {
      boost::random::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    delta.setZero();
    double l1s = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      const double v = normal(rng);
      delta[static_cast<Eigen::Index>(idx[i])] = v;
      l1s += std::abs(v);
    }
    double ratio = 0.0;
    if (s < d) {
      const double target = rng.uniform() * 3.0 * l1s;
      std::vector<double> mag(d - s);
      double tot = 0.0;
      for (double& v : mag) tot += (v = expo(rng));
      double l1c = 0.0;
      for (std::size_t i = s; i < d; ++i) {
        const double v = mag[i - s] / tot * target * ((rng() >> 63) ? 1.0 : -1.0);
        delta[static_cast<Eigen::Index>(idx[i])] = v;
        l1c += std::abs(v);
      }
      ratio = l1c / l1s;
    }
    rep.ratio_checks.push_back(ratio);
    const double q = delta.dot(a * delta) / delta.dot(b * delta);
    rep.quotients.push_back(q);
    rep.re_lower = std::min(rep.re_lower, q);
    rep.re_upper = std::max(rep.re_upper, q);
  }
  return rep;
}

ConeReport cone_re_check(const Matrix& m, std::size_t s, std::size_t trials, std::uint64_t seed) {
  return cone_quotients(m, Matrix::Identity(m.rows(), m.cols()), s, trials, seed);
}

SparseErrors sparse_error_metrics(const Vector& theta_hat, const Vector& theta_star, const Matrix& h) {
  if (theta_hat.size() != theta_star.size() || h.rows() != theta_hat.size() || h.cols() != theta_hat.size()) {
    throw InvalidArgument("sparse_error_metrics: dimension mismatch");
  }
  SparseErrors e;
  const Vector diff = theta_hat - theta_star;
  e.l1_error = diff.lpNorm<1>();
  e.h_sq_error = diff.dot(h * diff);
  const auto sh = support_of(theta_hat);
  e.support_recovered = true;
  for (std::size_t j : support_of(theta_star)) {
    e.support_recovered = e.support_recovered && std::binary_search(sh.begin(), sh.end(), j);
  }
  return e;
}

}  // namespace scm
