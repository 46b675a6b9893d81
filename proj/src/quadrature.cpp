#include "scm/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "scm/errors.hpp"

namespace scm {

namespace {

// Physicists' Hermite rule (weight exp(-x^2)). Nodes start from the
// Golub-Welsch eigenvalues and are polished by Newton on the orthonormal
// recurrence, which also gives the weights to full relative accuracy in the
// tails.
QuadratureRule hermite_physicists(std::size_t n) {
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(ni, ni);
  for (Eigen::Index k = 1; k < ni; ++k) j(k - 1, k) = j(k, k - 1) = std::sqrt(0.5 * static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j, Eigen::EigenvaluesOnly);

  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = es.eigenvalues()[static_cast<Eigen::Index>(i)];
    double pp = 0.0;
    for (int it = 0; it < 6; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double p3 = p2;
        p2 = p1;
        const double kk = static_cast<double>(k);
        p1 = z * std::sqrt(2.0 / (kk + 1.0)) * p2 - std::sqrt(kk / (kk + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * nn) * p2;
      const double step = p1 / pp;
      z -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    r.nodes[i] = z;
    r.weights[i] = 2.0 / (pp * pp);
  }
  return r;
}

}  // namespace

const QuadratureRule& gauss_hermite_normal(std::size_t n, double truncation) {
  if (n < 1) throw InvalidArgument("gauss_hermite_normal: need at least one node");
  static std::mutex mu;
  static std::map<std::pair<std::size_t, double>, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(n, truncation);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const QuadratureRule phys = hermite_physicists(n);
  const double inv_sqrt_pi = 0.5641895835477563;
  QuadratureRule out;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = std::sqrt(2.0) * phys.nodes[i];
    if (std::abs(u) > truncation) continue;
    out.nodes.push_back(u);
    out.weights.push_back(phys.weights[i] * inv_sqrt_pi);
  }
  return cache.emplace(key, std::move(out)).first->second;
}

QuadratureRule gauss_laguerre_gamma(std::size_t n, double alpha) {
  if (n < 1) throw InvalidArgument("gauss_laguerre_gamma: need at least one node");
  if (!(alpha > -1.0)) throw InvalidArgument("gauss_laguerre_gamma: alpha must exceed -1");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    j(k, k) = 2.0 * kk + alpha + 1.0;
    if (k + 1 < n) {
      const double off = std::sqrt((kk + 1.0) * (kk + 1.0 + alpha));
      j(k, k + 1) = off;
      j(k + 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    r.nodes[k] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    r.weights[k] = v0 * v0;
    total += r.weights[k];
  }
  for (double& w : r.weights) w /= total;
  return r;
}

}  // namespace scm
