#pragma once

#include <cstddef>
#include <vector>

namespace scm {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Hermite rule for E[f(U)], U ~ N(0, 1) (weights sum to 1).
/// Nodes with |u| > truncation are dropped; their weights are below 1e-30
/// for the default truncation of 12. Rules are cached per (n, truncation).
const QuadratureRule& gauss_hermite_normal(std::size_t n = 200, double truncation = 12.0);

/// Generalized Gauss-Laguerre rule for E[f(W)], W ~ Gamma(alpha + 1, 1)
/// (weights sum to 1). Golub-Welsch on the Jacobi matrix.
QuadratureRule gauss_laguerre_gamma(std::size_t n, double alpha);

}  // namespace scm
