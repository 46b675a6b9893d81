#pragma once

// l1-penalized empirical risk L_n(theta) + lambda ||theta||_1 by proximal
// Newton. The quadratic model uses the empirical Hessian or an m-row
// subsample of it; each model is minimized by cyclic coordinate descent.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "scm/erm.hpp"

namespace scm {

/// sign(v_j) max(|v_j| - t, 0).
Vector soft_threshold(const Vector& v, double t);

struct SparseOpts {
  /// stop once delta^T H delta <= outer_tol and the KKT certificate holds
  double outer_tol = 1e-10;
  double inner_tol = 1e-12;
  int max_outer = 100;
  int max_inner_sweeps = 100000;
  int max_halvings = 60;
  double armijo_c1 = 1e-4;
  std::optional<std::size_t> sketch_size;
  std::uint64_t seed = 0;
  std::optional<Vector> start;
};

struct SparseFit {
  Vector theta_hat;
  double lambda = 0.0;
  std::vector<std::size_t> support;  // |theta_j| > 1e-10
  int inner_iterations = 0;          // coordinate-descent sweeps
  int outer_iterations = 0;
  bool converged = false;
  std::optional<std::size_t> sketch_size;
  /// a quadratic model had a nonpositive diagonal and was regularized
  bool jittered = false;
  double objective = 0.0;
  std::vector<double> objective_trace;
};

SparseFit fit_l1(const LossModel& loss, const Dataset& data, double lambda, const SparseOpts& opts = {});

/// Fits along a decreasing lambda grid, warm-starting each fit at the previous one.
std::vector<SparseFit> fit_l1_path(const LossModel& loss, const Dataset& data, const std::vector<double>& lambdas,
                                   const SparseOpts& opts = {});

struct KktReport {
  double support_violation = 0.0;  // max over support of |grad_j + lambda sign(theta_j)|
  double off_support_excess = 0.0; // max over the rest of |grad_j| - lambda
  bool holds = false;
};

KktReport kkt_certificate(const LossModel& loss, const Dataset& data, const Vector& theta, double lambda,
                          double tol = 1e-6);

/// L_n(theta) + lambda ||theta||_1.
double l1_objective(const LossModel& loss, const Dataset& data, const Vector& theta, double lambda);

struct ConeReport {
  std::size_t s = 0;
  std::vector<double> ratio_checks;  // ||D_Sc||_1 / ||D_S||_1, at most 3
  std::vector<double> quotients;     // per sample quadratic-form quotient
  double re_lower = 0.0;
  double re_upper = 0.0;
};

/// Random cone vectors D (|S| = s, D_S standard normal, ||D_Sc||_1 = 3u ||D_S||_1)
/// and the range of D^T a D / D^T b D over them.
ConeReport cone_quotients(const Matrix& a, const Matrix& b, std::size_t s, std::size_t trials, std::uint64_t seed);

/// Restricted eigenvalue range of M over the cone (b = I).
ConeReport cone_re_check(const Matrix& m, std::size_t s, std::size_t trials, std::uint64_t seed);

struct SparseErrors {
  double l1_error = 0.0;
  double h_sq_error = 0.0;
  bool support_recovered = false;
};

SparseErrors sparse_error_metrics(const Vector& theta_hat, const Vector& theta_star, const Matrix& h);
inline SparseErrors sparse_error_metrics(const SparseFit& fit, const Vector& theta_star, const Matrix& h) {
  return sparse_error_metrics(fit.theta_hat, theta_star, h);
}

std::vector<std::size_t> support_of(const Vector& theta, double threshold = 1e-10);

}  // namespace scm
