#pragma once

// Empirical risk L_n(theta) = (1/n) sum_i l(Y_i, X_i^T theta) and its
// minimization by damped Newton.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "scm/linalg.hpp"
#include "scm/loss.hpp"

namespace scm {

/// Design rows X_i with responses Y_i. Entries are finite; response validity
/// is checked against a loss at evaluation time.
class Dataset {
 public:
  Dataset(Matrix design, Vector responses);

  const Matrix& design() const { return design_; }
  const Vector& responses() const { return responses_; }
  Eigen::Index n() const { return design_.rows(); }
  Eigen::Index d() const { return design_.cols(); }

 private:
  Matrix design_;
  Vector responses_;
};

enum class EvalLevel { Value, Gradient, Hessian };

struct RiskEval {
  double value = 0.0;
  Vector gradient;  // empty below EvalLevel::Gradient
  Matrix hessian;   // empty below EvalLevel::Hessian
};

/// Throws DomainError (with the row index) for invalid responses or, on
/// positive-domain losses, a row with X_i^T theta <= 0.
RiskEval empirical_risk(const LossModel& loss, const Dataset& data, const Vector& theta,
                        EvalLevel level = EvalLevel::Hessian);

struct SolverOpts {
  std::optional<Vector> start;
  /// converged once decrement^2 <= tolerance (and the Newton step is small)
  double tolerance = 1e-12;
  int max_iterations = 200;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_halvings = 60;
};

struct IterationRecord {
  int iter = 0;
  double value = 0.0;
  double decrement = 0.0;  // Newton decrement at the iterate, before stepping
  double step = 0.0;       // accepted step size (0 on the final record)
  double theta_norm = 0.0;
};

struct FitResult {
  Vector theta_hat;
  bool converged = false;
  int iterations = 0;
  double final_decrement = 0.0;
  std::vector<IterationRecord> trace;
  /// not converged while ||theta|| kept growing on a flat objective
  /// (e.g. separable classification data)
  bool diverging = false;
};

/// Damped Newton. SCb losses start each line search at 1/(1 + decrement);
/// other losses start at 1. Both backtrack (Armijo) to guarantee descent.
/// Non-convergence is reported in the result; a singular Hessian throws
/// SingularHessian.
FitResult fit_erm(const LossModel& loss, const Dataset& data, const SolverOpts& opts = {});

/// Strictly feasible start for positive-domain losses: the constant vector
/// scaled so that min_i X_i^T theta = 1. Requires X_i^T 1 > 0 for all rows.
Vector feasible_start(const Dataset& data);

/// ||grad L_n(theta_star)||_{H^{-1}} via a triangular solve.
double score_norm(const LossModel& loss, const Dataset& data, const Vector& theta_star, const Matrix& h);

struct MomResult {
  Vector theta;
  std::size_t index = 0;
  std::vector<double> median_distance;
};

/// Picks the estimate minimizing the median over j of ||theta_i - theta_j||_{H_j}.
/// Ties go to the smallest index.
MomResult mom_aggregate(const std::vector<std::pair<Vector, Matrix>>& fits);

}  // namespace scm
