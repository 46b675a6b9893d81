#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <string>

namespace scm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

/// Cholesky factorization; throws NotPositiveDefinite (with the smallest
/// eigenvalue) when the matrix is not numerically PD.
Eigen::LLT<Matrix> cholesky(const Matrix& m, const std::string& what);

/// ||v||_{M^{-1}} = sqrt(v^T M^{-1} v) from a Cholesky factor of M.
double inverse_norm(const Eigen::LLT<Matrix>& chol, const Vector& v);

/// ||a - b||_M for symmetric PSD M. Non-PSD M is rejected.
double mahalanobis(const Vector& a, const Vector& b, const Matrix& m);

/// Throws InvalidArgument unless m is square of size d and symmetric to 1e-12 relative.
void check_symmetric(const Matrix& m, Eigen::Index d, const std::string& what);

}  // namespace scm
