#include "scm/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "scm/errors.hpp"

namespace scm {

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_symmetric(const Matrix& m, Eigen::Index d, const std::string& what) {
  if (m.rows() != d || m.cols() != d) {
    throw InvalidArgument(what + ": expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
  }
  if (!m.allFinite()) throw InvalidArgument(what + ": non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument(what + ": matrix is not symmetric");
  }
}

Eigen::LLT<Matrix> cholesky(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) throw InvalidArgument(what + ": matrix is not square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) {
    throw NotPositiveDefinite(what + " is not positive definite", m.allFinite() ? min_eigenvalue(m) : NAN);
  }
  // LLT can succeed on matrices that are singular to working precision
  const Matrix& l = llt.matrixLLT();
  const double dmax = l.diagonal().cwiseAbs().maxCoeff();
  const double dmin = l.diagonal().cwiseAbs().minCoeff();
  if (!(dmin > 1e-150) || dmin < 1e-8 * dmax) {
    throw NotPositiveDefinite(what + " is numerically singular", min_eigenvalue(m));
  }
  return llt;
}

double inverse_norm(const Eigen::LLT<Matrix>& chol, const Vector& v) {
  const Vector z = chol.matrixL().solve(v);
  return z.norm();
}

double mahalanobis(const Vector& a, const Vector& b, const Matrix& m) {
  if (a.size() != b.size() || m.rows() != a.size()) {
    throw InvalidArgument("mahalanobis: dimension mismatch");
  }
  check_symmetric(m, a.size(), "mahalanobis");
  Eigen::LDLT<Matrix> ldlt(m);
  const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-12 * scale) {
    throw NotPositiveDefinite("mahalanobis: metric is not PSD", min_eigenvalue(m));
  }
  // ||a - b||_M = ||sqrt(D) L^T P (a - b)||
  const Vector pd = ldlt.transpositionsP() * (a - b);
  const Vector w = ldlt.matrixU() * pd;
  const Vector dw = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().cwiseProduct(w);
  return dw.norm();
}

}  // namespace scm
