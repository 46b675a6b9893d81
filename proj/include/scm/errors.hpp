#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace scm {

/// Argument outside the documented precondition (bad tau, bad dims, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation outside the loss domain: eta <= 0 for positive-domain losses,
/// or a response outside the loss's response space.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
      : std::domain_error(what), row_(row) {}

  /// Offending data row, when the error came from a dataset evaluation.
  std::optional<std::size_t> row() const { return row_; }

 private:
  std::optional<std::size_t> row_;
};

/// Matrix expected to be positive (semi)definite was not.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, double min_eigenvalue)
      : std::runtime_error(what + " (smallest eigenvalue " + std::to_string(min_eigenvalue) + ")"),
        min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// Newton system could not be solved.
class SingularHessian : public std::runtime_error {
 public:
  SingularHessian(const std::string& what, double condition_estimate)
      : std::runtime_error(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
        condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Requested computation route is not available for the given model.
class UnsupportedMethod : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace scm
