#pragma once

// Univariate losses l(y, eta) with derivatives in eta up to third order.
//
// GLM losses are written in canonical form l(y, eta) = -y*eta + a(eta); robust
// regression losses are contrasts l(y, eta) = phi(y - eta). Each model carries
// its self-concordance class so that solvers and audits can consume it.

#include <string>
#include <string_view>
#include <vector>

namespace scm {

enum class EtaDomain { AllReals, PositiveReals };

enum class ResponseSpace { Reals, Binary01, SignedBinary, NonnegIntegers };

enum class ScKind {
  Pseudo,     // |l'''| <= c l''
  Canonical,  // |l'''| <= c (l'')^{3/2}
  Quadratic,  // l''' == 0
  None,
};

struct ScClass {
  ScKind kind = ScKind::None;
  double c = 0.0;
};

enum class LossKind {
  Logistic,
  Poisson,
  ExponentialResponse,
  Quadratic,
  Huber,
  PseudoHuberLogCosh,
  PseudoHuberSqrt,
  ScPseudoHuber,
  ScLogistic,
};

enum class PseudoHuberKind { LogCosh, Sqrt };

struct LossDerivs {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  /// Huber only: the point lies within 1e-8 of a kink, where l''' is undefined.
  bool kink_adjacent = false;
};

/// Immutable loss description. Cheap to copy; safe to share across threads.
class LossModel {
 public:
  LossKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  EtaDomain eta_domain() const { return eta_domain_; }
  ResponseSpace response_space() const { return response_space_; }
  ScClass sc_class() const { return sc_class_; }
  /// Scale parameter: tau for robust losses, sigma for the quadratic loss, 0 otherwise.
  double scale() const { return scale_; }

  /// True for losses of the form phi(y - eta).
  bool is_contrast() const;

  /// Throws DomainError for responses outside the response space, or for
  /// eta <= 0 on positive-domain losses.
  LossDerivs eval(double y, double eta) const;
  double value(double y, double eta) const { return eval(y, eta).value; }

  /// eval() without the response/domain checks; callers guarantee validity.
  LossDerivs eval_unchecked(double y, double eta) const;

  void check_response(double y) const;
  bool response_valid(double y) const;

 private:
  friend LossModel make_logistic();
  friend LossModel make_poisson();
  friend LossModel make_exponential_response();
  friend LossModel make_quadratic(double);
  friend LossModel make_huber(double);
  friend LossModel make_pseudo_huber(PseudoHuberKind, double);
  friend LossModel make_sc_pseudo_huber(double);
  friend LossModel make_sc_logistic();

  LossKind kind_ = LossKind::Quadratic;
  std::string name_;
  EtaDomain eta_domain_ = EtaDomain::AllReals;
  ResponseSpace response_space_ = ResponseSpace::Reals;
  ScClass sc_class_;
  double scale_ = 0.0;
};

/// Logistic regression, y in {0,1}: log(1 + e^eta) - y*eta.
LossModel make_logistic();
/// Poisson regression with the -log(y!) term dropped: e^eta - y*eta.
LossModel make_poisson();
/// Exponential-response GLM in canonical form: -y*eta - log(eta), eta > 0.
LossModel make_exponential_response();
/// (y - eta)^2 / (2 sigma^2).
LossModel make_quadratic(double sigma);
LossModel make_huber(double tau);
LossModel make_pseudo_huber(PseudoHuberKind kind, double tau);
/// Conjugate of the normalized log-barrier of [-1, 1], rescaled to slope tau.
LossModel make_sc_pseudo_huber(double tau);
/// Classification loss built from the conjugate of the log-barrier of [-1, 0];
/// labels in {-1, +1}.
LossModel make_sc_logistic();

/// Parses names such as "logistic", "sc_pseudo_huber" with an optional scale.
LossModel make_loss(std::string_view name, double scale = 1.0);

/// All registered losses at unit scale.
std::vector<LossModel> registered_losses();

/// Maps {0,1} labels to {-1,+1} and back.
inline double to_signed_label(double y01) { return 2.0 * y01 - 1.0; }
inline double to_binary_label(double ypm) { return 0.5 * (ypm + 1.0); }

std::string to_string(ScKind kind);

namespace contrast {

// Contrast functions phi(t) and their derivatives in t.

LossDerivs huber(double t, double tau);
LossDerivs pseudo_huber_logcosh(double t, double tau);
LossDerivs pseudo_huber_sqrt(double t, double tau);
/// Fenchel conjugate of -log(1 - u^2)/2, unit scale.
LossDerivs sc_robust(double t);
/// tau^2 * sc_robust(t / tau).
LossDerivs sc_pseudo_huber(double t, double tau);
/// Fenchel conjugate of -log(-u(1 + u))/2 on (-1, 0).
LossDerivs sc_logistic_conjugate(double t);

}  // namespace contrast

namespace barrier {

/// -log(1 - u^2)/2 on (-1, 1).
LossDerivs symmetric(double u);
/// -log(-u(1 + u))/2 on (-1, 0).
LossDerivs negative_unit(double u);

}  // namespace barrier

}  // namespace scm
