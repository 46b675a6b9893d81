#pragma once

// Closed-form brackets for the second-order remainder
//   F(theta_1) - F(theta_0) - <grad F(theta_0), theta_1 - theta_0>
// in units of ||theta_1 - theta_0||^2_{H_0}, plus Hessian envelopes along a
// line and the localization certificate that turns a small score into a
// bound on the distance to the minimizer.

namespace scm {

enum class BracketCase {
  Pseudo,     // |phi'''| <= S phi''
  Aux,        // |phi'''| <= S phi'' / (1 - t)
  Canonical,  // |phi'''| <= S phi'' / (1 - S t), evaluated at t = 1/S
};

struct BracketBound {
  double S = 0.0;
  double lower_coeff = 0.5;
  /// +infinity when S is outside the range where the upper bound holds
  double upper_coeff = 0.5;
  BracketCase bracket_case = BracketCase::Pseudo;
};

/// lower = (e^{-S} + S - 1)/S^2, upper = (e^S - S - 1)/S^2.
BracketBound bracket_pseudo(double S);
/// lower = 1/(2 + S); upper = 1/(2 - S) for S < 2.
BracketBound bracket_aux(double S);
/// (1/(3 S^2), 1/S^2), bounding the remainder at theta_{1/S}. Requires S > 0.
BracketBound bracket_canonical(double S);

struct Envelope {
  double lower = 0.0;
  double upper = 0.0;
  /// false when the upper envelope does not apply at this t
  bool upper_valid = true;
};

/// g0/(1 + c|t| sqrt(g0))^2 <= g(t) <= g0/(1 - c|t| sqrt(g0))^2 for
/// |g'| <= 2c g^{3/2}; upper needs c|t| sqrt(g0) < 1.
Envelope hessian_envelope_canonical(double g0, double c, double t);
/// g0 e^{-c|t| sqrt(g0)} <= g(t) <= g0 e^{c|t| sqrt(g0)}.
Envelope hessian_envelope_pseudo(double g0, double c, double t);

struct LocalizationCertificate {
  double score_norm = 0.0;     // ||grad F(theta_0)||_{H_0^{-1}}
  double design_radius = 0.0;  // ||W||_{H_0^{-1}}
  BracketCase bracket_case = BracketCase::Pseudo;
  double threshold_c = 0.5;
  bool holds = false;
  /// 4 * score_norm; meaningful when holds
  double radius_bound = 0.0;
};

/// holds iff design_radius * score_norm <= 1/2 (pseudo, aux) or 1/4 (canonical).
LocalizationCertificate localization_certificate(double score_norm, double design_radius,
                                                 BracketCase bracket_case);

}  // namespace scm
