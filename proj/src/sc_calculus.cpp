#include "scm/sc_calculus.hpp"

#include <cmath>
#include <limits>

#include "scm/errors.hpp"

namespace scm {

namespace {

constexpr double kSeriesSwitch = 1e-4;

void check_s(double S) {
  if (!(S >= 0.0) || !std::isfinite(S)) throw InvalidArgument("S must be finite and nonnegative");
}

}  // namespace

BracketBound bracket_pseudo(double S) {
  check_s(S);
  BracketBound b;
  b.S = S;
  b.bracket_case = BracketCase::Pseudo;
  if (S < kSeriesSwitch) {
    // (e^{+-S} -+ S - 1)/S^2 = 1/2 +- S/6 + S^2/24 +- S^3/120 + ...
    const double s2 = S * S;
    b.upper_coeff = 0.5 + S / 6.0 + s2 / 24.0 + s2 * S / 120.0;
    b.lower_coeff = 0.5 - S / 6.0 + s2 / 24.0 - s2 * S / 120.0;
  } else {
    const double s2 = S * S;
    b.upper_coeff = (std::expm1(S) - S) / s2;
    b.lower_coeff = (std::expm1(-S) + S) / s2;
  }
  return b;
}

BracketBound bracket_aux(double S) {
  check_s(S);
  BracketBound b;
  b.S = S;
  b.bracket_case = BracketCase::Aux;
  b.lower_coeff = 1.0 / (2.0 + S);
  b.upper_coeff = S < 2.0 ? 1.0 / (2.0 - S) : std::numeric_limits<double>::infinity();
  return b;
}

BracketBound bracket_canonical(double S) {
  check_s(S);
  if (S == 0.0) throw InvalidArgument("bracket_canonical: S must be positive");
  BracketBound b;
  b.S = S;
  b.bracket_case = BracketCase::Canonical;
  b.lower_coeff = 1.0 / (3.0 * S * S);
  b.upper_coeff = 1.0 / (S * S);
  return b;
}

Envelope hessian_envelope_canonical(double g0, double c, double t) {
  if (!(g0 >= 0.0) || !(c >= 0.0)) throw InvalidArgument("envelope: g0 and c must be nonnegative");
  const double x = c * std::abs(t) * std::sqrt(g0);
  Envelope e;
  e.lower = g0 / ((1.0 + x) * (1.0 + x));
  if (x < 1.0) {
    e.upper = g0 / ((1.0 - x) * (1.0 - x));
  } else {
    e.upper = std::numeric_limits<double>::infinity();
    e.upper_valid = false;
  }
  return e;
}

Envelope hessian_envelope_pseudo(double g0, double c, double t) {
  if (!(g0 >= 0.0) || !(c >= 0.0)) throw InvalidArgument("envelope: g0 and c must be nonnegative");
  const double x = c * std::abs(t) * std::sqrt(g0);
  return {g0 * std::exp(-x), g0 * std::exp(x), true};
}

LocalizationCertificate localization_certificate(double score_norm, double design_radius,
                                                 BracketCase bracket_case) {
  if (!(score_norm >= 0.0) || !(design_radius >= 0.0) || !std::isfinite(score_norm) ||
      !std::isfinite(design_radius)) {
    throw InvalidArgument("localization_certificate: inputs must be finite and nonnegative");
  }
  LocalizationCertificate cert;
  cert.score_norm = score_norm;
  cert.design_radius = design_radius;
  cert.bracket_case = bracket_case;
  cert.threshold_c = bracket_case == BracketCase::Canonical ? 0.25 : 0.5;
  cert.holds = design_radius * score_norm <= cert.threshold_c;
  cert.radius_bound = 4.0 * score_norm;
  return cert;
}

}  // namespace scm
