#include "scm/loss.hpp"

#include <cmath>
#include <numbers>

#include "scm/errors.hpp"

namespace scm {

namespace {

constexpr double kLn2 = std::numbers::ln2;

double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

LossDerivs from_contrast(const LossDerivs& phi) {
  // l(y, eta) = phi(y - eta): odd derivatives flip sign.
  return {phi.value, -phi.d1, phi.d2, -phi.d3, phi.kink_adjacent};
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(what) + " must be a positive finite number");
  }
}

}  // namespace

namespace contrast {

LossDerivs huber(double t, double tau) {
  LossDerivs out;
  const double at = std::abs(t);
  if (at <= tau) {
    out.value = 0.5 * t * t;
    out.d1 = t;
    out.d2 = 1.0;
  } else {
    out.value = tau * at - 0.5 * tau * tau;
    out.d1 = std::copysign(tau, t);
    out.d2 = 0.0;
  }
  out.d3 = 0.0;
  out.kink_adjacent = std::abs(at - tau) < 1e-8;
  return out;
}

LossDerivs pseudo_huber_logcosh(double t, double tau) {
  const double x = t / tau;
  const double ax = std::abs(x);
  const double e = std::exp(-2.0 * ax);
  const double th = std::tanh(x);
  // sech^2 written via e^{-2|x|} to keep relative accuracy in the tails
  const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
  LossDerivs out;
  out.value = tau * tau * (ax + std::log1p(e) - kLn2);
  out.d1 = tau * th;
  out.d2 = sech2;
  out.d3 = -2.0 * th * sech2 / tau;
  return out;
}

LossDerivs pseudo_huber_sqrt(double t, double tau) {
  const double x = t / tau;
  const double r = std::hypot(1.0, x);
  LossDerivs out;
  out.value = tau * tau * x * x / (r + 1.0);
  out.d1 = tau * x / r;
  out.d2 = 1.0 / (r * r * r);
  out.d3 = -3.0 * x / (tau * r * r * r * r * r);
  return out;
}

LossDerivs sc_robust(double t) {
  const double s = std::hypot(1.0, 2.0 * t);
  // s - 1 without cancellation near t = 0
  const double s_minus_1 = std::abs(t) < 1.0 ? 4.0 * t * t / (s + 1.0) : s - 1.0;
  LossDerivs out;
  out.value = 0.5 * (s_minus_1 - std::log1p(0.5 * s_minus_1));
  out.d1 = 2.0 * t / (1.0 + s);
  out.d2 = 2.0 / (s * (1.0 + s));
  out.d3 = -8.0 * t * (1.0 + 2.0 * s) / (s * s * s * (1.0 + s) * (1.0 + s));
  return out;
}

LossDerivs sc_pseudo_huber(double t, double tau) {
  const LossDerivs base = sc_robust(t / tau);
  return {tau * tau * base.value, tau * base.d1, base.d2, base.d3 / tau, false};
}

LossDerivs sc_logistic_conjugate(double t) {
  const double r = std::hypot(1.0, t);
  const double r_minus_t = t > 0.0 ? 1.0 / (r + t) : r - t;
  LossDerivs out;
  // (r - 1)/(2 t^2) == 1/(2 (r + 1)), finite at t = 0
  out.value = 0.5 * (r_minus_t - 1.0 - std::log(2.0 * (r + 1.0)));
  out.d1 = -(1.0 + r_minus_t) / (2.0 * (1.0 + r));
  out.d2 = 1.0 / (2.0 * r * (1.0 + r));
  out.d3 = -t * (1.0 + 2.0 * r) / (2.0 * r * r * r * (1.0 + r) * (1.0 + r));
  return out;
}

}  // namespace contrast

namespace barrier {

LossDerivs symmetric(double u) {
  const double q = 1.0 - u * u;
  LossDerivs out;
  out.value = -0.5 * std::log1p(-u * u);
  out.d1 = u / q;
  out.d2 = (1.0 + u * u) / (q * q);
  out.d3 = 2.0 * u * (u * u + 3.0) / (q * q * q);
  return out;
}

LossDerivs negative_unit(double u) {
  const double v = 1.0 + u;
  LossDerivs out;
  out.value = -0.5 * (std::log(-u) + std::log(v));
  out.d1 = -0.5 * (1.0 / u + 1.0 / v);
  out.d2 = 0.5 * (1.0 / (u * u) + 1.0 / (v * v));
  out.d3 = -(1.0 / (u * u * u) + 1.0 / (v * v * v));
  return out;
}

}  // namespace barrier

bool LossModel::is_contrast() const {
  switch (kind_) {
    case LossKind::Quadratic:
    case LossKind::Huber:
    case LossKind::PseudoHuberLogCosh:
    case LossKind::PseudoHuberSqrt:
    case LossKind::ScPseudoHuber:
      return true;
    default:
      return false;
  }
}

bool LossModel::response_valid(double y) const {
  if (!std::isfinite(y)) return false;
  switch (response_space_) {
    case ResponseSpace::Reals:
      return true;
    case ResponseSpace::Binary01:
      return y == 0.0 || y == 1.0;
    case ResponseSpace::SignedBinary:
      return y == -1.0 || y == 1.0;
    case ResponseSpace::NonnegIntegers:
      return y >= 0.0 && std::floor(y) == y;
  }
  return false;
}

void LossModel::check_response(double y) const {
  if (!response_valid(y)) {
    throw DomainError(name_ + ": response " + std::to_string(y) + " outside the response space");
  }
}

LossDerivs LossModel::eval(double y, double eta) const {
  check_response(y);
  if (eta_domain_ == EtaDomain::PositiveReals && !(eta > 0.0)) {
    throw DomainError(name_ + ": linear predictor must be positive, got " + std::to_string(eta));
  }
  return eval_unchecked(y, eta);
}

LossDerivs LossModel::eval_unchecked(double y, double eta) const {
  switch (kind_) {
    case LossKind::Logistic: {
      const double s = sigmoid(eta);
      const double sm = sigmoid(-eta);
      const double a2 = s * sm;
      return {(1.0 - y) * softplus(eta) + y * softplus(-eta), (1.0 - y) * s - y * sm, a2, a2 * (sm - s), false};
    }
    case LossKind::Poisson: {
      const double e = std::exp(eta);
      return {e - y * eta, e - y, e, e, false};
    }
    case LossKind::ExponentialResponse: {
      const double inv = 1.0 / eta;
      return {-y * eta - std::log(eta), -y - inv, inv * inv, -2.0 * inv * inv * inv, false};
    }
    case LossKind::Quadratic: {
      const double s2 = scale_ * scale_;
      const double r = y - eta;
      return {0.5 * r * r / s2, -r / s2, 1.0 / s2, 0.0, false};
    }
    case LossKind::Huber:
      return from_contrast(contrast::huber(y - eta, scale_));
    case LossKind::PseudoHuberLogCosh:
      return from_contrast(contrast::pseudo_huber_logcosh(y - eta, scale_));
    case LossKind::PseudoHuberSqrt:
      return from_contrast(contrast::pseudo_huber_sqrt(y - eta, scale_));
    case LossKind::ScPseudoHuber:
      return from_contrast(contrast::sc_pseudo_huber(y - eta, scale_));
    case LossKind::ScLogistic: {
      const LossDerivs c = contrast::sc_logistic_conjugate(y * eta);
      return {2.0 + c.value / kLn2, y * c.d1 / kLn2, c.d2 / kLn2, y * c.d3 / kLn2, false};
    }
  }
  return {};
}

LossModel make_logistic() {
  LossModel m;
  m.kind_ = LossKind::Logistic;
  m.name_ = "logistic";
  m.response_space_ = ResponseSpace::Binary01;
  m.sc_class_ = {ScKind::Pseudo, 1.0};
  return m;
}

LossModel make_poisson() {
  LossModel m;
  m.kind_ = LossKind::Poisson;
  m.name_ = "poisson";
  m.response_space_ = ResponseSpace::NonnegIntegers;
  m.sc_class_ = {ScKind::Pseudo, 1.0};
  return m;
}

LossModel make_exponential_response() {
  LossModel m;
  m.kind_ = LossKind::ExponentialResponse;
  m.name_ = "exponential_response";
  m.eta_domain_ = EtaDomain::PositiveReals;
  m.response_space_ = ResponseSpace::Reals;
  m.sc_class_ = {ScKind::Canonical, 2.0};
  return m;
}

LossModel make_quadratic(double sigma) {
  require_positive(sigma, "sigma");
  LossModel m;
  m.kind_ = LossKind::Quadratic;
  m.name_ = "quadratic";
  m.sc_class_ = {ScKind::Quadratic, 0.0};
  m.scale_ = sigma;
  return m;
}

LossModel make_huber(double tau) {
  require_positive(tau, "tau");
  LossModel m;
  m.kind_ = LossKind::Huber;
  m.name_ = "huber";
  m.sc_class_ = {ScKind::None, 0.0};
  m.scale_ = tau;
  return m;
}

LossModel make_pseudo_huber(PseudoHuberKind kind, double tau) {
  require_positive(tau, "tau");
  LossModel m;
  if (kind == PseudoHuberKind::LogCosh) {
    m.kind_ = LossKind::PseudoHuberLogCosh;
    m.name_ = "pseudo_huber_logcosh";
    m.sc_class_ = {ScKind::Pseudo, 2.0 / tau};
  } else {
    m.kind_ = LossKind::PseudoHuberSqrt;
    m.name_ = "pseudo_huber_sqrt";
    m.sc_class_ = {ScKind::Pseudo, 3.0 / tau};
  }
  m.scale_ = tau;
  return m;
}

LossModel make_sc_pseudo_huber(double tau) {
  require_positive(tau, "tau");
  LossModel m;
  m.kind_ = LossKind::ScPseudoHuber;
  m.name_ = "sc_pseudo_huber";
  // sup of |phi'''| / phi''^{3/2} for the unit-scale conjugate is 2*sqrt(2),
  // approached as |t| -> infinity
  m.sc_class_ = {ScKind::Canonical, 2.0 * std::numbers::sqrt2 / tau};
  m.scale_ = tau;
  return m;
}

LossModel make_sc_logistic() {
  LossModel m;
  m.kind_ = LossKind::ScLogistic;
  m.name_ = "sc_logistic";
  m.response_space_ = ResponseSpace::SignedBinary;
  // conjugate constant 2*sqrt(2), then scaled by 1/log 2
  m.sc_class_ = {ScKind::Canonical, 2.0 * std::numbers::sqrt2 * std::sqrt(kLn2)};
  return m;
}

LossModel make_loss(std::string_view name, double scale) {
  if (name == "logistic") return make_logistic();
  if (name == "poisson") return make_poisson();
  if (name == "exponential_response") return make_exponential_response();
  if (name == "quadratic") return make_quadratic(scale);
  if (name == "huber") return make_huber(scale);
  if (name == "pseudo_huber_logcosh") return make_pseudo_huber(PseudoHuberKind::LogCosh, scale);
  if (name == "pseudo_huber_sqrt") return make_pseudo_huber(PseudoHuberKind::Sqrt, scale);
  if (name == "sc_pseudo_huber") return make_sc_pseudo_huber(scale);
  if (name == "sc_logistic") return make_sc_logistic();
  throw InvalidArgument("unknown loss '" + std::string(name) + "'");
}

std::vector<LossModel> registered_losses() {
  return {make_logistic(),
          make_poisson(),
          make_exponential_response(),
          make_quadratic(1.0),
          make_huber(1.0),
          make_pseudo_huber(PseudoHuberKind::LogCosh, 1.0),
          make_pseudo_huber(PseudoHuberKind::Sqrt, 1.0),
          make_sc_pseudo_huber(1.0),
          make_sc_logistic()};
}

std::string to_string(ScKind kind) {
  switch (kind) {
    case ScKind::Pseudo:
      return "SCa";
    case ScKind::Canonical:
      return "SCb";
    case ScKind::Quadratic:
      return "quadratic";
    case ScKind::None:
      return "none";
  }
  return "none";
}

}  // namespace scm
