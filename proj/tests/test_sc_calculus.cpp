#include <cmath>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "scm/errors.hpp"
#include "scm/sc_calculus.hpp"

using namespace scm;
using doctest::Approx;

namespace {

// Exact remainder int_0^T (T - t) h(t) dt of a known second derivative.
template <class H>
double integrate_remainder(H h, double T) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate([&](double t) { return (T - t) * h(t); },
                                                                        0.0, T, 12, 1e-13, &err);
}

}  // namespace

TEST_CASE("pseudo bracket values") {
  auto z = bracket_pseudo(0.0);
  CHECK(z.lower_coeff == 0.5);
  CHECK(z.upper_coeff == 0.5);
  auto one = bracket_pseudo(1.0);
  CHECK(one.upper_coeff == Approx(std::exp(1.0) - 2.0).epsilon(1e-15));
  CHECK(one.lower_coeff == Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(one.bracket_case == BracketCase::Pseudo);
  CHECK_THROWS_AS(bracket_pseudo(-1.0), InvalidArgument);
}

TEST_CASE("brackets are continuous at the series switch") {
  const double s = 1e-4;
  const auto below = bracket_pseudo(std::nextafter(s, 0.0));
  const auto above = bracket_pseudo(s);
  CHECK(below.upper_coeff == Approx(above.upper_coeff).epsilon(1e-10));
  CHECK(below.lower_coeff == Approx(above.lower_coeff).epsilon(1e-10));
  // series matches a high-precision evaluation at tiny S
  const long double S = 1e-6L;
  const long double up = (std::expm1(S) - S) / (S * S);
  CHECK(bracket_pseudo(1e-6).upper_coeff == Approx(static_cast<double>(up)).epsilon(1e-12));
}

TEST_CASE("bracket coefficient ordering") {
  for (double S = 0.0; S < 30.0; S += 0.0137) {
    auto p = bracket_pseudo(S);
    CHECK(p.lower_coeff >= 0.0);
    CHECK(p.lower_coeff <= 0.5 + 1e-15);
    CHECK(p.upper_coeff >= 0.5 - 1e-15);
    auto a = bracket_aux(S);
    CHECK(a.lower_coeff <= 0.5);
    if (S < 2.0) {
      CHECK(a.upper_coeff >= 0.5);
      CHECK(std::isfinite(a.upper_coeff));
    } else {
      CHECK(std::isinf(a.upper_coeff));
    }
  }
}

TEST_CASE("aux and canonical bracket values") {
  CHECK(bracket_aux(0.0).lower_coeff == 0.5);
  CHECK(bracket_aux(0.0).upper_coeff == 0.5);
  CHECK(bracket_aux(1.0).lower_coeff == Approx(1.0 / 3.0));
  CHECK(bracket_aux(1.0).upper_coeff == Approx(1.0));
  CHECK(std::isinf(bracket_aux(2.0).upper_coeff));
  CHECK(bracket_canonical(1.0).lower_coeff == Approx(1.0 / 3.0));
  CHECK(bracket_canonical(1.0).upper_coeff == Approx(1.0));
  CHECK(bracket_canonical(2.0).lower_coeff == Approx(1.0 / 12.0));
  CHECK(bracket_canonical(2.0).upper_coeff == Approx(0.25));
  CHECK_THROWS_AS(bracket_canonical(0.0), InvalidArgument);
  for (double S = 1e-3; S <= 1.0; S += 1e-3) CHECK(bracket_canonical(S).lower_coeff >= bracket_aux(S).lower_coeff);
}

TEST_CASE("brackets are attained by the extremal functions") {
  for (double S : {0.3, 1.0, 1.7, 4.0}) {
    // |phi'''| = S phi'' with phi'' = e^{+-S t}
    CHECK(integrate_remainder([&](double t) { return std::exp(S * t); }, 1.0) ==
          Approx(bracket_pseudo(S).upper_coeff).epsilon(1e-12));
    CHECK(integrate_remainder([&](double t) { return std::exp(-S * t); }, 1.0) ==
          Approx(bracket_pseudo(S).lower_coeff).epsilon(1e-12));
    // |phi'''| = S phi'' / (1 - t) with phi'' = (1 - t)^{-+S}
    // in u = 1 - t the endpoint singularity sits at u = 0, where u is exact
    boost::math::quadrature::tanh_sinh<double> ts;
    if (S < 2.0) {
      const double v = ts.integrate([&](double u) { return std::pow(u, 1.0 - S); }, 0.0, 1.0);
      CHECK(v == Approx(bracket_aux(S).upper_coeff).epsilon(1e-9));
    }
    CHECK(integrate_remainder([&](double t) { return std::pow(1.0 - t, S); }, 1.0) ==
          Approx(bracket_aux(S).lower_coeff).epsilon(1e-12));
    // |phi'''| = S phi'' / (1 - S t) with phi'' = (1 - S t)^{-+1}, up to t = 1/S
    // u = 1 - S t, T - t = u / S, dt = du / S
    CHECK(ts.integrate([&](double u) { return (u / S) * (1.0 / u) / S; }, 0.0, 1.0) ==
          Approx(bracket_canonical(S).upper_coeff).epsilon(1e-12));
    CHECK(integrate_remainder([&](double t) { return 1.0 - S * t; }, 1.0 / S) ==
          Approx(bracket_canonical(S).lower_coeff).epsilon(1e-12));
  }
}

TEST_CASE("intermediate-t integrated forms") {
  // int_0^t (t - s)(1 - s)^{-S} ds for the aux upper case, against the closed form
  // ((1 - t)^{2 - S} + (2 - S) t - 1) / ((1 - S)(2 - S)).
  for (double S : {0.25, 0.5, 1.5}) {
    for (double t : {0.1, 0.5, 0.9}) {
      const double closed = (std::pow(1.0 - t, 2.0 - S) + (2.0 - S) * t - 1.0) / ((1.0 - S) * (2.0 - S));
      CHECK(integrate_remainder([&](double u) { return std::pow(1.0 - u, -S); }, t) == Approx(closed).epsilon(1e-11));
      const double closed_lower = (std::pow(1.0 - t, 2.0 + S) + (2.0 + S) * t - 1.0) / ((1.0 + S) * (2.0 + S));
      CHECK(integrate_remainder([&](double u) { return std::pow(1.0 - u, S); }, t) ==
            Approx(closed_lower).epsilon(1e-11));
    }
  }
}

TEST_CASE("hessian envelopes") {
  auto e0 = hessian_envelope_canonical(3.0, 1.0, 0.0);
  CHECK(e0.lower == 3.0);
  CHECK(e0.upper == 3.0);
  auto e1 = hessian_envelope_canonical(1.0, 1.0, 0.5);
  CHECK(e1.lower == Approx(4.0 / 9.0));
  CHECK(e1.upper == Approx(4.0));
  auto e2 = hessian_envelope_canonical(4.0, 1.0, 0.25);
  CHECK(e2.lower == Approx(16.0 / 9.0));
  CHECK(e2.upper == Approx(16.0));
  CHECK_FALSE(hessian_envelope_canonical(1.0, 1.0, 1.0).upper_valid);
  CHECK(hessian_envelope_canonical(1.0, 1.0, 0.999).upper_valid);

  auto p0 = hessian_envelope_pseudo(2.0, 1.0, 0.0);
  CHECK(p0.lower == 2.0);
  CHECK(p0.upper == 2.0);
  auto p1 = hessian_envelope_pseudo(1.0, 1.0, 1.0);
  CHECK(p1.lower == Approx(std::exp(-1.0)));
  CHECK(p1.upper == Approx(std::exp(1.0)));
  double prev_lo = 1.0, prev_hi = 1.0;
  for (double t = 0.01; t < 5; t += 0.01) {
    auto p = hessian_envelope_pseudo(1.0, 1.0, t);
    CHECK(p.lower <= prev_lo);
    CHECK(p.upper >= prev_hi);
    prev_lo = p.lower;
    prev_hi = p.upper;
  }
  CHECK_THROWS_AS(hessian_envelope_pseudo(-1.0, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("localization certificate thresholds") {
  auto a = localization_certificate(0.0, 5.0, BracketCase::Pseudo);
  CHECK(a.holds);
  CHECK(a.radius_bound == 0.0);
  auto b = localization_certificate(0.3, 1.0, BracketCase::Pseudo);
  CHECK(b.holds);
  CHECK(b.radius_bound == Approx(1.2));
  CHECK(b.threshold_c == 0.5);
  auto c = localization_certificate(0.2, 2.0, BracketCase::Canonical);
  CHECK_FALSE(c.holds);
  CHECK(c.threshold_c == 0.25);
  CHECK(localization_certificate(0.25, 2.0, BracketCase::Aux).holds);
  CHECK_FALSE(localization_certificate(0.26, 2.0, BracketCase::Aux).holds);
  CHECK_THROWS_AS(localization_certificate(-1.0, 1.0, BracketCase::Pseudo), InvalidArgument);
  CHECK_THROWS_AS(localization_certificate(NAN, 1.0, BracketCase::Pseudo), InvalidArgument);
}

TEST_CASE("sandwich oracle on random restrictions") {
  CounterRng rng(7, 0, 0, StreamTag::Misc);
  for (const auto& loss : registered_losses()) {
    const ScKind k = loss.sc_class().kind;
    if (k == ScKind::None || k == ScKind::Quadratic) continue;
    int aux_checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto r = oracle::random_restriction(loss, rng, 1 + trial % 7);
      INFO(loss.name() << " trial " << trial);
      if (k == ScKind::Pseudo) {
        const auto s = oracle::sandwich(r, BracketCase::Pseudo);
        CHECK(s.inside());
      } else {
        const auto s = oracle::sandwich(r, BracketCase::Canonical);
        CHECK(s.inside());
        const auto a = oracle::sandwich(r, BracketCase::Aux);
        if (a.applicable) {
          ++aux_checked;
          CHECK(a.inside());
        }
      }
      // quadrature remainder agrees with the direct difference
      bool feasible = true;
      if (loss.eta_domain() == EtaDomain::PositiveReals) {
        for (std::size_t i = 0; i < r.a.size(); ++i) feasible = feasible && r.a[i] + r.b[i] > 0.0;
      }
      if (!feasible) continue;
      const double direct = r.value(1.0) - r.value(0.0) - r.d1(0.0);
      CHECK(oracle::remainder(r, 1.0) == Approx(direct).epsilon(1e-8).scale(1.0));
    }
    if (k == ScKind::Canonical) CHECK(aux_checked > 0);
  }
}

TEST_CASE("envelopes on random restrictions") {
  CounterRng rng(11, 0, 0, StreamTag::Misc);
  for (const auto& loss : registered_losses()) {
    const ScKind k = loss.sc_class().kind;
    if (k == ScKind::None || k == ScKind::Quadratic) continue;
    const double c = loss.sc_class().c;
    for (int trial = 0; trial < 20; ++trial) {
      const auto r = oracle::random_restriction(loss, rng, 1 + trial % 5);
      const double g0 = r.d2(0.0);
      const double S = c * r.spread();
      for (int j = 0; j < 100; ++j) {
        const double t = j / 99.0;
        if (k == ScKind::Pseudo) {
          // |g'''| <= S g'' is the envelope with c sqrt(g0) = S
          const auto e = hessian_envelope_pseudo(g0, S / std::sqrt(g0), t);
          CHECK(r.d2(t) >= e.lower * (1 - 1e-12));
          CHECK(r.d2(t) <= e.upper * (1 + 1e-12));
        } else {
          // per term h_i = w_i l''_i b_i^2 satisfies |h_i'| <= (c / sqrt(w_i)) h_i^{3/2}
          double lo = 0.0, hi = 0.0;
          bool valid = true;
          for (std::size_t i = 0; i < r.y.size(); ++i) {
            if (r.loss.eta_domain() == EtaDomain::PositiveReals && r.a[i] + t * r.b[i] <= 0.0) valid = false;
            const double h0 = r.w[i] * r.loss.eval(r.y[i], r.a[i]).d2 * r.b[i] * r.b[i];
            const auto e = hessian_envelope_canonical(h0, 0.5 * c / std::sqrt(r.w[i]), t);
            lo += e.lower;
            hi += e.upper;
            valid = valid && e.upper_valid;
          }
          if (!valid) continue;
          CHECK(r.d2(t) >= lo * (1 - 1e-12));
          CHECK(r.d2(t) <= hi * (1 + 1e-12));
        }
      }
    }
  }
}
