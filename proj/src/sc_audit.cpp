#include "scm/sc_audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scm/errors.hpp"

namespace scm {

namespace {

struct Fd {
  double value = 0.0;
  double noise = 0.0;  // rounding error of the stencil
};

template <class F>
Fd stencil(F&& f, double x, double h) {
  const double a = f(x + 2.0 * h), b = f(x + h), c = f(x - h), d = f(x - 2.0 * h);
  const double eps = std::numeric_limits<double>::epsilon();
  return {(-a + 8.0 * b - 8.0 * c + d) / (12.0 * h),
          eps * (std::abs(a) + 8.0 * std::abs(b) + 8.0 * std::abs(c) + std::abs(d)) / (12.0 * h)};
}

// In units of the tolerance: 1e-5 relative, floored by the stencil noise.
double mismatch(double analytic, const Fd& fd) {
  const double tol = std::max({1e-5 * std::abs(analytic), 16.0 * fd.noise, 1e-300});
  return std::abs(analytic - fd.value) / tol;
}

double sc_ratio(ScKind kind, double d2, double d3) {
  switch (kind) {
    case ScKind::Canonical:
      return std::abs(d3) / std::pow(d2, 1.5);
    default:
      return std::abs(d3) / d2;
  }
}

}  // namespace

GridSpec default_grid(const LossModel& loss) {
  GridSpec g;
  switch (loss.kind()) {
    case LossKind::Logistic:
      g.eta_min = -30.0;
      g.eta_max = 30.0;
      g.responses = {0.0, 1.0};
      break;
    case LossKind::Poisson:
      g.eta_min = -20.0;
      g.eta_max = 20.0;
      g.responses = {0.0, 1.0, 5.0};
      break;
    case LossKind::ExponentialResponse:
      g.eta_min = 1e-3;
      g.eta_max = 1e3;
      g.log_spaced = true;
      g.responses = {-1.0, 0.0};
      break;
    case LossKind::ScLogistic:
      g.eta_min = -50.0;
      g.eta_max = 50.0;
      g.responses = {-1.0, 1.0};
      break;
    default: {
      const double span = 50.0 * std::max(1.0, loss.scale());
      g.eta_min = -span;
      g.eta_max = span;
      g.responses = {0.0};
    }
  }
  return g;
}

ScReport verify_sc(const LossModel& loss, const GridSpec& grid) {
  if (grid.points < 2 || !(grid.eta_max > grid.eta_min)) {
    throw InvalidArgument("verify_sc: grid needs >= 2 points and eta_max > eta_min");
  }
  if (grid.log_spaced && !(grid.eta_min > 0.0)) {
    throw InvalidArgument("verify_sc: log-spaced grid needs eta_min > 0");
  }

  const ScClass cls = loss.sc_class();
  ScReport rep;
  rep.loss = loss.name();
  rep.sc_kind = cls.kind;
  rep.declared_c = cls.c;
  rep.skipped = cls.kind == ScKind::None;

  const bool positive = loss.eta_domain() == EtaDomain::PositiveReals;
  const bool huber = loss.kind() == LossKind::Huber;
  double worst = -1.0;

  for (double y : grid.responses) {
    auto value = [&](double e) { return loss.eval(y, e).value; };
    auto first = [&](double e) { return loss.eval(y, e).d1; };
    auto second = [&](double e) { return loss.eval(y, e).d2; };

    for (std::size_t k = 0; k < grid.points; ++k) {
      const double frac = static_cast<double>(k) / static_cast<double>(grid.points - 1);
      const double eta =
          grid.log_spaced
              ? std::exp(std::log(grid.eta_min) + frac * (std::log(grid.eta_max) - std::log(grid.eta_min)))
              : grid.eta_min + frac * (grid.eta_max - grid.eta_min);

      double h1 = grid.fd_step > 0.0 ? grid.fd_step : std::max(1e-4, 1e-4 * std::abs(eta));
      double h3 = grid.fd_step_third > 0.0 ? grid.fd_step_third : std::max(1e-3, 1e-4 * std::abs(eta));
      if (positive) {
        h1 = std::min(h1, 1e-3 * eta);
        h3 = std::min(h3, 1e-3 * eta);
      }

      const LossDerivs a = loss.eval(y, eta);
      ++rep.points_checked;

      // stencils straddling a Huber kink say nothing about smoothness
      const double kink_gap = huber ? std::abs(std::abs(y - eta) - loss.scale()) : HUGE_VAL;
      const bool fd_ok = kink_gap > 2.0 * std::max(h1, h3) + 1e-8;

      double d3_fd = a.d3;
      if (fd_ok) {
        const Fd d1_fd = stencil(value, eta, h1);
        const Fd d2_fd = stencil(first, eta, h1);
        const Fd d3 = stencil(second, eta, h3);
        d3_fd = d3.value;
        rep.fd_mismatch = std::max({rep.fd_mismatch, mismatch(a.d1, d1_fd), mismatch(a.d2, d2_fd), mismatch(a.d3, d3)});
      }

      if (rep.skipped) continue;
      if (a.d2 < 1e-300) {
        rep.undefined_points.push_back({y, eta});
        continue;
      }
      const double ra = sc_ratio(cls.kind, a.d2, a.d3);
      const double rf = sc_ratio(cls.kind, a.d2, d3_fd);
      rep.max_ratio_analytic = std::max(rep.max_ratio_analytic, ra);
      rep.max_ratio_fd = std::max(rep.max_ratio_fd, rf);
      if (ra > worst) {
        worst = ra;
        rep.worst_point = {y, eta};
      }
    }
  }

  const double bound = cls.c * (1.0 + 1e-6);
  const bool ratio_ok = rep.skipped || (rep.max_ratio_analytic <= bound && rep.max_ratio_fd <= bound);
  rep.passed = ratio_ok && rep.fd_mismatch <= 1.0;
  return rep;
}

nlohmann::json to_json(const ScReport& r) {
  nlohmann::json undefined = nlohmann::json::array();
  for (const auto& p : r.undefined_points) undefined.push_back({{"y", p.y}, {"eta", p.eta}});
  return {
      {"loss", r.loss},
      {"class", to_string(r.sc_kind)},
      {"declared_c", r.declared_c},
      {"max_ratio_analytic", r.max_ratio_analytic},
      {"max_ratio_fd", r.max_ratio_fd},
      {"worst_point", {{"y", r.worst_point.y}, {"eta", r.worst_point.eta}}},
      {"fd_mismatch", r.fd_mismatch},
      {"points_checked", r.points_checked},
      {"undefined_points", undefined},
      {"skipped", r.skipped},
      {"passed", r.passed},
  };
}

}  // namespace scm
