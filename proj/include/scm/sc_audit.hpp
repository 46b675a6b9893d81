#pragma once

// Numerical audit of the self-concordance class declared by a LossModel.

#include <cstddef>
#include <vector>

#include "json.hpp"
#include "scm/loss.hpp"

namespace scm {

struct GridSpec {
  double eta_min = -30.0;
  double eta_max = 30.0;
  std::size_t points = 2001;
  bool log_spaced = false;
  std::vector<double> responses{0.0};
  /// Finite-difference step for l' and l''; 0 selects max(1e-4, 1e-4 |eta|).
  double fd_step = 0.0;
  /// Step for l'''; 0 selects max(1e-3, 1e-4 |eta|).
  double fd_step_third = 0.0;
};

struct GridPoint {
  double y = 0.0;
  double eta = 0.0;
};

struct ScReport {
  std::string loss;
  ScKind sc_kind = ScKind::None;
  double declared_c = 0.0;
  double max_ratio_analytic = 0.0;
  double max_ratio_fd = 0.0;
  GridPoint worst_point;
  /// max over points and derivative orders of the FD mismatch, in units of the
  /// tolerance (relative 1e-5, floored by the rounding noise of the stencil); <= 1 passes
  double fd_mismatch = 0.0;
  std::size_t points_checked = 0;
  /// points where l'' < 1e-300 and the ratio is undefined
  std::vector<GridPoint> undefined_points;
  bool skipped = false;  // no SC class declared (Huber)
  bool passed = false;
};

/// Grid covering the loss's domain that the audit uses by default.
GridSpec default_grid(const LossModel& loss);

ScReport verify_sc(const LossModel& loss, const GridSpec& grid);
inline ScReport verify_sc(const LossModel& loss) { return verify_sc(loss, default_grid(loss)); }

/// 4th-order central difference of f at x with step h.
template <class F>
double central_difference(F&& f, double x, double h) {
  return (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
}

nlohmann::json to_json(const ScReport& report);

}  // namespace scm
