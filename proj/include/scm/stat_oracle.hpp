#pragma once

// Population quantities for synthetic models: Sigma, H(theta), G(theta),
// d_eff, rho, psi_2 diagnostics and excess risks. Gaussian designs are
// integrated exactly by Gauss-Hermite quadrature on the (at most three
// dimensional) span of the relevant parameter directions; other designs use
// chunked Monte Carlo with per-chunk counter streams.

#include <cstdint>
#include <memory>
#include <optional>

#include "json.hpp"
#include "scm/model.hpp"

namespace scm {

enum class OracleMethodKind { Quadrature, MonteCarlo };

struct OracleMethod {
  OracleMethodKind kind = OracleMethodKind::Quadrature;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  /// 0 = hardware concurrency. Results do not depend on the thread count.
  unsigned threads = 0;

  static OracleMethod quadrature() { return {}; }
  static OracleMethod monte_carlo(std::size_t samples, std::uint64_t seed, unsigned threads = 0) {
    return {OracleMethodKind::MonteCarlo, samples, seed, threads};
  }
};

std::string to_string(const OracleMethod& m);

/// E[l(Y, eta) | X] and friends as functions of the linear predictors
/// eta = X^T theta and eta_gen = X^T theta_gen.
struct CondMoments {
  double loss = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d1sq = 0.0;  // E[l'(Y, eta)^2 | X]
};

class ConditionalLaw {
 public:
  /// Throws UnsupportedMethod when no closed form or quadrature is
  /// available for the pair.
  ConditionalLaw(const ResponseMechanism& mech, const LossModel& loss);

  CondMoments at(double eta, double eta_gen) const;
  /// Y - X^T theta_gen is independent of X (linear_plus_noise).
  bool residual_only() const { return mech_.kind == MechanismKind::LinearPlusNoise; }

 private:
  ResponseMechanism mech_;
  LossModel loss_;
  std::vector<std::pair<double, double>> mixture_;
};

struct PopulationMatrices {
  Matrix sigma;
  Matrix h;
  Matrix g;
  /// per-entry Monte Carlo standard errors (zero for quadrature)
  Matrix h_se;
  Matrix g_se;
  Matrix g_minus_h_se;
};

/// Sigma, H(theta) = E[l''(Y, X^T theta) X X^T], G(theta) = E[l'^2 X X^T].
/// Quadrature requires a Gaussian design (UnsupportedMethod otherwise).
PopulationMatrices population_matrices(const PopulationModel& model, const LossModel& loss, const Vector& theta,
                                       const OracleMethod& method);

struct MinimizerResult {
  Vector theta;
  Vector std_error;  // zero when the minimizer is exact
  bool exact = false;
};

/// theta_gen when the loss matches the mechanism (or the mechanism is
/// symmetric noise around an even contrast); a 1-D root along theta_gen for
/// binary mechanisms under a Gaussian design; otherwise ERM on a Monte Carlo
/// draw of method.samples rows with sandwich standard errors.
MinimizerResult population_minimizer(const PopulationModel& model, const LossModel& loss, const OracleMethod& method);

/// tr(H^{-1} G). Throws NotPositiveDefinite for H not PD.
double effective_dimension(const Matrix& h, const Matrix& g);

/// Smallest rho with Sigma <= rho H.
double curvature_rho(const Matrix& sigma, const Matrix& h);

/// max over random unit u and p in {2,4,6,8} of (mean |<z_i,u>|^p)^{1/p} / sqrt(p).
/// Requires at least 1000 rows.
double psi2_estimate(const Matrix& samples, std::size_t directions, std::uint64_t seed);

struct LogisticGaussianConstants {
  double kappa = 0.0;       // int a''(t u) u^2 phi(u) du
  double kappa_perp = 0.0;  // int a''(t u) phi(u) du
  double rho_bound = 0.0;   // 1 / min(kappa, kappa_perp)
};

LogisticGaussianConstants logistic_gaussian_constants(double t);

struct RiskEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Evaluates L(theta) - L(theta_star) repeatedly for a fixed model. The Monte
/// Carlo variant draws its sample once, so every call uses common random
/// numbers. Thread-safe after construction.
class ExcessRiskEvaluator {
 public:
  ExcessRiskEvaluator(const PopulationModel& model, const LossModel& loss, const Vector& theta_star,
                      const OracleMethod& method);
  ~ExcessRiskEvaluator();
  ExcessRiskEvaluator(ExcessRiskEvaluator&&) noexcept;
  ExcessRiskEvaluator& operator=(ExcessRiskEvaluator&&) noexcept;

  RiskEstimate operator()(const Vector& theta) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RiskEstimate excess_risk(const PopulationModel& model, const LossModel& loss, const Vector& theta,
                         const Vector& theta_star, const OracleMethod& method);

enum class RestrictionKind { Design, Calibrated };

struct RestrictedRisk {
  double value = 0.0;
  double std_error = 0.0;
  double kept_fraction = 0.0;
  /// fewer than 1% of the draws survived the truncation
  bool low_mass_warning = false;
};

struct RestrictedOptions {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  /// H for the calibrated norm; computed at theta_star when absent
  std::optional<Matrix> h;
};

/// E[(l_Z(theta) - l_Z(theta_star)) 1{||X||_{Sigma^{-1}} <= radius}] (Design)
/// or with ||X~||_{H^{-1}}, X~ = l''(Y, X^T theta_star)^{1/2} X (Calibrated).
RestrictedRisk restricted_excess_risk(const PopulationModel& model, const LossModel& loss, const Vector& theta,
                                      const Vector& theta_star, double radius, RestrictionKind which,
                                      const RestrictedOptions& opts = {});

/// psi_2 estimate of H^{-1/2} X~(theta) maximized over theta* and `probes`
/// random points on the Dikin sphere ||theta - theta*||_H = r.
double calibrated_psi2_dikin(const PopulationModel& model, const LossModel& loss, const Matrix& h, double r,
                             std::size_t samples, std::size_t probes, std::uint64_t seed);

struct TheoryReport {
  Matrix sigma, h, g;
  Matrix h_se, g_se;
  Vector theta_star;
  double d_eff = 0.0;
  double rho = 0.0;
  double k0 = 0.0, k1 = 0.0, k2 = 0.0;
  double b0 = 0.0, b2 = 0.0;
  double delta = 0.05;
  OracleMethod method;
};

struct TheoryOptions {
  OracleMethod method;
  std::size_t psi_samples = 100'000;
  std::size_t directions = 100;
  double delta = 0.05;
  std::uint64_t seed = 0;
};

/// Evaluated at model.theta_star.
TheoryReport theory_report(const PopulationModel& model, const LossModel& loss, const TheoryOptions& opts = {});

nlohmann::json to_json(const TheoryReport& r);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace scm
