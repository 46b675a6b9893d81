#pragma once

// Seeded Monte Carlo experiments: sweeps over sample sizes, Wilks checks,
// critical sample size estimation and loss comparisons.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scm/stat_oracle.hpp"

namespace scm {

struct ExperimentSpec {
  PopulationModel model;  // theta_star is filled in by resolve()
  LossModel loss = make_logistic();
  std::vector<Eigen::Index> n_grid;
  std::size_t trials = 1;
  double delta = 0.05;
  std::uint64_t seed = 0;
  std::string outputs = "out";
  /// population oracle used for theta_star, H, G and excess risks; absent =
  /// quadrature for Gaussian designs, Monte Carlo with 10^6 draws otherwise
  std::optional<OracleMethod> oracle;
  unsigned threads = 0;

  void validate() const;
  OracleMethod oracle_method() const;
};

/// Population quantities shared by every trial of a sweep.
struct SweepContext {
  Vector theta_star;
  Matrix h;
  Matrix g;
  double d_eff = 0.0;
};

SweepContext resolve(ExperimentSpec& spec);

struct SweepRow {
  Eigen::Index n = 0;
  std::size_t trial = 0;
  bool converged = false;
  double excess_risk = NAN;
  double score_sq = NAN;   // ||grad L_n(theta*)||^2_{H^{-1}}
  double h_dist_sq = NAN;  // ||theta_hat - theta*||^2_H
  /// score and design radius satisfy the localization threshold
  bool localization_precondition = false;
  /// ||theta_hat - theta*||_{H_n} <= 4 ||grad L_n(theta*)||_{H_n^{-1}}
  bool localization_held = false;
  double ratio_crb = NAN;  // excess * 2n / d_eff
  double local_score = NAN;
  double local_radius = NAN;
  double hn_dist = NAN;
  std::string error;
};

std::vector<std::string> sweep_header();
std::vector<std::string> sweep_fields(const SweepRow& r);

/// One trial: data from streams keyed by (seed, n, trial), ERM fit,
/// population metrics and the localization certificate at theta*.
SweepRow run_trial(const ExperimentSpec& spec, const SweepContext& ctx, const ExcessRiskEvaluator& risk,
                   Eigen::Index n, std::size_t trial);

/// Runs every (n, trial) pair concurrently. Rows reach `sink` in (n, trial)
/// order as soon as their prefix is complete. Failed trials are emitted
/// with converged = false.
std::vector<SweepRow> run_sweep(ExperimentSpec& spec, const std::function<void(const SweepRow&)>& sink = {});

struct WilksReport {
  Eigen::Index n = 0;
  std::size_t trials = 0;
  std::size_t failed = 0;
  double mean_excess_stat = 0.0;  // mean of 2n * excess
  double mean_dist_stat = 0.0;    // mean of n * h_dist_sq
  double ks_excess = 0.0;
  double ks_dist = 0.0;
  double d = 0.0;
  bool pass = false;
};

/// Throws InvalidArgument for misspecified models (G != H).
WilksReport wilks_check(ExperimentSpec spec);

/// P(chi^2_k <= x).
double chi_square_cdf(double x, double k);

/// sup_x |F_n(x) - F(x)|.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

double empirical_quantile(std::vector<double> v, double q);

struct CriticalN {
  double n_crit = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> n;
  std::vector<double> quantile, ci_lo, ci_hi;
  /// beyond n_crit, no step up is resolved: each CI starts below the upper end of its predecessor's
  bool nonincreasing_beyond = false;
};

/// Smallest grid n from which on the q-quantile of ratio_crb stays <= cap.
/// Failed rows count as +infinity. Percentile bootstrap CIs per n.
CriticalN critical_n_estimate(const std::vector<SweepRow>& rows, double q = 0.9, double cap = 4.0,
                              std::size_t bootstrap = 1000, std::uint64_t seed = 0);

struct ComparisonRow {
  Eigen::Index n = 0;
  double q = 0.0;
  double excess_a = 0.0;
  double excess_b = 0.0;
  double ratio = 0.0;
};

struct Comparison {
  std::string loss_a, loss_b;
  std::vector<ComparisonRow> rows;
  double n_crit_a = 0.0, n_crit_b = 0.0;
};

/// Quantiles {0.1, 0.5, 0.9} of excess risk per n for both sweeps.
Comparison compare_losses(const std::vector<SweepRow>& a, const std::vector<SweepRow>& b, const std::string& name_a,
                          const std::string& name_b, double cap = 4.0);
void write_comparison_csv(std::ostream& out, const Comparison& c);

/// Whitened extreme eigenvalues of H_n(theta*) relative to H.
struct HessianBand {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};
std::vector<HessianBand> hessian_concentration(const PopulationModel& model, const LossModel& loss, const Matrix& h,
                                               Eigen::Index n, std::size_t trials, std::uint64_t seed,
                                               unsigned threads = 0);

struct SparseSweepSpec {
  Eigen::Index d = 400;
  std::size_t s = 5;
  Eigen::Index n = 4000;
  std::size_t trials = 100;
  double signal = 1.0;
  /// lambda = factor * sqrt(log d / n), largest first
  std::vector<double> lambda_factors{2.0};
  std::optional<std::size_t> sketch_size;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct SparseRow {
  double lambda = 0.0;
  std::size_t trial = 0;
  double l1_error = NAN;
  double h_sq_error = NAN;
  std::size_t support_size = 0;
  int outer_iters = 0;
  bool converged = false;
  bool kkt = false;
  bool support_recovered = false;
};

struct SparseSweepResult {
  std::vector<SparseRow> rows;
  Vector theta_star;
  Matrix h;
  double rho = 0.0;
};

/// Well-specified sparse logistic model with identity Gaussian design; s
/// random coordinates of theta* carry +-signal. Runs warm-started lambda
/// paths per trial.
SparseSweepResult run_sparse_sweep(const SparseSweepSpec& spec);
std::vector<std::string> sparse_header();
std::vector<std::string> sparse_fields(const SparseRow& r);

}  // namespace scm
