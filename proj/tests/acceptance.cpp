// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 4 7        selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scm/harness.hpp"
#include "scm/sampling.hpp"
#include "scm/sc_audit.hpp"
#include "scm/sparse.hpp"
#include "scm/spec_io.hpp"

using namespace scm;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentSpec logistic_spec(Eigen::Index d, std::vector<Eigen::Index> grid, std::size_t trials, std::uint64_t seed) {
  return parse_experiment_spec(json{{"design", {{"kind", "gaussian"}, {"d", d}}},
                                    {"mechanism", {{"kind", "glm_well_specified"}, {"family", "logistic"}}},
                                    {"theta", {{"norm", 1.0}}},
                                    {"loss", {{"name", "logistic"}}},
                                    {"n_grid", grid},
                                    {"trials", trials},
                                    {"seed", seed}});
}

Outcome audit() {
  bool ok = true;
  std::string worst;
  double worst_fd = 0.0;
  for (const LossModel& l : registered_losses()) {
    const ScReport r = verify_sc(l);
    ok = ok && (r.passed || r.skipped);
    if (!r.passed && !r.skipped) worst += " " + l.name();
    worst_fd = std::max(worst_fd, r.fd_mismatch);
  }
  return {ok, fmt("%zu losses, max fd mismatch %.3g of tolerance%s", registered_losses().size(), worst_fd,
                  worst.empty() ? "" : (" failed:" + worst).c_str())};
}

Outcome sandwich() {
  const std::size_t per_class = 1000;
  std::vector<LossModel> pseudo, canonical;
  for (const LossModel& l : registered_losses()) {
    if (l.sc_class().kind == ScKind::Pseudo) pseudo.push_back(l);
    if (l.sc_class().kind == ScKind::Canonical) canonical.push_back(l);
  }
  struct Run {
    const char* name;
    BracketCase which;
    const std::vector<LossModel>* losses;
  };
  const Run runs[] = {{"pseudo", BracketCase::Pseudo, &pseudo},
                      {"aux", BracketCase::Aux, &canonical},
                      {"canonical", BracketCase::Canonical, &canonical}};
  bool ok = true;
  std::string detail;
  for (const Run& run : runs) {
    CounterRng rng(2024, static_cast<std::uint64_t>(run.which), 0, StreamTag::Misc);
    std::size_t inside = 0, done = 0, draws = 0;
    while (done < per_class && draws < 100 * per_class) {
      const LossModel& l = (*run.losses)[draws % run.losses->size()];
      ++draws;
      const auto terms = 1 + static_cast<std::size_t>(rng.uniform() * 6.0);
      const oracle::Restriction r = oracle::random_restriction(l, rng, terms);
      if (l.eta_domain() == EtaDomain::PositiveReals) {
        // the path must stay inside the domain up to the evaluation point
        bool feasible = true;
        for (std::size_t i = 0; i < r.a.size(); ++i) feasible = feasible && r.a[i] + r.b[i] > 0.0;
        if (!feasible) continue;
        if (run.which == BracketCase::Canonical) {
          const double t = 1.0 / (l.sc_class().c * r.calibrated_spread());
          for (std::size_t i = 0; i < r.a.size(); ++i) feasible = feasible && r.a[i] + t * r.b[i] > 0.0;
          if (!feasible) continue;
        }
      }
      const oracle::SandwichCheck c = oracle::sandwich(r, run.which);
      if (!c.applicable) continue;
      ++done;
      inside += c.inside(1e-9);
    }
    ok = ok && done == per_class && inside == per_class;
    detail += fmt("%s %zu/%zu ", run.name, inside, done);
  }
  return {ok, detail};
}

Outcome fenchel() {
  const int points = 10000;
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  for (int k = 1; k <= points; ++k) {
    const double u = -1.0 + 2.0 * k / (points + 1.0);
    const auto p = barrier::symmetric(u);
    const auto c = contrast::sc_robust(p.d1);
    worst = std::max({worst, rel(p.value + c.value, u * p.d1), rel(c.d1, u), rel(p.d2 * c.d2, 1.0)});
    const double v = -static_cast<double>(k) / (points + 1.0);
    const auto q = barrier::negative_unit(v);
    const auto e = contrast::sc_logistic_conjugate(q.d1);
    worst = std::max({worst, rel(q.value + e.value, v * q.d1), rel(e.d1, v), rel(q.d2 * e.d2, 1.0)});
  }
  return {worst <= 1e-9, fmt("2 x %d points, worst relative error %.3g", points, worst)};
}

Outcome wilks() {
  ExperimentSpec spec = logistic_spec(5, {5000}, 1000, 41);
  const WilksReport w = wilks_check(spec);
  const bool ok = w.failed == 0 && w.mean_excess_stat >= 4.5 && w.mean_excess_stat <= 5.5 && w.ks_excess <= 0.05;
  return {ok, fmt("mean 2n*excess %.4f, KS %.4f, mean n*dist %.4f, failed %zu", w.mean_excess_stat, w.ks_excess,
                  w.mean_dist_stat, w.failed)};
}

Outcome misspecified_deff() {
  const Eigen::Index d = 10;
  PopulationModel m{DesignLaw::gaussian(Matrix::Identity(d, d)),
                    ResponseMechanism::linear_plus_noise(NoiseLaw::with_variance(NoiseKind::Laplace, 1.0)),
                    Vector::Constant(d, 0.3), Vector::Constant(d, 0.3)};
  const LossModel loss = make_quadratic(1.0);
  const auto pm = population_matrices(m, loss, m.theta_star, OracleMethod::monte_carlo(1'000'000, 5));
  const double de = effective_dimension(pm.h, pm.g);
  return {de >= 0.97 * d && de <= 1.03 * d, fmt("d_eff %.4f for d = %ld (Monte Carlo, 1e6 draws)", de, d)};
}

std::vector<SweepRow> rate_rows;

Outcome rate() {
  std::vector<Eigen::Index> grid;
  for (int k = 7; k <= 14; ++k) grid.push_back(Eigen::Index{1} << k);
  ExperimentSpec spec = logistic_spec(8, grid, 200, 77);
  rate_rows = run_sweep(spec);
  const CriticalN cn = critical_n_estimate(rate_rows, 0.9, 4.0, 1000, 77);
  bool ok = cn.nonincreasing_beyond && std::isfinite(cn.n_crit);
  std::string qs;
  for (std::size_t k = 0; k < cn.n.size(); ++k) {
    if (cn.n[k] >= 4096) ok = ok && cn.quantile[k] <= 4.0;
    qs += fmt(" %.2f", cn.quantile[k]);
  }
  return {ok, fmt("q90 by n:%s; n_crit %.0f; non-increasing beyond: %s", qs.c_str(), cn.n_crit,
                  cn.nonincreasing_beyond ? "yes" : "no")};
}

Outcome localization() {
  ExperimentSpec a = logistic_spec(2, {250, 500, 1000, 2000}, 4200, 91);
  std::vector<SweepRow> rows = run_sweep(a);
  ExperimentSpec b = parse_experiment_spec(
      json{{"design", {{"kind", "gaussian"}, {"d", 2}}},
           {"mechanism", {{"kind", "linear_plus_noise"}, {"noise", {{"kind", "student_t"}, {"variance", 1.0}, {"df", 5}}}}},
           {"theta", {{"norm", 1.0}}},
           {"loss", {{"name", "sc_pseudo_huber"}, {"scale", 1.0}}},
           {"n_grid", {500, 2000}},
           {"trials", 500},
           {"seed", 92}});
  const auto rb = run_sweep(b);
  rows.insert(rows.end(), rb.begin(), rb.end());
  rows.insert(rows.end(), rate_rows.begin(), rate_rows.end());
  std::size_t pre = 0, held = 0, canonical = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].localization_precondition) continue;
    ++pre;
    held += rows[k].localization_held;
    if (k >= rows.size() - rate_rows.size() - rb.size() && k < rows.size() - rate_rows.size()) ++canonical;
  }
  return {pre >= 10000 && held == pre,
          fmt("%zu/%zu precondition rows held (%zu canonical) out of %zu rows", held, pre, canonical, rows.size())};
}

Outcome constants() {
  double lo_perp = INFINITY, hi_perp = 0.0, lo_kappa = INFINITY;
  for (int k = 0; k < 500; ++k) {
    const double t = 50.0 * k / 499.0;
    const auto c = logistic_gaussian_constants(t);
    lo_perp = std::min(lo_perp, c.kappa_perp * (t + 1.0));
    hi_perp = std::max(hi_perp, c.kappa_perp * (t + 1.0));
    lo_kappa = std::min(lo_kappa, c.kappa * (1.0 + t * t * t));
  }
  return {lo_perp >= 0.15 && hi_perp <= 1.2 && lo_kappa >= 0.05,
          fmt("kappa_perp (t+1) in [%.4f, %.4f], min kappa (1+t^3) %.4f", lo_perp, hi_perp, lo_kappa)};
}

Outcome covariance() {
  ExperimentSpec spec = logistic_spec(20, {800}, 500, 63);
  const SweepContext ctx = resolve(spec);
  const auto bands = hessian_concentration(spec.model, spec.loss, ctx.h, 800, 500, 63);
  std::size_t inside = 0;
  double lo = INFINITY, hi = 0.0;
  for (const HessianBand& b : bands) {
    inside += b.lambda_min >= 0.5 && b.lambda_max <= 2.0;
    lo = std::min(lo, b.lambda_min);
    hi = std::max(hi, b.lambda_max);
  }
  return {inside * 100 >= 99 * bands.size(),
          fmt("%zu/%zu trials inside [H/2, 2H]; eigenvalue range [%.3f, %.3f]", inside, bands.size(), lo, hi)};
}

Outcome sparse_recovery() {
  SparseSweepSpec spec;
  spec.d = 400;
  spec.s = 5;
  spec.n = 4000;
  spec.trials = 100;
  spec.lambda_factors = {2.0};
  spec.seed = 101;
  const SparseSweepResult res = run_sparse_sweep(spec);
  std::vector<double> l1;
  std::size_t kkt = 0;
  for (const SparseRow& r : res.rows) {
    l1.push_back(r.l1_error);
    kkt += r.kkt;
  }
  const double lambda = 2.0 * std::sqrt(std::log(400.0) / 4000.0);
  const double med = empirical_quantile(l1, 0.5);
  const double bound = 50.0 * 5.0 * lambda;
  return {std::isfinite(med) && med <= bound && kkt == res.rows.size(),
          fmt("median l1 error %.4f vs 50 s lambda = %.4f (rho %.3f); KKT %zu/%zu", med, bound, res.rho, kkt,
              res.rows.size())};
}

Outcome lasso_oracle() {
  CounterRng rng(11, 0, 0, StreamTag::Misc);
  double worst = 0.0;
  std::size_t converged = 0;
  for (std::uint64_t inst = 0; inst < 50; ++inst) {
    const auto d = static_cast<Eigen::Index>(2 + rng.uniform() * 29.0);
    const auto n = static_cast<Eigen::Index>(std::max(5.0, d * (0.5 + 3.0 * rng.uniform())));
    Vector th = Vector::Zero(d);
    for (Eigen::Index j = 0; j < std::max<Eigen::Index>(1, d / 4); ++j) th[j] = rng.uniform() < 0.5 ? 1.0 : -1.0;
    const Matrix x = gen_design(DesignLaw::gaussian(Matrix::Identity(d, d)), n, 500 + inst, 0);
    const double sigma = 0.5 + rng.uniform();
    const LossModel loss = make_quadratic(sigma);
    const Vector y = gen_response(ResponseMechanism::linear_plus_noise({NoiseKind::Gaussian, sigma, 3.0}), x, loss, th,
                                  500 + inst, 0);
    const Dataset data(x, y);
    const double lmax = empirical_risk(loss, data, Vector::Zero(d), EvalLevel::Gradient).gradient.lpNorm<Eigen::Infinity>();
    const double lambda = lmax * (0.02 + 0.5 * rng.uniform());
    const SparseFit fit = fit_l1(loss, data, lambda);
    converged += fit.converged;
    const Vector ref = oracle::cd_lasso(x, y, sigma, lambda);
    const double a = oracle::lasso_objective(x, y, sigma, lambda, fit.theta_hat);
    const double b = oracle::lasso_objective(x, y, sigma, lambda, ref);
    worst = std::max(worst, std::abs(a - b));
  }
  return {worst <= 1e-8 && converged == 50, fmt("50 instances, worst objective gap %.3g, converged %zu", worst, converged)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "self-concordance audit", 10, audit},
      {2, "bracket sandwich", 60, sandwich},
      {3, "Fenchel round trip", 0, fenchel},
      {4, "Wilks at desk scale", 300, wilks},
      {5, "misspecified d_eff", 0, misspecified_deff},
      {7, "rate check", 1200, rate},
      {6, "localization invariant", 0, localization},
      {8, "logistic/Gaussian constants", 5, constants},
      {9, "covariance two-sided bound", 0, covariance},
      {10, "sparse recovery", 600, sparse_recovery},
      {11, "l1 solver oracle", 0, lasso_oracle},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  // localization pools the rate-check rows
  if (pick.count(6) && !pick.count(7)) pick.insert(7);

  int failed = 0;
  for (const Criterion& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_s);
    }
    failed += !o.pass;
    std::printf("criterion %2d %-30s %s  %s  [%.1f s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
