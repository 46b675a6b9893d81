#include "scm/harness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <cmath>
#include <map>
#include <mutex>

#include "scm/csv.hpp"
#include "scm/erm.hpp"
#include "scm/errors.hpp"
#include "scm/parallel.hpp"
#include "scm/rng.hpp"
#include "scm/sampling.hpp"
#include "scm/sc_calculus.hpp"
#include "scm/sparse.hpp"

namespace scm {

void ExperimentSpec::validate() const {
  const Eigen::Index d = model.design.dim();
  if (d < 1) throw InvalidArgument("ExperimentSpec: empty design");
  if (model.theta_gen.size() != d || !model.theta_gen.allFinite()) {
    throw InvalidArgument("ExperimentSpec: theta_gen must be a finite vector of length d");
  }
  if (n_grid.empty()) throw InvalidArgument("ExperimentSpec: n_grid is empty");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (n_grid[k] < d + 1) throw InvalidArgument("ExperimentSpec: every n must be at least d + 1");
    if (k > 0 && n_grid[k] <= n_grid[k - 1]) throw InvalidArgument("ExperimentSpec: n_grid must be strictly increasing");
  }
  if (trials < 1) throw InvalidArgument("ExperimentSpec: trials must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("ExperimentSpec: delta must lie in (0, 1)");
  check_compatible(model.mechanism, loss);
}

OracleMethod ExperimentSpec::oracle_method() const {
  if (oracle) return *oracle;
  if (model.design.kind == DesignKind::Gaussian) return OracleMethod::quadrature();
  return OracleMethod::monte_carlo(1'000'000, seed ^ 0x6F7261636C65ULL, threads);
}

SweepContext resolve(ExperimentSpec& spec) {
  spec.validate();
  const OracleMethod method = spec.oracle_method();
  SweepContext ctx;
  ctx.theta_star = population_minimizer(spec.model, spec.loss, method).theta;
  spec.model.theta_star = ctx.theta_star;
  const PopulationMatrices pm = population_matrices(spec.model, spec.loss, ctx.theta_star, method);
  ctx.h = pm.h;
  ctx.g = pm.g;
  ctx.d_eff = effective_dimension(pm.h, pm.g);
  return ctx;
}

std::vector<std::string> sweep_header() {
  return {"n",           "trial",          "converged",   "excess_risk", "score_sq",
          "h_dist_sq",   "localization_precondition", "localization_held", "ratio_crb",
          "local_score", "local_radius",   "hn_dist",     "error"};
}

std::vector<std::string> sweep_fields(const SweepRow& r) {
  return {std::to_string(r.n),
          std::to_string(r.trial),
          r.converged ? "1" : "0",
          format_double(r.excess_risk),
          format_double(r.score_sq),
          format_double(r.h_dist_sq),
          r.localization_precondition ? "1" : "0",
          r.localization_held ? "1" : "0",
          format_double(r.ratio_crb),
          format_double(r.local_score),
          format_double(r.local_radius),
          format_double(r.hn_dist),
          r.error};
}

SweepRow run_trial(const ExperimentSpec& spec, const SweepContext& ctx, const ExcessRiskEvaluator& risk,
                   Eigen::Index n, std::size_t trial) {
  SweepRow row;
  row.n = n;
  row.trial = trial;
  const LossModel& loss = spec.loss;
  const Matrix x = gen_design(spec.model.design, n, spec.seed, trial);
  const Vector y = gen_response(spec.model.mechanism, x, loss, spec.model.theta_gen, spec.seed, trial);
  const Dataset data(x, y);
  const Vector& ts = ctx.theta_star;

  // localization certificate at theta*
  const RiskEval at_star = empirical_risk(loss, data, ts, EvalLevel::Hessian);
  const auto llt_h = cholesky(ctx.h, "run_trial: H");
  const double ns = inverse_norm(llt_h, at_star.gradient);
  row.score_sq = ns * ns;
  std::optional<Eigen::LLT<Matrix>> llt_n;
  try {
    llt_n = cholesky(at_star.hessian, "run_trial: H_n");
  } catch (const NotPositiveDefinite&) {
  }
  const ScClass sc = loss.sc_class();
  if (llt_n && sc.kind != ScKind::None) {
    row.local_score = inverse_norm(*llt_n, at_star.gradient);
    double radius = 0.0;
    BracketCase bc = BracketCase::Pseudo;
    if (sc.kind != ScKind::Quadratic) {
      const Matrix white = llt_n->matrixL().solve(x.transpose());
      const Vector eta = x * ts;
      for (Eigen::Index i = 0; i < n; ++i) {
        double r = white.col(i).norm();
        if (sc.kind == ScKind::Canonical) r *= std::sqrt(std::max(0.0, loss.eval(y[i], eta[i]).d2));
        radius = std::max(radius, r);
      }
      radius *= sc.c;
      if (sc.kind == ScKind::Canonical) bc = BracketCase::Canonical;
    }
    row.local_radius = radius;
    row.localization_precondition = localization_certificate(row.local_score, radius, bc).holds;
  }

  SolverOpts opts;
  if (loss.eta_domain() == EtaDomain::PositiveReals) opts.start = ts;
  const FitResult fit = fit_erm(loss, data, opts);
  row.converged = fit.converged;
  if (!fit.converged) {
    row.error = fit.diverging ? "diverging" : "not converged";
    return row;
  }
  const Vector diff = fit.theta_hat - ts;
  if (llt_n) {
    row.hn_dist = (llt_n->matrixU() * diff).norm();
    row.localization_held = row.hn_dist <= 4.0 * row.local_score * (1.0 + 1e-9);
  }
  row.h_dist_sq = diff.dot(ctx.h * diff);
  row.excess_risk = risk(fit.theta_hat).value;
  row.ratio_crb = ctx.d_eff > 0.0 ? row.excess_risk * 2.0 * static_cast<double>(n) / ctx.d_eff : NAN;
  return row;
}

std::vector<SweepRow> run_sweep(ExperimentSpec& spec, const std::function<void(const SweepRow&)>& sink) {
  const SweepContext ctx = resolve(spec);
  const ExcessRiskEvaluator risk(spec.model, spec.loss, ctx.theta_star, spec.oracle_method());
  const std::size_t total = spec.n_grid.size() * spec.trials;
  std::vector<SweepRow> rows(total);
  std::vector<char> done(total, 0);
  std::size_t next_out = 0;
  std::mutex mu;
  parallel_for(total, spec.threads, [&](std::size_t job) {
    const Eigen::Index n = spec.n_grid[job / spec.trials];
    const std::size_t trial = job % spec.trials;
    SweepRow row;
    try {
      row = run_trial(spec, ctx, risk, n, trial);
    } catch (const std::exception& e) {
      row = SweepRow{};
      row.n = n;
      row.trial = trial;
      row.error = e.what();
    }
    std::lock_guard<std::mutex> lock(mu);
    rows[job] = std::move(row);
    done[job] = 1;
    while (next_out < total && done[next_out]) {
      if (sink) sink(rows[next_out]);
      ++next_out;
    }
  });
  return rows;
}

double chi_square_cdf(double x, double k) {
  if (!(k > 0.0)) throw InvalidArgument("chi_square_cdf: degrees of freedom must be positive");
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * k, 0.5 * x);
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("ks_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    dmax = std::max({dmax, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return dmax;
}

double empirical_quantile(std::vector<double> v, double q) {
  if (v.empty()) return NAN;
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("empirical_quantile: q must lie in [0, 1]");
  for (double& x : v) {
    if (std::isnan(x)) x = INFINITY;
  }
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || v[lo] == v[hi]) return v[lo];
  if (std::isinf(v[hi])) return INFINITY;
  return v[lo] + frac * (v[hi] - v[lo]);
}

namespace {

bool well_specified(const ExperimentSpec& spec) {
  const ResponseMechanism& m = spec.model.mechanism;
  switch (m.kind) {
    case MechanismKind::GlmWellSpecified:
      return spec.loss.kind() == m.family;
    case MechanismKind::LabelFlip:
      return m.flip_prob == 0.0 && spec.loss.kind() == LossKind::Logistic;
    case MechanismKind::LinearPlusNoise:
      return m.noise.kind == NoiseKind::Gaussian && spec.loss.kind() == LossKind::Quadratic &&
             std::abs(spec.loss.scale() - m.noise.scale) <= 1e-12 * m.noise.scale;
  }
  return false;
}

std::map<Eigen::Index, std::vector<const SweepRow*>> group_by_n(const std::vector<SweepRow>& rows) {
  std::map<Eigen::Index, std::vector<const SweepRow*>> g;
  for (const SweepRow& r : rows) g[r.n].push_back(&r);
  return g;
}

}  // namespace

WilksReport wilks_check(ExperimentSpec spec) {
  if (!well_specified(spec)) throw InvalidArgument("wilks_check: the model is misspecified for this loss (G != H)");
  spec.validate();
  spec.n_grid = {spec.n_grid.back()};
  const std::vector<SweepRow> rows = run_sweep(spec);
  WilksReport rep;
  rep.n = spec.n_grid.front();
  rep.trials = rows.size();
  rep.d = static_cast<double>(spec.model.design.dim());
  std::vector<double> ex, di;
  for (const SweepRow& r : rows) {
    if (!r.converged) {
      ++rep.failed;
      continue;
    }
    ex.push_back(2.0 * static_cast<double>(rep.n) * r.excess_risk);
    di.push_back(static_cast<double>(rep.n) * r.h_dist_sq);
  }
  if (ex.empty()) return rep;
  const double k = rep.d;
  auto cdf = [k](double x) { return chi_square_cdf(x, k); };
  for (double v : ex) rep.mean_excess_stat += v / static_cast<double>(ex.size());
  for (double v : di) rep.mean_dist_stat += v / static_cast<double>(di.size());
  rep.ks_excess = ks_distance(ex, cdf);
  rep.ks_dist = ks_distance(di, cdf);
  rep.pass = rep.failed == 0 && std::abs(rep.mean_excess_stat - k) <= 0.1 * k && rep.ks_excess <= 0.05;
  return rep;
}

CriticalN critical_n_estimate(const std::vector<SweepRow>& rows, double q, double cap, std::size_t bootstrap,
                              std::uint64_t seed) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("critical_n_estimate: q must lie in (0, 1)");
  CriticalN out;
  for (const auto& [n, group] : group_by_n(rows)) {
    std::vector<double> v;
    for (const SweepRow* r : group) v.push_back(r->converged && std::isfinite(r->ratio_crb) ? r->ratio_crb : INFINITY);
    out.n.push_back(n);
    out.quantile.push_back(empirical_quantile(v, q));
    std::vector<double> boot;
    CounterRng rng(seed, static_cast<std::uint64_t>(n), bootstrap, StreamTag::Bootstrap);
    boost::random::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    std::vector<double> re(v.size());
    for (std::size_t b = 0; b < bootstrap; ++b) {
      for (double& x : re) x = v[pick(rng)];
      boot.push_back(empirical_quantile(re, q));
    }
    out.ci_lo.push_back(bootstrap ? empirical_quantile(boot, 0.025) : out.quantile.back());
    out.ci_hi.push_back(bootstrap ? empirical_quantile(boot, 0.975) : out.quantile.back());
  }
  std::size_t k = out.n.size();
  while (k > 0 && out.quantile[k - 1] <= cap) --k;
  if (k < out.n.size()) {
    out.n_crit = static_cast<double>(out.n[k]);
    out.nonincreasing_beyond = true;
    for (std::size_t j = k; j + 1 < out.n.size(); ++j) {
      out.nonincreasing_beyond = out.nonincreasing_beyond && out.ci_lo[j + 1] <= out.ci_hi[j];
    }
  }
  return out;
}

Comparison compare_losses(const std::vector<SweepRow>& a, const std::vector<SweepRow>& b, const std::string& name_a,
                          const std::string& name_b, double cap) {
  const auto ga = group_by_n(a);
  const auto gb = group_by_n(b);
  std::vector<Eigen::Index> na, nb;
  for (const auto& kv : ga) na.push_back(kv.first);
  for (const auto& kv : gb) nb.push_back(kv.first);
  if (na != nb) throw InvalidArgument("compare_losses: the two sweeps use different n grids");
  Comparison c;
  c.loss_a = name_a;
  c.loss_b = name_b;
  auto excess = [](const std::vector<const SweepRow*>& g) {
    std::vector<double> v;
    for (const SweepRow* r : g) v.push_back(r->converged ? r->excess_risk : INFINITY);
    return v;
  };
  for (Eigen::Index n : na) {
    const auto va = excess(ga.at(n));
    const auto vb = excess(gb.at(n));
    for (double q : {0.1, 0.5, 0.9}) {
      ComparisonRow row;
      row.n = n;
      row.q = q;
      row.excess_a = empirical_quantile(va, q);
      row.excess_b = empirical_quantile(vb, q);
      row.ratio = row.excess_a == row.excess_b ? 1.0 : row.excess_a / row.excess_b;
      c.rows.push_back(row);
    }
  }
  c.n_crit_a = critical_n_estimate(a, 0.9, cap, 0).n_crit;
  c.n_crit_b = critical_n_estimate(b, 0.9, cap, 0).n_crit;
  return c;
}

void write_comparison_csv(std::ostream& out, const Comparison& c) {
  CsvWriter w(out);
  w.write_row({"n", "quantile", "loss_a", "loss_b", "excess_a", "excess_b", "ratio", "n_crit_a", "n_crit_b"});
  for (const ComparisonRow& r : c.rows) {
    w.write_row({std::to_string(r.n), format_double(r.q), c.loss_a, c.loss_b, format_double(r.excess_a),
                 format_double(r.excess_b), format_double(r.ratio), format_double(c.n_crit_a), format_double(c.n_crit_b)});
  }
}

std::vector<HessianBand> hessian_concentration(const PopulationModel& model, const LossModel& loss, const Matrix& h,
                                               Eigen::Index n, std::size_t trials, std::uint64_t seed,
                                               unsigned threads) {
  const auto llt = cholesky(h, "hessian_concentration: H");
  std::vector<HessianBand> out(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    const Matrix x = gen_design(model.design, n, seed, t);
    const Vector y = gen_response(model.mechanism, x, loss, model.theta_gen, seed, t);
    const RiskEval ev = empirical_risk(loss, Dataset(x, y), model.theta_star, EvalLevel::Hessian);
    const Matrix a = llt.matrixL().solve(ev.hessian);
    Matrix m = llt.matrixL().solve(a.transpose());
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    out[t] = {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  });
  return out;
}

std::vector<std::string> sparse_header() {
  return {"lambda", "trial", "l1_error", "h_sq_error", "support_size", "outer_iters", "converged", "kkt", "support_recovered"};
}

std::vector<std::string> sparse_fields(const SparseRow& r) {
  return {format_double(r.lambda),      std::to_string(r.trial),       format_double(r.l1_error),
          format_double(r.h_sq_error),  std::to_string(r.support_size), std::to_string(r.outer_iters),
          r.converged ? "1" : "0",      r.kkt ? "1" : "0",             r.support_recovered ? "1" : "0"};
}

SparseSweepResult run_sparse_sweep(const SparseSweepSpec& spec) {
  if (spec.d < 1 || spec.s < 1 || spec.s > static_cast<std::size_t>(spec.d)) {
    throw InvalidArgument("run_sparse_sweep: need 1 <= s <= d");
  }
  if (spec.n < 2 || spec.trials < 1) throw InvalidArgument("run_sparse_sweep: need n >= 2 and trials >= 1");
  std::vector<double> lambdas;
  const double base = std::sqrt(std::log(static_cast<double>(spec.d)) / static_cast<double>(spec.n));
  for (double f : spec.lambda_factors) lambdas.push_back(f * base);
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  if (lambdas.empty() || !(lambdas.back() > 0.0)) throw InvalidArgument("run_sparse_sweep: lambda factors must be positive");

  SparseSweepResult res;
  res.theta_star = Vector::Zero(spec.d);
  {
    CounterRng rng(spec.seed, static_cast<std::uint64_t>(spec.d), spec.s, StreamTag::Support);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(spec.d));
    for (Eigen::Index j = 0; j < spec.d; ++j) idx[static_cast<std::size_t>(j)] = j;
    for (std::size_t i = 0; i < spec.s; ++i) {
      boost::random::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      res.theta_star[idx[i]] = (i % 2 == 0 ? 1.0 : -1.0) * spec.signal;
    }
  }
  PopulationModel model{DesignLaw::gaussian(Matrix::Identity(spec.d, spec.d)), ResponseMechanism::glm(LossKind::Logistic),
                        res.theta_star, res.theta_star};
  const LossModel loss = make_logistic();
  res.h = population_matrices(model, loss, res.theta_star, OracleMethod::quadrature()).h;
  res.rho = curvature_rho(model.design.sigma, res.h);

  std::vector<std::vector<SparseRow>> per_trial(spec.trials);
  parallel_for(spec.trials, spec.threads, [&](std::size_t t) {
    const Matrix x = gen_design(model.design, spec.n, spec.seed, t);
    const Vector y = gen_response(model.mechanism, x, loss, res.theta_star, spec.seed, t);
    const Dataset data(x, y);
    SparseOpts opts;
    opts.sketch_size = spec.sketch_size;
    opts.seed = stream_key(spec.seed, static_cast<std::uint64_t>(spec.n), t, StreamTag::Sketch);
    const auto path = fit_l1_path(loss, data, lambdas, opts);
    for (const SparseFit& f : path) {
      SparseRow row;
      row.lambda = f.lambda;
      row.trial = t;
      const SparseErrors e = sparse_error_metrics(f, res.theta_star, res.h);
      row.l1_error = e.l1_error;
      row.h_sq_error = e.h_sq_error;
      row.support_recovered = e.support_recovered;
      row.support_size = f.support.size();
      row.outer_iters = f.outer_iterations;
      row.converged = f.converged;
      row.kkt = kkt_certificate(loss, data, f.theta_hat, f.lambda).holds;
      per_trial[t].push_back(row);
    }
  });
  for (auto& v : per_trial) res.rows.insert(res.rows.end(), v.begin(), v.end());
  return res;
}

}  // namespace scm
