// scm: command line front end for the loss audit, single fits and the
// Monte Carlo experiments.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scm/csv.hpp"
#include "scm/erm.hpp"
#include "scm/errors.hpp"
#include "scm/harness.hpp"
#include "scm/loss.hpp"
#include "scm/parallel.hpp"
#include "scm/sc_audit.hpp"
#include "scm/sparse.hpp"
#include "scm/spec_io.hpp"
#include "scm/stat_oracle.hpp"
#include "scm/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw scm::InvalidArgument("cannot write " + p.string());
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scm::InvalidArgument("cannot open " + path);
  return json::parse(in);
}

std::vector<double> vec(const scm::Vector& v) { return {v.data(), v.data() + v.size()}; }

struct SweepFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
  bool reproducible = false;
  double cap = 4.0;
  double quantile = 0.9;
  std::size_t bootstrap = 1000;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--out", f.out, "output directory (default: config \"outputs\")");
  cmd->add_option("--threads", f.threads, "worker threads, 0 = hardware");
  cmd->add_flag("--reproducible", f.reproducible, "omit timing, thread and output-path metadata from summaries");
  cmd->add_option("--cap", f.cap, "ratio_crb cap defining the critical n")->check(CLI::PositiveNumber);
  cmd->add_option("--quantile", f.quantile, "ratio_crb quantile")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--bootstrap", f.bootstrap, "bootstrap resamples for quantile CIs");
}

scm::ExperimentSpec load_spec(const SweepFlags& f) {
  scm::ExperimentSpec spec = scm::load_experiment_spec(f.config);
  if (f.seed) spec.seed = *f.seed;
  if (!f.out.empty()) spec.outputs = f.out;
  spec.threads = f.threads;
  return spec;
}

std::vector<scm::SweepRow> sweep_to_csv(scm::ExperimentSpec& spec, const fs::path& csv_path) {
  std::ofstream out = open_out(csv_path);
  scm::CsvWriter w(out);
  w.write_row(scm::sweep_header());
  return scm::run_sweep(spec, [&](const scm::SweepRow& r) {
    w.write_row(scm::sweep_fields(r));
    out.flush();
  });
}

json critical_json(const scm::CriticalN& c) {
  json j;
  j["n_crit"] = std::isfinite(c.n_crit) ? json(c.n_crit) : json("inf");
  j["nonincreasing_beyond"] = c.nonincreasing_beyond;
  return j;
}

void write_quantiles(const fs::path& dir, const std::vector<scm::SweepRow>& rows, const SweepFlags& f) {
  std::map<Eigen::Index, std::vector<double>> by_n;
  for (const auto& r : rows) by_n[r.n].push_back(r.converged ? r.ratio_crb : INFINITY);
  const std::vector<double> qs{0.1, 0.5, 0.9};
  std::ofstream out = open_out(dir / "quantiles.csv");
  scm::CsvWriter w(out);
  w.write_row({"n", "q10", "q50", "q90"});
  std::vector<scm::PlotSeries> series(qs.size());
  for (std::size_t k = 0; k < qs.size(); ++k) series[k].name = "q" + std::to_string(static_cast<int>(qs[k] * 100));
  for (const auto& [n, v] : by_n) {
    std::vector<std::string> fields{std::to_string(n)};
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const double q = scm::empirical_quantile(v, qs[k]);
      fields.push_back(scm::format_double(q));
      series[k].x.push_back(static_cast<double>(n));
      series[k].y.push_back(q);
    }
    w.write_row(fields);
  }
  scm::PlotSeries cap{"cap", {}, {}};
  for (const auto& [n, v] : by_n) {
    cap.x.push_back(static_cast<double>(n));
    cap.y.push_back(f.cap);
  }
  series.push_back(cap);
  std::ofstream svg = open_out(dir / "ratio_crb.svg");
  scm::write_loglog_svg(svg, series, "ratio_crb quantiles", "n", "excess * 2n / d_eff");
}

int cmd_verify_losses(std::size_t points, const std::string& out_path) {
  json report = json::array();
  bool all = true;
  for (const auto& loss : scm::registered_losses()) {
    scm::GridSpec grid = scm::default_grid(loss);
    grid.points = points;
    const scm::ScReport r = scm::verify_sc(loss, grid);
    all = all && (r.passed || r.skipped);
    report.push_back(scm::to_json(r));
  }
  json j{{"passed", all}, {"losses", report}};
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    open_out(out_path) << j.dump(2) << '\n';
  }
  return all ? 0 : 1;
}

int cmd_fit(const std::string& data_path, const std::string& loss_name, double scale, std::optional<double> lambda,
            const std::string& out_path) {
  std::ifstream in(data_path);
  if (!in) throw scm::InvalidArgument("cannot open " + data_path);
  const scm::CsvTable t = scm::read_numeric_csv(in);
  if (t.rows.empty() || t.header.size() < 2) throw scm::InvalidArgument("fit: need a response column and at least one design column");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto d = static_cast<Eigen::Index>(t.header.size() - 1);
  scm::Matrix x(n, d);
  scm::Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = t.rows[i][0];
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = t.rows[i][k + 1];
  }
  const scm::LossModel loss = scm::make_loss(loss_name, scale);
  const scm::Dataset data(std::move(x), std::move(y));
  json j{{"loss", loss.name()}, {"n", n}, {"d", d}};
  if (lambda) {
    const scm::SparseFit f = scm::fit_l1(loss, data, *lambda);
    const scm::KktReport kkt = scm::kkt_certificate(loss, data, f.theta_hat, *lambda);
    j["lambda"] = *lambda;
    j["theta_hat"] = vec(f.theta_hat);
    j["converged"] = f.converged;
    j["outer_iterations"] = f.outer_iterations;
    j["objective"] = f.objective;
    j["kkt_holds"] = kkt.holds;
  } else {
    const scm::FitResult f = scm::fit_erm(loss, data);
    j["theta_hat"] = vec(f.theta_hat);
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["final_decrement"] = f.final_decrement;
    j["risk"] = scm::empirical_risk(loss, data, f.theta_hat).value;
  }
  if (!out_path.empty()) {
    std::ofstream out = open_out(out_path);
    scm::CsvWriter w(out);
    w.write_row({"coordinate", "name", "estimate"});
    const auto th = j["theta_hat"].get<std::vector<double>>();
    for (std::size_t k = 0; k < th.size(); ++k) w.write_row({std::to_string(k), t.header[k + 1], scm::format_double(th[k])});
  }
  std::cout << j.dump(2) << '\n';
  return j["converged"].get<bool>() ? 0 : 1;
}

int cmd_sweep(const SweepFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  scm::ExperimentSpec spec = load_spec(f);
  const fs::path dir = spec.outputs;
  fs::create_directories(dir);
  const auto rows = sweep_to_csv(spec, dir / "sweep.csv");
  write_quantiles(dir, rows, f);
  const scm::CriticalN c = scm::critical_n_estimate(rows, f.quantile, f.cap, f.bootstrap, spec.seed);
  std::size_t failed = 0, pre = 0, held = 0;
  for (const auto& r : rows) {
    failed += !r.converged;
    if (r.localization_precondition) {
      ++pre;
      held += r.localization_held;
    }
  }
  json j{{"spec", scm::to_json(spec)},
         {"rows", rows.size()},
         {"failed", failed},
         {"localization_precondition_rows", pre},
         {"localization_held_rows", held},
         {"critical_n", critical_json(c)}};
  if (f.reproducible) {
    j["spec"].erase("outputs");
  } else {
    j["threads"] = scm::resolve_threads(spec.threads);
    j["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  open_out(dir / "summary.json") << j.dump(2) << '\n';
  std::cout << j["critical_n"].dump() << '\n';
  return 0;
}

int cmd_wilks(const SweepFlags& f) {
  const scm::ExperimentSpec spec = load_spec(f);
  const scm::WilksReport r = scm::wilks_check(spec);
  json j{{"n", r.n},
         {"trials", r.trials},
         {"failed", r.failed},
         {"d", r.d},
         {"mean_2n_excess", r.mean_excess_stat},
         {"mean_n_h_dist_sq", r.mean_dist_stat},
         {"ks_excess", r.ks_excess},
         {"ks_h_dist", r.ks_dist},
         {"pass", r.pass}};
  if (!f.out.empty()) open_out(fs::path(f.out) / "wilks.json") << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return r.pass ? 0 : 1;
}

int cmd_theory(double t_max, std::size_t points, const std::string& out_path, const std::string& config) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file = open_out(out_path);
    os = &file;
  }
  scm::CsvWriter w(*os);
  w.write_row({"t", "kappa", "kappa_perp", "rho_bound", "kappa_perp_times_t_plus_1", "kappa_times_1_plus_t3"});
  for (std::size_t k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.0 : t_max * static_cast<double>(k) / static_cast<double>(points - 1);
    const auto c = scm::logistic_gaussian_constants(t);
    w.write_row({scm::format_double(t), scm::format_double(c.kappa), scm::format_double(c.kappa_perp),
                 scm::format_double(c.rho_bound), scm::format_double(c.kappa_perp * (t + 1.0)),
                 scm::format_double(c.kappa * (1.0 + t * t * t))});
  }
  if (!config.empty()) {
    scm::ExperimentSpec spec = scm::load_experiment_spec(config);
    scm::resolve(spec);
    scm::TheoryOptions opts;
    opts.method = spec.oracle_method();
    opts.delta = spec.delta;
    opts.seed = spec.seed;
    const auto rep = scm::theory_report(spec.model, spec.loss, opts);
    std::cerr << scm::to_json(rep).dump(2) << '\n';
  }
  return 0;
}

int cmd_sparse(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out_dir,
               unsigned threads) {
  scm::SparseSweepSpec spec = config.empty() ? scm::SparseSweepSpec{} : scm::parse_sparse_spec(read_json(config));
  if (seed) spec.seed = *seed;
  spec.threads = threads;
  const auto res = scm::run_sparse_sweep(spec);
  const fs::path dir = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
  std::ofstream out = open_out(dir / "sparse.csv");
  scm::CsvWriter w(out);
  w.write_row(scm::sparse_header());
  std::map<double, std::vector<double>, std::greater<>> l1;
  std::size_t kkt = 0;
  for (const auto& r : res.rows) {
    w.write_row(scm::sparse_fields(r));
    l1[r.lambda].push_back(r.l1_error);
    kkt += r.kkt;
  }
  json j{{"rho", res.rho}, {"fits", res.rows.size()}, {"kkt_passed", kkt}};
  for (const auto& [lam, v] : l1) {
    j["median_l1_error"].push_back({{"lambda", lam}, {"median", scm::empirical_quantile(v, 0.5)}});
  }
  open_out(dir / "sparse_summary.json") << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_compare(const SweepFlags& fa, const std::string& config_b) {
  scm::ExperimentSpec a = load_spec(fa);
  SweepFlags fb = fa;
  fb.config = config_b;
  scm::ExperimentSpec b = load_spec(fb);
  if (a.n_grid != b.n_grid || a.trials != b.trials) throw scm::InvalidArgument("compare: n_grid and trials must match");
  const fs::path dir = a.outputs;
  fs::create_directories(dir);
  const auto ra = sweep_to_csv(a, dir / "sweep_a.csv");
  const auto rb = sweep_to_csv(b, dir / "sweep_b.csv");
  const scm::Comparison c = scm::compare_losses(ra, rb, a.loss.name(), b.loss.name(), fa.cap);
  std::ofstream out = open_out(dir / "comparison.csv");
  scm::write_comparison_csv(out, c);
  json j{{"loss_a", c.loss_a},
         {"loss_b", c.loss_b},
         {"n_crit_a", std::isfinite(c.n_crit_a) ? json(c.n_crit_a) : json("inf")},
         {"n_crit_b", std::isfinite(c.n_crit_b) ? json(c.n_crit_b) : json("inf")}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-concordant M-estimation toolkit"};
  app.require_subcommand(1);

  std::size_t audit_points = 2001;
  std::string audit_out;
  auto* verify = app.add_subcommand("verify-losses", "audit the self-concordance class of every registered loss");
  verify->add_option("--points", audit_points, "grid points per response")->check(CLI::Range(2, 10'000'000));
  verify->add_option("--out", audit_out, "JSON report path (default stdout)");

  std::string fit_data, fit_loss = "logistic", fit_out;
  double fit_scale = 1.0;
  std::optional<double> fit_lambda;
  auto* fit = app.add_subcommand("fit", "fit one estimator from a CSV file (response first, then design columns)");
  fit->add_option("--data", fit_data, "CSV file with header")->required()->check(CLI::ExistingFile);
  fit->add_option("--loss", fit_loss, "loss name");
  fit->add_option("--scale", fit_scale, "loss scale (tau or sigma)");
  fit->add_option("--lambda", fit_lambda, "l1 penalty; omitted = plain ERM");
  fit->add_option("--out", fit_out, "coefficient CSV path");

  SweepFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over the sample-size grid");
  sweep->add_option("--config", sweep_flags.config, "experiment JSON")->required()->check(CLI::ExistingFile);
  add_sweep_flags(sweep, sweep_flags);

  SweepFlags wilks_flags;
  auto* wilks = app.add_subcommand("wilks", "chi-square check at the largest grid n");
  wilks->add_option("--config", wilks_flags.config, "experiment JSON")->required()->check(CLI::ExistingFile);
  add_sweep_flags(wilks, wilks_flags);

  double theory_tmax = 50.0;
  std::size_t theory_points = 500;
  std::string theory_out, theory_config;
  auto* theory = app.add_subcommand("theory", "logistic/Gaussian curvature constants over a t-grid");
  theory->add_option("--t-max", theory_tmax, "largest t")->check(CLI::NonNegativeNumber);
  theory->add_option("--points", theory_points, "grid points")->check(CLI::PositiveNumber);
  theory->add_option("--out", theory_out, "CSV path (default stdout)");
  theory->add_option("--config", theory_config, "also print the population report for this experiment to stderr");

  std::string sparse_config, sparse_out;
  std::optional<std::uint64_t> sparse_seed;
  unsigned sparse_threads = 0;
  auto* sparse = app.add_subcommand("sparse-sweep", "l1 path experiments on sparse logistic models");
  sparse->add_option("--config", sparse_config, "sparse experiment JSON");
  sparse->add_option("--seed", sparse_seed, "override seed");
  sparse->add_option("--out", sparse_out, "output directory");
  sparse->add_option("--threads", sparse_threads, "worker threads, 0 = hardware");

  SweepFlags cmp_flags;
  std::string cmp_b;
  auto* compare = app.add_subcommand("compare", "run two sweeps on one grid and compare excess-risk quantiles");
  compare->add_option("--config-a", cmp_flags.config, "first experiment JSON")->required()->check(CLI::ExistingFile);
  compare->add_option("--config-b", cmp_b, "second experiment JSON")->required()->check(CLI::ExistingFile);
  add_sweep_flags(compare, cmp_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return cmd_verify_losses(audit_points, audit_out);
    if (*fit) return cmd_fit(fit_data, fit_loss, fit_scale, fit_lambda, fit_out);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*wilks) return cmd_wilks(wilks_flags);
    if (*theory) return cmd_theory(theory_tmax, theory_points, theory_out, theory_config);
    if (*sparse) return cmd_sparse(sparse_config, sparse_seed, sparse_out, sparse_threads);
    if (*compare) return cmd_compare(cmp_flags, cmp_b);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
