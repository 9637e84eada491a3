#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpinn/diagnostics/exp_fit.hpp"
#include "dpinn/diagnostics/piecewise.hpp"
#include "dpinn/harness/config.hpp"
#include "dpinn/harness/output.hpp"
#include "dpinn/harness/runner.hpp"

namespace {

using namespace dpinn;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::diverged_evaluation:
    case ErrorKind::diverged_training:
    case ErrorKind::solver_error:
    case ErrorKind::singular_system: return kExitRuntime;
    default: return kExitValidation;
  }
}

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> log_stride;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_stride) {
  cmd->add_option("--config", f.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "override the config seed");
  if (with_stride) cmd->add_option("--log-stride", f.log_stride, "trace logging stride");
}

std::string prepare_out(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::invalid_input, "cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_json(const std::string& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

ExperimentConfig load_with_overrides(const CommonFlags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.set_seed(*f.seed);
  if (f.log_stride) {
    if (*f.log_stride < 1) throw Error(ErrorKind::invalid_config, "--log-stride must be >= 1");
    if (c.train) c.train->log_stride = *f.log_stride;
  }
  return c;
}

int report_status(const RunReport& r) {
  std::cout << r.method << " status=" << r.status;
  if (r.has_loss) std::cout << " L_total=" << format_number(r.loss.total);
  if (r.errors.available) std::cout << " max_err=" << format_number(r.errors.max_err);
  std::cout << " wall_time=" << r.wall_time << "s\n";
  if (r.status == "ok") return kExitOk;
  std::cerr << "error: " << r.message << '\n';
  return kExitRuntime;
}

int cmd_solve(const CommonFlags& f, int samples) {
  const ExperimentConfig c = load_with_overrides(f);
  if (!c.train) throw Error(ErrorKind::invalid_config, "solve needs a config with a 'train' block (use elm otherwise)");
  const std::string dir = prepare_out(f.out);
  const RunOutcome o = run_experiment(c);
  write_trace_csv(join(dir, "trace.csv"), o.trace);
  if (o.model) write_solution_csv(join(dir, "solution.csv"), c.problem, o.predictor(), samples);
  write_json(join(dir, "report.json"), report_to_json(o.report));
  write_json(join(dir, "config.json"), config_to_json(c));
  return report_status(o.report);
}

int cmd_elm(const CommonFlags& f, int samples) {
  const ExperimentConfig c = load_with_overrides(f);
  if (!c.elm) throw Error(ErrorKind::invalid_config, "elm needs a config with an 'elm' block");
  const std::string dir = prepare_out(f.out);
  const RunOutcome o = run_experiment(c);
  if (o.elm) write_solution_csv(join(dir, "solution.csv"), c.problem, o.predictor(), samples);
  write_json(join(dir, "report.json"), report_to_json(o.report));
  write_json(join(dir, "config.json"), config_to_json(c));
  return report_status(o.report);
}

int cmd_sweep(const CommonFlags& f, int jobs) {
  SweepConfig s = load_sweep(f.config);
  if (f.seed) {
    ExperimentConfig base = config_from_json(s.base);
    base.set_seed(*f.seed);
    s.base = config_to_json(base);
  }
  if (f.log_stride) s.base["train"]["log_stride"] = *f.log_stride;
  const std::string dir = prepare_out(f.out);
  const auto rows = run_sweep(s, resolve_jobs(jobs));
  write_summary_csv(join(dir, "summary.csv"), rows);
  write_timings_csv(join(dir, "timings.csv"), rows);
  int failed = 0;
  for (const auto& r : rows) failed += r.report.status != "ok";
  std::cout << "sweep cells=" << rows.size() << " failed=" << failed << '\n';
  return kExitOk;
}

const SteadyAdvDiff& steady_problem(const ExperimentConfig& c, const char* cmd) {
  const auto* p = std::get_if<SteadyAdvDiff>(&c.problem);
  if (!p) throw Error(ErrorKind::invalid_config, std::string(cmd) + " needs a steady problem");
  return *p;
}

ExperimentConfig load_problem_only(const std::string& path) {
  Json j = parse_json_text(read_text_file(path), path);
  // Only the problem block matters here; accept any complete config.
  if (j.is_object() && !j.contains("train") && !j.contains("elm")) j["train"] = Json::object();
  return config_from_json(j);
}

int cmd_baseline(const CommonFlags& f, int cells) {
  const ExperimentConfig c = load_problem_only(f.config);
  const SteadyAdvDiff& p = steady_problem(c, "baseline");
  const std::string dir = prepare_out(f.out);
  write_baseline_csv(join(dir, "baseline.csv"), p, cells);
  std::cout << "baseline cells=" << cells << " Pe=" << format_number(peclet(p.c, (p.x_right - p.x_left) / cells, p.eps))
            << '\n';
  return kExitOk;
}

struct PiecewiseFlags {
  int panels = 10;
  int degree = 2;
  int per_panel = -1;  // -1: counts that make the system square
  std::string governing = "flux";
  std::string method = "pinv";
};

int cmd_piecewise(const CommonFlags& f, const PiecewiseFlags& pf) {
  const ExperimentConfig c = load_problem_only(f.config);
  const SteadyAdvDiff& p = steady_problem(c, "diagnose piecewise");
  if (pf.panels < 1) throw Error(ErrorKind::invalid_config, "--panels must be >= 1");
  const auto counts = pf.per_panel < 0 ? square_collocation_counts(pf.panels, pf.degree)
                                       : std::vector<int>(static_cast<std::size_t>(pf.panels), pf.per_panel);
  const PiecewiseSystem sys = piecewise_system(p, pf.panels, pf.degree, counts, parse_governing(pf.governing));
  const PiecewiseFit fit = piecewise_solve(sys, parse_solve_method(pf.method));
  const std::string dir = prepare_out(f.out);
  write_solution_csv(join(dir, "piecewise.csv"), c.problem, [&](double x, double) { return fit(x); });
  const ErrorMetrics m = error_metrics(c.problem, [&](double x, double) { return fit(x); });
  Eigen::VectorXd coefs = Eigen::Map<const Eigen::VectorXd>(fit.coefs.data(), static_cast<Eigen::Index>(fit.coefs.size()));
  Json j{{"probe", "piecewise"},
         {"panels", pf.panels},
         {"degree", pf.degree},
         {"governing", pf.governing},
         {"method", pf.method},
         {"rows", sys.matrix.rows()},
         {"cols", sys.matrix.cols()},
         {"residual_norm", (sys.matrix * coefs - sys.rhs).norm()},
         {"max_err", m.max_err},
         {"l2_err", m.l2_err}};
  write_json(join(dir, "report.json"), j);
  std::cout << "piecewise rows=" << sys.matrix.rows() << " cols=" << sys.matrix.cols()
            << " max_err=" << format_number(m.max_err) << '\n';
  return kExitOk;
}

struct ExpFitFlags {
  std::string method = "gna";
  double lambda = 0.0;
  int points = 21;
  int max_iters = 200;
  double tol = 1e-12;
  std::vector<double> init;
};

int cmd_expfit(const CommonFlags& f, const ExpFitFlags& ef) {
  const ExperimentConfig c = load_problem_only(f.config);
  const SteadyAdvDiff& p = steady_problem(c, "diagnose expfit");
  if (ef.points < 3) throw Error(ErrorKind::invalid_config, "--points must be >= 3");
  std::vector<double> xs = linspace({p.x_left, p.x_right}, ef.points, true), ys;
  for (double x : xs) ys.push_back(exact_steady(p, x));
  const ExpParams truth = exp_params_of(p);
  ExpParams init = truth;
  if (!ef.init.empty()) {
    if (ef.init.size() != 3) throw Error(ErrorKind::invalid_config, "--init takes three values a,b,c");
    init = {ef.init[0], ef.init[1], ef.init[2]};
  }
  ExpFitOptions o;
  o.method = parse_exp_fit_method(ef.method);
  o.lambda = ef.lambda;
  o.max_iters = ef.max_iters;
  o.tol = ef.tol;
  const ExpFitResult r = exp_fit(xs, ys, init, o);
  const std::string dir = prepare_out(f.out);
  Json j{{"probe", "expfit"},
         {"method", ef.method},
         {"status", to_string(r.status)},
         {"iterations", r.iterations},
         {"a", r.params.a},
         {"b", r.params.b},
         {"c", r.params.c},
         {"a_exact", truth.a},
         {"b_exact", truth.b},
         {"c_exact", truth.c},
         {"loss", r.loss}};
  write_json(join(dir, "expfit.json"), j);
  std::cout << "expfit method=" << ef.method << " status=" << to_string(r.status) << " iterations=" << r.iterations
            << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed collocation lab: DPINN training, ELM solves, baselines and diagnostics"};
  app.require_subcommand(1);

  CommonFlags solve_f, sweep_f, base_f, elm_f, pw_f, ef_f;
  int samples = 101, jobs = 0, cells = 20;
  PiecewiseFlags pw;
  ExpFitFlags ef;

  auto* solve = app.add_subcommand("solve", "train one DPINN experiment");
  add_common(solve, solve_f, true);
  solve->add_option("--samples", samples, "solution samples per axis");

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep, sweep_f, true);
  sweep->add_option("--jobs", jobs, "parallel cells (default: DPINN_LAB_JOBS or 1)");

  auto* baseline = app.add_subcommand("baseline", "finite-difference baselines against the exact solution");
  add_common(baseline, base_f, false);
  baseline->add_option("--cells", cells, "grid cells");

  auto* elm = app.add_subcommand("elm", "single-shot ELM solve");
  add_common(elm, elm_f, false);
  elm->add_option("--samples", samples, "solution samples");

  auto* diagnose = app.add_subcommand("diagnose", "piecewise least-norm and exponential-fit probes");
  diagnose->require_subcommand(1);
  auto* piecewise = diagnose->add_subcommand("piecewise", "piecewise polynomial collocation");
  add_common(piecewise, pw_f, false);
  piecewise->add_option("--panels", pw.panels);
  piecewise->add_option("--degree", pw.degree)->check(CLI::IsMember({1, 2}));
  piecewise->add_option("--per-panel", pw.per_panel, "collocation points per panel (default: square system)");
  piecewise->add_option("--governing", pw.governing)->check(CLI::IsMember({"residual", "flux"}));
  piecewise->add_option("--method", pw.method)->check(CLI::IsMember({"exact", "pinv"}));
  auto* expfit = diagnose->add_subcommand("expfit", "fit a*exp(b*x)+c to exact-solution samples");
  add_common(expfit, ef_f, false);
  expfit->add_option("--method", ef.method)->check(CLI::IsMember({"gna", "marquardt", "lma", "tikhonov"}));
  expfit->add_option("--lambda", ef.lambda);
  expfit->add_option("--points", ef.points);
  expfit->add_option("--max-iters", ef.max_iters);
  expfit->add_option("--tol", ef.tol);
  expfit->add_option("--init", ef.init, "initial a b c")->expected(3)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*solve) return cmd_solve(solve_f, samples);
    if (*sweep) return cmd_sweep(sweep_f, jobs);
    if (*baseline) return cmd_baseline(base_f, cells);
    if (*elm) return cmd_elm(elm_f, samples);
    if (*piecewise) return cmd_piecewise(pw_f, pw);
    if (*expfit) return cmd_expfit(ef_f, ef);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
