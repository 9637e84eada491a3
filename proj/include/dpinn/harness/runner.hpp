#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dpinn/dpinn/train.hpp"
#include "dpinn/elm/elm.hpp"
#include "dpinn/harness/config.hpp"
#include "dpinn/harness/output.hpp"

namespace dpinn {

struct RunReport {
  std::string method;         // "dpinn" or "elm"
  std::string status = "ok";  // ok, diverged, singular, error
  std::string message;
  LossBreakdown loss;
  bool has_loss = false;
  ErrorMetrics errors;
  double wall_time = 0.0;
  long iterations = 0;
  long max_iters = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Flat key-value form of a report.
inline Json report_to_json(const RunReport& r) {
  Json j;
  j["method"] = r.method;
  j["status"] = r.status;
  j["message"] = r.message;
  auto num = [](double v) -> Json { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  j["L_total"] = r.has_loss ? num(r.loss.total) : Json(nullptr);
  for (Term t : kAllTerms) j["L_" + std::string(to_string(t))] = r.has_loss ? num(r.loss[t]) : Json(nullptr);
  j["g_total"] = r.has_loss ? num(r.loss.grad_norm_total) : Json(nullptr);
  j["max_err"] = r.errors.available ? num(r.errors.max_err) : Json(nullptr);
  j["l2_err"] = r.errors.available ? num(r.errors.l2_err) : Json(nullptr);
  j["wall_time"] = r.wall_time;
  j["iterations"] = r.iterations;
  j["max_iters"] = r.max_iters;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  return j;
}

struct RunOutcome {
  RunReport report;
  std::optional<BlockModel> model;
  std::optional<ElmNetwork> elm;
  Trace trace;

  Predictor predictor() const {
    if (model) return [m = &*model](double x, double t) { return predict(*m, x, t); };
    if (elm) return [e = &*elm](double x, double) { return elm_predict(*e, x); };
    return {};
  }
};

namespace detail {

inline RunOutcome run_dpinn(const ExperimentConfig& c) {
  RunOutcome out;
  out.report.method = "dpinn";
  const TrainConfig tc = train_config_of(c);
  out.report.max_iters = tc.max_iters;
  const BlockGrid grid = BlockGrid::for_problem(c.problem, c.model.nbx, c.model.nbt);
  const Architecture arch = architecture_of(c);
  const ModelOptions opts = model_options_of(c);
  try {
    BlockModel start = c.train->recurrent_split ? recurrent_split_init(c.problem, grid, arch, opts, tc)
                                                : build_model(c.problem, grid, arch, opts, tc.seed);
    TrainResult res = train(std::move(start), tc);
    out.trace = std::move(res.trace);
    out.report.loss = res.final_loss;
    out.report.has_loss = true;
    out.report.iterations = res.iterations;
    out.model = std::move(res.model);
  } catch (const TrainingDiverged& e) {
    out.report.status = "diverged";
    out.report.message = e.what();
    out.trace = e.trace();
    if (!out.trace.empty()) {
      out.report.loss = out.trace.back().loss;
      out.report.has_loss = true;
      out.report.iterations = out.trace.back().iter;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_system) throw;
    out.report.status = "singular";
    out.report.message = e.what();
  }
  return out;
}

inline RunOutcome run_elm(const ExperimentConfig& c) {
  RunOutcome out;
  out.report.method = "elm";
  const ElmSpec& e = *c.elm;
  const auto& p = std::get<SteadyAdvDiff>(c.problem);
  ElmOptions o;
  o.neurons_per_block = e.neurons;
  o.gain = e.gain;
  o.normalize = c.model.normalize;
  o.include_edges = e.include_edges;
  auto [net, sys] = assemble_elm_dpinn(p, c.model.nbx, e.pts, e.seed, o);
  try {
    const Eigen::VectorXd w = e.solver == SolveMethod::exact ? solve_exact(sys, e.rcond) : solve_pinv(sys, e.tau);
    set_weights(net, w);
    out.elm = std::move(net);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::singular_system) throw;
    out.report.status = "singular";
    out.report.message = err.what();
  }
  return out;
}

}  // namespace detail

/// Runs one experiment. Divergence and singular solves are reported in the
/// status field; configuration errors propagate.
inline RunOutcome run_experiment(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out = c.train ? detail::run_dpinn(c) : detail::run_elm(c);
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report.config_hash = config_hash(c);
  out.report.seed = c.seed();
  if (out.model || out.elm) out.report.errors = error_metrics(c.problem, out.predictor());
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
  std::string path;  // dotted config path, e.g. "model.nbx"
  std::vector<Json> values;
};

struct SweepConfig {
  Json base;
  std::vector<SweepAxis> axes;
};

struct SweepCell {
  std::vector<std::pair<std::string, Json>> assignment;
  ExperimentConfig config;
};

struct SweepRow {
  std::vector<std::pair<std::string, Json>> assignment;
  RunReport report;
};

inline SweepConfig sweep_from_text(const std::string& text, const std::string& origin) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::invalid_config,
                origin + ": malformed JSON at line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::invalid_config, "sweep config must be an object");
  SweepConfig s;
  for (const auto& [k, v] : j.items()) {
    if (k == "base") {
      s.base = Json::parse(v.dump());
    } else if (k == "axes") {
      if (!v.is_object()) throw Error(ErrorKind::invalid_config, "sweep field 'axes' must be an object");
      for (const auto& [path, vals] : v.items()) {
        if (!vals.is_array() || vals.empty())
          throw Error(ErrorKind::invalid_config, "sweep axis '" + path + "' must be a non-empty array");
        SweepAxis a{path, {}};
        for (const auto& x : vals) a.values.push_back(Json::parse(x.dump()));
        s.axes.push_back(std::move(a));
      }
    } else {
      throw Error(ErrorKind::invalid_config, "unknown config key '" + k + "'");
    }
  }
  if (s.base.is_null()) throw Error(ErrorKind::invalid_config, "sweep config needs a 'base' block");
  return s;
}

inline SweepConfig load_sweep(const std::string& path) { return sweep_from_text(read_text_file(path), path); }

namespace detail {

inline Json::json_pointer axis_pointer(const std::string& path) {
  std::string ptr;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    ptr += "/" + path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return Json::json_pointer(ptr);
}

inline std::uint64_t assignment_key(std::vector<std::pair<std::string, Json>> assignment) {
  std::sort(assignment.begin(), assignment.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string text;
  for (const auto& [k, v] : assignment) text += k + "=" + v.dump() + ";";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Cartesian product of the axes, first axis slowest. Each cell's seed is
/// derived from the base seed and its sorted axis assignment, so reordering
/// axes reorders rows without changing any of them. A sweep with no axes is
/// a single cell run with the base seed; an explicit seed axis is used as
/// given.
inline std::vector<SweepCell> expand_sweep(const SweepConfig& s) {
  const ExperimentConfig base_cfg = config_from_json(s.base);
  const Json canonical = config_to_json(base_cfg);
  for (const auto& a : s.axes) {
    const auto ptr = detail::axis_pointer(a.path);
    if (!canonical.contains(ptr) || canonical.at(ptr).is_object())
      throw Error(ErrorKind::invalid_config, "sweep axis '" + a.path + "' does not name a config field");
  }
  std::vector<SweepCell> cells;
  std::vector<std::size_t> idx(s.axes.size(), 0);
  while (true) {
    SweepCell cell;
    Json j = canonical;
    bool seed_axis = false;
    for (std::size_t k = 0; k < s.axes.size(); ++k) {
      const Json& v = s.axes[k].values[idx[k]];
      j[detail::axis_pointer(s.axes[k].path)] = v;
      cell.assignment.emplace_back(s.axes[k].path, v);
      if (s.axes[k].path == "train.seed" || s.axes[k].path == "elm.seed") seed_axis = true;
    }
    try {
      cell.config = config_from_json(j);
    } catch (const Error& e) {
      std::string where;
      for (const auto& [k, v] : cell.assignment) where += " " + k + "=" + v.dump();
      throw Error(ErrorKind::invalid_config, std::string(e.what()) + " (sweep cell" + where + ")");
    }
    if (!cell.assignment.empty() && !seed_axis)
      cell.config.set_seed(derive_seed(base_cfg.seed(), {detail::assignment_key(cell.assignment)}));
    cells.push_back(std::move(cell));
    std::size_t k = s.axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < s.axes[k].values.size()) break;
      idx[k] = 0;
      if (k == 0) return cells;
    }
    if (s.axes.empty()) return cells;
  }
}

/// Worker count from an explicit request, else DPINN_LAB_JOBS, else 1.
inline int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DPINN_LAB_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw Error(ErrorKind::invalid_config, "DPINN_LAB_JOBS must be a positive integer");
  }
  return 1;
}

/// Runs every cell on up to `jobs` threads; rows come back in cell order.
inline std::vector<SweepRow> run_sweep(const SweepConfig& s, int jobs = 1) {
  const std::vector<SweepCell> cells = expand_sweep(s);
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      rows[i].assignment = cells[i].assignment;
      try {
        rows[i].report = run_experiment(cells[i].config).report;
      } catch (const Error& e) {
        RunReport r;
        r.method = cells[i].config.train ? "dpinn" : "elm";
        r.status = "error";
        r.message = e.what();
        r.config_hash = config_hash(cells[i].config);
        r.seed = cells[i].config.seed();
        r.max_iters = cells[i].config.train ? cells[i].config.train->max_iters : 0;
        rows[i].report = r;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

namespace detail {

inline std::string csv_field(const Json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : (v.is_number_float() ? format_number(v.get<double>()) : v.dump());
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return s;
}

}  // namespace detail

/// Axis columns in sorted path order, then status, losses, errors and
/// provenance. Wall time is left out so reruns are byte-identical.
inline void write_summary_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_output(path);
  std::vector<std::string> axes;
  if (!rows.empty())
    for (const auto& [k, v] : rows.front().assignment) axes.push_back(k);
  std::sort(axes.begin(), axes.end());
  for (const auto& a : axes) out << a << ',';
  out << "status,L_total";
  for (Term t : kAllTerms) out << ",L_" << to_string(t);
  out << ",max_err,l2_err,iterations,max_iters,config_hash,seed\n";
  for (const auto& row : rows) {
    for (const auto& a : axes)
      for (const auto& [k, v] : row.assignment)
        if (k == a) out << detail::csv_field(v) << ',';
    const RunReport& r = row.report;
    const double nan = std::nan("");
    out << r.status << ',' << format_number(r.has_loss ? r.loss.total : nan);
    for (Term t : kAllTerms) out << ',' << format_number(r.has_loss ? r.loss[t] : nan);
    out << ',' << format_number(r.errors.max_err) << ',' << format_number(r.errors.l2_err) << ',' << r.iterations << ','
        << r.max_iters << ',' << r.config_hash << ',' << r.seed << '\n';
  }
}

inline void write_timings_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_output(path);
  out << "cell,wall_time\n";
  for (std::size_t i = 0; i < rows.size(); ++i) out << i << ',' << format_number(rows[i].report.wall_time) << '\n';
}

}  // namespace dpinn
