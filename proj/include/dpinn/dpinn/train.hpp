#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dpinn/dpinn/collocation.hpp"
#include "dpinn/dpinn/loss.hpp"
#include "dpinn/dpinn/model.hpp"
#include "dpinn/optim/optimizer.hpp"

namespace dpinn {

struct TrainConfig {
  OptimizerSettings optimizer{};
  int max_iters = 1000;
  /// Stop once the total loss drops below this; 0 runs all iterations.
  double stop_tol = 0.0;
  bool resample = false;
  bool continuation = false;
  int nbx_pts = 10;
  int nbt_pts = 10;
  bool include_edges = true;
  CollocationMode mode = CollocationMode::uniform;
  std::uint64_t seed = 0;
  int log_stride = 100;

  void validate() const {
    if (max_iters < 1) throw Error(ErrorKind::invalid_config, "max_iters must be at least 1");
    if (nbx_pts < 1 || nbt_pts < 1) throw Error(ErrorKind::invalid_config, "points per block must be at least 1");
    if (include_edges && (nbx_pts < 2 || nbt_pts < 2))
      throw Error(ErrorKind::invalid_config, "include_edges needs at least 2 points per block and axis");
    if (log_stride < 1) throw Error(ErrorKind::invalid_config, "log_stride must be at least 1");
    if (!(stop_tol >= 0.0)) throw Error(ErrorKind::invalid_config, "stop tolerance must be >= 0");
  }
};

struct TraceRow {
  long iter = 0;
  LossBreakdown loss;
};

using Trace = std::vector<TraceRow>;

struct TrainResult {
  BlockModel model;
  Trace trace;
  LossBreakdown final_loss;
  long iterations = 0;  // optimizer steps taken
};

/// Divergence during training, with the trace recorded up to that point.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, Trace trace)
      : Error(ErrorKind::diverged_training, what), trace_(std::move(trace)) {}
  const Trace& trace() const { return trace_; }

 private:
  Trace trace_;
};

/// Linear schedule from 1 at iteration 0 to the target at max_iters.
inline double continuation_epsilon(long iter, long max_iters, double eps_target) {
  if (max_iters <= 0) return eps_target;
  if (iter >= max_iters) return eps_target;
  return 1.0 + (eps_target - 1.0) * static_cast<double>(iter) / static_cast<double>(max_iters);
}

inline LossPoints training_points(const BlockModel& m, const TrainConfig& cfg, std::uint64_t call_index) {
  return make_loss_points(m.grid,
                          sample_collocation(m.grid, cfg.nbx_pts, cfg.nbt_pts, cfg.mode, cfg.include_edges, cfg.seed,
                                             call_index),
                          cfg.nbx_pts, cfg.nbt_pts);
}

/// Runs the optimizer on the model's total loss. Iterations 0..max_iters are
/// evaluated; the trace holds every log_stride-th evaluation plus the last.
inline TrainResult train(BlockModel model, const TrainConfig& cfg) {
  cfg.validate();
  const bool lma = cfg.optimizer.kind == OptimizerKind::lma;
  if (lma) require_shallow(model);
  const Problem target_problem = model.problem;
  const double eps_target = diffusivity(target_problem);
  if (cfg.continuation && std::holds_alternative<UnsteadyAdvection>(target_problem))
    throw Error(ErrorKind::invalid_config, "continuation needs a problem with diffusivity");

  OptimizerState opt(cfg.optimizer, model.parameter_count());
  TrainResult out{model, {}, {}, 0};
  BlockModel& m = out.model;
  LossPoints pts = training_points(m, cfg, 0);
  const bool redraw = cfg.resample && cfg.mode == CollocationMode::random;
  std::vector<double> params = m.flatten();
  std::vector<double> grad;
  LossEvaluator eval(m);

  for (long it = 0;; ++it) {
    if (redraw && it > 0) pts = training_points(m, cfg, static_cast<std::uint64_t>(it));
    if (cfg.continuation) m.problem = with_diffusivity(target_problem, continuation_epsilon(it, cfg.max_iters, eps_target));

    LossBreakdown lb;
    try {
      lb = eval.evaluate(pts, grad);
    } catch (const Error& e) {
      throw TrainingDiverged(std::string(e.what()) + " at iteration " + std::to_string(it), out.trace);
    }
    const bool last = it >= cfg.max_iters || (cfg.stop_tol > 0.0 && lb.total < cfg.stop_tol);
    if (it % cfg.log_stride == 0 || last) out.trace.push_back({it, lb});
    out.final_loss = lb;
    out.iterations = it;
    if (last) break;

    try {
      if (!lma) {
        opt.step_first_order(params, grad);
      } else {
        Eigen::VectorXd r, jtr;
        Eigen::MatrixXd jtj;
        eval.normal_equations(pts, r, jtj, jtr);
        BlockModel probe = m;
        LossEvaluator probe_eval(probe);
        opt.step_lma_normal(params, r.squaredNorm(), jtj, jtr, [&](std::span<const double> trial) {
          Eigen::VectorXd rt;
          try {
            probe.unflatten(trial);
            probe_eval.least_squares(pts, rt, nullptr);
          } catch (const Error&) {
            rt = Eigen::VectorXd::Constant(r.size(), std::numeric_limits<double>::infinity());
          }
          return rt;
        });
      }
      m.unflatten(params);
    } catch (const TrainingDiverged&) {
      throw;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::singular_system) throw;
      throw TrainingDiverged(std::string(e.what()) + " at iteration " + std::to_string(it), out.trace);
    }
  }
  m.problem = target_problem;
  return out;
}

/// Doubles the x-block count; both children of a parent block start from
/// the parent's parameters.
inline BlockModel split_model(const BlockModel& parent) {
  BlockModel child = parent;
  child.grid.nbx = parent.grid.nbx * 2;
  child.nets.clear();
  child.linear_coefs.clear();
  for (int j = 0; j < child.grid.nbt; ++j)
    for (int i = 0; i < child.grid.nbx; ++i) {
      const int src = parent.grid.index(i / 2, j);
      child.nets.push_back(parent.nets[static_cast<std::size_t>(src)]);
      if (parent.options.trial == TrialMode::linear_augmented)
        child.linear_coefs.push_back(parent.linear_coefs[static_cast<std::size_t>(src)]);
    }
  if (parent.options.trial == TrialMode::boundary_interface_forced) {
    // Old interfaces keep their values; new midpoints interpolate the parent.
    child.interface_values.clear();
    for (int i = 1; i < child.grid.nbx; ++i) child.interface_values.push_back(predict(parent, child.grid.x_edge(i)));
  }
  return child;
}

/// Trains at `start_nbx` blocks, then repeatedly doubles and retrains until
/// the target block count is reached. The returned model is warm-started at
/// the target count and not trained there (except when the target equals
/// the start count). `on_split(parent, child)` observes every split.
inline BlockModel recurrent_split_init(
    const Problem& problem, const BlockGrid& target, const Architecture& arch, const ModelOptions& options,
    const TrainConfig& cfg, int start_nbx = 1,
    const std::function<void(const BlockModel&, const BlockModel&)>& on_split = {}) {
  if (start_nbx < 1 || target.nbx < start_nbx || target.nbx % start_nbx != 0)
    throw Error(ErrorKind::invalid_config, "target block count must be the start count times a power of 2");
  const int ratio = target.nbx / start_nbx;
  if ((ratio & (ratio - 1)) != 0)
    throw Error(ErrorKind::invalid_config, "target block count must be the start count times a power of 2");
  BlockGrid g = target;
  g.nbx = start_nbx;
  BlockModel m = build_model(problem, g, arch, options, cfg.seed);
  m = train(std::move(m), cfg).model;
  while (m.grid.nbx < target.nbx) {
    BlockModel child = split_model(m);
    if (on_split) on_split(m, child);
    if (child.grid.nbx == target.nbx) return child;
    m = train(std::move(child), cfg).model;
  }
  return m;
}

}  // namespace dpinn
