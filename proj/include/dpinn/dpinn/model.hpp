#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpinn/net/dense_net.hpp"
#include "dpinn/problems/problem.hpp"
#include "dpinn/util/random.hpp"

namespace dpinn {

/// Uniform tiling of the (x) or (x, t) domain into nbx x nbt blocks.
/// Block (i, j) has flat index j * nbx + i.
struct BlockGrid {
  int nbx = 1;
  int nbt = 1;
  Range x{0.0, 1.0};
  Range t{0.0, 0.0};

  static BlockGrid for_problem(const Problem& p, int nbx, int nbt = 1) {
    if (nbx < 1 || nbt < 1) throw Error(ErrorKind::invalid_config, "block counts must be at least 1");
    if (is_steady(p) && nbt != 1) throw Error(ErrorKind::invalid_config, "steady problems use a single t block");
    return {nbx, nbt, x_range(p), t_range(p)};
  }

  int count() const { return nbx * nbt; }
  int index(int i, int j) const { return j * nbx + i; }
  int column(int block) const { return block % nbx; }
  int row(int block) const { return block / nbx; }
  double dx() const { return x.length() / nbx; }
  double dt() const { return t.length() / nbt; }

  double x_edge(int i) const { return i >= nbx ? x.hi : x.lo + dx() * i; }
  double t_edge(int j) const { return j >= nbt ? t.hi : t.lo + dt() * j; }
  Range block_x(int i) const { return {x_edge(i), x_edge(i + 1)}; }
  Range block_t(int j) const { return {t_edge(j), t_edge(j + 1)}; }

  /// Owning column of x: a shared edge belongs to the later block, the
  /// global right edge to the last one.
  int column_of(double xv) const {
    if (xv < x.lo || xv > x.hi) throw Error(ErrorKind::domain_error, "x outside the block grid");
    int i = static_cast<int>(std::floor((xv - x.lo) / dx()));
    i = std::clamp(i, 0, nbx - 1);
    while (i > 0 && xv < x_edge(i)) --i;
    while (i < nbx - 1 && xv >= x_edge(i + 1)) ++i;
    return i;
  }

  int row_of(double tv) const {
    if (nbt == 1) return 0;
    if (tv < t.lo || tv > t.hi) throw Error(ErrorKind::domain_error, "t outside the block grid");
    int j = static_cast<int>(std::floor((tv - t.lo) / dt()));
    j = std::clamp(j, 0, nbt - 1);
    while (j > 0 && tv < t_edge(j)) --j;
    while (j < nbt - 1 && tv >= t_edge(j + 1)) ++j;
    return j;
  }

  int owner(Point p) const { return index(column_of(p.x), row_of(p.t)); }
};

enum class TrialMode { plain, linear_augmented, boundary_forced, boundary_interface_forced };

inline std::string_view to_string(TrialMode m) {
  switch (m) {
    case TrialMode::plain: return "plain";
    case TrialMode::linear_augmented: return "linear-augmented";
    case TrialMode::boundary_forced: return "boundary-forced";
    case TrialMode::boundary_interface_forced: return "boundary-interface-forced";
  }
  return "?";
}

inline TrialMode parse_trial_mode(std::string_view s) {
  for (auto m : {TrialMode::plain, TrialMode::linear_augmented, TrialMode::boundary_forced,
                 TrialMode::boundary_interface_forced})
    if (to_string(m) == s) return m;
  throw Error(ErrorKind::invalid_input, "unknown trial mode '" + std::string(s) + "'");
}

enum class CollocationTarget { residual, flux };

inline std::string_view to_string(CollocationTarget c) { return c == CollocationTarget::flux ? "flux" : "residual"; }

inline CollocationTarget parse_collocation_target(std::string_view s) {
  if (s == "residual") return CollocationTarget::residual;
  if (s == "flux") return CollocationTarget::flux;
  throw Error(ErrorKind::invalid_input, "unknown collocation target '" + std::string(s) + "'");
}

struct LossWeights {
  double w_f = 1.0;
  double w_b = 1.0;
  double w_i = 1.0;
  double w_vm = 1.0;
  double w_sm = 1.0;
  double w_sdm = 0.0;
  double w_fm = 0.0;
  double lambda_reg = 0.0;

  void validate() const {
    for (double w : {w_f, w_b, w_i, w_vm, w_sm, w_sdm, w_fm, lambda_reg})
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::invalid_config, "loss weights must be finite and >= 0");
  }
};

struct Architecture {
  std::vector<int> widths{1, 2, 1};
  Activation activation = Activation::tanh;
};

struct ModelOptions {
  TrialMode trial = TrialMode::plain;
  LossWeights weights{};
  bool normalize = false;
  CollocationTarget target = CollocationTarget::residual;
  /// Also match values across t-interfaces of 2-D grids.
  bool match_t_interfaces = false;
};

/// One network per block plus the trial-function extras.
///
/// Flat parameter layout: for each block in index order, the net's
/// parameters followed by its linear coefficient when the trial mode is
/// linear-augmented; then the nbx - 1 interface values when the trial mode
/// is boundary-interface-forced.
struct BlockModel {
  Problem problem;
  BlockGrid grid;
  Architecture arch;
  ModelOptions options;
  std::vector<DenseNet> nets;
  std::vector<double> linear_coefs;
  std::vector<double> interface_values;

  std::size_t net_parameter_count() const { return nets.front().parameter_count(); }
  std::size_t block_parameter_count() const {
    return net_parameter_count() + (options.trial == TrialMode::linear_augmented ? 1 : 0);
  }
  std::size_t block_offset(int block) const { return static_cast<std::size_t>(block) * block_parameter_count(); }
  std::size_t interface_offset() const { return block_offset(grid.count()); }
  std::size_t parameter_count() const { return interface_offset() + interface_values.size(); }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (int b = 0; b < grid.count(); ++b) {
      const auto p = nets[static_cast<std::size_t>(b)].params();
      out.insert(out.end(), p.begin(), p.end());
      if (options.trial == TrialMode::linear_augmented) out.push_back(linear_coefs[static_cast<std::size_t>(b)]);
    }
    out.insert(out.end(), interface_values.begin(), interface_values.end());
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != parameter_count())
      throw Error(ErrorKind::invalid_input, "model parameter vector has the wrong length");
    const std::size_t np = net_parameter_count();
    for (int b = 0; b < grid.count(); ++b) {
      const std::size_t off = block_offset(b);
      nets[static_cast<std::size_t>(b)].unflatten(flat.subspan(off, np));
      if (options.trial == TrialMode::linear_augmented) linear_coefs[static_cast<std::size_t>(b)] = flat[off + np];
    }
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(interface_offset()), flat.end(), interface_values.begin());
  }
};

inline void require_trial_supported(const Problem& problem, TrialMode trial) {
  if (!is_steady(problem) &&
      (trial == TrialMode::boundary_forced || trial == TrialMode::boundary_interface_forced))
    throw Error(ErrorKind::unsupported, std::string(to_string(trial)) + " trial functions are defined for steady 1-D problems only");
}

inline double global_line(const SteadyAdvDiff& p, double x) {
  return p.u_left + (p.u_right - p.u_left) * (x - p.x_left) / (p.x_right - p.x_left);
}

/// Builds a model whose block nets are seeded independently from
/// (seed, block index).
inline BlockModel build_model(const Problem& problem, const BlockGrid& grid, const Architecture& arch,
                              const ModelOptions& options, std::uint64_t seed) {
  validate(problem);
  options.weights.validate();
  DenseNet::validate_widths(arch.widths);
  if (arch.widths.front() != input_dimension(problem))
    throw Error(ErrorKind::invalid_architecture, "network input width must be " +
                                                     std::to_string(input_dimension(problem)) + " for this problem");
  require_trial_supported(problem, options.trial);
  if (options.target == CollocationTarget::flux && !is_steady(problem))
    throw Error(ErrorKind::unsupported, "flux collocation is defined for the steady problem only");
  BlockModel m{problem, grid, arch, options, {}, {}, {}};
  for (int b = 0; b < grid.count(); ++b)
    m.nets.push_back(DenseNet::init_random(arch.widths, arch.activation,
                                           derive_seed(seed, {static_cast<std::uint64_t>(b)})));
  if (options.trial == TrialMode::linear_augmented) m.linear_coefs.assign(static_cast<std::size_t>(grid.count()), 0.0);
  if (options.trial == TrialMode::boundary_interface_forced) {
    const auto& s = std::get<SteadyAdvDiff>(problem);
    for (int i = 1; i < grid.nbx; ++i) m.interface_values.push_back(global_line(s, grid.x_edge(i)));
  }
  return m;
}

inline BlockModel build_model(const Problem& problem, const BlockGrid& grid, const Architecture& arch,
                              TrialMode trial, const LossWeights& weights, std::uint64_t seed) {
  ModelOptions o;
  o.trial = trial;
  o.weights = weights;
  return build_model(problem, grid, arch, o, seed);
}

/// Diffusivity seen by a block normalised to a unit local coordinate:
/// N_B eps / (x_R - x_L).
inline double normalize_coefficient(const Problem& problem, const BlockGrid& grid) {
  return grid.nbx * diffusivity(problem) / grid.x.length();
}

/// Net input coordinate of x in column i: x itself, or the local fraction
/// (x - x_i) / dx when blocks are normalised.
inline double net_coordinate(const BlockModel& m, int column, double x) {
  if (!m.options.normalize) return x;
  return (x - m.grid.x_edge(column)) / m.grid.dx();
}

/// Scale of d/dx relative to d/d(net coordinate).
inline double coordinate_scale(const BlockModel& m) { return m.options.normalize ? 1.0 / m.grid.dx() : 1.0; }

inline NetJet to_physical(const NetJet& local, double scale) {
  return {local.value, local.d_dx * scale, local.d2_dx2 * scale * scale, local.d_dt};
}

inline JetCotangent physical_to_local(const JetCotangent& bar, double scale) {
  return {bar.value, bar.d_dx * scale, bar.d2_dx2 * scale * scale, bar.d_dt};
}

/// Trial transform psi = A + B N in net coordinates, with the pieces needed
/// to pull cotangents back to N and to the extra trainable parameters.
struct TrialFrame {
  double a = 0.0, a_s = 0.0, a_ss = 0.0;
  double b = 1.0, b_s = 0.0, b_ss = 0.0;
  // d psi / d extra and d psi_s / d extra for up to two extras.
  int extra_count = 0;
  std::size_t extra_index[2]{0, 0};
  double extra_value[2]{0.0, 0.0};
  double extra_slope[2]{0.0, 0.0};
};

inline TrialFrame trial_frame(const BlockModel& m, int block, double x) {
  TrialFrame f;
  const TrialMode mode = m.options.trial;
  if (mode == TrialMode::plain) return f;
  const int i = m.grid.column(block);
  const double s = net_coordinate(m, i, x);
  if (mode == TrialMode::linear_augmented) {
    const double coef = m.linear_coefs[static_cast<std::size_t>(block)];
    f.a = coef * s;
    f.a_s = coef;
    f.extra_count = 1;
    f.extra_index[0] = m.block_offset(block) + m.net_parameter_count();
    f.extra_value[0] = s;
    f.extra_slope[0] = 1.0;
    return f;
  }
  require_trial_supported(m.problem, mode);
  const auto& p = std::get<SteadyAdvDiff>(m.problem);
  const Range bx = m.grid.block_x(i);
  const double eta = (x - bx.lo) / bx.length();
  const double q = m.options.normalize ? 1.0 : 1.0 / bx.length();  // d eta / ds
  const int last = m.grid.nbx - 1;
  if (mode == TrialMode::boundary_forced) {
    f.a = global_line(p, x);
    f.a_s = (p.u_right - p.u_left) / (p.x_right - p.x_left) * (m.options.normalize ? bx.length() : 1.0);
    if (last == 0) {
      f.b = eta * (1.0 - eta);
      f.b_s = (1.0 - 2.0 * eta) * q;
      f.b_ss = -2.0 * q * q;
    } else if (i == 0) {
      f.b = eta;
      f.b_s = q;
    } else if (i == last) {
      f.b = 1.0 - eta;
      f.b_s = -q;
    }
    // Pin the forced ends exactly.
    if (x == p.x_left) f.a = p.u_left;
    if (x == p.x_right) f.a = p.u_right;
    return f;
  }
  // boundary-interface-forced: linear interpolation between the left and
  // right edge values (boundary data or shared interface unknowns).
  const double vl = i == 0 ? p.u_left : m.interface_values[static_cast<std::size_t>(i - 1)];
  const double vr = i == last ? p.u_right : m.interface_values[static_cast<std::size_t>(i)];
  f.a = (1.0 - eta) * vl + eta * vr;
  f.a_s = (vr - vl) * q;
  if (eta == 0.0) f.a = vl;
  if (eta == 1.0) f.a = vr;
  f.b = eta * (1.0 - eta);
  f.b_s = (1.0 - 2.0 * eta) * q;
  f.b_ss = -2.0 * q * q;
  if (i > 0) {
    f.extra_index[f.extra_count] = m.interface_offset() + static_cast<std::size_t>(i - 1);
    f.extra_value[f.extra_count] = 1.0 - eta;
    f.extra_slope[f.extra_count] = -q;
    ++f.extra_count;
  }
  if (i < last) {
    f.extra_index[f.extra_count] = m.interface_offset() + static_cast<std::size_t>(i);
    f.extra_value[f.extra_count] = eta;
    f.extra_slope[f.extra_count] = q;
    ++f.extra_count;
  }
  return f;
}

inline NetJet apply_trial(const TrialFrame& f, const NetJet& n) {
  return {f.a + f.b * n.value, f.a_s + f.b_s * n.value + f.b * n.d_dx,
          f.a_ss + f.b_ss * n.value + 2.0 * f.b_s * n.d_dx + f.b * n.d2_dx2, f.b * n.d_dt};
}

/// Pulls a cotangent on psi back to the raw network jet.
inline JetCotangent pull_back_trial(const TrialFrame& f, const JetCotangent& bar) {
  return {bar.value * f.b + bar.d_dx * f.b_s + bar.d2_dx2 * f.b_ss, bar.d_dx * f.b + 2.0 * bar.d2_dx2 * f.b_s,
          bar.d2_dx2 * f.b, bar.d_dt * f.b};
}

/// Evaluation of block jets in net coordinates with a reusable tape.
class BlockEvaluator {
 public:
  explicit BlockEvaluator(const BlockModel& m) : model_(&m) {}

  /// Trial-function jet of `block` at p, derivatives with respect to the
  /// net coordinate (equal to x unless blocks are normalised).
  NetJet local_jet(int block, Point p) {
    block_ = block;
    const int i = model_->grid.column(block);
    const Point in{net_coordinate(*model_, i, p.x), p.t};
    const NetJet raw = tape_.forward(model_->nets[static_cast<std::size_t>(block)], in);
    frame_ = trial_frame(*model_, block, p.x);
    return apply_trial(frame_, raw);
  }

  /// Accumulates bar . d(local jet)/d(model params) into grad (full model
  /// parameter vector) for the last local_jet call.
  void backward(const JetCotangent& bar, std::span<double> grad) {
    const JetCotangent raw = pull_back_trial(frame_, bar);
    const std::size_t off = model_->block_offset(block_);
    tape_.backward(raw, grad.subspan(off, model_->net_parameter_count()));
    for (int e = 0; e < frame_.extra_count; ++e)
      grad[frame_.extra_index[e]] += bar.value * frame_.extra_value[e] + bar.d_dx * frame_.extra_slope[e];
  }

 private:
  const BlockModel* model_;
  JetTape tape_;
  TrialFrame frame_;
  int block_ = 0;
};

/// Trial-function jet of one block at (x, t), derivatives in physical x.
inline NetJet trial_value(const BlockModel& m, int block, double x, double t = 0.0) {
  require_trial_supported(m.problem, m.options.trial);
  if (block < 0 || block >= m.grid.count()) throw Error(ErrorKind::invalid_input, "block index out of range");
  BlockEvaluator ev(m);
  return to_physical(ev.local_jet(block, {x, t}), coordinate_scale(m));
}

/// Prediction of the owning block (later block owns shared edges).
inline double predict(const BlockModel& m, double x, double t = 0.0) {
  const Range xr = m.grid.x;
  if (x < xr.lo || x > xr.hi) throw Error(ErrorKind::domain_error, "x outside the model domain");
  if (!is_steady(m.problem) && (t < m.grid.t.lo || t > m.grid.t.hi))
    throw Error(ErrorKind::domain_error, "t outside the model domain");
  const int block = m.grid.owner({x, is_steady(m.problem) ? 0.0 : t});
  return trial_value(m, block, x, is_steady(m.problem) ? 0.0 : t).value;
}

}  // namespace dpinn
