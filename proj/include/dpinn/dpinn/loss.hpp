#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "dpinn/dpinn/collocation.hpp"
#include "dpinn/dpinn/model.hpp"
#include "dpinn/net/jacobian.hpp"

namespace dpinn {

enum class Term { f, b, i, vm, sm, sdm, fm, reg };
inline constexpr int kTermCount = 8;
inline constexpr std::array<Term, kTermCount> kAllTerms{Term::f,  Term::b,   Term::i,  Term::vm,
                                                        Term::sm, Term::sdm, Term::fm, Term::reg};

inline std::string_view to_string(Term t) {
  static constexpr std::array<std::string_view, kTermCount> names{"f", "b", "i", "vm", "sm", "sdm", "fm", "reg"};
  return names[static_cast<std::size_t>(t)];
}

inline double term_weight(const LossWeights& w, Term t) {
  switch (t) {
    case Term::f: return w.w_f;
    case Term::b: return w.w_b;
    case Term::i: return w.w_i;
    case Term::vm: return w.w_vm;
    case Term::sm: return w.w_sm;
    case Term::sdm: return w.w_sdm;
    case Term::fm: return w.w_fm;
    case Term::reg: return w.lambda_reg;
  }
  return 0.0;
}

/// Per-term loss values for one evaluation, the weighted total, and the
/// norm of each weighted term's parameter gradient (zero when the
/// evaluation skipped gradients).
struct LossBreakdown {
  std::array<double, kTermCount> terms{};
  std::array<double, kTermCount> grad_norms{};
  double total = 0.0;
  double grad_norm_total = 0.0;

  double operator[](Term t) const { return terms[static_cast<std::size_t>(t)]; }
  double grad_norm(Term t) const { return grad_norms[static_cast<std::size_t>(t)]; }
  double l_f() const { return (*this)[Term::f]; }
  double l_b() const { return (*this)[Term::b]; }
  double l_i() const { return (*this)[Term::i]; }
  double l_vm() const { return (*this)[Term::vm]; }
  double l_sm() const { return (*this)[Term::sm]; }
  double l_sdm() const { return (*this)[Term::sdm]; }
  double l_fm() const { return (*this)[Term::fm]; }
  double l_reg() const { return (*this)[Term::reg]; }
};

/// Collocation points per block plus the edge samples used by the
/// boundary, initial and interface terms. Edge samples are the block's
/// t-rows (for x-edges) and x-columns (for t-edges), edges included.
struct LossPoints {
  std::vector<std::vector<Point>> collocation;
  std::vector<std::vector<double>> t_rows;
  std::vector<std::vector<double>> x_cols;
};

inline LossPoints make_loss_points(const BlockGrid& grid, std::vector<std::vector<Point>> collocation, int nbx_pts,
                                   int nbt_pts) {
  if (collocation.size() != static_cast<std::size_t>(grid.count()))
    throw Error(ErrorKind::invalid_input, "need one collocation set per block");
  LossPoints lp;
  lp.collocation = std::move(collocation);
  const bool two_d = grid.t.length() > 0.0;
  for (int j = 0; j < grid.nbt; ++j)
    lp.t_rows.push_back(two_d ? linspace(grid.block_t(j), std::max(nbt_pts, 2), true) : std::vector<double>{0.0});
  for (int i = 0; i < grid.nbx; ++i) lp.x_cols.push_back(linspace(grid.block_x(i), std::max(nbx_pts, 2), true));
  return lp;
}

/// Evaluates every loss term of a block model.
///
///   L_f   = 1/(2m) sum_blocks sum_points f^2   (f = residual, or flux)
///   L_b   = 1/2 sum (psi - boundary value)^2 at x_L and x_R
///   L_i   = 1/2 sum (psi - initial value)^2 at t_start
///   L_vm, L_sm, L_sdm, L_fm = 1/2 sum of squared jumps in value, slope,
///         second derivative and flux across x-interfaces
///   L_reg = 1/(2 n_w) sum W^2 over weight-matrix entries
///
/// m is the collocation count of a block. Value, slope and second-derivative
/// jumps are measured in net coordinates; under normalisation the residual
/// is the physical residual times dx.
class LossEvaluator {
 public:
  explicit LossEvaluator(const BlockModel& model) : model_(&model), left_(model), right_(model) {}

  /// Loss terms only.
  LossBreakdown evaluate(const LossPoints& pts) { return run(pts, nullptr); }

  /// Loss terms, per-term gradient norms and the total gradient.
  LossBreakdown evaluate(const LossPoints& pts, std::vector<double>& total_grad) { return run(pts, &total_grad); }

  /// Residual vector r with total loss = |r|^2 / 2, and optionally its
  /// Jacobian. Zero-weight terms contribute no rows.
  void least_squares(const LossPoints& pts, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const auto np = static_cast<Eigen::Index>(model_->parameter_count());
    std::vector<double> rows;
    std::vector<Eigen::Triplet<double>> entries;
    for_each_row(pts, jac != nullptr, [&](double e, std::span<const double> jrow, std::span<const std::size_t> nz) {
      const auto i = static_cast<Eigen::Index>(rows.size());
      for (std::size_t k : nz) entries.emplace_back(i, static_cast<Eigen::Index>(k), jrow[k]);
      rows.push_back(e);
    });
    r = Eigen::Map<const Eigen::VectorXd>(rows.data(), static_cast<Eigen::Index>(rows.size()));
    if (jac) {
      jac->setZero(r.size(), np);
      for (const auto& t : entries) (*jac)(t.row(), t.col()) = t.value();
    }
  }

  /// Residual vector r with  J^T J  and  J^T r, accumulated row by row so the
  /// Jacobian itself is never stored. Rows touch at most two blocks.
  void normal_equations(const LossPoints& pts, Eigen::VectorXd& r, Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
    const auto np = static_cast<Eigen::Index>(model_->parameter_count());
    jtj.setZero(np, np);
    jtr.setZero(np);
    std::vector<double> rows;
    for_each_row(pts, true, [&](double e, std::span<const double> jrow, std::span<const std::size_t> nz) {
      for (std::size_t a : nz) {
        const auto ia = static_cast<Eigen::Index>(a);
        jtr(ia) += jrow[a] * e;
        for (std::size_t b : nz) jtj(ia, static_cast<Eigen::Index>(b)) += jrow[a] * jrow[b];
      }
      rows.push_back(e);
    });
    r = Eigen::Map<const Eigen::VectorXd>(rows.data(), static_cast<Eigen::Index>(rows.size()));
  }

  /// Gradients of the signed constraint sums  sum l_b, sum l_vm, sum l_sm
  /// (columns of A) and  B = -sum l_f dl_f/dw  for the multiplier solve.
  void constraint_gradients(const LossPoints& pts, Eigen::MatrixXd& a_mat, Eigen::VectorXd& b_vec) {
    const std::size_t np = model_->parameter_count();
    std::vector<double> gb(np, 0.0), gvm(np, 0.0), gsm(np, 0.0), gf(np, 0.0);
    for_each_atom(pts, [&](Atom& a) {
      switch (a.term) {
        case Term::b: a.backward(1.0, gb); break;
        case Term::vm: a.backward(1.0, gvm); break;
        case Term::sm: a.backward(1.0, gsm); break;
        case Term::f: a.backward(-a.e, gf); break;
        default: break;
      }
    });
    a_mat.resize(static_cast<Eigen::Index>(np), 3);
    b_vec.resize(static_cast<Eigen::Index>(np));
    for (std::size_t k = 0; k < np; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      a_mat(r, 0) = gb[k];
      a_mat(r, 1) = gvm[k];
      a_mat(r, 2) = gsm[k];
      b_vec(r) = gf[k];
    }
  }

 private:
  struct Atom {
    Term term = Term::f;
    double scale = 0.5;  // term contribution = scale * e^2
    double e = 0.0;
    int n = 0;
    BlockEvaluator* ev[2]{nullptr, nullptr};
    JetCotangent de[2]{};

    void backward(double coef, std::span<double> grad) const {
      for (int k = 0; k < n; ++k) ev[k]->backward(coef * de[k], grad);
    }
  };

  std::size_t weight_total() const {
    std::size_t n = 0;
    for (const auto& net : model_->nets) n += net.weight_count();
    return n;
  }

  template <class Fn>
  void for_each_weight(Fn&& fn) const {
    const BlockModel& m = *model_;
    for (int b = 0; b < m.grid.count(); ++b) {
      const DenseNet& net = m.nets[static_cast<std::size_t>(b)];
      const std::size_t off = m.block_offset(b);
      const auto p = net.params();
      for (int l = 0; l < net.layer_count(); ++l)
        for (std::size_t k = net.weight_offset(l); k < net.bias_offset(l); ++k) fn(off + k, p[k]);
    }
  }

  /// Weighted least-squares rows, total loss = sum e^2 / 2. `fn(e, jrow, nz)`
  /// sees the row's Jacobian through its nonzero columns `nz`; both are
  /// empty when no Jacobian is wanted. Zero-weight terms give no rows.
  template <class RowFn>
  void for_each_row(const LossPoints& pts, bool with_jac, RowFn&& fn) {
    const BlockModel& m = *model_;
    std::vector<double> jrow(with_jac ? m.parameter_count() : 0, 0.0);
    std::vector<std::size_t> nz;
    auto emit = [&](double e) {
      nz.clear();
      for (std::size_t k = 0; k < jrow.size(); ++k)
        if (jrow[k] != 0.0) nz.push_back(k);
      fn(e, std::span<const double>(jrow), std::span<const std::size_t>(nz));
      for (std::size_t k : nz) jrow[k] = 0.0;
    };
    for_each_atom(pts, [&](Atom& a) {
      const double w = term_weight(m.options.weights, a.term);
      if (w == 0.0) return;
      const double k = std::sqrt(2.0 * w * a.scale);
      if (with_jac) a.backward(k, jrow);
      emit(k * a.e);
    });
    const double lambda = m.options.weights.lambda_reg;
    if (lambda > 0.0) {
      const double k = std::sqrt(lambda / static_cast<double>(weight_total()));
      for_each_weight([&](std::size_t idx, double w) {
        if (with_jac) jrow[idx] = k;
        emit(k * w);
      });
    }
  }

  template <class Sink>
  void for_each_atom(const LossPoints& pts, Sink&& sink) {
    const BlockModel& m = *model_;
    const BlockGrid& g = m.grid;
    const Problem& prob = m.problem;
    const double scale = coordinate_scale(m);
    const double res_factor = m.options.normalize ? g.dx() : 1.0;
    const bool flux_target = m.options.target == CollocationTarget::flux;
    Atom a;

    // Collocation.
    for (int b = 0; b < g.count(); ++b) {
      const auto& cps = pts.collocation[static_cast<std::size_t>(b)];
      if (cps.empty()) continue;
      const double s = 0.5 / static_cast<double>(cps.size());
      for (const Point& p : cps) {
        const NetJet local = left_.local_jet(b, p);
        const NetJet phys = to_physical(local, scale);
        a.term = Term::f;
        a.scale = s;
        a.n = 1;
        a.ev[0] = &left_;
        if (flux_target) {
          const auto& sp = std::get<SteadyAdvDiff>(prob);
          a.e = flux(sp, phys);
          a.de[0] = physical_to_local(interface_flux_sensitivity(prob, phys), scale);
        } else {
          a.e = res_factor * residual(prob, phys);
          a.de[0] = res_factor * physical_to_local(residual_sensitivity(prob, phys), scale);
        }
        sink(a);
      }
    }

    // Boundaries x_L and x_R along each t-row.
    for (int j = 0; j < g.nbt; ++j) {
      for (double t : pts.t_rows[static_cast<std::size_t>(j)]) {
        for (int side = 0; side < 2; ++side) {
          const int col = side == 0 ? 0 : g.nbx - 1;
          const double x = side == 0 ? g.x.lo : g.x.hi;
          const NetJet jet = left_.local_jet(g.index(col, j), {x, t});
          a.term = Term::b;
          a.scale = 0.5;
          a.e = jet.value - boundary_value(prob, side == 1, t);
          a.n = 1;
          a.ev[0] = &left_;
          a.de[0] = {1.0, 0.0, 0.0, 0.0};
          sink(a);
        }
      }
    }

    // Initial data at t_start.
    if (!is_steady(prob)) {
      for (int i = 0; i < g.nbx; ++i) {
        for (double x : pts.x_cols[static_cast<std::size_t>(i)]) {
          const NetJet jet = left_.local_jet(g.index(i, 0), {x, g.t.lo});
          a.term = Term::i;
          a.scale = 0.5;
          a.e = jet.value - initial_value(prob, x);
          a.n = 1;
          a.ev[0] = &left_;
          a.de[0] = {1.0, 0.0, 0.0, 0.0};
          sink(a);
        }
      }
    }

    // x-interfaces: left block's right edge against right block's left edge.
    for (int j = 0; j < g.nbt; ++j) {
      for (int i = 0; i + 1 < g.nbx; ++i) {
        const double xe = g.x_edge(i + 1);
        for (double t : pts.t_rows[static_cast<std::size_t>(j)]) {
          const NetJet jl = left_.local_jet(g.index(i, j), {xe, t});
          const NetJet jr = right_.local_jet(g.index(i + 1, j), {xe, t});
          a.n = 2;
          a.ev[0] = &left_;
          a.ev[1] = &right_;
          a.scale = 0.5;

          a.term = Term::vm;
          a.e = jl.value - jr.value;
          a.de[0] = {1.0, 0.0, 0.0, 0.0};
          a.de[1] = {-1.0, 0.0, 0.0, 0.0};
          sink(a);

          a.term = Term::sm;
          a.e = jl.d_dx - jr.d_dx;
          a.de[0] = {0.0, 1.0, 0.0, 0.0};
          a.de[1] = {0.0, -1.0, 0.0, 0.0};
          sink(a);

          a.term = Term::sdm;
          a.e = jl.d2_dx2 - jr.d2_dx2;
          a.de[0] = {0.0, 0.0, 1.0, 0.0};
          a.de[1] = {0.0, 0.0, -1.0, 0.0};
          sink(a);

          const NetJet pl = to_physical(jl, scale);
          const NetJet pr = to_physical(jr, scale);
          a.term = Term::fm;
          a.e = interface_flux(prob, pl) - interface_flux(prob, pr);
          a.de[0] = physical_to_local(interface_flux_sensitivity(prob, pl), scale);
          a.de[1] = -1.0 * physical_to_local(interface_flux_sensitivity(prob, pr), scale);
          sink(a);
        }
      }
    }

    // Optional t-interfaces, value only.
    if (m.options.match_t_interfaces) {
      for (int j = 0; j + 1 < g.nbt; ++j) {
        const double te = g.t_edge(j + 1);
        for (int i = 0; i < g.nbx; ++i) {
          for (double x : pts.x_cols[static_cast<std::size_t>(i)]) {
            const NetJet jl = left_.local_jet(g.index(i, j), {x, te});
            const NetJet jr = right_.local_jet(g.index(i, j + 1), {x, te});
            a.n = 2;
            a.ev[0] = &left_;
            a.ev[1] = &right_;
            a.scale = 0.5;
            a.term = Term::vm;
            a.e = jl.value - jr.value;
            a.de[0] = {1.0, 0.0, 0.0, 0.0};
            a.de[1] = {-1.0, 0.0, 0.0, 0.0};
            sink(a);
          }
        }
      }
    }
  }

  LossBreakdown run(const LossPoints& pts, std::vector<double>* total_grad) {
    const BlockModel& m = *model_;
    const std::size_t np = m.parameter_count();
    LossBreakdown out;
    const bool want_grad = total_grad != nullptr;
    if (want_grad)
      for (auto& g : term_grads_) g.assign(np, 0.0);

    for_each_atom(pts, [&](Atom& a) {
      const auto k = static_cast<std::size_t>(a.term);
      out.terms[k] += a.scale * a.e * a.e;
      if (want_grad) a.backward(2.0 * a.scale * a.e, term_grads_[k]);
    });

    const std::size_t nw = weight_total();
    double sq = 0.0;
    const auto reg = static_cast<std::size_t>(Term::reg);
    for_each_weight([&](std::size_t idx, double w) {
      sq += w * w;
      if (want_grad) term_grads_[reg][idx] += w / static_cast<double>(nw);
    });
    out.terms[reg] = nw > 0 ? sq / (2.0 * static_cast<double>(nw)) : 0.0;

    for (Term t : kAllTerms) {
      const double v = out[t];
      if (!std::isfinite(v))
        throw Error(ErrorKind::diverged_evaluation, "loss term L_" + std::string(to_string(t)) + " is not finite");
      out.total += term_weight(m.options.weights, t) * v;
    }

    if (want_grad) {
      total_grad->assign(np, 0.0);
      for (Term t : kAllTerms) {
        const double w = term_weight(m.options.weights, t);
        const auto& g = term_grads_[static_cast<std::size_t>(t)];
        double sq_norm = 0.0;
        for (std::size_t k = 0; k < np; ++k) {
          sq_norm += g[k] * g[k];
          (*total_grad)[k] += w * g[k];
        }
        out.grad_norms[static_cast<std::size_t>(t)] = w * std::sqrt(sq_norm);
      }
      double tn = 0.0;
      for (double v : *total_grad) {
        if (!std::isfinite(v)) throw Error(ErrorKind::diverged_evaluation, "loss gradient is not finite");
        tn += v * v;
      }
      out.grad_norm_total = std::sqrt(tn);
    }
    return out;
  }

  const BlockModel* model_;
  BlockEvaluator left_;
  BlockEvaluator right_;
  std::array<std::vector<double>, kTermCount> term_grads_;
};

inline LossBreakdown loss_terms(const BlockModel& model, const LossPoints& pts) {
  LossEvaluator ev(model);
  return ev.evaluate(pts);
}

inline LossBreakdown loss_terms(const BlockModel& model, const LossPoints& pts, std::vector<double>& grad) {
  LossEvaluator ev(model);
  return ev.evaluate(pts, grad);
}

inline void require_shallow(const BlockModel& model) {
  for (const auto& net : model.nets) require_shallow(net);
}

/// Jacobian of the least-squares residual vector of the model loss.
inline Eigen::MatrixXd residual_jacobian(const BlockModel& model, const LossPoints& pts, Eigen::VectorXd& residuals) {
  require_shallow(model);
  Eigen::MatrixXd jac;
  LossEvaluator ev(model);
  ev.least_squares(pts, residuals, &jac);
  return jac;
}

/// lambda = (A^T A)^{-1} A^T B for a parameter-count x 3 matrix A.
inline Eigen::Vector3d lagrange_solve(const Eigen::MatrixXd& a_mat, const Eigen::VectorXd& b_vec,
                                      double rcond_floor = 1e-12) {
  if (a_mat.cols() != 3 || a_mat.rows() != b_vec.size())
    throw Error(ErrorKind::invalid_input, "multiplier system must be n x 3 with n right-hand entries");
  const Eigen::Matrix3d ata = a_mat.transpose() * a_mat;
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (!lu.isInvertible() || !(lu.rcond() > rcond_floor))
    throw Error(ErrorKind::singular_system, "A^T A of the multiplier system is singular");
  Eigen::Vector3d lambda = lu.solve(a_mat.transpose() * b_vec);
  if (!lambda.allFinite()) throw Error(ErrorKind::singular_system, "A^T A of the multiplier system is singular");
  return lambda;
}

/// Least-squares Lagrange multipliers (lambda_b, lambda_vm, lambda_sm) from
/// the stationarity conditions of  L_f + sum_k lambda_k sum l_k.
/// Experimental: the conditions cannot be met exactly for this problem.
inline Eigen::Vector3d lagrange_weights(const BlockModel& model, const LossPoints& pts) {
  LossEvaluator ev(model);
  Eigen::MatrixXd a_mat;
  Eigen::VectorXd b_vec;
  ev.constraint_gradients(pts, a_mat, b_vec);
  if (!a_mat.allFinite() || !b_vec.allFinite())
    throw Error(ErrorKind::diverged_evaluation, "non-finite constraint gradients");
  return lagrange_solve(a_mat, b_vec);
}

}  // namespace dpinn
