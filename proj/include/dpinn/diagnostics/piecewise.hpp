#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpinn/dpinn/collocation.hpp"
#include "dpinn/dpinn/model.hpp"
#include "dpinn/elm/elm.hpp"

namespace dpinn {

enum class Governing { residual, flux };

inline std::string_view to_string(Governing g) { return g == Governing::flux ? "flux" : "residual"; }

inline Governing parse_governing(std::string_view s) {
  if (s == "residual") return Governing::residual;
  if (s == "flux") return Governing::flux;
  throw Error(ErrorKind::invalid_input, "unknown governing equation '" + std::string(s) + "'");
}

enum class SolveMethod { exact, pinv };

inline std::string_view to_string(SolveMethod m) { return m == SolveMethod::pinv ? "pinv" : "exact"; }

inline SolveMethod parse_solve_method(std::string_view s) {
  if (s == "exact") return SolveMethod::exact;
  if (s == "pinv") return SolveMethod::pinv;
  throw Error(ErrorKind::invalid_input, "unknown solve method '" + std::string(s) + "'");
}

/// Panel-wise polynomial of degree 1 or 2 with coefficients stored per panel
/// from the highest power down: (A, B) or (A, B, C).
struct PiecewiseFit {
  int degree = 1;
  BlockGrid panels;
  std::vector<double> coefs;

  int stride() const { return degree + 1; }

  double panel_value(int i, double x) const {
    const double* c = coefs.data() + static_cast<std::ptrdiff_t>(i) * stride();
    return degree == 1 ? c[0] * x + c[1] : (c[0] * x + c[1]) * x + c[2];
  }

  /// Value of the owning panel (later panel owns shared edges).
  double operator()(double x) const { return panel_value(panels.column_of(x), x); }
};

struct PiecewiseSystem {
  int degree = 1;
  BlockGrid panels;
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

/// Collocation counts that make the system square: `degree` interior points
/// per panel, one fewer in the last panel.
inline std::vector<int> square_collocation_counts(int panels, int degree) {
  std::vector<int> counts(static_cast<std::size_t>(panels), degree);
  counts.back() = degree - 1;
  return counts;
}

/// Rows: governing equation at the interior collocation points of every
/// panel, then the two boundary rows, then value continuity at each
/// interface. The governing row is  eps Y'' - c Y'  (residual) or
/// eps Y' - c Y  (flux), forced to zero.
inline PiecewiseSystem piecewise_system(const SteadyAdvDiff& p, int panels, int degree, const std::vector<int>& counts,
                                        Governing governing) {
  validate(p);
  if (degree != 1 && degree != 2) throw Error(ErrorKind::invalid_config, "piecewise degree must be 1 or 2");
  if (panels < 1) throw Error(ErrorKind::invalid_config, "need at least one panel");
  if (degree == 1 && governing == Governing::residual)
    throw Error(ErrorKind::invalid_config,
                "degree 1 with the residual as governing equation is degenerate (Y'' = 0); use flux");
  if (counts.size() != static_cast<std::size_t>(panels))
    throw Error(ErrorKind::invalid_config, "need one collocation count per panel");
  int total = 0;
  for (int k : counts) {
    if (k < 0) throw Error(ErrorKind::invalid_config, "collocation counts must be >= 0");
    total += k;
  }
  PiecewiseSystem sys;
  sys.degree = degree;
  sys.panels = BlockGrid::for_problem(p, panels);
  const int stride = degree + 1;
  sys.matrix = Eigen::MatrixXd::Zero(total + 2 + panels - 1, stride * panels);
  sys.rhs = Eigen::VectorXd::Zero(sys.matrix.rows());

  // Row entries for value, first and second derivative at x.
  auto value_row = [&](double x) -> std::vector<double> {
    return degree == 1 ? std::vector<double>{x, 1.0} : std::vector<double>{x * x, x, 1.0};
  };
  auto slope_row = [&](double x) -> std::vector<double> {
    return degree == 1 ? std::vector<double>{1.0, 0.0} : std::vector<double>{2.0 * x, 1.0, 0.0};
  };
  auto curvature_row = [&](double) -> std::vector<double> {
    return degree == 1 ? std::vector<double>{0.0, 0.0} : std::vector<double>{2.0, 0.0, 0.0};
  };
  auto put = [&](Eigen::Index r, int panel, const std::vector<double>& entries, double sign) {
    for (int k = 0; k < stride; ++k) sys.matrix(r, panel * stride + k) += sign * entries[static_cast<std::size_t>(k)];
  };

  Eigen::Index r = 0;
  for (int i = 0; i < panels; ++i) {
    const int n = counts[static_cast<std::size_t>(i)];
    if (n == 0) continue;
    for (double x : linspace(sys.panels.block_x(i), n, false)) {
      const auto v = value_row(x);
      const auto d1 = slope_row(x);
      const auto d2 = curvature_row(x);
      std::vector<double> row(static_cast<std::size_t>(stride));
      for (std::size_t k = 0; k < row.size(); ++k)
        row[k] = governing == Governing::flux ? p.eps * d1[k] - p.c * v[k] : p.eps * d2[k] - p.c * d1[k];
      put(r++, i, row, 1.0);
    }
  }
  put(r, 0, value_row(p.x_left), 1.0);
  sys.rhs(r++) = p.u_left;
  put(r, panels - 1, value_row(p.x_right), 1.0);
  sys.rhs(r++) = p.u_right;
  for (int i = 0; i + 1 < panels; ++i) {
    const double xe = sys.panels.x_edge(i + 1);
    put(r, i, value_row(xe), 1.0);
    put(r, i + 1, value_row(xe), -1.0);
    ++r;
  }
  return sys;
}

inline PiecewiseSystem piecewise_system(const SteadyAdvDiff& p, int panels, int degree, int per_panel,
                                        Governing governing) {
  return piecewise_system(p, panels, degree, std::vector<int>(static_cast<std::size_t>(std::max(panels, 0)), per_panel),
                          governing);
}

inline PiecewiseFit piecewise_solve(const PiecewiseSystem& sys, SolveMethod method, double tolerance = 0.0) {
  PiecewiseFit fit;
  fit.degree = sys.degree;
  fit.panels = sys.panels;
  const Eigen::VectorXd x = method == SolveMethod::exact
                                ? (tolerance > 0.0 ? solve_exact(sys.matrix, sys.rhs, tolerance)
                                                   : solve_exact(sys.matrix, sys.rhs))
                                : (tolerance > 0.0 ? solve_pinv(sys.matrix, sys.rhs, tolerance)
                                                   : solve_pinv(sys.matrix, sys.rhs));
  fit.coefs.assign(x.data(), x.data() + x.size());
  return fit;
}

}  // namespace dpinn
