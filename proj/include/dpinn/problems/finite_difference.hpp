#pragma once

#include <cmath>
#include <string_view>
#include <vector>

#include "dpinn/problems/problem.hpp"

namespace dpinn {

enum class FdScheme { cds, uds, cds_artificial_diffusion };

inline std::string_view to_string(FdScheme s) {
  switch (s) {
    case FdScheme::cds: return "CDS";
    case FdScheme::uds: return "UDS";
    case FdScheme::cds_artificial_diffusion: return "CDS+AD";
  }
  return "?";
}

struct FDSolution {
  std::vector<double> grid;
  std::vector<double> values;
  FdScheme scheme = FdScheme::cds;
};

/// Extra diffusivity that makes central differencing of  a u'' = b u'
/// nodally exact:  mu = a [(Pe/2) coth(Pe/2) - 1],  Pe = b dx / a.
/// This is the closed form  a/(e^Pe + e^-Pe - 2) [(Pe/2)(e^Pe - e^-Pe) - (e^Pe + e^-Pe - 2)]
/// rewritten so it never overflows.
inline double artificial_diffusion(double a, double b, double dx) {
  if (a == 0.0) throw Error(ErrorKind::degenerate_problem, "artificial diffusion needs nonzero diffusivity");
  const double pe = b * dx / a;
  if (std::abs(pe) < 1e-4) return a * pe * pe / 12.0;
  const double h = 0.5 * pe;
  return a * (h / std::tanh(h) - 1.0);
}

namespace detail {

/// Tridiagonal solve for interior nodes 1..n-1 with pinned end values.
/// Row i reads  lower u_{i-1} + diag u_i + upper u_{i+1} = 0.
inline std::vector<double> solve_pinned_tridiagonal(double lower, double diag, double upper, int n_cells,
                                                    double u_first, double u_last) {
  const int m = n_cells - 1;
  std::vector<double> u(static_cast<std::size_t>(n_cells) + 1, 0.0);
  u.front() = u_first;
  u.back() = u_last;
  if (m <= 0) return u;
  std::vector<double> c_prime(static_cast<std::size_t>(m)), d_prime(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    double rhs = 0.0;
    if (k == 0) rhs -= lower * u_first;
    if (k == m - 1) rhs -= upper * u_last;
    const double up = (k == m - 1) ? 0.0 : upper;
    const double denom = k == 0 ? diag : diag - lower * c_prime[static_cast<std::size_t>(k - 1)];
    if (denom == 0.0 || !std::isfinite(denom)) throw Error(ErrorKind::solver_error, "singular tridiagonal system");
    c_prime[static_cast<std::size_t>(k)] = up / denom;
    d_prime[static_cast<std::size_t>(k)] =
        (k == 0 ? rhs : rhs - lower * d_prime[static_cast<std::size_t>(k - 1)]) / denom;
  }
  for (int k = m - 1; k >= 0; --k) {
    double v = d_prime[static_cast<std::size_t>(k)];
    if (k < m - 1) v -= c_prime[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(k + 2)];
    u[static_cast<std::size_t>(k + 1)] = v;
  }
  return u;
}

inline std::vector<double> uniform_grid(double lo, double hi, int n_cells) {
  std::vector<double> g(static_cast<std::size_t>(n_cells) + 1);
  const double h = (hi - lo) / n_cells;
  for (int i = 0; i <= n_cells; ++i) g[static_cast<std::size_t>(i)] = lo + h * i;
  g.back() = hi;
  return g;
}

inline void check_cells(int n_cells) {
  if (n_cells < 2) throw Error(ErrorKind::invalid_input, "need at least 2 cells");
}

inline FDSolution cds_with_diffusivity(const SteadyAdvDiff& p, int n_cells, double eps, FdScheme tag) {
  const double h = (p.x_right - p.x_left) / n_cells;
  const double lower = -p.c / (2.0 * h) - eps / (h * h);
  const double diag = 2.0 * eps / (h * h);
  const double upper = p.c / (2.0 * h) - eps / (h * h);
  return {uniform_grid(p.x_left, p.x_right, n_cells),
          solve_pinned_tridiagonal(lower, diag, upper, n_cells, p.u_left, p.u_right), tag};
}

}  // namespace detail

/// Central differences for both terms.
inline FDSolution cds_solve(const SteadyAdvDiff& p, int n_cells) {
  validate(p);
  detail::check_cells(n_cells);
  return detail::cds_with_diffusivity(p, n_cells, p.eps, FdScheme::cds);
}

/// Upwind advection (direction from the sign of c), central diffusion.
inline FDSolution uds_solve(const SteadyAdvDiff& p, int n_cells) {
  validate(p);
  detail::check_cells(n_cells);
  const double h = (p.x_right - p.x_left) / n_cells;
  const double e = p.eps / (h * h);
  double lower, diag, upper;
  if (p.c >= 0.0) {
    lower = -p.c / h - e;
    diag = p.c / h + 2.0 * e;
    upper = -e;
  } else {
    lower = -e;
    diag = -p.c / h + 2.0 * e;
    upper = p.c / h - e;
  }
  return {detail::uniform_grid(p.x_left, p.x_right, n_cells),
          detail::solve_pinned_tridiagonal(lower, diag, upper, n_cells, p.u_left, p.u_right), FdScheme::uds};
}

/// Central differences with eps replaced by eps + artificial_diffusion.
inline FDSolution cds_artificial_solve(const SteadyAdvDiff& p, int n_cells) {
  validate(p);
  detail::check_cells(n_cells);
  const double h = (p.x_right - p.x_left) / n_cells;
  return detail::cds_with_diffusivity(p, n_cells, p.eps + artificial_diffusion(p.eps, p.c, h),
                                      FdScheme::cds_artificial_diffusion);
}

inline FDSolution fd_solve(const SteadyAdvDiff& p, int n_cells, FdScheme scheme) {
  switch (scheme) {
    case FdScheme::cds: return cds_solve(p, n_cells);
    case FdScheme::uds: return uds_solve(p, n_cells);
    case FdScheme::cds_artificial_diffusion: return cds_artificial_solve(p, n_cells);
  }
  return cds_solve(p, n_cells);
}

/// Count of sign flips between consecutive nodal differences.
inline int sign_alternations(const std::vector<double>& values) {
  int flips = 0;
  for (std::size_t i = 2; i < values.size(); ++i) {
    const double a = values[i - 1] - values[i - 2];
    const double b = values[i] - values[i - 1];
    if (a * b < 0.0) ++flips;
  }
  return flips;
}

}  // namespace dpinn
