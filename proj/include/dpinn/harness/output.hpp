#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpinn/dpinn/train.hpp"
#include "dpinn/problems/finite_difference.hpp"
#include "dpinn/problems/problem.hpp"

namespace dpinn {

/// Fixed 17-significant-digit decimal; empty for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write '" + path + "'");
  return out;
}

using Predictor = std::function<double(double x, double t)>;

/// Maximum and root-mean-square error against the exact oracle on 1001
/// uniform x-samples (at 11 uniform time levels for unsteady problems).
struct ErrorMetrics {
  bool available = false;
  double max_err = std::nan("");
  double l2_err = std::nan("");
};

inline ErrorMetrics error_metrics(const Problem& p, const Predictor& predict) {
  ErrorMetrics m;
  if (!has_exact(p)) return m;
  const Range xr = x_range(p);
  const Range tr = t_range(p);
  const int nt = is_steady(p) ? 1 : 11;
  double max_err = 0.0, sq = 0.0;
  long count = 0;
  for (int j = 0; j < nt; ++j) {
    const double t = nt == 1 ? tr.lo : (j == nt - 1 ? tr.hi : tr.lo + tr.length() * j / (nt - 1));
    for (int k = 0; k <= 1000; ++k) {
      const double x = k == 1000 ? xr.hi : xr.lo + xr.length() * k / 1000.0;
      const double e = std::abs(predict(x, t) - exact(p, {x, t}));
      max_err = std::max(max_err, e);
      sq += e * e;
      ++count;
    }
  }
  m.available = true;
  m.max_err = max_err;
  m.l2_err = std::sqrt(sq / static_cast<double>(count));
  return m;
}

/// `x[,t],u_pred,u_exact,abs_err` on `samples` points per axis, sorted by x
/// then t. The oracle columns are blank when the problem has no exact
/// solution.
inline void write_solution_csv(const std::string& path, const Problem& p, const Predictor& predict, int samples = 101) {
  if (samples < 2) throw Error(ErrorKind::invalid_input, "solution CSV needs at least 2 samples per axis");
  auto out = open_output(path);
  const bool steady = is_steady(p);
  out << (steady ? "x" : "x,t") << ",u_pred,u_exact,abs_err\n";
  const auto xs = linspace(x_range(p), samples, true);
  const auto ts = steady ? std::vector<double>{0.0} : linspace(t_range(p), samples, true);
  const bool oracle = has_exact(p);
  for (double x : xs)
    for (double t : ts) {
      const double u = predict(x, t);
      out << format_number(x);
      if (!steady) out << ',' << format_number(t);
      out << ',' << format_number(u);
      if (oracle) {
        const double ue = exact(p, {x, t});
        out << ',' << format_number(ue) << ',' << format_number(std::abs(u - ue));
      } else {
        out << ",,";
      }
      out << '\n';
    }
}

inline void write_trace_csv(const std::string& path, const Trace& trace) {
  auto out = open_output(path);
  out << "iter,L_total,L_f,L_b,L_i,L_vm,L_sm,L_sdm,L_fm,L_reg,g_total,g_f,g_b,g_i,g_vm,g_sm\n";
  for (const auto& row : trace) {
    const LossBreakdown& l = row.loss;
    out << row.iter << ',' << format_number(l.total);
    for (Term t : kAllTerms) out << ',' << format_number(l[t]);
    out << ',' << format_number(l.grad_norm_total);
    for (Term t : {Term::f, Term::b, Term::i, Term::vm, Term::sm}) out << ',' << format_number(l.grad_norm(t));
    out << '\n';
  }
}

/// Nodal exact, CDS, UDS and artificial-diffusion CDS values.
inline void write_baseline_csv(const std::string& path, const SteadyAdvDiff& p, int n_cells) {
  const FDSolution cds = cds_solve(p, n_cells);
  const FDSolution uds = uds_solve(p, n_cells);
  const FDSolution ad = cds_artificial_solve(p, n_cells);
  auto out = open_output(path);
  out << "x,exact,cds,uds,cds_ad\n";
  for (std::size_t i = 0; i < cds.grid.size(); ++i)
    out << format_number(cds.grid[i]) << ',' << format_number(exact_steady(p, cds.grid[i])) << ','
        << format_number(cds.values[i]) << ',' << format_number(uds.values[i]) << ',' << format_number(ad.values[i])
        << '\n';
}

}  // namespace dpinn
