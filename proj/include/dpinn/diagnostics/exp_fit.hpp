#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dpinn/problems/problem.hpp"

namespace dpinn {

enum class ExpFitMethod { gna, marquardt, lma, tikhonov };
enum class ExpFitStatus { converged, unstable, singular };

inline std::string_view to_string(ExpFitMethod m) {
  switch (m) {
    case ExpFitMethod::gna: return "gna";
    case ExpFitMethod::marquardt: return "marquardt";
    case ExpFitMethod::lma: return "lma";
    case ExpFitMethod::tikhonov: return "tikhonov";
  }
  return "?";
}

inline ExpFitMethod parse_exp_fit_method(std::string_view s) {
  for (auto m : {ExpFitMethod::gna, ExpFitMethod::marquardt, ExpFitMethod::lma, ExpFitMethod::tikhonov})
    if (to_string(m) == s) return m;
  throw Error(ErrorKind::invalid_input, "unknown fit method '" + std::string(s) + "'");
}

inline std::string_view to_string(ExpFitStatus s) {
  switch (s) {
    case ExpFitStatus::converged: return "converged";
    case ExpFitStatus::unstable: return "unstable";
    case ExpFitStatus::singular: return "singular";
  }
  return "?";
}

/// Parameters of  a e^{b x} + c.
struct ExpParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct ExpFitResult {
  ExpParams params;
  ExpFitStatus status = ExpFitStatus::unstable;
  int iterations = 0;
  double loss = 0.0;  // sum of squared residuals at the returned parameters
};

struct ExpFitOptions {
  ExpFitMethod method = ExpFitMethod::gna;
  double lambda = 0.0;
  int max_iters = 200;
  double tol = 1e-12;
  /// Normal matrices with reciprocal condition below this count as singular.
  double rcond_floor = 1e-14;
};

/// Exact steady solution written as a e^{b x} + c.
inline ExpParams exp_params_of(const SteadyAdvDiff& p) {
  validate(p);
  const double b = p.c / p.eps;
  const double length = p.x_right - p.x_left;
  // u = u_L + (u_R - u_L) (e^{b (x - x_L)} - 1) / (e^{b L} - 1)
  const double scale = (p.u_right - p.u_left) / std::expm1(b * length);
  return {scale * std::exp(-b * p.x_left), b, p.u_left - scale};
}

namespace detail {

inline double exp_sq_loss(const std::vector<double>& x, const std::vector<double>& y, const ExpParams& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (q.a * std::exp(q.b * x[i]) + q.c);
    s += r * r;
  }
  return s;
}

}  // namespace detail

/// Normal-equation step of the chosen method. Returns false when the normal
/// matrix is singular.
inline bool exp_fit_step(const std::vector<double>& x, const std::vector<double>& y, const ExpParams& q,
                         const ExpFitOptions& opt, Eigen::Vector3d& delta) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(x.size()), 3);
  Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double e = std::exp(q.b * x[i]);
    jac(k, 0) = e;
    jac(k, 1) = q.a * x[i] * e;
    jac(k, 2) = 1.0;
    r(k) = y[i] - (q.a * e + q.c);
  }
  Eigen::Matrix3d normal = jac.transpose() * jac;
  Eigen::Vector3d rhs = jac.transpose() * r;
  switch (opt.method) {
    case ExpFitMethod::gna: break;
    case ExpFitMethod::marquardt: normal.diagonal().array() += opt.lambda; break;
    case ExpFitMethod::lma: normal.diagonal() += opt.lambda * normal.diagonal(); break;
    case ExpFitMethod::tikhonov:
      // The extra +lambda*params on the right follows the printed update
      // rule; standard Tikhonov would subtract it.
      normal.diagonal().array() += opt.lambda;
      rhs += opt.lambda * Eigen::Vector3d(q.a, q.b, q.c);
      break;
  }
  if (!normal.allFinite() || !rhs.allFinite()) return false;
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(normal);
  if (!lu.isInvertible() || !(lu.rcond() > opt.rcond_floor)) return false;
  delta = lu.solve(rhs);
  return delta.allFinite();
}

/// Iterates  params += delta  until |delta| < tol (converged), the normal
/// matrix turns singular, or the fit blows up: loss rising on 5 consecutive
/// iterations, |params| > 1e10, non-finite values, or the iteration budget
/// running out (all reported as unstable).
inline ExpFitResult exp_fit(const std::vector<double>& x, const std::vector<double>& y, ExpParams init,
                            const ExpFitOptions& opt) {
  if (x.size() != y.size()) throw Error(ErrorKind::invalid_input, "x and y must have equal length");
  if (x.size() < 3) throw Error(ErrorKind::invalid_input, "exponential fit needs at least 3 data points");
  if (!(opt.lambda >= 0.0)) throw Error(ErrorKind::invalid_config, "lambda must be >= 0");
  ExpFitResult res;
  res.params = init;
  double prev = detail::exp_sq_loss(x, y, init);
  int rising = 0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    res.iterations = it;
    Eigen::Vector3d delta;
    if (!exp_fit_step(x, y, res.params, opt, delta)) {
      res.status = ExpFitStatus::singular;
      res.loss = detail::exp_sq_loss(x, y, res.params);
      return res;
    }
    res.params.a += delta(0);
    res.params.b += delta(1);
    res.params.c += delta(2);
    const double loss = detail::exp_sq_loss(x, y, res.params);
    res.loss = loss;
    const double norm = std::sqrt(res.params.a * res.params.a + res.params.b * res.params.b +
                                  res.params.c * res.params.c);
    if (!std::isfinite(loss) || !(norm <= 1e10)) {
      res.status = ExpFitStatus::unstable;
      return res;
    }
    rising = loss > prev ? rising + 1 : 0;
    prev = loss;
    if (rising >= 5) {
      res.status = ExpFitStatus::unstable;
      return res;
    }
    if (delta.norm() < opt.tol) {
      res.status = ExpFitStatus::converged;
      return res;
    }
  }
  res.status = ExpFitStatus::unstable;
  return res;
}

}  // namespace dpinn
