#pragma once

#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

#include "dpinn/net/dense_net.hpp"
#include "dpinn/util/error.hpp"

namespace dpinn {

/// Steady advection-diffusion  c du/dx = eps d2u/dx2  with Dirichlet data.
/// eps may be negative.
struct SteadyAdvDiff {
  double c = 1.0;
  double eps = 1.0;
  double x_left = 0.0;
  double x_right = 1.0;
  double u_left = 0.0;
  double u_right = 1.0;
};

/// Unit square pulse, u = height on [center - width/2, center + width/2).
struct SquarePulse {
  double center = 0.25;
  double width = 0.2;
  double height = 1.0;
};

/// u = 1 for x >= jump, 0 otherwise.
struct Heaviside {
  double jump = 0.5;
};

using InitialProfile = std::variant<SquarePulse, Heaviside>;

/// du/dt + speed du/dx = 0.
struct UnsteadyAdvection {
  double speed = 1.0;
  double x_left = 0.0;
  double x_right = 1.0;
  double t_start = 0.0;
  double t_end = 1.0;
  InitialProfile initial = SquarePulse{};
};

/// du/dt + u du/dx = eps d2u/dx2. Boundary values are the initial profile
/// at the domain ends, held constant in time.
struct Burgers {
  double eps = 0.01;
  double x_left = 0.0;
  double x_right = 1.0;
  double t_start = 0.0;
  double t_end = 1.0;
  InitialProfile initial = SquarePulse{};
};

using Problem = std::variant<SteadyAdvDiff, UnsteadyAdvection, Burgers>;

inline double profile_value(const InitialProfile& profile, double x) {
  return std::visit(
      [x](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SquarePulse>) {
          const double lo = p.center - 0.5 * p.width;
          const double hi = p.center + 0.5 * p.width;
          return (x >= lo && x < hi) ? p.height : 0.0;
        } else {
          return x >= p.jump ? 1.0 : 0.0;
        }
      },
      profile);
}

inline void validate(const SteadyAdvDiff& p) {
  if (!(std::isfinite(p.c) && std::isfinite(p.eps) && std::isfinite(p.x_left) && std::isfinite(p.x_right) &&
        std::isfinite(p.u_left) && std::isfinite(p.u_right)))
    throw Error(ErrorKind::invalid_input, "steady problem has non-finite data");
  if (!(p.x_left < p.x_right)) throw Error(ErrorKind::invalid_input, "x_left must be below x_right");
  if (p.eps == 0.0) throw Error(ErrorKind::degenerate_problem, "eps must be nonzero");
}

inline void validate_profile(const InitialProfile& profile) {
  if (const auto* sq = std::get_if<SquarePulse>(&profile); sq && !(sq->width > 0.0))
    throw Error(ErrorKind::invalid_input, "square pulse width must be positive");
}

inline void validate(const UnsteadyAdvection& p) {
  if (!(p.x_left < p.x_right) || !(p.t_start < p.t_end))
    throw Error(ErrorKind::invalid_input, "space-time domain must be non-degenerate");
  if (!std::isfinite(p.speed)) throw Error(ErrorKind::invalid_input, "non-finite advection speed");
  validate_profile(p.initial);
}

inline void validate(const Burgers& p) {
  if (!(p.x_left < p.x_right) || !(p.t_start < p.t_end))
    throw Error(ErrorKind::invalid_input, "space-time domain must be non-degenerate");
  if (!std::isfinite(p.eps)) throw Error(ErrorKind::invalid_input, "non-finite eps");
  validate_profile(p.initial);
}

inline void validate(const Problem& p) {
  std::visit([](const auto& q) { validate(q); }, p);
}

inline bool is_steady(const Problem& p) { return std::holds_alternative<SteadyAdvDiff>(p); }
inline int input_dimension(const Problem& p) { return is_steady(p) ? 1 : 2; }

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

inline Range x_range(const Problem& p) {
  return std::visit([](const auto& q) { return Range{q.x_left, q.x_right}; }, p);
}

inline Range t_range(const Problem& p) {
  return std::visit(
      [](const auto& q) -> Range {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, SteadyAdvDiff>)
          return {0.0, 0.0};
        else
          return {q.t_start, q.t_end};
      },
      p);
}

/// Diffusivity of the problem (zero for pure advection).
inline double diffusivity(const Problem& p) {
  return std::visit(
      [](const auto& q) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, UnsteadyAdvection>)
          return 0.0;
        else
          return q.eps;
      },
      p);
}

/// Copy of the problem with its diffusivity replaced (continuation schedule).
inline Problem with_diffusivity(Problem p, double eps) {
  std::visit(
      [eps](auto& q) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(q)>, UnsteadyAdvection>) q.eps = eps;
      },
      p);
  return p;
}

/// Steady closed form, evaluated without forming exp(c L / eps).
inline double exact_steady(const SteadyAdvDiff& p, double x) {
  validate(p);
  if (x < p.x_left || x > p.x_right) throw Error(ErrorKind::domain_error, "x outside the steady domain");
  const double length = p.x_right - p.x_left;
  const double s = x - p.x_left;
  const double k = p.c / p.eps;
  double r;  // (e^{ks} - 1) / (e^{kL} - 1)
  if (k == 0.0) {
    r = s / length;
  } else if (k > 0.0) {
    r = std::exp(k * (s - length)) * (std::expm1(-k * s) / std::expm1(-k * length));
  } else {
    r = std::expm1(k * s) / std::expm1(k * length);
  }
  if (x == p.x_right) r = 1.0;
  return (1.0 - r) * p.u_left + r * p.u_right;
}

inline void check_space_time(double x, double t, double x0, double x1, double t0, double t1) {
  if (x < x0 || x > x1 || t < t0 || t > t1)
    throw Error(ErrorKind::domain_error, "point outside the space-time domain");
}

/// Solution by characteristics, u(x, t) = u0(x - C (t - t_start)).
inline double exact_unsteady(const UnsteadyAdvection& p, double x, double t) {
  check_space_time(x, t, p.x_left, p.x_right, p.t_start, p.t_end);
  return profile_value(p.initial, x - p.speed * (t - p.t_start));
}

inline bool has_exact(const Problem& p) { return !std::holds_alternative<Burgers>(p); }

inline double exact(const Problem& p, Point at) {
  if (const auto* s = std::get_if<SteadyAdvDiff>(&p)) return exact_steady(*s, at.x);
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p)) return exact_unsteady(*u, at.x, at.t);
  throw Error(ErrorKind::unsupported, "Burgers problems carry no exact solution");
}

/// Dirichlet value at x_left / x_right (at time t for unsteady problems).
inline double boundary_value(const Problem& p, bool right, double t) {
  if (const auto* s = std::get_if<SteadyAdvDiff>(&p)) return right ? s->u_right : s->u_left;
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p))
    return exact_unsteady(*u, right ? u->x_right : u->x_left, t);
  const auto& b = std::get<Burgers>(p);
  return profile_value(b.initial, right ? b.x_right : b.x_left);
}

inline double initial_value(const Problem& p, double x) {
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p)) return profile_value(u->initial, x);
  if (const auto* b = std::get_if<Burgers>(&p)) return profile_value(b->initial, x);
  throw Error(ErrorKind::unsupported, "steady problems have no initial data");
}

/// PDE residual of a jet:
///   steady:    eps u_xx - c u_x
///   advection: u_t + C u_x
///   Burgers:   u_t + u u_x - eps u_xx
inline double residual(const Problem& p, const NetJet& j) {
  if (const auto* s = std::get_if<SteadyAdvDiff>(&p)) return s->eps * j.d2_dx2 - s->c * j.d_dx;
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p)) return j.d_dt + u->speed * j.d_dx;
  const auto& b = std::get<Burgers>(p);
  return j.d_dt + j.value * j.d_dx - b.eps * j.d2_dx2;
}

/// d(residual)/d(jet).
inline JetCotangent residual_sensitivity(const Problem& p, const NetJet& j) {
  if (const auto* s = std::get_if<SteadyAdvDiff>(&p)) return {0.0, -s->c, s->eps, 0.0};
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p)) return {0.0, u->speed, 0.0, 1.0};
  const auto& b = std::get<Burgers>(p);
  return {j.d_dx, j.value, -b.eps, 1.0};
}

/// Diffusive-minus-advective flux  eps u_x - c u  of the steady problem.
inline double flux(const SteadyAdvDiff& p, const NetJet& j) { return p.eps * j.d_dx - p.c * j.value; }

/// Flux used for interface matching of any problem: the steady flux above,
/// C u for pure advection, and eps u_x - u^2/2 for Burgers.
inline double interface_flux(const Problem& p, const NetJet& j) {
  if (const auto* s = std::get_if<SteadyAdvDiff>(&p)) return flux(*s, j);
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p)) return u->speed * j.value;
  const auto& b = std::get<Burgers>(p);
  return b.eps * j.d_dx - 0.5 * j.value * j.value;
}

inline JetCotangent interface_flux_sensitivity(const Problem& p, const NetJet& j) {
  if (const auto* s = std::get_if<SteadyAdvDiff>(&p)) return {-s->c, s->eps, 0.0, 0.0};
  if (const auto* u = std::get_if<UnsteadyAdvection>(&p)) return {u->speed, 0.0, 0.0, 0.0};
  const auto& b = std::get<Burgers>(p);
  return {-j.value, b.eps, 0.0, 0.0};
}

/// Grid Peclet number c dx / eps.
inline double peclet(double c, double dx, double eps) {
  if (eps == 0.0) throw Error(ErrorKind::degenerate_problem, "Peclet number undefined for eps = 0");
  return c * dx / eps;
}

}  // namespace dpinn
