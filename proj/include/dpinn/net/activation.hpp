#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "dpinn/util/error.hpp"

namespace dpinn {

enum class Activation { tanh, sigmoid, softplus, log_sigmoid, arctan, exponent };

inline constexpr std::array<Activation, 6> kAllActivations{
    Activation::tanh,   Activation::sigmoid, Activation::softplus,
    Activation::log_sigmoid, Activation::arctan, Activation::exponent};

/// Activations swept by default; exponent is admitted but does not generalise.
inline constexpr std::array<Activation, 5> kSweepActivations{
    Activation::tanh, Activation::sigmoid, Activation::softplus, Activation::log_sigmoid,
    Activation::arctan};

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
    case Activation::log_sigmoid: return "log-sigmoid";
    case Activation::arctan: return "arctan";
    case Activation::exponent: return "exponent";
  }
  return "?";
}

inline Activation parse_activation(std::string_view name) {
  for (auto a : kAllActivations)
    if (to_string(a) == name) return a;
  throw Error(ErrorKind::invalid_input, "unknown activation '" + std::string(name) + "'");
}

/// Value and the first three derivatives of an activation at one point.
/// The third derivative is needed to back-propagate through second
/// input-derivatives.
struct ActivationDerivs {
  double f;
  double d1;
  double d2;
  double d3;
};

namespace detail {

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace detail

inline ActivationDerivs activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh: {
      const double t = std::tanh(z);
      const double s = 1.0 - t * t;
      return {t, s, -2.0 * t * s, -2.0 * s * (1.0 - 3.0 * t * t)};
    }
    case Activation::sigmoid: {
      const double s = detail::logistic(z);
      const double q = s * (1.0 - s);
      return {s, q, q * (1.0 - 2.0 * s), q * (1.0 - 6.0 * s + 6.0 * s * s)};
    }
    case Activation::softplus: {
      const double s = detail::logistic(z);
      const double q = s * (1.0 - s);
      return {detail::softplus(z), s, q, q * (1.0 - 2.0 * s)};
    }
    case Activation::log_sigmoid: {
      // log(sigmoid(z)) = -softplus(-z)
      const double s = detail::logistic(z);
      const double q = s * (1.0 - s);
      return {-detail::softplus(-z), 1.0 - s, -q, -q * (1.0 - 2.0 * s)};
    }
    case Activation::arctan: {
      const double u = 1.0 + z * z;
      return {std::atan(z), 1.0 / u, -2.0 * z / (u * u), (6.0 * z * z - 2.0) / (u * u * u)};
    }
    case Activation::exponent: {
      const double e = std::exp(z);
      return {e, e, e, e};
    }
  }
  return {0, 0, 0, 0};
}

}  // namespace dpinn
