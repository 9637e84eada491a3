#pragma once

#include <span>
#include <utility>

#include <Eigen/Dense>

#include "dpinn/net/dense_net.hpp"

namespace dpinn {

/// Rejects anything deeper than one hidden layer; the damped least-squares
/// update is only used on shallow nets.
inline void require_shallow(const DenseNet& net) {
  if (!net.is_shallow())
    throw Error(ErrorKind::unsupported_architecture,
                "residual Jacobians are limited to single-hidden-layer networks");
}

/// Jacobian of a per-point residual r(point, jet) with respect to the
/// network parameters. `residual(point, jet)` returns the residual value
/// and its sensitivity to the jet.
template <class ResidualFn>
Eigen::MatrixXd residual_jacobian(const DenseNet& net, std::span<const Point> points, ResidualFn&& residual,
                                  Eigen::VectorXd* values_out = nullptr) {
  require_shallow(net);
  const auto rows = static_cast<Eigen::Index>(points.size());
  const auto cols = static_cast<Eigen::Index>(net.parameter_count());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, cols);
  if (values_out) values_out->resize(rows);
  JetTape tape;
  std::vector<double> row(net.parameter_count());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Point p = points[static_cast<std::size_t>(r)];
    const NetJet jet = tape.forward(net, p);
    const std::pair<double, JetCotangent> res = residual(p, jet);
    if (values_out) (*values_out)(r) = res.first;
    std::fill(row.begin(), row.end(), 0.0);
    tape.backward(res.second, row);
    for (Eigen::Index c = 0; c < cols; ++c) jac(r, c) = row[static_cast<std::size_t>(c)];
  }
  return jac;
}

}  // namespace dpinn
