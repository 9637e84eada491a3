#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpinn/dpinn/collocation.hpp"
#include "dpinn/dpinn/model.hpp"
#include "dpinn/problems/problem.hpp"
#include "dpinn/util/random.hpp"

namespace dpinn {

enum class RowTag { collocation, boundary, value_interface, slope_interface };

inline std::string_view to_string(RowTag t) {
  switch (t) {
    case RowTag::collocation: return "collocation";
    case RowTag::boundary: return "boundary";
    case RowTag::value_interface: return "value-interface";
    case RowTag::slope_interface: return "slope-interface";
  }
  return "?";
}

/// Frozen tanh hidden layer of one block: basis_k(s) = tanh(slope_k s + bias_k).
struct ElmBlock {
  std::vector<double> slopes;
  std::vector<double> biases;
};

/// One frozen hidden layer per x-block plus the output weights, stored
/// block-major. `normalize` feeds each block its local unit coordinate.
struct ElmNetwork {
  BlockGrid grid;
  bool normalize = false;
  int neurons = 0;
  std::vector<ElmBlock> blocks;
  std::vector<double> weights;

  std::size_t unknown_count() const { return static_cast<std::size_t>(neurons) * blocks.size(); }
};

struct ElmSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  std::vector<RowTag> tags;
};

struct ElmOptions {
  int neurons_per_block = 12;
  /// Hidden slopes and biases are uniform on [-gain, gain].
  double gain = 1.0;
  bool normalize = false;
  bool include_edges = true;
};

namespace detail {

struct BasisJet {
  double value, d1, d2;
};

/// tanh basis and its first two derivatives in physical x.
inline BasisJet elm_basis(double slope, double bias, double s, double scale) {
  const double h = std::tanh(slope * s + bias);
  const double sech2 = 1.0 - h * h;
  const double ms = slope * scale;
  return {h, ms * sech2, -2.0 * ms * ms * h * sech2};
}

inline double elm_coordinate(const ElmNetwork& net, int block, double x) {
  if (!net.normalize) return x;
  return (x - net.grid.x_edge(block)) / net.grid.dx();
}

inline double elm_scale(const ElmNetwork& net) { return net.normalize ? 1.0 / net.grid.dx() : 1.0; }

inline ElmNetwork elm_network(const SteadyAdvDiff& p, int nb, int neurons, std::uint64_t seed, double gain,
                              bool normalize) {
  validate(p);
  if (nb < 1) throw Error(ErrorKind::invalid_config, "ELM needs at least one block");
  if (neurons < 1) throw Error(ErrorKind::invalid_config, "ELM needs at least one neuron per block");
  if (!(gain > 0.0) || !std::isfinite(gain)) throw Error(ErrorKind::invalid_config, "ELM gain must be positive");
  ElmNetwork net;
  net.grid = BlockGrid::for_problem(p, nb);
  net.normalize = normalize;
  net.neurons = neurons;
  for (int b = 0; b < nb; ++b) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
    ElmBlock blk;
    for (int k = 0; k < neurons; ++k) blk.slopes.push_back(gain * rng.uniform(-1.0, 1.0));
    for (int k = 0; k < neurons; ++k) blk.biases.push_back(gain * rng.uniform(-1.0, 1.0));
    net.blocks.push_back(std::move(blk));
  }
  net.weights.assign(net.unknown_count(), 0.0);
  return net;
}

/// Rows in order: collocation (block by block), the two boundary rows, the
/// value-interface rows, the slope-interface rows.
inline ElmSystem elm_assemble(const SteadyAdvDiff& p, const ElmNetwork& net,
                              const std::vector<std::vector<double>>& points) {
  const int nb = net.grid.nbx;
  const int n = net.neurons;
  std::size_t n_colloc = 0;
  for (const auto& v : points) n_colloc += v.size();
  const auto rows = static_cast<Eigen::Index>(n_colloc + 2 + 2 * static_cast<std::size_t>(nb - 1));
  ElmSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(net.unknown_count()));
  sys.rhs = Eigen::VectorXd::Zero(rows);
  const double scale = elm_scale(net);

  auto fill = [&](Eigen::Index r, int block, double x, auto&& entry) {
    const ElmBlock& blk = net.blocks[static_cast<std::size_t>(block)];
    const double s = elm_coordinate(net, block, x);
    for (int k = 0; k < n; ++k) {
      const BasisJet j = elm_basis(blk.slopes[static_cast<std::size_t>(k)], blk.biases[static_cast<std::size_t>(k)], s, scale);
      sys.matrix(r, block * n + k) += entry(j);
    }
  };

  Eigen::Index r = 0;
  for (int b = 0; b < nb; ++b) {
    for (double x : points[static_cast<std::size_t>(b)]) {
      fill(r, b, x, [&](const BasisJet& j) { return p.eps * j.d2 - p.c * j.d1; });
      sys.tags.push_back(RowTag::collocation);
      ++r;
    }
  }
  fill(r, 0, p.x_left, [](const BasisJet& j) { return j.value; });
  sys.rhs(r) = p.u_left;
  sys.tags.push_back(RowTag::boundary);
  ++r;
  fill(r, nb - 1, p.x_right, [](const BasisJet& j) { return j.value; });
  sys.rhs(r) = p.u_right;
  sys.tags.push_back(RowTag::boundary);
  ++r;
  for (int b = 0; b + 1 < nb; ++b) {
    const double xe = net.grid.x_edge(b + 1);
    fill(r, b, xe, [](const BasisJet& j) { return j.value; });
    fill(r, b + 1, xe, [](const BasisJet& j) { return -j.value; });
    sys.tags.push_back(RowTag::value_interface);
    ++r;
  }
  for (int b = 0; b + 1 < nb; ++b) {
    const double xe = net.grid.x_edge(b + 1);
    fill(r, b, xe, [](const BasisJet& j) { return j.d1; });
    fill(r, b + 1, xe, [](const BasisJet& j) { return -j.d1; });
    sys.tags.push_back(RowTag::slope_interface);
    ++r;
  }
  return sys;
}

}  // namespace detail

/// Single-network ELM on explicit collocation points.
inline std::pair<ElmNetwork, ElmSystem> assemble_elm_pinn(const SteadyAdvDiff& p, const std::vector<double>& collocation,
                                                          int n_neurons, std::uint64_t seed, double gain = 1.0,
                                                          bool normalize = false) {
  ElmNetwork net = detail::elm_network(p, 1, n_neurons, seed, gain, normalize);
  for (double x : collocation)
    if (x < p.x_left || x > p.x_right) throw Error(ErrorKind::domain_error, "collocation point outside the domain");
  ElmSystem sys = detail::elm_assemble(p, net, {collocation});
  return {std::move(net), std::move(sys)};
}

/// Block-wise ELM with `pts_per_block` collocation points in each of `nb`
/// blocks, coupled by value and slope rows at the interfaces.
inline std::pair<ElmNetwork, ElmSystem> assemble_elm_dpinn(const SteadyAdvDiff& p, int nb, int pts_per_block,
                                                           std::uint64_t seed, const ElmOptions& opt) {
  if (pts_per_block < 0) throw Error(ErrorKind::invalid_config, "points per block must be >= 0");
  ElmNetwork net = detail::elm_network(p, nb, opt.neurons_per_block, seed, opt.gain, opt.normalize);
  std::vector<std::vector<double>> pts;
  for (int b = 0; b < nb; ++b)
    pts.push_back(pts_per_block == 0 ? std::vector<double>{}
                                     : linspace(net.grid.block_x(b), pts_per_block, opt.include_edges));
  ElmSystem sys = detail::elm_assemble(p, net, pts);
  return {std::move(net), std::move(sys)};
}

/// Square solve with partial-pivot LU. Throws singular-system when the
/// reciprocal condition estimate falls below `rcond_floor`.
inline Eigen::VectorXd solve_exact(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, double rcond_floor = 1e-13) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::invalid_input, "exact solve needs a square system; use solve_pinv");
  if (a.rows() != rhs.size()) throw Error(ErrorKind::invalid_input, "right-hand side length mismatch");
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rc = lu.rcond();
  if (!(rc > rcond_floor))
    throw Error(ErrorKind::singular_system,
                "system is singular or ill-conditioned (rcond " + std::to_string(rc) + "); use solve_pinv");
  Eigen::VectorXd c = lu.solve(rhs);
  if (!c.allFinite()) throw Error(ErrorKind::singular_system, "exact solve produced non-finite weights; use solve_pinv");
  return c;
}

inline Eigen::VectorXd solve_exact(const ElmSystem& sys, double rcond_floor = 1e-13) {
  return solve_exact(sys.matrix, sys.rhs, rcond_floor);
}

/// Moore-Penrose least-norm solution through the SVD; singular values below
/// tau * sigma_max are treated as zero.
inline Eigen::VectorXd solve_pinv(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, double tau = 1e-12) {
  if (a.rows() != rhs.size()) throw Error(ErrorKind::invalid_input, "right-hand side length mismatch");
  if (a.size() == 0) return Eigen::VectorXd::Zero(a.cols());
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = tau * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd utb = svd.matrixU().transpose() * rhs;
  for (Eigen::Index k = 0; k < sv.size(); ++k) utb(k) = sv(k) > cutoff && sv(k) > 0.0 ? utb(k) / sv(k) : 0.0;
  return svd.matrixV() * utb;
}

inline Eigen::VectorXd solve_pinv(const ElmSystem& sys, double tau = 1e-12) { return solve_pinv(sys.matrix, sys.rhs, tau); }

inline void set_weights(ElmNetwork& net, const Eigen::VectorXd& c) {
  if (static_cast<std::size_t>(c.size()) != net.unknown_count())
    throw Error(ErrorKind::invalid_input, "weight vector length must equal the unknown count");
  net.weights.assign(c.data(), c.data() + c.size());
}

/// Prediction of the owning block (later block owns shared edges).
inline double elm_predict(const ElmNetwork& net, double x) {
  const int b = net.grid.column_of(x);
  const ElmBlock& blk = net.blocks[static_cast<std::size_t>(b)];
  const double s = detail::elm_coordinate(net, b, x);
  double sum = 0.0;
  for (int k = 0; k < net.neurons; ++k)
    sum += net.weights[static_cast<std::size_t>(b * net.neurons + k)] *
           std::tanh(blk.slopes[static_cast<std::size_t>(k)] * s + blk.biases[static_cast<std::size_t>(k)]);
  return sum;
}

}  // namespace dpinn
