#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpinn/net/activation.hpp"
#include "dpinn/util/error.hpp"
#include "dpinn/util/random.hpp"

namespace dpinn {

/// A point of the (x) or (x, t) domain. Steady problems leave t at zero.
struct Point {
  double x = 0.0;
  double t = 0.0;
};

/// Network output and its exact input derivatives at one point.
struct NetJet {
  double value = 0.0;
  double d_dx = 0.0;
  double d2_dx2 = 0.0;
  double d_dt = 0.0;
};

/// Sensitivity of a scalar loss to each entry of a NetJet.
struct JetCotangent {
  double value = 0.0;
  double d_dx = 0.0;
  double d2_dx2 = 0.0;
  double d_dt = 0.0;

  JetCotangent& operator+=(const JetCotangent& o) {
    value += o.value;
    d_dx += o.d_dx;
    d2_dx2 += o.d2_dx2;
    d_dt += o.d_dt;
    return *this;
  }
};

inline JetCotangent operator*(double s, JetCotangent c) {
  return {s * c.value, s * c.d_dx, s * c.d2_dx2, s * c.d_dt};
}

inline bool is_finite(const NetJet& j) {
  return std::isfinite(j.value) && std::isfinite(j.d_dx) && std::isfinite(j.d2_dx2) &&
         std::isfinite(j.d_dt);
}

/// Fully connected feed-forward network with one scalar output.
///
/// Parameters live in one flat vector. Flattening order: for each layer in
/// turn, the weight matrix row-major (out_width x in_width), then that
/// layer's bias vector. The activation applies to every hidden layer; the
/// output layer is affine.
class DenseNet {
 public:
  DenseNet() = default;

  DenseNet(std::vector<int> widths, Activation activation)
      : widths_(std::move(widths)), activation_(activation) {
    validate_widths(widths_);
    build_offsets();
    params_.assign(parameter_count_from_offsets(), 0.0);
  }

  DenseNet(std::vector<int> widths, Activation activation, std::vector<double> params)
      : DenseNet(std::move(widths), activation) {
    unflatten(params);
  }

  /// Uniform on [-1, 1] scaled by 1/sqrt(fan-in) of the layer, for weights
  /// and biases alike.
  static DenseNet init_random(std::vector<int> widths, Activation activation, std::uint64_t seed) {
    DenseNet net(std::move(widths), activation);
    Rng rng(seed);
    for (int l = 0; l < net.layer_count(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.widths_[l]));
      const std::size_t begin = net.weight_offset(l);
      const std::size_t end = net.bias_offset(l) + static_cast<std::size_t>(net.widths_[l + 1]);
      for (std::size_t k = begin; k < end; ++k) net.params_[k] = rng.uniform(-bound, bound);
    }
    return net;
  }

  static void validate_widths(const std::vector<int>& widths) {
    if (widths.size() < 2) throw Error(ErrorKind::invalid_architecture, "need at least input and output widths");
    for (int w : widths)
      if (w <= 0) throw Error(ErrorKind::invalid_architecture, "layer widths must be positive");
    if (widths.front() != 1 && widths.front() != 2)
      throw Error(ErrorKind::invalid_architecture, "input width must be 1 (x) or 2 (x, t)");
    if (widths.back() != 1) throw Error(ErrorKind::invalid_architecture, "output width must be 1");
  }

  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  int input_dim() const { return widths_.front(); }
  int layer_count() const { return static_cast<int>(widths_.size()) - 1; }
  int hidden_layer_count() const { return layer_count() - 1; }
  bool is_shallow() const { return widths_.size() == 3; }

  std::size_t parameter_count() const { return params_.size(); }
  std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  std::size_t bias_offset(int layer) const {
    return weight_offset(layer) +
           static_cast<std::size_t>(widths_[layer]) * static_cast<std::size_t>(widths_[layer + 1]);
  }

  double weight(int layer, int out, int in) const {
    return params_[weight_offset(layer) + static_cast<std::size_t>(out * widths_[layer] + in)];
  }
  double bias(int layer, int out) const { return params_[bias_offset(layer) + static_cast<std::size_t>(out)]; }

  std::span<const double> params() const { return params_; }
  std::vector<double> flatten() const { return params_; }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != params_.size())
      throw Error(ErrorKind::invalid_input, "parameter vector has " + std::to_string(flat.size()) +
                                                " entries, network expects " +
                                                std::to_string(params_.size()));
    for (double v : flat)
      if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "non-finite parameter");
    params_.assign(flat.begin(), flat.end());
  }

  /// Number of weight-matrix entries (biases excluded).
  std::size_t weight_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l)
      n += static_cast<std::size_t>(widths_[l]) * static_cast<std::size_t>(widths_[l + 1]);
    return n;
  }

  bool operator==(const DenseNet&) const = default;

 private:
  void build_offsets() {
    offsets_.clear();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(widths_[l]) * static_cast<std::size_t>(widths_[l + 1]) +
             static_cast<std::size_t>(widths_[l + 1]);
    }
    offsets_.push_back(off);
  }
  std::size_t parameter_count_from_offsets() const { return offsets_.back(); }

  std::vector<int> widths_;
  Activation activation_ = Activation::tanh;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Forward evaluation with a recorded tape, so that any number of
/// cotangents can be pulled back to parameter gradients afterwards.
///
/// Single-hidden-layer nets take a closed-form path; deeper nets propagate
/// (value, d/dx, d2/dx2, d/dt) through every layer and reverse that
/// propagation. Both are exact.
class JetTape {
 public:
  /// Forces the layered path even for shallow nets (used to cross-check).
  bool force_layered = false;

  NetJet forward(const DenseNet& net, Point p) {
    net_ = &net;
    point_ = p;
    if (net.is_shallow() && !force_layered) return forward_shallow(net, p);
    return forward_layered(net, p);
  }

  /// Accumulates d(loss)/d(params) += bar . d(jet)/d(params) into grad
  /// for the point of the last forward call.
  void backward(const JetCotangent& bar, std::span<double> grad) {
    if (net_->is_shallow() && !force_layered)
      backward_shallow(*net_, bar, grad);
    else
      backward_layered(*net_, bar, grad);
  }

 private:
  NetJet forward_shallow(const DenseNet& net, Point p) {
    const int hidden = net.widths()[1];
    const int in = net.input_dim();
    const std::span<const double> w = net.params();
    const std::size_t w1 = 0;
    const std::size_t b1 = static_cast<std::size_t>(hidden * in);
    const std::size_t w2 = b1 + static_cast<std::size_t>(hidden);
    const std::size_t b2 = w2 + static_cast<std::size_t>(hidden);
    act_.resize(static_cast<std::size_t>(hidden));
    NetJet out{w[b2], 0.0, 0.0, 0.0};
    for (int k = 0; k < hidden; ++k) {
      const std::size_t ku = static_cast<std::size_t>(k);
      const double wx = w[w1 + ku * static_cast<std::size_t>(in)];
      const double wt = in == 2 ? w[w1 + ku * 2 + 1] : 0.0;
      const double z = wx * p.x + (in == 2 ? wt * p.t : 0.0) + w[b1 + ku];
      const ActivationDerivs a = activate(net.activation(), z);
      act_[ku] = a;
      const double v = w[w2 + ku];
      out.value += v * a.f;
      out.d_dx += v * a.d1 * wx;
      out.d2_dx2 += v * a.d2 * wx * wx;
      out.d_dt += v * a.d1 * wt;
    }
    return out;
  }

  void backward_shallow(const DenseNet& net, const JetCotangent& bar, std::span<double> grad) const {
    const int hidden = net.widths()[1];
    const int in = net.input_dim();
    const std::span<const double> w = net.params();
    const std::size_t b1 = static_cast<std::size_t>(hidden * in);
    const std::size_t w2 = b1 + static_cast<std::size_t>(hidden);
    const std::size_t b2 = w2 + static_cast<std::size_t>(hidden);
    grad[b2] += bar.value;
    for (int k = 0; k < hidden; ++k) {
      const std::size_t ku = static_cast<std::size_t>(k);
      const ActivationDerivs& a = act_[ku];
      const double wx = w[ku * static_cast<std::size_t>(in)];
      const double wt = in == 2 ? w[ku * 2 + 1] : 0.0;
      const double v = w[w2 + ku];
      grad[w2 + ku] += bar.value * a.f + bar.d_dx * a.d1 * wx + bar.d2_dx2 * a.d2 * wx * wx +
                       bar.d_dt * a.d1 * wt;
      const double hb = v * bar.value;
      const double hbx = v * bar.d_dx;
      const double hbxx = v * bar.d2_dx2;
      const double hbt = v * bar.d_dt;
      const double zb = hb * a.d1 + hbx * a.d2 * wx + hbxx * a.d3 * wx * wx + hbt * a.d2 * wt;
      const double zbx = hbx * a.d1 + hbxx * 2.0 * a.d2 * wx;
      grad[ku * static_cast<std::size_t>(in)] += zb * point_.x + zbx;
      if (in == 2) grad[ku * 2 + 1] += zb * point_.t + hbt * a.d1;
      grad[b1 + ku] += zb;
    }
  }

  NetJet forward_layered(const DenseNet& net, Point p) {
    const auto& widths = net.widths();
    const int layers = net.layer_count();
    // Unit storage: layer 0 holds the inputs, layer l+1 the outputs of weight layer l.
    unit_offset_.assign(widths.size() + 1, 0);
    for (std::size_t l = 0; l < widths.size(); ++l) unit_offset_[l + 1] = unit_offset_[l] + static_cast<std::size_t>(widths[l]);
    const std::size_t total = unit_offset_.back();
    for (auto* v : {&h_, &hx_, &hxx_, &ht_, &z_, &zx_, &zxx_, &zt_}) v->assign(total, 0.0);
    act_.assign(total, ActivationDerivs{0, 0, 0, 0});

    h_[0] = p.x;
    hx_[0] = 1.0;
    if (net.input_dim() == 2) {
      h_[1] = p.t;
      ht_[1] = 1.0;
    }
    const std::span<const double> w = net.params();
    for (int l = 0; l < layers; ++l) {
      const int nin = widths[l];
      const int nout = widths[l + 1];
      const std::size_t in0 = unit_offset_[l];
      const std::size_t out0 = unit_offset_[l + 1];
      const std::size_t wo = net.weight_offset(l);
      const std::size_t bo = net.bias_offset(l);
      const bool hidden = l + 1 < layers;
      for (int o = 0; o < nout; ++o) {
        double z = w[bo + static_cast<std::size_t>(o)], zx = 0, zxx = 0, zt = 0;
        for (int i = 0; i < nin; ++i) {
          const double wi = w[wo + static_cast<std::size_t>(o * nin + i)];
          const std::size_t u = in0 + static_cast<std::size_t>(i);
          z += wi * h_[u];
          zx += wi * hx_[u];
          zxx += wi * hxx_[u];
          zt += wi * ht_[u];
        }
        const std::size_t u = out0 + static_cast<std::size_t>(o);
        z_[u] = z;
        zx_[u] = zx;
        zxx_[u] = zxx;
        zt_[u] = zt;
        if (hidden) {
          const ActivationDerivs a = activate(net.activation(), z);
          act_[u] = a;
          h_[u] = a.f;
          hx_[u] = a.d1 * zx;
          hxx_[u] = a.d2 * zx * zx + a.d1 * zxx;
          ht_[u] = a.d1 * zt;
        } else {
          h_[u] = z;
          hx_[u] = zx;
          hxx_[u] = zxx;
          ht_[u] = zt;
        }
      }
    }
    const std::size_t o = unit_offset_[static_cast<std::size_t>(layers)];
    return {h_[o], hx_[o], hxx_[o], ht_[o]};
  }

  void backward_layered(const DenseNet& net, const JetCotangent& bar, std::span<double> grad) {
    const auto& widths = net.widths();
    const int layers = net.layer_count();
    const std::size_t total = unit_offset_.back();
    for (auto* v : {&zb_, &zbx_, &zbxx_, &zbt_}) v->assign(total, 0.0);
    const std::size_t top = unit_offset_[static_cast<std::size_t>(layers)];
    zb_[top] = bar.value;
    zbx_[top] = bar.d_dx;
    zbxx_[top] = bar.d2_dx2;
    zbt_[top] = bar.d_dt;
    const std::span<const double> w = net.params();
    for (int l = layers - 1; l >= 0; --l) {
      const int nin = widths[l];
      const int nout = widths[l + 1];
      const std::size_t in0 = unit_offset_[l];
      const std::size_t out0 = unit_offset_[l + 1];
      const std::size_t wo = net.weight_offset(l);
      const std::size_t bo = net.bias_offset(l);
      for (int o = 0; o < nout; ++o) {
        const std::size_t uo = out0 + static_cast<std::size_t>(o);
        grad[bo + static_cast<std::size_t>(o)] += zb_[uo];
        for (int i = 0; i < nin; ++i) {
          const std::size_t ui = in0 + static_cast<std::size_t>(i);
          grad[wo + static_cast<std::size_t>(o * nin + i)] +=
              zb_[uo] * h_[ui] + zbx_[uo] * hx_[ui] + zbxx_[uo] * hxx_[ui] + zbt_[uo] * ht_[ui];
        }
      }
      if (l == 0) break;
      // Pull back to the hidden units feeding this layer, then through their activation.
      for (int i = 0; i < nin; ++i) {
        double hb = 0, hbx = 0, hbxx = 0, hbt = 0;
        for (int o = 0; o < nout; ++o) {
          const double wi = w[wo + static_cast<std::size_t>(o * nin + i)];
          const std::size_t uo = out0 + static_cast<std::size_t>(o);
          hb += wi * zb_[uo];
          hbx += wi * zbx_[uo];
          hbxx += wi * zbxx_[uo];
          hbt += wi * zbt_[uo];
        }
        const std::size_t ui = in0 + static_cast<std::size_t>(i);
        const ActivationDerivs& a = act_[ui];
        const double zx = zx_[ui];
        zb_[ui] = hb * a.d1 + hbx * a.d2 * zx + hbxx * (a.d3 * zx * zx + a.d2 * zxx_[ui]) + hbt * a.d2 * zt_[ui];
        zbx_[ui] = hbx * a.d1 + hbxx * 2.0 * a.d2 * zx;
        zbxx_[ui] = hbxx * a.d1;
        zbt_[ui] = hbt * a.d1;
      }
    }
  }

  const DenseNet* net_ = nullptr;
  Point point_{};
  std::vector<ActivationDerivs> act_;
  std::vector<std::size_t> unit_offset_;
  std::vector<double> h_, hx_, hxx_, ht_, z_, zx_, zxx_, zt_;
  std::vector<double> zb_, zbx_, zbxx_, zbt_;
};

inline void check_input_dim(const DenseNet& net, bool has_t) {
  if ((net.input_dim() == 2) != has_t)
    throw Error(ErrorKind::invalid_input, net.input_dim() == 2 ? "network expects (x, t) input"
                                                               : "network expects x input only");
}

inline NetJet evaluate(const DenseNet& net, double x, std::optional<double> t = std::nullopt) {
  check_input_dim(net, t.has_value());
  JetTape tape;
  return tape.forward(net, {x, t.value_or(0.0)});
}

/// Gradient of a scalar loss over a batch of points with respect to every
/// network parameter, in the flattening order of DenseNet.
///
/// `loss(jets, cotangents)` returns the loss value and writes
/// d(loss)/d(jet) for each point into `cotangents`.
template <class LossFn>
std::vector<double> loss_gradient(const DenseNet& net, std::span<const Point> points, LossFn&& loss,
                                  double* value_out = nullptr) {
  JetTape tape;
  std::vector<NetJet> jets(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) jets[i] = tape.forward(net, points[i]);
  std::vector<JetCotangent> bars(points.size());
  const double value = loss(std::span<const NetJet>(jets), std::span<JetCotangent>(bars));
  if (!std::isfinite(value)) throw Error(ErrorKind::diverged_evaluation, "non-finite loss");
  if (value_out) *value_out = value;
  std::vector<double> grad(net.parameter_count(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    tape.forward(net, points[i]);
    tape.backward(bars[i], grad);
  }
  return grad;
}

}  // namespace dpinn
