#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "dpinn/net/dense_net.hpp"
#include "dpinn/net/jacobian.hpp"
#include "dpinn/util/random.hpp"
#include "test_support.hpp"

using namespace dpinn;
using dpinn::testing::error_kind_of;
using dpinn::testing::near_rel;

namespace {

DenseNet hand_net(double w1, double b1, double w3, double b3) {
  DenseNet net = DenseNet::init_random({1, 1, 1}, Activation::tanh, 0);
  const std::vector<double> p{w1, b1, w3, b3};
  net.unflatten(p);
  return net;
}

std::vector<int> random_widths(Rng& rng) {
  std::vector<int> w{rng.uniform() < 0.5 ? 1 : 2};
  const int hidden = 1 + static_cast<int>(rng.uniform() * 3.0);
  for (int l = 0; l < hidden; ++l) w.push_back(1 + static_cast<int>(rng.uniform() * 4.0));
  w.push_back(1);
  return w;
}

NetJet eval_at(const DenseNet& net, double x, double t) {
  return net.input_dim() == 2 ? evaluate(net, x, t) : evaluate(net, x);
}

}  // namespace

TEST(DenseNet, InitIsDeterministic) {
  const auto a = DenseNet::init_random({1, 2, 1}, Activation::tanh, 7);
  const auto b = DenseNet::init_random({1, 2, 1}, Activation::tanh, 7);
  EXPECT_EQ(a.flatten(), b.flatten());
  const auto c = DenseNet::init_random({1, 2, 1}, Activation::tanh, 8);
  EXPECT_NE(a.flatten(), c.flatten());
}

TEST(DenseNet, ParameterCount) {
  const auto net = DenseNet::init_random({1, 2, 1}, Activation::tanh, 1);
  EXPECT_EQ(net.parameter_count(), 7u);
  EXPECT_EQ(net.weight_count(), 4u);
  EXPECT_EQ(DenseNet::init_random({2, 3, 3, 1}, Activation::tanh, 1).parameter_count(), 9u + 12u + 4u);
}

TEST(DenseNet, InitBoundsHoldOverManySeeds) {
  const double bound = 1.0 / std::sqrt(2.0);
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto net = DenseNet::init_random({2, 2, 1}, Activation::tanh, seed);
    for (double p : net.params()) ASSERT_LE(std::abs(p), bound) << "seed " << seed;
  }
}

TEST(DenseNet, RejectsBadWidths) {
  EXPECT_EQ(error_kind_of([] { DenseNet::init_random({}, Activation::tanh, 0); }), ErrorKind::invalid_architecture);
  EXPECT_EQ(error_kind_of([] { DenseNet::init_random({1, 0, 1}, Activation::tanh, 0); }),
            ErrorKind::invalid_architecture);
}

TEST(DenseNet, ZeroWeightsGiveOutputBias) {
  auto net = DenseNet::init_random({1, 3, 1}, Activation::sigmoid, 3);
  std::vector<double> p(net.parameter_count(), 0.0);
  p.back() = 0.75;
  net.unflatten(p);
  const NetJet j = evaluate(net, 0.3);
  EXPECT_EQ(j.value, 0.75);
  EXPECT_EQ(j.d_dx, 0.0);
  EXPECT_EQ(j.d2_dx2, 0.0);
  EXPECT_EQ(j.d_dt, 0.0);
}

TEST(DenseNet, HandNetJet) {
  const NetJet j = evaluate(hand_net(1.0, 0.0, 2.0, 0.0), 0.0);
  EXPECT_EQ(j.value, 0.0);
  EXPECT_DOUBLE_EQ(j.d_dx, 2.0);
  EXPECT_EQ(j.d2_dx2, 0.0);
}

TEST(DenseNet, DimensionMismatchThrows) {
  const auto one = DenseNet::init_random({1, 2, 1}, Activation::tanh, 0);
  const auto two = DenseNet::init_random({2, 2, 1}, Activation::tanh, 0);
  EXPECT_EQ(error_kind_of([&] { evaluate(one, 0.1, 0.2); }), ErrorKind::invalid_input);
  EXPECT_EQ(error_kind_of([&] { evaluate(two, 0.1); }), ErrorKind::invalid_input);
}

TEST(DenseNet, UnflattenRoundTrips) {
  auto net = DenseNet::init_random({2, 3, 2, 1}, Activation::arctan, 11);
  const auto flat = net.flatten();
  auto other = DenseNet::init_random({2, 3, 2, 1}, Activation::arctan, 12);
  other.unflatten(flat);
  EXPECT_EQ(other.flatten(), flat);
  EXPECT_EQ(evaluate(other, 0.2, 0.4).value, evaluate(net, 0.2, 0.4).value);
}

TEST(DenseNet, EvaluateIsPure) {
  const auto net = DenseNet::init_random({2, 4, 1}, Activation::softplus, 5);
  const NetJet a = evaluate(net, 0.3, 0.7);
  evaluate(net, -0.9, 0.1);
  const NetJet b = evaluate(net, 0.3, 0.7);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.d_dx, b.d_dx);
  EXPECT_EQ(a.d2_dx2, b.d2_dx2);
  EXPECT_EQ(a.d_dt, b.d_dt);
}

// Input derivatives against central differences, for every activation.
TEST(DenseNet, JetMatchesFiniteDifferences) {
  const double h = 1e-5;
  for (auto act : kAllActivations) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(act)}));
      const auto widths = random_widths(rng);
      const auto net = DenseNet::init_random(widths, act, seed);
      const double x = rng.uniform(-1.0, 1.0), t = rng.uniform(-1.0, 1.0);
      const NetJet j = eval_at(net, x, t);
      const NetJet xp = eval_at(net, x + h, t), xm = eval_at(net, x - h, t);
      SCOPED_TRACE(std::string(to_string(act)) + " seed " + std::to_string(seed));
      ASSERT_TRUE(near_rel(j.d_dx, (xp.value - xm.value) / (2 * h)));
      ASSERT_TRUE(near_rel(j.d2_dx2, (xp.d_dx - xm.d_dx) / (2 * h)));
      if (net.input_dim() == 2) {
        const NetJet tp = eval_at(net, x, t + h), tm = eval_at(net, x, t - h);
        ASSERT_TRUE(near_rel(j.d_dt, (tp.value - tm.value) / (2 * h)));
      } else {
        ASSERT_EQ(j.d_dt, 0.0);
      }
    }
  }
}

TEST(DenseNet, ShallowAndLayeredPathsAgree) {
  for (auto act : kAllActivations) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto net = DenseNet::init_random({seed % 2 ? 2 : 1, 3, 1}, act, seed);
      JetTape fast, slow;
      slow.force_layered = true;
      const Point p{0.37, 0.61};
      const NetJet a = fast.forward(net, p), b = slow.forward(net, p);
      EXPECT_NEAR(a.value, b.value, 1e-14);
      EXPECT_NEAR(a.d_dx, b.d_dx, 1e-14);
      EXPECT_NEAR(a.d2_dx2, b.d2_dx2, 1e-14);
      EXPECT_NEAR(a.d_dt, b.d_dt, 1e-14);
      const JetCotangent bar{0.3, -1.2, 0.7, 0.4};
      std::vector<double> ga(net.parameter_count()), gb(net.parameter_count());
      fast.backward(bar, ga);
      slow.backward(bar, gb);
      for (std::size_t k = 0; k < ga.size(); ++k) EXPECT_NEAR(ga[k], gb[k], 1e-13);
    }
  }
}

TEST(LossGradient, ZeroLossGivesZeroGradient) {
  const auto net = DenseNet::init_random({1, 2, 1}, Activation::tanh, 0);
  const std::vector<Point> pts{{0.1, 0.0}, {0.5, 0.0}};
  const auto g = loss_gradient(net, std::span<const Point>(pts),
                               [](std::span<const NetJet>, std::span<JetCotangent>) { return 0.0; });
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(LossGradient, HandNetSymbolic) {
  const double w1 = 1.0, b1 = 0.0, w3 = 2.0, b3 = 0.5, x0 = 1.0;
  const auto net = hand_net(w1, b1, w3, b3);
  const std::vector<Point> pts{{x0, 0.0}};
  double value = 0.0;
  const auto g = loss_gradient(
      net, std::span<const Point>(pts),
      [](std::span<const NetJet> jets, std::span<JetCotangent> bars) {
        bars[0].value = 2.0 * jets[0].value;
        return jets[0].value * jets[0].value;
      },
      &value);
  const double th = std::tanh(w1 * x0 + b1), sech2 = 1.0 - th * th;
  const double phi = w3 * th + b3;
  EXPECT_NEAR(value, phi * phi, 1e-15);
  EXPECT_NEAR(g[0], 2.0 * phi * w3 * sech2 * x0, 1e-14);
  EXPECT_NEAR(g[1], 2.0 * phi * w3 * sech2, 1e-14);
  EXPECT_NEAR(g[2], 2.0 * phi * th, 1e-14);
  EXPECT_NEAR(g[3], 2.0 * phi, 1e-14);
}

TEST(LossGradient, NonFiniteLossThrows) {
  const auto net = DenseNet::init_random({1, 2, 1}, Activation::tanh, 0);
  const std::vector<Point> pts{{0.1, 0.0}};
  EXPECT_EQ(error_kind_of([&] {
              loss_gradient(net, std::span<const Point>(pts),
                            [](std::span<const NetJet>, std::span<JetCotangent>) { return std::nan(""); });
            }),
            ErrorKind::diverged_evaluation);
}

// Composite loss touching every jet component, against parameter-wise
// central differences.
TEST(LossGradient, CompositeLossMatchesFiniteDifferences) {
  const double h = 1e-6;
  for (auto act : kAllActivations) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(derive_seed(seed, {99, static_cast<std::uint64_t>(act)}));
      auto net = DenseNet::init_random(random_widths(rng), act, seed);
      std::vector<Point> pts;
      for (int k = 0; k < 4; ++k) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
      const double ca = 0.7, cb = -0.4, cc = 0.3, cd = 1.1;
      auto loss = [&](std::span<const NetJet> jets, std::span<JetCotangent> bars) {
        double s = 0.0;
        for (std::size_t i = 0; i < jets.size(); ++i) {
          const NetJet& j = jets[i];
          const double e = ca * j.value + cb * j.d_dx + cc * j.d2_dx2 + cd * j.d_dt + 0.1;
          s += e * e + j.value * j.d_dx;
          bars[i] = {2 * e * ca + j.d_dx, 2 * e * cb + j.value, 2 * e * cc, 2 * e * cd};
        }
        return s;
      };
      const auto g = loss_gradient(net, std::span<const Point>(pts), loss);
      auto value_at = [&](const DenseNet& n) {
        double v = 0.0;
        loss_gradient(n, std::span<const Point>(pts), loss, &v);
        return v;
      };
      auto flat = net.flatten();
      for (std::size_t k = 0; k < flat.size(); ++k) {
        auto up = flat, dn = flat;
        up[k] += h;
        dn[k] -= h;
        DenseNet a = net, b = net;
        a.unflatten(up);
        b.unflatten(dn);
        const double fd = (value_at(a) - value_at(b)) / (2 * h);
        // Rounding in the difference quotient scales with the loss itself;
        // deep exponent nets reach 1e14.
        const double noise = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(value_at(net)) / h;
        ASSERT_TRUE(near_rel(g[k], fd, 1e-6, 1e-8 + noise)) << to_string(act) << " seed " << seed << " param " << k;
      }
    }
  }
}

TEST(ResidualJacobian, DeepNetRejected) {
  const auto net = DenseNet::init_random({1, 2, 2, 1}, Activation::tanh, 0);
  const std::vector<Point> pts{{0.5, 0.0}};
  EXPECT_EQ(error_kind_of([&] {
              residual_jacobian(net, std::span<const Point>(pts),
                                [](Point, const NetJet&) { return std::pair<double, JetCotangent>{0.0, {}}; });
            }),
            ErrorKind::unsupported_architecture);
}

TEST(ResidualJacobian, ConstantResidualGivesZeroMatrix) {
  const auto net = DenseNet::init_random({1, 3, 1}, Activation::tanh, 2);
  const std::vector<Point> pts{{0.1, 0.0}, {0.9, 0.0}};
  const auto jac = residual_jacobian(net, std::span<const Point>(pts), [](Point, const NetJet&) {
    return std::pair<double, JetCotangent>{4.0, {}};
  });
  EXPECT_EQ(jac.rows(), 2);
  EXPECT_EQ(jac.norm(), 0.0);
}

TEST(ResidualJacobian, ValueRowEqualsLossGradient) {
  const auto net = DenseNet::init_random({1, 3, 1}, Activation::sigmoid, 4);
  const std::vector<Point> pts{{0.4, 0.0}};
  const auto jac = residual_jacobian(net, std::span<const Point>(pts), [](Point, const NetJet& j) {
    return std::pair<double, JetCotangent>{j.value, {1.0, 0.0, 0.0, 0.0}};
  });
  const auto g = loss_gradient(net, std::span<const Point>(pts),
                               [](std::span<const NetJet> jets, std::span<JetCotangent> bars) {
                                 bars[0].value = 1.0;
                                 return jets[0].value;
                               });
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(jac(0, static_cast<Eigen::Index>(k)), g[k]);
}

TEST(ResidualJacobian, CollocationRowsMatchFiniteDifferences) {
  const double eps = 0.3, h = 1e-6;
  const auto net = hand_net(1.3, -0.2, 2.0, 0.1);
  const std::vector<Point> pts{{0.1, 0.0}, {0.5, 0.0}, {0.9, 0.0}};
  auto res = [eps](Point, const NetJet& j) {
    return std::pair<double, JetCotangent>{eps * j.d2_dx2 - j.d_dx, {0.0, -1.0, eps, 0.0}};
  };
  Eigen::VectorXd values;
  const auto jac = residual_jacobian(net, std::span<const Point>(pts), res, &values);
  const auto flat = net.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    auto up = flat, dn = flat;
    up[k] += h;
    dn[k] -= h;
    DenseNet a = net, b = net;
    a.unflatten(up);
    b.unflatten(dn);
    for (std::size_t r = 0; r < pts.size(); ++r) {
      const double fu = res(pts[r], evaluate(a, pts[r].x)).first;
      const double fl = res(pts[r], evaluate(b, pts[r].x)).first;
      EXPECT_TRUE(near_rel(jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)), (fu - fl) / (2 * h)));
    }
  }
  for (std::size_t r = 0; r < pts.size(); ++r)
    EXPECT_EQ(values(static_cast<Eigen::Index>(r)), res(pts[r], evaluate(net, pts[r].x)).first);
}
