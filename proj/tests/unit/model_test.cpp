#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dpinn/dpinn/collocation.hpp"
#include "dpinn/dpinn/model.hpp"
#include "test_support.hpp"

using namespace dpinn;
using dpinn::testing::error_kind_of;
using dpinn::testing::near_rel;

namespace {

BlockModel steady_model(int nbx, TrialMode trial, bool normalize, std::uint64_t seed, double eps = 0.2,
                        std::vector<int> widths = {1, 3, 1}) {
  const Problem p = SteadyAdvDiff{1.0, eps, -0.5, 1.5, 0.25, 1.25};
  ModelOptions o;
  o.trial = trial;
  o.normalize = normalize;
  return build_model(p, BlockGrid::for_problem(p, nbx), {widths, Activation::tanh}, o, seed);
}

// Random parameters drawn wider than the initialiser, extras included.
void scramble(BlockModel& m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> flat(m.parameter_count());
  for (auto& v : flat) v = rng.uniform(-2.0, 2.0);
  m.unflatten(flat);
}

constexpr TrialMode kSteadyModes[] = {TrialMode::plain, TrialMode::linear_augmented, TrialMode::boundary_forced,
                                      TrialMode::boundary_interface_forced};

}  // namespace

TEST(BlockGrid, TilesDomain) {
  const Problem p = UnsteadyAdvection{1.0, -1.0, 2.0, 0.0, 0.5};
  const BlockGrid g = BlockGrid::for_problem(p, 3, 4);
  EXPECT_EQ(g.count(), 12);
  EXPECT_EQ(g.x_edge(0), -1.0);
  EXPECT_EQ(g.x_edge(3), 2.0);
  EXPECT_EQ(g.t_edge(4), 0.5);
  for (int i = 0; i < 3; ++i) {
    EXPECT_GT(g.block_x(i).length(), 0.0);
    if (i > 0) EXPECT_EQ(g.block_x(i).lo, g.block_x(i - 1).hi);
  }
  EXPECT_EQ(g.index(2, 3), 11);
  EXPECT_EQ(g.column(11), 2);
  EXPECT_EQ(g.row(11), 3);
}

TEST(BlockGrid, LaterBlockOwnsSharedEdges) {
  const Problem p = SteadyAdvDiff{};
  const BlockGrid g = BlockGrid::for_problem(p, 4);
  EXPECT_EQ(g.column_of(0.0), 0);
  EXPECT_EQ(g.column_of(0.25), 1);
  EXPECT_EQ(g.column_of(0.2499), 0);
  EXPECT_EQ(g.column_of(1.0), 3);
  EXPECT_EQ(error_kind_of([&] { g.column_of(1.01); }), ErrorKind::domain_error);
  EXPECT_EQ(error_kind_of([&] { BlockGrid::for_problem(p, 2, 2); }), ErrorKind::invalid_config);
  EXPECT_EQ(error_kind_of([&] { BlockGrid::for_problem(p, 0); }), ErrorKind::invalid_config);
}

TEST(BuildModel, CountsAndSeeding) {
  const Problem p = UnsteadyAdvection{};
  const auto m = build_model(p, BlockGrid::for_problem(p, 5, 5), {{2, 2, 1}, Activation::tanh}, TrialMode::plain,
                             {}, 3);
  EXPECT_EQ(m.nets.size(), 25u);
  EXPECT_NE(m.nets[0].flatten(), m.nets[1].flatten());
  const auto again = build_model(p, BlockGrid::for_problem(p, 5, 5), {{2, 2, 1}, Activation::tanh},
                                 TrialMode::plain, {}, 3);
  EXPECT_EQ(m.flatten(), again.flatten());
  EXPECT_EQ(m.parameter_count(), 25u * 9u);
}

TEST(BuildModel, RejectsMismatchedInputWidth) {
  const Problem p = UnsteadyAdvection{};
  EXPECT_EQ(error_kind_of([&] {
              build_model(p, BlockGrid::for_problem(p, 1, 1), {{1, 2, 1}, Activation::tanh}, TrialMode::plain, {}, 0);
            }),
            ErrorKind::invalid_architecture);
  EXPECT_EQ(error_kind_of([&] {
              build_model(p, BlockGrid::for_problem(p, 1, 1), {{2, 2, 1}, Activation::tanh},
                          TrialMode::boundary_forced, {}, 0);
            }),
            ErrorKind::unsupported);
  LossWeights bad;
  bad.w_b = -1.0;
  const Problem s = SteadyAdvDiff{};
  EXPECT_EQ(error_kind_of([&] {
              build_model(s, BlockGrid::for_problem(s, 1), {{1, 2, 1}, Activation::tanh}, TrialMode::plain, bad, 0);
            }),
            ErrorKind::invalid_config);
}

TEST(BuildModel, ExtraParametersPerMode) {
  EXPECT_EQ(steady_model(4, TrialMode::linear_augmented, false, 0).parameter_count(), 4u * 11u);
  const auto bif = steady_model(4, TrialMode::boundary_interface_forced, false, 0);
  EXPECT_EQ(bif.parameter_count(), 4u * 10u + 3u);
  // Interface unknowns start on the line between the boundary values.
  EXPECT_DOUBLE_EQ(bif.interface_values[1], 0.75);
}

TEST(Collocation, UniformExamples) {
  const Problem p = SteadyAdvDiff{};
  const auto one = sample_collocation(BlockGrid::for_problem(p, 1), 2, 2, CollocationMode::uniform, true, 0);
  ASSERT_EQ(one[0].size(), 2u);
  EXPECT_EQ(one[0][0].x, 0.0);
  EXPECT_EQ(one[0][1].x, 1.0);
  const auto five = sample_collocation(BlockGrid::for_problem(p, 5), 3, 3, CollocationMode::uniform, true, 0);
  ASSERT_EQ(five[1].size(), 3u);
  EXPECT_NEAR(five[1][0].x, 0.2, 1e-15);
  EXPECT_NEAR(five[1][1].x, 0.3, 1e-15);
  EXPECT_NEAR(five[1][2].x, 0.4, 1e-15);
  const auto inner = linspace({0.0, 1.0}, 3, false);
  EXPECT_DOUBLE_EQ(inner[0], 0.25);
  EXPECT_DOUBLE_EQ(inner[2], 0.75);
}

TEST(Collocation, RandomDrawsStayInBlocks) {
  const Problem p = UnsteadyAdvection{1.0, 0.0, 1.0, 0.0, 2.0};
  const BlockGrid g = BlockGrid::for_problem(p, 4, 3);
  long draws = 0;
  for (std::uint64_t call = 0; draws < 10000; ++call) {
    const auto pts = sample_collocation(g, 7, 5, CollocationMode::random, false, 42, call);
    for (int b = 0; b < g.count(); ++b) {
      const Range bx = g.block_x(g.column(b)), bt = g.block_t(g.row(b));
      for (const Point& q : pts[static_cast<std::size_t>(b)]) {
        ASSERT_GE(q.x, bx.lo);
        ASSERT_LE(q.x, bx.hi);
        ASSERT_GE(q.t, bt.lo);
        ASSERT_LE(q.t, bt.hi);
        ++draws;
      }
    }
  }
}

TEST(Collocation, RandomModeReproducibleAndEdged) {
  const Problem p = SteadyAdvDiff{};
  const BlockGrid g = BlockGrid::for_problem(p, 3);
  const auto a = sample_collocation(g, 6, 1, CollocationMode::random, true, 9, 4);
  const auto b = sample_collocation(g, 6, 1, CollocationMode::random, true, 9, 4);
  const auto c = sample_collocation(g, 6, 1, CollocationMode::random, true, 9, 5);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(a[1][static_cast<std::size_t>(k)].x, b[1][static_cast<std::size_t>(k)].x);
  EXPECT_NE(a[1][2].x, c[1][2].x);
  EXPECT_EQ(a[1].front().x, g.x_edge(1));
  EXPECT_EQ(a[1].back().x, g.x_edge(2));
}

TEST(TrialValue, PlainMatchesNetEvaluate) {
  const auto m = steady_model(3, TrialMode::plain, false, 4);
  for (double x : {0.0, 0.4, 0.6}) {
    const NetJet a = trial_value(m, 1, x), b = evaluate(m.nets[1], x);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.d_dx, b.d_dx);
    EXPECT_EQ(a.d2_dx2, b.d2_dx2);
  }
}

TEST(TrialValue, BoundaryForcedReproducesBoundaryData) {
  for (auto mode : {TrialMode::boundary_forced, TrialMode::boundary_interface_forced})
    for (int nbx : {1, 3})
      for (bool normalize : {false, true})
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
          auto m = steady_model(nbx, mode, normalize, seed);
          scramble(m, seed + 1000);
          EXPECT_NEAR(trial_value(m, 0, -0.5).value, 0.25, 1e-14);
          EXPECT_NEAR(trial_value(m, nbx - 1, 1.5).value, 1.25, 1e-14);
          EXPECT_NEAR(predict(m, -0.5), 0.25, 1e-14);
          EXPECT_NEAR(predict(m, 1.5), 1.25, 1e-14);
        }
}

TEST(TrialValue, InterfaceForcedMatchesInterfaceValues) {
  auto m = steady_model(4, TrialMode::boundary_interface_forced, true, 3);
  scramble(m, 8);
  for (int i = 1; i < 4; ++i) {
    const double xe = m.grid.x_edge(i);
    EXPECT_NEAR(trial_value(m, i - 1, xe).value, m.interface_values[static_cast<std::size_t>(i - 1)], 1e-14);
    EXPECT_NEAR(trial_value(m, i, xe).value, m.interface_values[static_cast<std::size_t>(i - 1)], 1e-14);
  }
}

TEST(TrialValue, OneBlockBoundaryForcedIsLagarisForm) {
  const Problem p = SteadyAdvDiff{1.0, 0.7};
  auto m = build_model(p, BlockGrid::for_problem(p, 1), {{1, 4, 1}, Activation::tanh}, TrialMode::boundary_forced, {},
                       2);
  for (double x : {0.1, 0.5, 0.8}) {
    const NetJet n = evaluate(m.nets[0], x);
    EXPECT_NEAR(trial_value(m, 0, x).value, x + x * (1 - x) * n.value, 1e-15);
    EXPECT_NEAR(trial_value(m, 0, x).d2_dx2, -2.0 * n.value + 2.0 * (1 - 2 * x) * n.d_dx + x * (1 - x) * n.d2_dx2,
                1e-13);
  }
}

// Composed derivatives against central differences of the trial value.
TEST(TrialValue, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (auto mode : kSteadyModes)
    for (bool normalize : {false, true})
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto m = steady_model(3, mode, normalize, seed);
        scramble(m, seed + 77);
        for (int b = 0; b < 3; ++b) {
          const Range r = m.grid.block_x(b);
          const double x = r.lo + 0.37 * r.length();
          const NetJet j = trial_value(m, b, x);
          const NetJet up = trial_value(m, b, x + h), dn = trial_value(m, b, x - h);
          SCOPED_TRACE(std::string(to_string(mode)) + (normalize ? " normalized" : ""));
          EXPECT_TRUE(near_rel(j.d_dx, (up.value - dn.value) / (2 * h)));
          EXPECT_TRUE(near_rel(j.d2_dx2, (up.d_dx - dn.d_dx) / (2 * h)));
        }
      }
}

TEST(Normalization, Coefficient) {
  const Problem p = SteadyAdvDiff{1.0, 0.005};
  EXPECT_DOUBLE_EQ(normalize_coefficient(p, BlockGrid::for_problem(p, 100)), 0.5);
  const Problem q = SteadyAdvDiff{1.0, 0.37};
  EXPECT_EQ(normalize_coefficient(q, BlockGrid::for_problem(q, 1)), 0.37);
}

// Residual in the local coordinate equals dx times the physical residual.
TEST(Normalization, ResidualScalingIdentity) {
  for (auto mode : kSteadyModes)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto m = steady_model(5, mode, true, seed, 0.05, {1, 2, 2, 1});
      scramble(m, seed + 5);
      const auto& p = std::get<SteadyAdvDiff>(m.problem);
      const double kappa = normalize_coefficient(m.problem, m.grid);
      BlockEvaluator ev(m);
      for (int b = 0; b < 5; ++b) {
        const double x = m.grid.block_x(b).lo + 0.61 * m.grid.dx();
        const NetJet local = ev.local_jet(b, {x, 0.0});
        const double scaled = kappa * local.d2_dx2 - p.c * local.d_dx;
        const double physical = residual(m.problem, trial_value(m, b, x));
        EXPECT_TRUE(near_rel(scaled, m.grid.dx() * physical, 1e-12, 1e-12));
      }
    }
}

TEST(Predict, OwnershipAndDomain) {
  auto m = steady_model(4, TrialMode::plain, false, 6);
  const double xe = m.grid.x_edge(2);
  EXPECT_EQ(predict(m, xe), trial_value(m, 2, xe).value);
  EXPECT_EQ(predict(m, 1.5), trial_value(m, 3, 1.5).value);
  EXPECT_EQ(error_kind_of([&] { predict(m, 1.6); }), ErrorKind::domain_error);
  EXPECT_EQ(error_kind_of([&] { trial_value(m, 4, 0.0); }), ErrorKind::invalid_input);
  const Problem p = UnsteadyAdvection{};
  const auto u = build_model(p, BlockGrid::for_problem(p, 2, 2), {{2, 2, 1}, Activation::tanh}, TrialMode::plain, {},
                             0);
  EXPECT_EQ(predict(u, 0.5, 0.5), trial_value(u, 3, 0.5, 0.5).value);
  EXPECT_EQ(error_kind_of([&] { predict(u, 0.5, 1.5); }), ErrorKind::domain_error);
}
