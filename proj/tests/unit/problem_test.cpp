#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dpinn/problems/problem.hpp"
#include "dpinn/util/random.hpp"
#include "test_support.hpp"

using namespace dpinn;
using dpinn::testing::error_kind_of;

TEST(ExactSteady, BoundaryValues) {
  const SteadyAdvDiff p{1.0, 0.05, -1.0, 2.0, 0.3, -0.7};
  EXPECT_EQ(exact_steady(p, -1.0), 0.3);
  EXPECT_EQ(exact_steady(p, 2.0), -0.7);
}

TEST(ExactSteady, MidpointExample) {
  const SteadyAdvDiff p{1.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  EXPECT_NEAR(exact_steady(p, 0.5), (std::exp(0.5) - 1.0) / (std::exp(1.0) - 1.0), 1e-15);
  EXPECT_NEAR(exact_steady(p, 0.5), 0.377541, 1e-6);
}

TEST(ExactSteady, DegenerateAndDomainErrors) {
  EXPECT_EQ(error_kind_of([] { exact_steady({1.0, 0.0}, 0.5); }), ErrorKind::degenerate_problem);
  EXPECT_EQ(error_kind_of([] { exact_steady({1.0, 0.1}, 1.5); }), ErrorKind::domain_error);
}

TEST(ExactSteady, StableForLargeRatio) {
  for (double eps : {1e-3, 1e-4, 1e-6, -1e-4}) {
    const SteadyAdvDiff p{1.0, eps};
    for (double x = 0.0; x <= 1.0; x += 0.01) {
      const double u = exact_steady(p, x);
      ASSERT_TRUE(std::isfinite(u));
      ASSERT_GE(u, 0.0);
      ASSERT_LE(u, 1.0);
    }
  }
}

// eps u'' - c u' = 0 checked with 4th-order central differences.
TEST(ExactSteady, SatisfiesOdeUnderFourthOrderDifferences) {
  for (double eps : {1.0, 0.1, 0.01, -0.1}) {
    const SteadyAdvDiff p{1.0, eps};
    const double h = 1e-2 * std::min(1.0, std::abs(eps));
    Rng rng(derive_seed(17, {static_cast<std::uint64_t>(std::abs(eps) * 1000)}));
    for (int k = 0; k < 100; ++k) {
      const double x = rng.uniform(2 * h, 1.0 - 2 * h);
      auto u = [&](double s) { return exact_steady(p, s); };
      const double d1 = (-u(x + 2 * h) + 8 * u(x + h) - 8 * u(x - h) + u(x - 2 * h)) / (12 * h);
      const double d2 = (-u(x + 2 * h) + 16 * u(x + h) - 30 * u(x) + 16 * u(x - h) - u(x - 2 * h)) / (12 * h * h);
      // Scale by the size of the advective term so thin layers are judged fairly.
      const double res = (eps * d2 - p.c * d1) / (1.0 + std::abs(p.c * d1));
      ASSERT_LT(std::abs(res), 1e-6) << "eps " << eps << " x " << x;
      ASSERT_LT(std::abs(residual(p, {u(x), d1, d2, 0.0})) / (1.0 + std::abs(d1)), 1e-6);
    }
  }
}

TEST(ExactUnsteady, ShiftExamples) {
  UnsteadyAdvection p;
  p.speed = 0.5;
  EXPECT_EQ(exact_unsteady(p, 0.5, 0.5), 1.0);
  EXPECT_EQ(exact_unsteady(p, 0.2, 0.0), profile_value(p.initial, 0.2));
  p.speed = 0.0;
  for (double x : {0.1, 0.2, 0.3, 0.7}) EXPECT_EQ(exact_unsteady(p, x, 0.8), profile_value(p.initial, x));
  EXPECT_EQ(error_kind_of([&] { exact_unsteady(p, 0.5, 1.5); }), ErrorKind::domain_error);
}

TEST(ExactUnsteady, HeavisideProfile) {
  UnsteadyAdvection p;
  p.initial = Heaviside{0.5};
  p.speed = 0.25;
  EXPECT_EQ(exact_unsteady(p, 0.49, 0.0), 0.0);
  EXPECT_EQ(exact_unsteady(p, 0.5, 0.0), 1.0);
  EXPECT_EQ(exact_unsteady(p, 0.7, 0.4), 1.0);
  EXPECT_EQ(exact_unsteady(p, 0.55, 0.4), 0.0);
}

// Dyadic grid and dyadic shifts make every sample land on the same pulse
// membership pattern, so the trapezoid sum is shift-invariant.
TEST(ExactUnsteady, ConservesPulse) {
  UnsteadyAdvection p;
  p.speed = 0.5;
  const int n = 8192;
  auto integral = [&](double t) {
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double x = static_cast<double>(k) / n;
      s += (k == 0 || k == n ? 0.5 : 1.0) * exact_unsteady(p, x, t);
    }
    return s / n;
  };
  const double i0 = integral(0.0);
  EXPECT_NEAR(i0, 0.2, 2e-4);
  for (double t : {0.125, 0.25, 0.5, 0.75}) EXPECT_NEAR(integral(t), i0, 1e-6) << "t " << t;
}

TEST(Residual, Examples) {
  const SteadyAdvDiff s{1.0, 0.1};
  EXPECT_NEAR(residual(s, {0.3, 1.0, 2.0, 0.0}), -0.8, 1e-15);
  const UnsteadyAdvection a{0.7};
  EXPECT_EQ(residual(a, {2.5, 0.0, 0.0, 0.0}), 0.0);
  EXPECT_NEAR(residual(a, {0.0, 2.0, 0.0, 1.0}), 2.4, 1e-15);
  Burgers b;
  b.eps = 0.1;
  EXPECT_NEAR(residual(b, {2.0, 3.0, 4.0, 1.0}), 1.0 + 6.0 - 0.4, 1e-15);
}

TEST(Residual, SensitivityMatchesFiniteDifferences) {
  Burgers b;
  b.eps = 0.05;
  const std::vector<Problem> problems{SteadyAdvDiff{1.0, 0.2}, UnsteadyAdvection{0.3}, b};
  const NetJet j{0.4, -1.3, 2.2, 0.7};
  const double h = 1e-6;
  for (const auto& p : problems) {
    const JetCotangent s = residual_sensitivity(p, j);
    auto bump = [&](int c, double d) {
      NetJet q = j;
      (c == 0 ? q.value : c == 1 ? q.d_dx : c == 2 ? q.d2_dx2 : q.d_dt) += d;
      return residual(p, q);
    };
    const double fd[4] = {(bump(0, h) - bump(0, -h)) / (2 * h), (bump(1, h) - bump(1, -h)) / (2 * h),
                          (bump(2, h) - bump(2, -h)) / (2 * h), (bump(3, h) - bump(3, -h)) / (2 * h)};
    EXPECT_NEAR(s.value, fd[0], 1e-8);
    EXPECT_NEAR(s.d_dx, fd[1], 1e-8);
    EXPECT_NEAR(s.d2_dx2, fd[2], 1e-8);
    EXPECT_NEAR(s.d_dt, fd[3], 1e-8);
    const JetCotangent fs = interface_flux_sensitivity(p, j);
    auto fbump = [&](int c, double d) {
      NetJet q = j;
      (c == 0 ? q.value : q.d_dx) += d;
      return interface_flux(p, q);
    };
    EXPECT_NEAR(fs.value, (fbump(0, h) - fbump(0, -h)) / (2 * h), 1e-8);
    EXPECT_NEAR(fs.d_dx, (fbump(1, h) - fbump(1, -h)) / (2 * h), 1e-8);
  }
}

TEST(Flux, Examples) {
  const SteadyAdvDiff p{1.0, 1.0};
  EXPECT_EQ(flux(p, {}), 0.0);
  EXPECT_EQ(flux(p, {1.0, 1.0, 0.0, 0.0}), 0.0);
}

// The flux is constant along the exact solution, so its derivative (the
// residual) vanishes.
TEST(Flux, ConstantAlongExactSolution) {
  const SteadyAdvDiff p{1.0, 0.2};
  const double h = 1e-4;
  auto flux_at = [&](double x) {
    const double d1 = (exact_steady(p, x + h) - exact_steady(p, x - h)) / (2 * h);
    return flux(p, {exact_steady(p, x), d1, 0.0, 0.0});
  };
  const double f0 = flux_at(0.3);
  for (double x : {0.1, 0.5, 0.7, 0.9}) EXPECT_NEAR(flux_at(x), f0, 1e-6);
}

TEST(Peclet, Examples) {
  EXPECT_NEAR(peclet(1.0, 0.1, 0.05), 2.0, 1e-15);
  EXPECT_EQ(peclet(0.0, 0.1, 0.05), 0.0);
  EXPECT_NEAR(peclet(1.0, 0.1, 0.01), 10.0, 1e-13);
  EXPECT_EQ(error_kind_of([] { peclet(1.0, 0.1, 0.0); }), ErrorKind::degenerate_problem);
}

TEST(ProblemQueries, RangesAndDiffusivity) {
  const Problem s = SteadyAdvDiff{1.0, 0.3, -1.0, 1.0};
  EXPECT_TRUE(is_steady(s));
  EXPECT_EQ(input_dimension(s), 1);
  EXPECT_EQ(x_range(s).length(), 2.0);
  EXPECT_EQ(diffusivity(s), 0.3);
  EXPECT_EQ(diffusivity(with_diffusivity(s, 0.7)), 0.7);
  const Problem a = UnsteadyAdvection{};
  EXPECT_EQ(input_dimension(a), 2);
  EXPECT_EQ(diffusivity(a), 0.0);
  EXPECT_FALSE(has_exact(Problem{Burgers{}}));
  EXPECT_EQ(error_kind_of([] { exact(Problem{Burgers{}}, {0.5, 0.5}); }), ErrorKind::unsupported);
  EXPECT_EQ(error_kind_of([] { initial_value(Problem{SteadyAdvDiff{}}, 0.5); }), ErrorKind::unsupported);
}
