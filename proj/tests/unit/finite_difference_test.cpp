#include <cmath>

#include <gtest/gtest.h>

#include "dpinn/problems/finite_difference.hpp"
#include "test_support.hpp"

using namespace dpinn;
using dpinn::testing::error_kind_of;

namespace {

double max_nodal_error(const SteadyAdvDiff& p, const FDSolution& s) {
  double e = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) e = std::max(e, std::abs(s.values[i] - exact_steady(p, s.grid[i])));
  return e;
}

bool monotone(const std::vector<double>& v) {
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    up = up && v[i] >= v[i - 1];
    down = down && v[i] <= v[i - 1];
  }
  return up || down;
}

// Closed form as printed, with the exponentials written out.
double artificial_diffusion_printed(double a, double b, double dx) {
  const double pe = b * dx / a;
  const double ep = std::exp(pe), em = std::exp(-pe);
  return a / (ep + em - 2.0) * (0.5 * pe * (ep - em) - (ep + em - 2.0));
}

}  // namespace

TEST(Cds, AccurateBelowCriticalPeclet) {
  const SteadyAdvDiff p{1.0, 1.0};
  EXPECT_LT(max_nodal_error(p, cds_solve(p, 10)), 1e-2);
}

TEST(Cds, DiffusionLimitIsLinear) {
  const SteadyAdvDiff p{1.0, 1e8, 0.0, 1.0, 0.2, 0.9};
  const FDSolution s = cds_solve(p, 10);
  for (std::size_t i = 0; i < s.grid.size(); ++i) EXPECT_NEAR(s.values[i], 0.2 + 0.7 * s.grid[i], 1e-7);
}

TEST(Cds, OscillatesAtHighPeclet) {
  const SteadyAdvDiff p{1.0, 0.01};
  EXPECT_GE(sign_alternations(cds_solve(p, 10).values), 4);
}

TEST(Uds, MonotoneAtHighPeclet) {
  const SteadyAdvDiff p{1.0, 0.01};
  const FDSolution s = uds_solve(p, 10);
  EXPECT_EQ(sign_alternations(s.values), 0);
  EXPECT_TRUE(monotone(s.values));
  for (double c : {-1.0, 1.0})
    for (double eps : {1.0, 0.1, 0.01, 0.001}) EXPECT_TRUE(monotone(uds_solve({c, eps}, 20).values));
}

TEST(Uds, MatchesCdsAtSmallPeclet) {
  const SteadyAdvDiff p{1.0, 1e4};
  const FDSolution u = uds_solve(p, 10), c = cds_solve(p, 10);
  for (std::size_t i = 0; i < u.values.size(); ++i) EXPECT_NEAR(u.values[i], c.values[i], 1e-6);
}

TEST(FiniteDifference, BoundaryValuesExact) {
  const SteadyAdvDiff p{-2.0, 0.03, 0.5, 1.5, -0.25, 1.75};
  for (auto scheme : {FdScheme::cds, FdScheme::uds, FdScheme::cds_artificial_diffusion}) {
    const FDSolution s = fd_solve(p, 17, scheme);
    EXPECT_EQ(s.values.front(), p.u_left);
    EXPECT_EQ(s.values.back(), p.u_right);
    EXPECT_EQ(s.grid.front(), p.x_left);
    EXPECT_EQ(s.grid.back(), p.x_right);
  }
  EXPECT_EQ(error_kind_of([&] { cds_solve(p, 1); }), ErrorKind::invalid_input);
}

TEST(ArtificialDiffusion, Example) {
  EXPECT_NEAR(artificial_diffusion(0.5, 2.0, 1.0), 0.5 * (2.0 / std::tanh(2.0) - 1.0), 1e-15);
  EXPECT_NEAR(artificial_diffusion(0.5, 2.0, 1.0), 0.537314, 1e-6);
}

// The printed form cancels catastrophically at small Pe, so it is only a
// reference from Pe = 0.5 up.
TEST(ArtificialDiffusion, AgreesWithPrintedForm) {
  for (double pe : {0.5, 1.0, 4.0, 10.0, 20.0, -3.0}) {
    const double a = 0.7, dx = 0.1, b = pe * a / dx;
    EXPECT_NEAR(artificial_diffusion(a, b, dx), artificial_diffusion_printed(a, b, dx),
                1e-12 * std::max(1.0, std::abs(artificial_diffusion(a, b, dx))))
        << "Pe " << pe;
  }
}

TEST(ArtificialDiffusion, SmallPecletLimit) {
  EXPECT_EQ(artificial_diffusion(1.0, 0.0, 0.1), 0.0);
  EXPECT_NEAR(artificial_diffusion(2.0, 1e-5, 1.0), 2.0 * std::pow(0.5e-5, 2) / 12.0, 1e-25);
  EXPECT_EQ(error_kind_of([] { artificial_diffusion(0.0, 1.0, 1.0); }), ErrorKind::degenerate_problem);
}

TEST(ArtificialDiffusion, CorrectedCdsIsNodallyExact) {
  for (double pe : {0.5, 1.0, 5.0, 20.0}) {
    const int n = 20;
    const SteadyAdvDiff p{1.0, 1.0 / (n * pe)};
    EXPECT_LT(max_nodal_error(p, cds_artificial_solve(p, n)), 1e-8) << "Pe " << pe;
  }
  for (double c : {-1.5, 0.3, 2.0}) {
    const SteadyAdvDiff p{c, 0.04, -0.5, 1.0, 1.0, -2.0};
    EXPECT_LT(max_nodal_error(p, cds_artificial_solve(p, 13)), 1e-8) << "c " << c;
  }
}
