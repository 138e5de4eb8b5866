#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdpass/numerics.hpp"
#include "sdpass/pch.hpp"
#include "sdpass/sim.hpp"
#include "sdpass/verify.hpp"

using namespace sdpass;

namespace {

constexpr double kR = 0.4;
constexpr double kQs = std::numbers::pi / 2;

Point pt(double a, double b) {
  Point x(2);
  x << a, b;
  return x;
}

const PendulumModel& model() {
  static const PendulumModel m = pendulum_design(kR, kQs);
  return m;
}

// F_{d,[2]} for the pendulum, expanded by hand.
Point f2_by_hand(const Point& x, double delta) {
  const double s = std::sin(x[0] - kQs), c = std::cos(x[0] - kQs), p = x[1];
  return delta * pt(p, -s - kR * p) + 0.5 * delta * delta * pt(-s - kR * p, kR * s + p * (kR * kR - c));
}

}  // namespace

TEST(PortHamiltonian, PendulumDriftIsTheOpenLoopField) {
  for (const auto& x : {pt(0.3, -0.1), pt(2.0, 1.0)}) {
    EXPECT_LT((pch_drift(model().pch, x) - oracle::pendulum::drift(x, kR)).norm(), 1e-15);
  }
  EXPECT_EQ(pch_drift(model().pch, pt(0.0, 0.0)).norm(), 0.0);
}

TEST(PortHamiltonian, PowerBalance) {
  // dH/dt = -grad H^T R grad H + y u with y = g^T grad H.
  const auto& sys = model().pch;
  for (const auto& x : {pt(0.3, -0.1), pt(-1.7, 0.8)}) {
    const double u = 0.6;
    const Point gH = gradient(sys.hamiltonian(), x);
    const double rate = gH.dot(pch_drift(sys, x) + u * sys.input()(x));
    const double y = sys.input()(x).dot(gH);
    EXPECT_NEAR(rate, -gH.dot(sys.dissipation()(x) * gH) + y * u, 1e-15);
    EXPECT_NEAR(rate, -kR * x[1] * x[1] + x[1] * u, 1e-15);
  }
  EXPECT_EQ(sys.structure_defect(pt(0.5, 0.5)), 0.0);
}

TEST(IdaClosedLoop, PendulumTargetDynamicsAndOutput) {
  const auto& cl = model().closed_loop;
  for (const auto& x : {pt(0.3, -0.1), pt(-2.2, 0.4)}) {
    EXPECT_LT((cl.drift(x) - oracle::pendulum::closed_loop(x, kR, kQs)).norm(), 1e-15);
    EXPECT_NEAR(cl.output(x), x[1], 1e-15);
    // The target loop equals the plant under gamma.
    EXPECT_LT((cl.drift(x) - model().design.closed_loop_drift()(x)).norm(), 1e-15);
  }
  EXPECT_LT(cl.drift(model().design.equilibrium()).norm(), 1e-15);
}

TEST(SampledPch, SecondOrderIncrementMatchesTheHandExpansion) {
  for (const auto& x : {pt(0.3, -0.1), pt(-1.0, 0.5), pt(2.5, -1.2)}) {
    for (double delta : {0.01, 0.2, 0.5}) {
      const auto s = sampled_pch_structure(model().closed_loop, delta, x);
      EXPECT_LT((s.F2 - f2_by_hand(x, delta)).norm(), 1e-14);
    }
  }
}

TEST(SampledPch, StructureTendsToTheContinuousOne) {
  const Point x = pt(0.3, -0.1);
  const Matrix Md = model().closed_loop.structure_matrix(x);
  const auto s = sampled_pch_structure(model().closed_loop, 1e-6, x);
  EXPECT_LT((s.M - Md).norm(), 1e-5);
  // The first correction is O(delta^2): the error shrinks fourfold per halving.
  const double e1 = (sampled_pch_structure(model().closed_loop, 0.1, x).M - Md).norm();
  const double e2 = (sampled_pch_structure(model().closed_loop, 0.05, x).M - Md).norm();
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.3);
}

TEST(SampledPch, SkewSymmetricAndPositiveSemidefiniteForShortPeriods) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> q(-std::numbers::pi, std::numbers::pi), p(-1.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    const Point x = pt(q(rng), p(rng));
    for (double delta : {0.5, 0.1, 0.01}) {
      const auto s = sampled_pch_structure(model().closed_loop, delta, x);
      EXPECT_LE((s.J + s.J.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((s.R - s.R.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(s.R).eigenvalues().minCoeff(), -1e-10);
      EXPECT_LT((s.J - s.R - s.M).norm(), 1e-14);
    }
  }
}

TEST(SampledPch, ResidualIsThirdOrder) {
  for (const Point& x : slope_states()) {
    EXPECT_NEAR(pch_residual_slope(model().closed_loop, x), 3.0, 0.3) << x.transpose();
  }
}

TEST(SampledPch, ResidualVanishesAtTheEquilibrium) {
  EXPECT_EQ(pch_residual(model().closed_loop, 0.5, model().design.equilibrium()), 0.0);
}

TEST(SampledPch, ClosedFormDiscreteGradientAlongTheStepHasTheHalfHessianCorrection) {
  // dgrad H_d|_x^{x + delta f_d} = grad H_d + (delta/2) Hess H_d f_d + O(delta^2).
  const auto& dg = model().design.discrete_gradient();
  for (const auto& x : {pt(0.3, -0.1), pt(1.0, 0.5)}) {
    const Point fd = oracle::pendulum::closed_loop(x, kR, kQs);
    const auto t = oracle::fit_grid(0.1, 16);
    std::vector<double> y0, y1;
    for (double d : t) {
      const Point g = dg(x, x + d * fd);
      y0.push_back(g[0]);
      y1.push_back(g[1]);
    }
    const auto c0 = oracle::polyfit(t, y0, 6), c1 = oracle::polyfit(t, y1, 6);
    const double s = std::sin(x[0] - kQs), c = std::cos(x[0] - kQs);
    EXPECT_LE(oracle::rel_err(c0[0], s), 1e-10);
    EXPECT_LE(oracle::rel_err(c1[0], x[1]), 1e-10);
    EXPECT_LE(oracle::rel_err(c0[1], 0.5 * c * x[1]), 1e-6);
    EXPECT_LE(oracle::rel_err(c1[1], 0.5 * (-s - kR * x[1])), 1e-6);
  }
}

TEST(SampledPch, SingularStructureIsReported) {
  // H = |x|^2/2 with J_d - R_d = [[-1, sqrt3], [-sqrt3, -1]]: delta Hess M has
  // eigenvalues -1 +- i sqrt3 at delta = 1, where I + B/2 + B^2/4 is singular.
  const double s3 = std::sqrt(3.0);
  Matrix J(2, 2), R(2, 2);
  J << 0, s3, -s3, 0;
  R << 1, 0, 0, 1;
  const ScalarField H(2, [](auto x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); });
  const auto cl = ida_closed_loop(MatrixField::constant(J), MatrixField::constant(R), H, VectorField::constant(pt(0, 1)));
  EXPECT_THROW(sampled_pch_structure(cl, 1.0, pt(0.3, 0.2)), SingularMatrixError);
  EXPECT_NO_THROW(sampled_pch_structure(cl, 0.5, pt(0.3, 0.2)));
}
