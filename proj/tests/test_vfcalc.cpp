#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "oracles.hpp"
#include "sdpass/field.hpp"
#include "sdpass/numerics.hpp"
#include "sdpass/vfcalc.hpp"

using namespace sdpass;

namespace {

constexpr double kR = 0.4;
constexpr double kQs = std::numbers::pi / 2;

Point pt(double q, double p) {
  Point x(2);
  x << q, p;
  return x;
}

VectorField pendulum_f() {
  return VectorField(2, [](auto x) {
    using std::sin;
    using T = std::decay_t<decltype(x[0])>;
    return std::vector<T>{x[1], -sin(x[0]) - kR * x[1]};
  });
}

VectorField pendulum_fd() {
  return VectorField(2, [](auto x) {
    using std::sin;
    using T = std::decay_t<decltype(x[0])>;
    return std::vector<T>{x[1], -sin(x[0] - kQs) - kR * x[1]};
  });
}

ScalarField pendulum_H() {
  return ScalarField(2, [](auto x) {
    using std::cos;
    return 0.5 * x[1] * x[1] + (1.0 - cos(x[0]));
  });
}

ScalarField pendulum_Hd() {
  return ScalarField(2, [](auto x) {
    using std::cos;
    return 0.5 * x[1] * x[1] + (1.0 - cos(x[0] - kQs));
  });
}

VectorField linear_field(const Matrix& A) {
  return VectorField(2, [A](auto x) {
    using T = std::decay_t<decltype(x[0])>;
    return std::vector<T>{A(0, 0) * x[0] + A(0, 1) * x[1], A(1, 0) * x[0] + A(1, 1) * x[1]};
  });
}

}  // namespace

TEST(LieDerivative, StorageDecayAlongPendulumClosedLoopIsMinusRP2) {
  for (const auto& x : {pt(0.3, -0.1), pt(-2.0, 1.5), pt(1.0, 0.0), pt(3.0, -0.7)}) {
    EXPECT_NEAR(lie_derivative(pendulum_fd(), pendulum_Hd(), x, 1), -kR * x[1] * x[1], 1e-14);
  }
}

TEST(LieDerivative, ZeroFieldGivesZero) {
  EXPECT_EQ(lie_derivative(VectorField::zero(2), pendulum_H(), pt(0.4, 0.2), 1), 0.0);
  EXPECT_EQ(lie_derivative(VectorField::zero(2), pendulum_H(), pt(0.4, 0.2), 3), 0.0);
}

TEST(LieDerivative, SecondOrderMatchesFiniteDifferenceAlongTheFlow) {
  const Point x = pt(0.3, -0.2);
  const oracle::Rhs f = [](const oracle::Vec& y) { return oracle::pendulum::drift(y, kR); };
  auto H = [](const oracle::Vec& y) { return 0.5 * y[1] * y[1] + 1.0 - std::cos(y[0]); };
  const double h = 1e-3;
  const double fd = (H(oracle::rk4(f, x, h, 20)) - 2.0 * H(x) + H(oracle::rk4(f, x, -h, 20))) / (h * h);
  const double got = lie_derivative(pendulum_f(), pendulum_H(), x, 2);
  EXPECT_LE(oracle::rel_err(got, fd), 1e-6) << got << " vs " << fd;
}

TEST(LieDerivative, RequestBeyondJetDepthIsAnError) {
  EXPECT_THROW(lie_derivative(pendulum_f(), pendulum_H(), pt(0, 0), 5), JetOrderError);
  EXPECT_NO_THROW(lie_derivative(pendulum_f(), pendulum_H(), pt(0, 0), 5, 6));
  EXPECT_THROW(lie_derivative(pendulum_f(), pendulum_H(), pt(0, 0), 0), std::exception);
}

TEST(LieDerivative, LinearAndLeibniz) {
  const Point x = pt(0.8, -0.4);
  const ScalarField A = pendulum_H();
  const ScalarField B(2, [](auto y) {
    using std::exp;
    return exp(0.3 * y[0]) * y[1];
  });
  const ScalarField sum(2, [A, B](auto y) { return 2.0 * A(y) + B(y); });
  const ScalarField prod(2, [A, B](auto y) { return A(y) * B(y); });
  const auto f = pendulum_f();
  const double LA = lie_derivative(f, A, x, 1), LB = lie_derivative(f, B, x, 1);
  EXPECT_NEAR(lie_derivative(f, sum, x, 1), 2.0 * LA + LB, 1e-14);
  EXPECT_NEAR(lie_derivative(f, prod, x, 1), A(x) * LB + B(x) * LA, 1e-14);
}

TEST(LieBracket, FieldWithItselfAndConstantFieldsCommute) {
  EXPECT_LT(lie_bracket(pendulum_f(), pendulum_f(), pt(0.5, 0.1)).norm(), 1e-15);
  const auto c1 = VectorField::constant(pt(1.0, 2.0));
  const auto c2 = VectorField::constant(pt(-0.5, 3.0));
  EXPECT_EQ(lie_bracket(c1, c2, pt(0.2, 0.9)).norm(), 0.0);
}

TEST(LieBracket, PendulumMatchesJacobianFiniteDifferenceOracle) {
  const Point x = pt(0.5, 0.1);
  const oracle::Rhs f = [](const oracle::Vec& y) { return oracle::pendulum::drift(y, kR); };
  const oracle::Rhs g = [](const oracle::Vec&) {
    oracle::Vec v(2);
    v << 0.0, 1.0;
    return v;
  };
  const oracle::Vec want = oracle::fd_jacobian(g, x) * f(x) - oracle::fd_jacobian(f, x) * g(x);
  const auto gf = VectorField::constant(pt(0.0, 1.0));
  EXPECT_LE((lie_bracket(pendulum_f(), gf, x) - want).norm(), 1e-7);
}

TEST(LieBracket, Antisymmetric) {
  const auto a = pendulum_f();
  const auto b = linear_field((Matrix(2, 2) << 0.1, 2.0, -1.0, 0.3).finished());
  const Point x = pt(-0.7, 0.6);
  EXPECT_LT((lie_bracket(a, b, x) + lie_bracket(b, a, x)).norm(), 1e-14);
}

TEST(ExpLieSeries, ZeroFieldIsIdentity) {
  const Point x = pt(0.3, -0.4);
  for (int N : {1, 2, 4}) EXPECT_EQ((exp_lie_series(VectorField::zero(2), 0.7, x, N) - x).norm(), 0.0);
}

TEST(ExpLieSeries, LinearFieldIsTheTaylorTruncationOfTheMatrixExponential) {
  Matrix A(2, 2);
  A << -0.3, 1.2, -0.8, -0.1;
  const Point x = pt(1.0, -0.5);
  const auto f = linear_field(A);
  for (int N : {1, 2, 3, 4}) {
    for (double delta : {0.5, 0.1}) {
      Point taylor = x, term = x;
      for (int i = 1; i <= N; ++i) {
        term = delta / i * (A * term);
        taylor += term;
      }
      const Point got = exp_lie_series(f, delta, x, N);
      EXPECT_LT((got - taylor).norm(), 1e-14);
      const Point exact = (delta * A).exp() * x;
      const double nA = A.norm();
      double bound = std::pow(delta * nA, N + 1) * x.norm() * std::exp(delta * nA);
      for (int i = 2; i <= N + 1; ++i) bound /= i;
      EXPECT_LE((got - exact).norm(), bound) << "N=" << N << " delta=" << delta;
    }
  }
}

TEST(ExpLieSeries, PendulumTruncationErrorHasOrderNPlusOne) {
  // The closed-loop field: the open-loop drift vanishes at the origin.
  const Point x = pt(0.0, 0.0);
  const oracle::Rhs f = [](const oracle::Vec& y) { return oracle::pendulum::closed_loop(y, kR, kQs); };
  const std::vector<double> deltas{0.1, 0.05, 0.025};
  std::vector<double> err;
  for (double d : deltas) err.push_back((exp_lie_series(pendulum_fd(), d, x, 3) - oracle::rk4(f, x, d, 200)).norm());
  EXPECT_NEAR(loglog_slope(deltas, err), 4.0, 0.3);
}

TEST(Calculus, GradientHessianJacobianAgreeWithFiniteDifferences) {
  const Point x = pt(0.9, -0.3);
  auto H = [](const oracle::Vec& y) { return 0.5 * y[1] * y[1] + 1.0 - std::cos(y[0]); };
  EXPECT_LT((gradient(pendulum_H(), x) - oracle::fd_gradient(H, x)).norm(), 1e-9);
  Matrix Hs(2, 2);
  Hs << std::cos(0.9), 0, 0, 1;
  EXPECT_LT((hessian(pendulum_H(), x) - Hs).norm(), 1e-14);
  const oracle::Rhs f = [](const oracle::Vec& y) { return oracle::pendulum::drift(y, kR); };
  EXPECT_LT((jacobian(pendulum_f(), x) - oracle::fd_jacobian(f, x)).norm(), 1e-8);
}

TEST(Calculus, ArityMismatchIsAnError) {
  EXPECT_THROW(lie_derivative(pendulum_f(), pendulum_H(), Point::Zero(3), 1), DimensionError);
  const VectorField three = VectorField::zero(3);
  EXPECT_THROW(lie_bracket(pendulum_f(), three, pt(0, 0)), DimensionError);
}
