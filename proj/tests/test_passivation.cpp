#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdpass/numerics.hpp"
#include "sdpass/passivation.hpp"
#include "sdpass/sim.hpp"

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

const StorageDesign& design() { return model().design; }

SampledMap exact(double delta) { return SampledMap::exact(design().system(), delta); }

double gamma1_by_hand(const Point& x) { return (std::cos(x[0]) - std::cos(x[0] - kQs)) * x[1]; }

// f_d^T Hess S_d g for the pendulum: the half-Hessian part of the discrete
// gradient that the closed-form output expansion leaves out.
double curvature_term(const Point& x) { return -std::sin(x[0] - kQs) - kR * x[1]; }

// Coefficients in delta of fn(delta) on (0, 0.1].
std::vector<double> fit_in_delta(const std::function<double(double)>& fn, int degree) {
  const auto t = oracle::fit_grid(0.1, 16);
  std::vector<double> y;
  for (double d : t) y.push_back(fn(d));
  return oracle::polyfit(t, y, degree);
}

}  // namespace

// Continuous feedback and its series terms.

TEST(FeedbackSeries, FirstTermMatchesThePendulumClosedForm) {
  for (const auto& x : {pt(0.3, -0.1), pt(-2.0, 1.4), pt(1.0, 0.5)}) {
    EXPECT_NEAR(gamma_series_term(design(), 1, x), gamma1_by_hand(x), 1e-14);
  }
  EXPECT_EQ(gamma_series_term(design(), 1, design().equilibrium()), 0.0);
}

TEST(FeedbackSeries, TermsAreTheDeltaCoefficientsOfTheExactFeedback) {
  const Point x = pt(1.0, 0.5);
  const auto c = fit_in_delta([&](double d) { return solve_isdm(design(), d, x).value; }, 5);
  EXPECT_LE(oracle::rel_err(c[0], oracle::pendulum::gamma(x, kQs)), 1e-8);
  EXPECT_LE(oracle::rel_err(2.0 * c[1], gamma1_by_hand(x)), 1e-5);
  EXPECT_LE(oracle::rel_err(6.0 * c[2], gamma_series_term(design(), 2, x)), 1e-3);
}

TEST(FeedbackSeries, SecondTermIsFiniteWhereTheOutputVanishes) {
  // h_d = p = 0 at rest; gamma^1 vanishes there too.
  const double at_zero = gamma_series_term(design(), 2, pt(0.0, 0.0));
  EXPECT_TRUE(std::isfinite(at_zero));
  EXPECT_NEAR(at_zero, 0.5 * (gamma_series_term(design(), 2, pt(0.0, 1e-5)) +
                              gamma_series_term(design(), 2, pt(0.0, -1e-5))), 1e-6);
}

// Matching equality.

TEST(Matching, RightHandSideByFlowAndByQuadratureAgree) {
  const double a = isdm_rhs(design(), 0.5, pt(0.0, 0.0));
  const double b = isdm_rhs_quadrature(design(), 0.5, pt(0.0, 0.0));
  EXPECT_LT(a, 0.0);
  EXPECT_NEAR(a, b, 1e-10);
}

TEST(Matching, SolutionZeroesTheResidual) {
  for (const auto& x : {pt(0.0, 0.0), pt(-1.0, 0.5), pt(2.0, -0.8)}) {
    for (double delta : {0.1, 0.5, 1.0}) {
      const auto map = exact(delta);
      const auto sol = solve_isdm(design(), map, x);
      EXPECT_LE(std::abs(sol.residual), 1e-12);
      EXPECT_LE(std::abs(isdm_residual(design(), map, x, sol.value)), 1e-11);
    }
  }
}

TEST(Matching, SmallPeriodRecoversTheContinuousFeedback) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> q(-3.0, 3.0), p(-1.5, 1.5);
  for (int i = 0; i < 20; ++i) {
    const Point x = pt(q(rng), p(rng));
    EXPECT_LE(std::abs(solve_isdm(design(), 1e-4, x).value - design().feedback()(x)), 1e-3);
  }
}

TEST(Matching, SwingUpStartAgreesWithTheBisectionOracle) {
  const Point x0 = pt(0.0, 0.0);
  const auto sol = solve_isdm(design(), 1.0, x0);
  EXPECT_LE(std::abs(sol.residual), 1e-12);
  const double want = oracle::pendulum::matching_input(x0, 1.0, kR, kQs);
  EXPECT_NEAR(sol.value, want, 1e-8);
}

TEST(Matching, FirstOrderTruncationErrorIsSecondOrder) {
  const Point x = pt(-1.0, 0.5);
  const std::vector<double> deltas{0.2, 0.1, 0.05};
  std::vector<double> err;
  for (double d : deltas) {
    err.push_back(std::abs(solve_isdm(design(), d, x).value - truncated_feedback(design(), d, x, 1)));
  }
  EXPECT_NEAR(loglog_slope(deltas, err), 2.0, 0.3);
}

// Passifying output.

TEST(PassifyingOutput, SecantIdentityWithTheInputIncrement) {
  const auto& S = design().storage();
  for (const auto& x : {pt(0.0, 0.0), pt(-1.0, 0.5), pt(1.0, 0.5)}) {
    const auto map = exact(0.7);
    const double u = solve_isdm(design(), map, x).value;
    for (double v : {-0.8, 0.3, 1.5}) {
      const double h = passifying_output(design(), map, x, u, v);
      EXPECT_NEAR(v * h, S(map(x, u + v)) - S(map(x, u)), 1e-10);
    }
  }
}

TEST(PassifyingOutput, FirstApproximationIsDeltaTimesTheContinuousOutput) {
  const Point x = pt(1.0, 0.5);
  const auto c = fit_in_delta([&](double d) { return passifying_output(design(), d, x, 0.5); }, 6);
  EXPECT_LE(std::abs(c[0]), 1e-10);
  EXPECT_LE(oracle::rel_err(c[1], x[1]), 1e-6);
}

TEST(PassifyingOutput, SecondCoefficientIncludesTheDiscreteGradientCurvature) {
  // Exact coefficient: (v - 2 r p + f_d^T Hess S_d g) / 2. The closed-form
  // pendulum value (v - 2 r p) / 2 omits the last term.
  for (const auto& x : {pt(1.0, 0.5), pt(-1.0, 0.5)}) {
    for (double v : {0.5, -0.3}) {
      const auto c = fit_in_delta([&](double d) { return passifying_output(design(), d, x, v); }, 6);
      const double want = 0.5 * (v - 2.0 * kR * x[1] + curvature_term(x));
      EXPECT_LE(oracle::rel_err(c[2], want), 1e-6) << "x=" << x.transpose() << " v=" << v;
    }
  }
}

TEST(PassifyingOutput, SeriesReproducesTheClosedFormPendulumExpansion) {
  for (const auto& x : {pt(0.3, -0.1), pt(1.0, 0.5)}) {
    for (double delta : {0.05, 0.5}) {
      for (double v : {0.0, 0.5}) {
        const double want = delta * x[1] + 0.5 * delta * delta * (v - 2.0 * kR * x[1]);
        EXPECT_NEAR(passifying_output_series(design(), delta, x, v), want, 1e-14);
      }
    }
  }
}

TEST(PassifyingOutput, SeriesDiffersFromExactByTheCurvatureTermAtSecondOrder) {
  const Point x = pt(1.0, 0.5);
  const double v = 0.5;
  const std::vector<double> deltas{0.2, 0.1, 0.05};
  std::vector<double> raw, corrected;
  for (double d : deltas) {
    const double diff = passifying_output(design(), d, x, v) - passifying_output_series(design(), d, x, v);
    raw.push_back(std::abs(diff));
    corrected.push_back(std::abs(diff - 0.5 * d * d * curvature_term(x)));
  }
  EXPECT_NEAR(loglog_slope(deltas, raw), 2.0, 0.3);
  EXPECT_NEAR(loglog_slope(deltas, corrected), 3.0, 0.3);
}

TEST(PassifyingOutput, SeriesLeadingTerm) {
  const Point x = pt(-0.4, 0.9);
  EXPECT_EQ(passifying_output_series(design(), 0.0, x, 0.3), 0.0);
  EXPECT_NEAR(passifying_output_series(design(), 1e-8, x, 0.3) / 1e-8, design().output()(x), 1e-7);
}

TEST(AverageOutput, EqualsTheSecantOutput) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> q(-2.5, 2.5), p(0.2, 1.2), vd(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const Point x = pt(q(rng), p(rng));
    const auto map = exact(0.5);
    const double u = solve_isdm(design(), map, x).value;
    const double v = vd(rng);
    EXPECT_NEAR(average_output(design(), map, x, u, v), passifying_output(design(), map, x, u, v), 1e-10);
  }
}

TEST(AverageOutput, SmallInputLimitIsTheIntegrandAtZero) {
  const Point x = pt(0.6, -0.7);
  const auto map = exact(0.4);
  const double u = solve_isdm(design(), map, x).value;
  const Point z = map(x, u);
  const Point dFdu = control_direction(map, x, u, 0.0);
  EXPECT_NEAR(average_output(design(), map, x, u, 0.0), gradient(design().storage(), z).dot(dFdu), 1e-14);
  EXPECT_NEAR(average_output(design(), map, x, u, 0.0), passifying_output(design(), map, x, u, 0.0), 1e-12);
}

TEST(AverageOutput, IntegrandIsTheStorageRateAlongTheSampledInputField) {
  // G(z, u) = dF/du (x, u) at z = x + F(x, u); its series in delta, with
  // the brackets worked out by hand for F = f + g u:
  // G = delta g - delta^2/2 [F, g](z) + delta^3/6 [F, [F, g]](z) + O(delta^4).
  const Point x = pt(0.6, -0.7);
  const double u = 0.3;
  const std::vector<double> deltas{0.2, 0.1, 0.05};
  std::vector<double> err;
  for (double d : deltas) {
    const auto map = exact(d);
    const Point z = map(x, u);
    const Point G = d * pt(0.0, 1.0) - 0.5 * d * d * pt(-1.0, kR) - d * d * d / 6.0 * pt(kR, std::cos(z[0]) - kR * kR);
    err.push_back((control_direction(map, x, u, 0.0) - G).norm());
  }
  EXPECT_NEAR(loglog_slope(deltas, err), 4.0, 0.3);
}

// Damping.

TEST(Damping, SolutionSatisfiesTheDampingEquality) {
  const Point x = pt(-1.0, 0.5);
  const auto map = exact(0.5);
  const double u = solve_isdm(design(), map, x).value;
  const auto sol = solve_damping(design(), map, x, u, 0.3);
  EXPECT_LE(std::abs(0.5 * sol.value + 0.3 * passifying_output(design(), map, x, u, sol.value)), 1e-12);
}

TEST(Damping, VanishesAtTheEquilibriumAndWithoutGain) {
  EXPECT_NEAR(solve_damping(design(), 0.5, design().equilibrium(), 0.2).value, 0.0, 1e-14);
  EXPECT_EQ(solve_damping(design(), 0.5, pt(1.0, 0.5), 0.0).value, 0.0);
  EXPECT_EQ(damping_series_term(design(), pt(1.0, 0.5), 0.0), 0.0);
  EXPECT_NEAR(damping_series_term(design(), design().equilibrium(), 0.2), 0.0, 1e-15);
  EXPECT_THROW(solve_damping(design(), 0.5, pt(1.0, 0.5), -0.1), std::invalid_argument);
}

TEST(Damping, SmallPeriodRecoversContinuousDamping) {
  for (const auto& x : {pt(1.0, 0.5), pt(-2.0, -0.9), pt(0.2, 1.3)}) {
    EXPECT_LE(std::abs(solve_damping(design(), 1e-4, x, 0.5).value + 0.5 * design().output()(x)), 1e-3);
  }
}

TEST(Damping, SeriesTermReproducesTheClosedFormPendulumValue) {
  for (const auto& x : {pt(0.3, -0.1), pt(1.0, 0.5)}) {
    for (double kappa : {0.1, 0.7}) {
      EXPECT_NEAR(damping_series_term(design(), x, kappa), kappa * (2.0 * kR + kappa) * x[1], 1e-14);
    }
  }
}

TEST(Damping, ExactDeltaCoefficientCarriesTheCurvatureTerm) {
  const double kappa = 0.1;
  const Point x = pt(1.0, 0.5);
  const auto c = fit_in_delta([&](double d) { return solve_damping(design(), d, x, kappa).value; }, 6);
  EXPECT_LE(oracle::rel_err(c[0], -kappa * x[1]), 1e-8);
  const double want = 0.5 * (damping_series_term(design(), x, kappa) - kappa * curvature_term(x));
  EXPECT_LE(oracle::rel_err(c[1], want), 1e-6);
}

// Controllers.

TEST(Controller, OrderZeroIsEmulation) {
  const Point x = pt(0.8, -0.2);
  const SampledController ctrl(design(), 0.5, ControllerOrder::series(0), {0.3});
  EXPECT_NEAR(approx_controller(ctrl, x), design().feedback()(x) - 0.3 * x[1], 1e-15);
}

TEST(Controller, OrderOneWithoutDampingIsTheClosedFormFeedback) {
  const Point x = pt(0.8, -0.2);
  const double delta = 0.7;
  const SampledController ctrl(design(), delta, ControllerOrder::series(1));
  EXPECT_NEAR(approx_controller(ctrl, x), oracle::pendulum::gamma(x, kQs) + delta / 2.0 * gamma1_by_hand(x), 1e-15);
}

TEST(Controller, OrderOneIsSecondOrderCloseToExactWithoutDamping) {
  const Point x = pt(1.0, 0.5);
  const std::vector<double> deltas{0.2, 0.1, 0.05};
  std::vector<double> err;
  for (double d : deltas) {
    const SampledController ex(design(), d, ControllerOrder::exact());
    const SampledController p1(design(), d, ControllerOrder::series(1));
    err.push_back(std::abs(ex(x) - p1(x)));
  }
  EXPECT_NEAR(loglog_slope(deltas, err), 2.0, 0.3);
}

TEST(Controller, OrderParsing) {
  EXPECT_TRUE(ControllerOrder::parse("exact").is_exact());
  EXPECT_EQ(ControllerOrder::parse("2").truncation(), 2);
  EXPECT_THROW(ControllerOrder::parse("3"), std::invalid_argument);
  EXPECT_THROW(ControllerOrder::series(-1), std::invalid_argument);
  EXPECT_THROW(SampledController(design(), 0.5, ControllerOrder::series(1), {-1.0}), std::invalid_argument);
}

TEST(Controller, DissipationOnRandomSamples) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> q(-2.5, 2.5), p(0.3, 1.0), vd(-1.0, 1.0), dd(0.05, 0.8);
  const auto& S = design().storage();
  for (int i = 0; i < 30; ++i) {
    const Point x = pt(q(rng), p(rng));
    const double delta = dd(rng), v = vd(rng);
    const auto map = exact(delta);
    const double u = solve_isdm(design(), map, x).value;
    EXPECT_LE(S(map(x, u + v)) - S(x) - v * passifying_output(design(), map, x, u, v), 1e-9);
  }
}

TEST(Controller, TruncatedLoopsTrackTheExactLoopWithShrinkingDeviation) {
  // The equilibrium is fixed by every loop, so practical stability is measured
  // as the sup-norm deviation of the u_[p] trajectory from the exact one.
  ExperimentConfig cfg;
  cfg.horizon = 8.0;
  cfg.intersample_density = 0;
  cfg.record_residuals = false;
  for (int p = 0; p <= 2; ++p) {
    std::vector<double> deltas{0.2, 0.4, 0.8}, dev;
    for (double d : deltas) {
      cfg.delta = d;
      const auto ex = simulate_sampled(cfg, SampledController(design(), d, ControllerOrder::exact()));
      const auto ap = simulate_sampled(cfg, SampledController(design(), d, ControllerOrder::series(p)));
      double worst = 0.0;
      for (std::size_t k = 0; k < ex.size(); ++k) worst = std::max(worst, (ex.states[k] - ap.states[k]).norm());
      dev.push_back(worst);
    }
    EXPECT_LT(dev[0], dev[1]);
    EXPECT_LT(dev[1], dev[2]);
    EXPECT_GT(loglog_slope(deltas, dev), p + 0.7) << "p=" << p;
  }
}

// Open-loop output.

TEST(OpenLoopOutput, SecantIdentity) {
  const auto& sys = design().system();
  const ScalarField& H = model().pch.hamiltonian();
  const Point x = pt(0.7, -0.4);
  const auto map = SampledMap::exact(sys, 0.6);
  for (double u : {-1.0, 0.4}) {
    EXPECT_NEAR(u * openloop_passifying_output(map, H, x, u), H(map(x, u)) - H(map(x, 0.0)), 1e-10);
  }
}

TEST(OpenLoopOutput, NoInputChannelGivesZero) {
  const ControlAffineSystem sys(design().system().f, VectorField::zero(2));
  for (double u : {0.0, 0.5, -2.0}) {
    EXPECT_EQ(openloop_passifying_output(sys, design().storage(), 0.5, pt(0.3, 0.2), u), 0.0);
  }
}

TEST(OpenLoopOutput, SmallPeriodLimitIsTheContinuousOutput) {
  const ScalarField& H = model().pch.hamiltonian();
  for (const auto& x : {pt(0.7, -0.4), pt(-1.5, 1.0)}) {
    const double delta = 1e-4;
    EXPECT_NEAR(openloop_passifying_output(design().system(), H, delta, x, 0.3) / delta, x[1], 1e-3);
  }
}
