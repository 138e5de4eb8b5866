#pragma once

// Digital feedback passivation.
//
// Given x' = f(x) + g(x) u made passive by u = gamma(x) + v with storage S_d
// and output h_d = L_g S_d, the sampled feedback gamma^delta solves the
// input/storage matching equality
//
//   S_d(x + F^delta(x, u)) - S_d(x) = S_d(phi_delta(x)) - S_d(x),
//
// phi being the flow of f_d = f + g gamma. The closed loop is then passive
// with output h_d^delta(x, v) = dgrad S_d|_{x+F(x,gamma^delta)}^{x+F(x,gamma^delta+v)} . g^delta(x, v),
// and the damping v solving delta v + kappa h_d^delta(x, v) = 0 stabilizes x_star.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdpass/disgrad.hpp"
#include "sdpass/errors.hpp"
#include "sdpass/field.hpp"
#include "sdpass/numerics.hpp"
#include "sdpass/ode.hpp"
#include "sdpass/sdmodel.hpp"
#include "sdpass/vfcalc.hpp"

namespace sdpass {

/// Continuous-time passivation data: storage S_d, feedback gamma, equilibrium x_star.
/// The output h_d = L_g S_d and the drift f_d = f + g gamma are derived.
class StorageDesign {
public:
  StorageDesign() = default;

  StorageDesign(ControlAffineSystem system, ScalarField storage, ScalarField feedback, Point equilibrium,
                std::optional<DiscreteGradient> discrete_gradient = std::nullopt)
      : system_(std::move(system)), storage_(std::move(storage)), feedback_(std::move(feedback)),
        equilibrium_(std::move(equilibrium)),
        dgrad_(discrete_gradient ? std::move(*discrete_gradient) : DiscreteGradient::quadrature(storage_)) {
    const int n = system_.dimension();
    require_arity(storage_.arity(), n, "storage function");
    require_arity(feedback_.arity(), n, "passifying feedback");
    require_arity(equilibrium_.size(), n, "equilibrium");
    drift_ = feedback_field(system_.f, system_.g, feedback_);
    output_ = lie_derivative_field(system_.g, storage_);
  }

  const ControlAffineSystem& system() const noexcept { return system_; }
  const ScalarField& storage() const noexcept { return storage_; }
  const ScalarField& feedback() const noexcept { return feedback_; }
  const Point& equilibrium() const noexcept { return equilibrium_; }
  const DiscreteGradient& discrete_gradient() const noexcept { return dgrad_; }

  /// f_d = f + g gamma.
  const VectorField& closed_loop_drift() const noexcept { return drift_; }
  /// h_d = L_g S_d.
  const ScalarField& output() const noexcept { return output_; }

  int dimension() const noexcept { return system_.dimension(); }

private:
  ControlAffineSystem system_;
  ScalarField storage_;
  ScalarField feedback_;
  Point equilibrium_;
  DiscreteGradient dgrad_ = DiscreteGradient::expansion(ScalarField());
  VectorField drift_;
  ScalarField output_;
};

/// Flow of x' = f_d(x) + g(x) v(x) over [0, delta].
inline Point closed_loop_flow(const StorageDesign& d, double delta, const Point& x, double kappa = 0.0,
                              const OdeOptions& ode = {}) {
  require_arity(x.size(), d.dimension(), "closed-loop flow");
  std::vector<double> y0(x.data(), x.data() + x.size());
  auto rhs = [&d, kappa](double, const std::vector<double>& y) {
    auto dx = d.closed_loop_drift()(std::span<const double>(y));
    if (kappa != 0.0) {
      const double v = -kappa * d.output()(std::span<const double>(y));
      const auto gx = d.system().g(std::span<const double>(y));
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gx[i] * v;
    }
    return dx;
  };
  return to_point(integrate(rhs, std::move(y0), 0.0, delta, ode));
}

/// Storage change along the continuous closed loop over one period,
/// S_d(phi_delta(x)) - S_d(x), i.e. the integral of L_{f_d} S_d along phi.
inline double isdm_rhs(const StorageDesign& d, double delta, const Point& x, const OdeOptions& ode = {}) {
  return d.storage()(closed_loop_flow(d, delta, x, 0.0, ode)) - d.storage()(x);
}

/// Same quantity by Gauss-Legendre quadrature of L_{f_d} S_d along the flow.
inline double isdm_rhs_quadrature(const StorageDesign& d, double delta, const Point& x, int nodes = 16,
                                  const OdeOptions& ode = {}) {
  const auto& rule = gauss_legendre(nodes);
  const ScalarField rate = lie_derivative_field(d.closed_loop_drift(), d.storage());
  // Nodes are increasing; integrate node to node.
  Point state = x;
  double t = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double s = delta * rule.nodes[k];
    state = closed_loop_flow(d, s - t, state, 0.0, ode);
    t = s;
    acc += rule.weights[k] * rate(state);
  }
  return delta * acc;
}

/// S_d(x + F^delta(x, u)) - S_d(x) - isdm_rhs; `map` supplies F^delta and delta.
inline double isdm_residual(const StorageDesign& d, const SampledMap& map, const Point& x, double u) {
  const ScalarField& S = d.storage();
  return S(map(x, u)) - S(x) - isdm_rhs(d, map.delta(), x, map.ode_options());
}

// Series terms.

inline double feedback_term_first(const StorageDesign& d, const Point& x) {
  return lie_derivative(d.closed_loop_drift(), d.feedback(), x, 1);
}

/// Below this |h_d| the ratio gamma^1 / h_d is taken as a symmetric limit.
inline constexpr double kOutputZeroTolerance = 1e-8;

namespace detail {

// gamma^1 / h_d near the zero set of h_d. The ratio is finite only when
// gamma^1 vanishes there too; it is averaged over x +- eps grad h_d / |grad h_d|^2,
// which is exact to O(eps^2) for a smooth ratio.
inline double first_term_over_output(const StorageDesign& d, const Point& x, double hd, double first) {
  if (std::abs(hd) >= kOutputZeroTolerance) return first / hd;
  const Point gh = gradient(d.output(), x);
  const double gn2 = gh.squaredNorm();
  const double scale = std::max(1.0, std::abs(first) + gradient(d.feedback(), x).norm());
  if (!(gn2 > 0.0) || std::abs(first) > 1e-6 * scale) {
    throw Error("gamma^2 needs L_g S_d(x) != 0; x is on the zero set of the passive output");
  }
  constexpr double eps = 1e-4;
  const Point e = gh / gn2;
  double sum = 0.0;
  for (double s : {eps, -eps}) {
    const Point xs = x + s * e;
    sum += feedback_term_first(d, xs) / d.output()(xs);
  }
  return 0.5 * sum;
}

}  // namespace detail

/// gamma^i for i in {1, 2}.
inline double gamma_series_term(const StorageDesign& d, int i, const Point& x) {
  require_arity(x.size(), d.dimension(), "gamma series term");
  if (i == 1) return feedback_term_first(d, x);
  if (i != 2) throw std::invalid_argument("gamma series terms are available for i = 1, 2");
  const double hd = d.output()(x);
  if (!std::isfinite(hd)) throw Error("gamma^2: passive output is not finite");
  const double first = feedback_term_first(d, x);
  const double second = lie_derivative(d.closed_loop_drift(), d.feedback(), x, 2);
  const double bracket = gradient(d.storage(), x).dot(lie_bracket(d.system().f, d.system().g, x));
  return second + 0.5 * bracket * detail::first_term_over_output(d, x, hd, first);
}

/// The vector field (L_g L_f + gamma L_g^2) applied to the coordinates: Jf g + gamma Jg g.
inline Point output_correction_field(const StorageDesign& d, const Point& x) {
  const auto& f = d.system().f;
  const auto& g = d.system().g;
  const Point gx = g(x);
  return jacobian(f, x) * gx + d.feedback()(x) * (jacobian(g, x) * gx);
}

/// delta h_d + (delta^2/2)(L_{f_d} + v L_g) h_d + (delta^2/2) grad S_d . (L_g L_f + gamma L_g^2)x.
///
/// This is the classical truncated expansion. It takes the discrete gradient at grad S_d(x)
/// and so leaves out the (delta^2/2) f_d^T Hess S_d g contribution of its
/// half-Hessian term: passifying_output minus this series is
/// (delta^2/2) f_d^T Hess S_d g + O(delta^3), not O(delta^3).
inline double passifying_output_series(const StorageDesign& d, double delta, const Point& x, double v) {
  const double hd = d.output()(x);
  const double lfd = lie_derivative(d.closed_loop_drift(), d.output(), x, 1);
  const double lg = lie_derivative(d.system().g, d.output(), x, 1);
  const double corr = gradient(d.storage(), x).dot(output_correction_field(d, x));
  return delta * hd + 0.5 * delta * delta * (lfd + v * lg + corr);
}

/// First-order coefficient of the damping feedback: v_di = -kappa h_d + (delta/2) v1_di + O(delta^2),
/// obtained from passifying_output_series; the exact solve_damping coefficient
/// differs by -kappa f_d^T Hess S_d g for the reason given there.
inline double damping_series_term(const StorageDesign& d, const Point& x, double kappa) {
  if (kappa == 0.0) return 0.0;
  const double hd = d.output()(x);
  const double lfd = lie_derivative(d.closed_loop_drift(), d.output(), x, 1);
  const double lg = lie_derivative(d.system().g, d.output(), x, 1);
  const double corr = gradient(d.storage(), x).dot(output_correction_field(d, x));
  return -kappa * (lfd - kappa * hd * lg) - kappa * corr;
}

/// gamma + sum_{i<=p} delta^i/(i+1)! gamma^i, p in {0, 1, 2}.
inline double truncated_feedback(const StorageDesign& d, double delta, const Point& x, int p,
                                 double first_sign = 1.0) {
  if (p < 0 || p > 2) throw std::invalid_argument("series order must be 0, 1 or 2");
  double u = d.feedback()(x);
  if (p >= 1) u += first_sign * delta / 2.0 * gamma_series_term(d, 1, x);
  if (p >= 2) u += delta * delta / 6.0 * gamma_series_term(d, 2, x);
  return u;
}

/// Bracket doublings allowed around the seed input (half-width 0.5 * 2^8 = 128).
/// Larger inputs make the plant stiff; past this the equation is reported unsolvable.
inline constexpr int kInputBracketExpansions = 8;

struct SolveReport {
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// gamma^delta(x): the input solving the matching equality, by safeguarded
/// Newton seeded at the order-p series. `map` must be exact for the result
/// to be the exact feedback; its delta is used throughout.
inline SolveReport solve_isdm(const StorageDesign& d, const SampledMap& map, const Point& x, int seed_order = 1) {
  const ScalarField& S = d.storage();
  const double target = S(x) + isdm_rhs(d, map.delta(), x, map.ode_options());
  auto fn = [&](double u) {
    const auto succ = map.successor_jets(x, u, 1);
    const Jet s = S(std::span<const Jet>(succ));
    return std::pair{s.value() - target, s.partial(0)};
  };
  NewtonOptions opt;
  opt.tolerance = 1e-12 * std::max(1.0, std::abs(S(x)));
  opt.max_bracket_expansions = kInputBracketExpansions;
  const auto r = safeguarded_newton(fn, truncated_feedback(d, map.delta(), x, seed_order), opt, "solve_isdm");
  return {r.root, r.residual, r.iterations};
}

inline SolveReport solve_isdm(const StorageDesign& d, double delta, const Point& x, int seed_order = 1) {
  return solve_isdm(d, SampledMap::exact(d.system(), delta), x, seed_order);
}

/// dgrad S|_{x+F(x,u_base)}^{x+F(x,u_base+v)} . (F(x,u_base+v) - F(x,u_base)) / v,
/// and its limit grad S(x+F(x,u_base)) . dF/du at v = 0.
inline double secant_output(const SampledMap& map, const DiscreteGradient& dg, const Point& x, double u_base,
                            double v) {
  if (std::abs(v) < SampledMap::kInputLimitEpsilon) {
    const auto succ = map.successor_jets(x, u_base, 1);
    return dg.storage()(std::span<const Jet>(succ)).partial(0);
  }
  const double us[2] = {u_base, u_base + v};
  const auto F = map.increments(x, us);
  const Point z0 = x + F[0];
  const Point z1 = x + F[1];
  return dg(z0, z1).dot((F[1] - F[0]) / v);
}

/// h_d^delta(x, v) for a given passifying input u_base = gamma^delta(x).
inline double passifying_output(const StorageDesign& d, const SampledMap& map, const Point& x, double u_base,
                                double v) {
  return secant_output(map, d.discrete_gradient(), x, u_base, v);
}

/// h_d^delta(x, v) with the exact gamma^delta.
inline double passifying_output(const StorageDesign& d, double delta, const Point& x, double v) {
  const auto map = SampledMap::exact(d.system(), delta);
  return passifying_output(d, map, x, solve_isdm(d, map, x).value, v);
}

/// (1/v) int_0^v d/dw S_d(x + F(x, u_base + w)) dw by Gauss-Legendre quadrature.
inline double average_output(const StorageDesign& d, const SampledMap& map, const Point& x, double u_base, double v) {
  const ScalarField& S = d.storage();
  auto integrand = [&](double w) {
    const auto succ = map.successor_jets(x, u_base + w, 1);
    return S(std::span<const Jet>(succ)).partial(0);
  };
  if (std::abs(v) < SampledMap::kInputLimitEpsilon) return integrand(0.0);
  auto mean = [&](int n) {
    const auto& rule = gauss_legendre(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * integrand(v * rule.nodes[k]);
    return acc;
  };
  double prev = mean(8);
  for (int n = 16; n <= 256; n *= 2) {
    const double cur = mean(n);
    if (std::abs(cur - prev) <= 1e-12 * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  throw QuadratureError("average output quadrature did not converge", std::abs(prev));
}

/// Damping input v solving delta v + kappa h_d^delta(x, v) = 0, given u_base = gamma^delta(x).
inline SolveReport solve_damping(const StorageDesign& d, const SampledMap& map, const Point& x, double u_base,
                                 double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("damping gain must be nonnegative");
  if (kappa == 0.0) return {0.0, 0.0, 0};
  const double delta = map.delta();
  const ScalarField& S = d.storage();
  auto fn = [&](double v) {
    const double h = passifying_output(d, map, x, u_base, v);
    double dh;
    if (std::abs(v) < 1e-6) {
      const auto succ = map.successor_jets(x, u_base, 2);
      dh = S(std::span<const Jet>(succ)).coeffs()[2];
    } else {
      const auto succ = map.successor_jets(x, u_base + v, 1);
      dh = (S(std::span<const Jet>(succ)).partial(0) - h) / v;
    }
    return std::pair{delta * v + kappa * h, delta + kappa * dh};
  };
  NewtonOptions opt;
  opt.tolerance = 1e-12;
  opt.max_bracket_expansions = kInputBracketExpansions;
  const auto r = safeguarded_newton(fn, -kappa * d.output()(x), opt, "solve_damping");
  return {r.root, r.residual, r.iterations};
}

inline SolveReport solve_damping(const StorageDesign& d, double delta, const Point& x, double kappa) {
  const auto map = SampledMap::exact(d.system(), delta);
  return solve_damping(d, map, x, solve_isdm(d, map, x).value, kappa);
}

/// (1/u) dgrad S|_{x+F(x,0)}^{x+F(x,u)} . (F(x,u) - F(x,0)): the output that keeps
/// a passive open loop passive under sampling.
inline double openloop_passifying_output(const SampledMap& map, const ScalarField& S, const Point& x, double u) {
  return secant_output(map, DiscreteGradient::quadrature(S), x, 0.0, u);
}

inline double openloop_passifying_output(const ControlAffineSystem& sys, const ScalarField& S, double delta,
                                         const Point& x, double u) {
  return openloop_passifying_output(SampledMap::exact(sys, delta), S, x, u);
}

/// Controller order: a truncation p in {0, 1, 2} or the exact implicit solution.
class ControllerOrder {
public:
  static ControllerOrder series(int p) {
    if (p < 0 || p > 2) throw std::invalid_argument("controller order must be 0, 1, 2 or exact");
    return ControllerOrder(p);
  }
  static ControllerOrder exact() { return ControllerOrder(-1); }

  static ControllerOrder parse(const std::string& s) {
    if (s == "exact") return exact();
    if (s == "0" || s == "1" || s == "2") return series(s[0] - '0');
    throw std::invalid_argument("controller order must be 0, 1, 2 or exact, got '" + s + "'");
  }

  bool is_exact() const noexcept { return p_ < 0; }
  int truncation() const noexcept { return p_; }
  std::string str() const { return is_exact() ? "exact" : std::to_string(p_); }

  friend bool operator==(ControllerOrder, ControllerOrder) = default;

private:
  explicit ControllerOrder(int p) : p_(p) {}
  int p_;
};

struct ControllerOptions {
  double kappa = 0.0;
  /// Multiplies the first-order feedback correction. Only mutation checks change it.
  double first_correction_sign = 1.0;
};

/// Digital passivating controller u = gamma^delta(x) + v_di^delta(x), exact or truncated.
class SampledController {
public:
  SampledController(StorageDesign design, double delta, ControllerOrder order, ControllerOptions opt = {})
      : design_(std::move(design)), map_(SampledMap::exact(design_.system(), delta)), order_(order), opt_(opt) {
    if (opt_.kappa < 0.0) throw std::invalid_argument("damping gain must be nonnegative");
  }

  const StorageDesign& design() const noexcept { return design_; }
  double delta() const noexcept { return map_.delta(); }
  double kappa() const noexcept { return opt_.kappa; }
  ControllerOrder order() const noexcept { return order_; }
  const SampledMap& exact_map() const noexcept { return map_; }

  /// gamma^delta(x) (exact) or gamma_[p](x).
  double passifying_feedback(const Point& x) const {
    if (order_.is_exact()) return solve_isdm(design_, map_, x).value;
    return truncated_feedback(design_, delta(), x, order_.truncation(), opt_.first_correction_sign);
  }

  /// The applied input u(x).
  double operator()(const Point& x) const {
    if (order_.is_exact()) {
      const double gamma = passifying_feedback(x);
      return gamma + solve_damping(design_, map_, x, gamma, opt_.kappa).value;
    }
    const int p = order_.truncation();
    double u = passifying_feedback(x) - opt_.kappa * design_.output()(x);
    if (p >= 1) u += delta() / 2.0 * damping_series_term(design_, x, opt_.kappa);
    return u;
  }

  /// h_d^delta(x, v) around this controller's own passifying feedback.
  double passifying_output(const Point& x, double v) const {
    return sdpass::passifying_output(design_, map_, x, passifying_feedback(x), v);
  }

private:
  StorageDesign design_;
  SampledMap map_;
  ControllerOrder order_;
  ControllerOptions opt_;
};

/// u_[p](x) = gamma - kappa h_d + sum_{i<=p} delta^i/(i+1)! u^i, or the exact composition.
inline double approx_controller(const SampledController& ctrl, const Point& x) { return ctrl(x); }

}  // namespace sdpass
