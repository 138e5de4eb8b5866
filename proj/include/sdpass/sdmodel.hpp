#pragma once

// Sampled-data equivalent model under zero-order hold:
//   x_{k+1} = x_k + F^delta(x_k, u_k),  x + F^delta(x, u) = e^{delta (L_f + u L_g)} x.

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "sdpass/errors.hpp"
#include "sdpass/field.hpp"
#include "sdpass/jet.hpp"
#include "sdpass/ode.hpp"
#include "sdpass/vfcalc.hpp"

namespace sdpass {

/// x' = f(x) + g(x) u with scalar input u.
struct ControlAffineSystem {
  VectorField f;
  VectorField g;

  ControlAffineSystem() = default;
  ControlAffineSystem(VectorField drift, VectorField input) : f(std::move(drift)), g(std::move(input)) {
    require_arity(g.arity(), f.arity(), "control-affine system");
  }

  int dimension() const noexcept { return f.arity(); }
};

enum class SampledMapMode { series, exact };

class SampledMap {
public:
  /// Below this |v| the control direction is the input derivative.
  static constexpr double kInputLimitEpsilon = 1e-7;

  static SampledMap series(ControlAffineSystem sys, double delta, int order, int max_jet_order = kDefaultJetOrder) {
    if (order < 1) throw DimensionError("series order must be >= 1");
    if (order > max_jet_order) throw JetOrderError(order, max_jet_order);
    return SampledMap(std::move(sys), delta, SampledMapMode::series, order, max_jet_order, {});
  }

  static SampledMap exact(ControlAffineSystem sys, double delta, OdeOptions ode = {}) {
    return SampledMap(std::move(sys), delta, SampledMapMode::exact, 0, kDefaultJetOrder, ode);
  }

  const ControlAffineSystem& system() const noexcept { return sys_; }
  double delta() const noexcept { return delta_; }
  SampledMapMode mode() const noexcept { return mode_; }
  int series_order() const noexcept { return order_; }
  const OdeOptions& ode_options() const noexcept { return ode_; }

  SampledMap with_delta(double delta) const {
    SampledMap m = *this;
    m.delta_ = check_delta(delta);
    return m;
  }

  /// F^delta(x, u).
  Point increment(const Point& x, double u) const {
    require_arity(x.size(), sys_.dimension(), "sampled map");
    if (mode_ == SampledMapMode::series) {
      const auto s = successor_jets(x, u, 0);
      Point out(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = s[static_cast<std::size_t>(i)].value() - x[i];
      return out;
    }
    return increments(x, std::vector<double>{u}).front();
  }

  /// x + F^delta(x, u).
  Point operator()(const Point& x, double u) const { return x + increment(x, u); }

  /// F^delta(x, u_i) for several inputs. In exact mode all inputs share one
  /// step sequence, so differences between them carry no step-selection noise.
  std::vector<Point> increments(const Point& x, std::span<const double> us) const {
    require_arity(x.size(), sys_.dimension(), "sampled map");
    std::vector<Point> out;
    if (mode_ == SampledMapMode::series) {
      for (double u : us) out.push_back(increment(x, u));
      return out;
    }
    const std::size_t n = static_cast<std::size_t>(x.size());
    const std::size_t m = us.size();
    std::vector<double> y0(n * m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) y0[j * n + i] = x[static_cast<Eigen::Index>(i)];
    const std::vector<double> inputs(us.begin(), us.end());
    auto rhs = [this, n, m, &inputs](double, const std::vector<double>& y) {
      std::vector<double> dy(n * m);
      for (std::size_t j = 0; j < m; ++j) {
        std::span<const double> xj(y.data() + j * n, n);
        const auto fx = sys_.f(xj);
        const auto gx = sys_.g(xj);
        for (std::size_t i = 0; i < n; ++i) dy[j * n + i] = fx[i] + inputs[j] * gx[i];
      }
      return dy;
    };
    const auto y = integrate(rhs, std::move(y0), 0.0, delta_, ode_);
    for (std::size_t j = 0; j < m; ++j) {
      Point p(x.size());
      for (std::size_t i = 0; i < n; ++i) p[static_cast<Eigen::Index>(i)] = y[j * n + i] - x[static_cast<Eigen::Index>(i)];
      out.push_back(std::move(p));
    }
    return out;
  }

  /// x + F^delta(x, u + w) as jets in the single variable w, valid to `order`.
  std::vector<Jet> successor_jets(const Point& x, double u, int order) const {
    require_arity(x.size(), sys_.dimension(), "sampled map");
    const int n = sys_.dimension();
    if (mode_ == SampledMapMode::series) {
      // Jets over (x, w); N Lie derivatives leave `order` in w.
      const int depth = order_ + order;
      std::vector<Jet> X;
      for (int i = 0; i < n; ++i) X.push_back(Jet::variable(n + 1, depth, i, x[i]));
      const Jet w = Jet::variable(n + 1, depth, n, 0.0);
      const auto fx = sys_.f(std::span<const Jet>(X));
      const auto gx = sys_.g(std::span<const Jet>(X));
      std::vector<Jet> F;
      for (int i = 0; i < n; ++i) F.push_back(fx[static_cast<std::size_t>(i)] + (u + w) * gx[static_cast<std::size_t>(i)]);
      const auto s = lie_series_jets(F, X, delta_, order_);
      return restrict_to_input(s, n, order);
    }
    std::vector<Jet> y0;
    for (int i = 0; i < n; ++i) y0.push_back(Jet::constant(1, order, x[i]));
    const Jet w = Jet::variable(1, order, 0, 0.0);
    auto rhs = [this, u, &w](double, const std::vector<Jet>& y) {
      auto fx = sys_.f(std::span<const Jet>(y));
      const auto gx = sys_.g(std::span<const Jet>(y));
      for (std::size_t i = 0; i < fx.size(); ++i) fx[i] = fx[i] + (u + w) * gx[i];
      return fx;
    };
    return integrate(rhs, std::move(y0), 0.0, delta_, ode_);
  }

  /// {F^delta(x, u), dF^delta/du (x, u)}.
  std::pair<Point, Point> increment_and_input_derivative(const Point& x, double u) const {
    const auto s = successor_jets(x, u, 1);
    Point F(x.size()), dF(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      F[i] = s[static_cast<std::size_t>(i)].value() - x[i];
      dF[i] = s[static_cast<std::size_t>(i)].partial(0);
    }
    return {F, dF};
  }

private:
  SampledMap(ControlAffineSystem sys, double delta, SampledMapMode mode, int order, int max_jet_order, OdeOptions ode)
      : sys_(std::move(sys)), delta_(check_delta(delta)), mode_(mode), order_(order),
        max_jet_order_(max_jet_order), ode_(ode) {}

  static double check_delta(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DimensionError("sampling period must be positive");
    return delta;
  }

  // Keeps only the monomials in the input variable (index n) of jets over (x, w).
  static std::vector<Jet> restrict_to_input(const std::vector<Jet>& s, int n, int order) {
    const auto layout = jet_layout(1, order);
    std::vector<Jet> out;
    for (const auto& sj : s) {
      std::vector<double> c(layout->size());
      MultiIndex m(static_cast<std::size_t>(n + 1), 0);
      for (int k = 0; k <= order; ++k) {
        m[static_cast<std::size_t>(n)] = k;
        c[static_cast<std::size_t>(k)] = sj.coeff(m);
      }
      out.emplace_back(layout, std::move(c));
    }
    return out;
  }

  ControlAffineSystem sys_;
  double delta_;
  SampledMapMode mode_;
  int order_;
  int max_jet_order_;
  OdeOptions ode_;
};

inline Point sampled_map(const SampledMap& m, const Point& x, double u) { return m(x, u); }

/// g^delta(x, v) with v g^delta = F^delta(x, u_base + v) - F^delta(x, u_base);
/// the input derivative at u_base when |v| is below the limit threshold.
inline Point control_direction(const SampledMap& m, const Point& x, double u_base, double v) {
  if (std::abs(v) < SampledMap::kInputLimitEpsilon) {
    return m.increment_and_input_derivative(x, u_base).second;
  }
  const double us[2] = {u_base, u_base + v};
  const auto F = m.increments(x, us);
  return (F[1] - F[0]) / v;
}

}  // namespace sdpass
