#pragma once

// Discrete gradients: two-point vectors g with (z - x)^T g = S(z) - S(x)
// and g(x, x) = grad S(x). The canonical one is the average of the gradient
// along the segment, int_0^1 grad S(x + l (z - x)) dl.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "sdpass/errors.hpp"
#include "sdpass/field.hpp"
#include "sdpass/numerics.hpp"
#include "sdpass/vfcalc.hpp"

namespace sdpass {

enum class DiscreteGradientMode { closed_form, quadrature, expansion };

inline const char* to_string(DiscreteGradientMode m) {
  switch (m) {
    case DiscreteGradientMode::closed_form: return "closed_form";
    case DiscreteGradientMode::quadrature: return "quadrature";
    case DiscreteGradientMode::expansion: return "expansion";
  }
  return "?";
}

/// grad S(x) + 0.5 * Hess S(x) (z - x).
inline Point discrete_gradient_expansion(const ScalarField& S, const Point& x, const Point& z) {
  require_arity(x.size(), S.arity(), "discrete gradient");
  require_arity(z.size(), S.arity(), "discrete gradient");
  return gradient(S, x) + 0.5 * hessian(S, x) * (z - x);
}

class DiscreteGradient {
public:
  using ClosedForm = std::function<Point(const Point&, const Point&)>;

  /// Increments shorter than this return grad S at the midpoint.
  static constexpr double kCoincidentTolerance = 1e-9;
  static constexpr double kSecantTolerance = 1e-11;
  static constexpr int kMaxNodes = 256;

  static DiscreteGradient quadrature(ScalarField storage, int nodes = 16) {
    if (nodes < 1) throw DimensionError("quadrature needs at least one node");
    return DiscreteGradient(std::move(storage), DiscreteGradientMode::quadrature, nodes, {});
  }

  static DiscreteGradient closed_form(ScalarField storage, ClosedForm fn) {
    return DiscreteGradient(std::move(storage), DiscreteGradientMode::closed_form, 0, std::move(fn));
  }

  static DiscreteGradient expansion(ScalarField storage) {
    return DiscreteGradient(std::move(storage), DiscreteGradientMode::expansion, 0, {});
  }

  DiscreteGradientMode mode() const noexcept { return mode_; }
  const ScalarField& storage() const noexcept { return storage_; }

  Point operator()(const Point& x, const Point& z) const {
    require_arity(x.size(), storage_.arity(), "discrete gradient");
    require_arity(z.size(), storage_.arity(), "discrete gradient");
    if (!x.allFinite() || !z.allFinite()) throw DimensionError("discrete gradient of non-finite points");
    if ((z - x).norm() < kCoincidentTolerance) return gradient(storage_, 0.5 * (x + z));
    switch (mode_) {
      case DiscreteGradientMode::closed_form: return closed_(x, z);
      case DiscreteGradientMode::expansion: return discrete_gradient_expansion(storage_, x, z);
      case DiscreteGradientMode::quadrature: break;
    }
    return average_gradient(x, z);
  }

  /// |(z - x)^T g - (S(z) - S(x))| for a candidate g.
  double secant_residual(const Point& x, const Point& z, const Point& g) const {
    return std::abs((z - x).dot(g) - (storage_(z) - storage_(x)));
  }

private:
  DiscreteGradient(ScalarField s, DiscreteGradientMode m, int nodes, ClosedForm fn)
      : storage_(std::move(s)), mode_(m), nodes_(nodes), closed_(std::move(fn)) {}

  Point average_gradient(const Point& x, const Point& z) const {
    const Point dz = z - x;
    const double scale = std::max({1.0, std::abs(storage_(x)), std::abs(storage_(z))});
    double residual = 0.0;
    for (int n = nodes_; n <= kMaxNodes; n *= 2) {
      const auto& rule = gauss_legendre(n);
      Point g = Point::Zero(x.size());
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        g += rule.weights[k] * gradient(storage_, x + rule.nodes[k] * dz);
      }
      residual = secant_residual(x, z, g);
      if (residual <= kSecantTolerance * scale) return g;
    }
    throw QuadratureError("discrete gradient quadrature did not converge", residual);
  }

  ScalarField storage_;
  DiscreteGradientMode mode_;
  int nodes_;
  ClosedForm closed_;
};

inline Point discrete_gradient(const DiscreteGradient& ev, const Point& x, const Point& z) { return ev(x, z); }

}  // namespace sdpass
