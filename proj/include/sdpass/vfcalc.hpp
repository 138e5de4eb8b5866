#pragma once

// Lie derivatives, Lie brackets and truncated Lie series over jet-evaluable
// fields. All derivatives are taken on jets; nothing here differences.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sdpass/errors.hpp"
#include "sdpass/field.hpp"
#include "sdpass/jet.hpp"

namespace sdpass {

/// Jet depth used when callers do not ask for a specific one.
inline constexpr int kDefaultJetOrder = 4;

namespace detail {

inline void require_positive_order(int k, int max_order) {
  if (k < 1) throw DimensionError("derivative order must be >= 1");
  if (k > max_order) throw JetOrderError(k, max_order);
}

inline const Jet* first_nonconstant(std::span<const Jet> xs) {
  for (const auto& x : xs)
    if (!x.is_constant()) return &x;
  return nullptr;
}

inline int min_order(std::span<const Jet> xs) {
  int m = Jet::kExactOrder;
  for (const auto& x : xs) m = std::min(m, x.order());
  return m;
}

}  // namespace detail

/// Gradient of `S` at the point x.
inline Point gradient(const ScalarField& S, const Point& x) {
  require_arity(x.size(), S.arity(), "gradient");
  const Jet v = S(std::span<const Jet>(coordinate_jets(x, 1)));
  Point g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = v.partial(static_cast<int>(i));
  return g;
}

inline Matrix hessian(const ScalarField& S, const Point& x) {
  require_arity(x.size(), S.arity(), "hessian");
  const int n = static_cast<int>(x.size());
  const Jet v = S(std::span<const Jet>(coordinate_jets(x, 2)));
  Matrix h(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      MultiIndex m(static_cast<std::size_t>(n), 0);
      m[static_cast<std::size_t>(i)] += 1;
      m[static_cast<std::size_t>(j)] += 1;
      h(i, j) = v.derivative(m);
    }
  }
  return h;
}

/// Jacobian matrix d f_i / d x_j.
inline Matrix jacobian(const VectorField& f, const Point& x) {
  require_arity(x.size(), f.arity(), "jacobian");
  const int n = static_cast<int>(x.size());
  const auto v = f(std::span<const Jet>(coordinate_jets(x, 1)));
  Matrix jac(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) jac(i, j) = v[static_cast<std::size_t>(i)].partial(j);
  return jac;
}

/// Gradient of `S` evaluated at a jet-valued point, as jets of the same depth.
///
/// Evaluates S(X + s) over the base variables of X plus n fresh variables s
/// and reads off the coefficients that are linear in each s_i.
inline std::vector<Jet> gradient_jets(const ScalarField& S, std::span<const Jet> X) {
  const int n = S.arity();
  require_arity(static_cast<std::ptrdiff_t>(X.size()), n, "gradient");
  const Jet* base = detail::first_nonconstant(X);
  if (base == nullptr) {
    Point x(n);
    for (int i = 0; i < n; ++i) x[i] = X[static_cast<std::size_t>(i)].value();
    const Point g = gradient(S, x);
    return std::vector<Jet>(g.data(), g.data() + n);
  }
  const int nb = base->nvars();
  const int m = detail::min_order(X);
  const auto big = jet_layout(nb + n, m + 1);
  std::vector<Jet> lifted;
  lifted.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Jet xi = X[static_cast<std::size_t>(i)].truncated(m);
    if (!xi.is_constant() && xi.nvars() != nb) throw DimensionError("jets over different variable sets");
    Jet e = embed(xi, big, 0);
    std::vector<double> c = e.coeffs();
    MultiIndex s(static_cast<std::size_t>(nb + n), 0);
    s[static_cast<std::size_t>(nb + i)] = 1;
    c[static_cast<std::size_t>(big->index_of(s))] += 1.0;
    lifted.emplace_back(big, std::move(c));
  }
  const Jet y = S(std::span<const Jet>(lifted));
  const Jet yt = y.truncated(m + 1);
  const auto small = jet_layout(nb, std::min(m, yt.order() - 1));
  std::vector<Jet> out;
  out.reserve(static_cast<std::size_t>(n));
  MultiIndex bm(static_cast<std::size_t>(nb + n), 0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> c(small->size());
    for (std::size_t k = 0; k < small->size(); ++k) {
      std::fill(bm.begin(), bm.end(), 0);
      const auto& a = small->multi_index(k);
      for (int v = 0; v < nb; ++v) bm[static_cast<std::size_t>(v)] = a[static_cast<std::size_t>(v)];
      bm[static_cast<std::size_t>(nb + i)] = 1;
      c[k] = yt.is_constant() ? 0.0 : yt.coeffs()[static_cast<std::size_t>(yt.layout()->index_of(bm))];
    }
    out.emplace_back(small, std::move(c));
  }
  return out;
}

/// L_F applied to a jet L over the same coordinate variables: sum_i F_i dL/dx_i.
/// F may be shorter than the variable count (remaining components are zero).
inline Jet lie_derivative_jet(std::span<const Jet> F, const Jet& L) {
  if (L.is_constant()) return Jet(0.0);
  Jet acc(0.0);
  for (std::size_t i = 0; i < F.size(); ++i) {
    acc = acc + F[i] * partial_derivative(L, static_cast<int>(i));
  }
  return acc;
}

/// (L_f)^k S evaluated at x.
inline double lie_derivative(const VectorField& f, const ScalarField& S, const Point& x, int k,
                             int max_order = kDefaultJetOrder) {
  require_arity(S.arity(), f.arity(), "lie derivative");
  require_arity(x.size(), f.arity(), "lie derivative point");
  detail::require_positive_order(k, max_order);
  const auto X = coordinate_jets(x, k);
  const auto F = f(std::span<const Jet>(X));
  Jet L = S(std::span<const Jet>(X));
  for (int i = 0; i < k; ++i) L = lie_derivative_jet(F, L);
  return L.value();
}

/// ad_f g (x) = Jg(x) f(x) - Jf(x) g(x).
inline Point lie_bracket(const VectorField& f, const VectorField& g, const Point& x) {
  require_arity(g.arity(), f.arity(), "lie bracket");
  require_arity(x.size(), f.arity(), "lie bracket point");
  return jacobian(g, x) * f(x) - jacobian(f, x) * g(x);
}

/// sum_{i=0..N} (delta^i / i!) (L_F)^i X componentwise, on jets.
/// The result is valid to (order of X) - N.
inline std::vector<Jet> lie_series_jets(std::span<const Jet> F, std::span<const Jet> X, double delta, int N) {
  std::vector<Jet> acc(X.begin(), X.end());
  std::vector<Jet> term(X.begin(), X.end());
  double coef = 1.0;
  for (int i = 1; i <= N; ++i) {
    coef *= delta / i;
    for (std::size_t j = 0; j < term.size(); ++j) {
      term[j] = lie_derivative_jet(F, term[j]);
      acc[j] = acc[j].truncated(term[j].order()) + coef * term[j];
    }
  }
  return acc;
}

/// Order-N truncation of e^{delta L_f} x.
inline Point exp_lie_series(const VectorField& f, double delta, const Point& x, int N,
                            int max_order = kDefaultJetOrder) {
  require_arity(x.size(), f.arity(), "lie series point");
  detail::require_positive_order(N, max_order);
  if (!(delta > 0.0)) throw DimensionError("lie series step must be positive");
  const auto X = coordinate_jets(x, N);
  const auto F = f(std::span<const Jet>(X));
  const auto acc = lie_series_jets(F, X, delta, N);
  Point out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = acc[static_cast<std::size_t>(i)].value();
  return out;
}

// Field combinators. The results stay jet-evaluable.

/// f + g * u for a scalar field u.
inline VectorField feedback_field(const VectorField& f, const VectorField& g, const ScalarField& u) {
  require_arity(g.arity(), f.arity(), "feedback field");
  require_arity(u.arity(), f.arity(), "feedback field");
  return VectorField(
      f.arity(),
      [f, g, u](std::span<const double> x) {
        auto a = f(x);
        const auto b = g(x);
        const double s = u(x);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i] * s;
        return a;
      },
      [f, g, u](std::span<const Jet> x) {
        auto a = f(x);
        const auto b = g(x);
        const Jet s = u(x);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] + b[i] * s;
        return a;
      });
}

/// The scalar field L_f S = f . grad S.
inline ScalarField lie_derivative_field(const VectorField& f, const ScalarField& S) {
  require_arity(S.arity(), f.arity(), "lie derivative field");
  return ScalarField(
      f.arity(),
      [f, S](std::span<const double> x) {
        const auto fx = f(x);
        const Point g = gradient(S, to_point(x));
        double acc = 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) acc += fx[i] * g[static_cast<Eigen::Index>(i)];
        return acc;
      },
      [f, S](std::span<const Jet> x) {
        const auto fx = f(x);
        const auto g = gradient_jets(S, x);
        Jet acc(0.0);
        for (std::size_t i = 0; i < fx.size(); ++i) acc = acc + fx[i] * g[i];
        return acc;
      });
}

}  // namespace sdpass
