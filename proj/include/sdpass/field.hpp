#pragma once

// Type-erased scalar, vector and matrix fields on R^n.
//
// A field is built from one generic callable that is instantiated twice:
// once over double (fast path for integrators) and once over Jet (for
// derivatives of any order). The callable receives the point as
// std::span<const T> and returns T (scalar field), std::vector<T>
// (vector field) or a row-major std::vector<T> of n*n entries (matrix field).
//
//   ScalarField energy(2, [](auto x) {
//     using std::cos;
//     return 0.5 * x[1] * x[1] + (1.0 - cos(x[0]));
//   });

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdpass/errors.hpp"
#include "sdpass/jet.hpp"

namespace sdpass {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline void require_arity(std::ptrdiff_t got, int expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

inline std::span<const double> as_span(const Point& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}

inline Point to_point(std::span<const double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<Eigen::Index>(i)] = v[i];
  return p;
}

/// Coordinate jets x_i + t_i over n variables, valid to `order`.
inline std::vector<Jet> coordinate_jets(const Point& x, int order) {
  const int n = static_cast<int>(x.size());
  std::vector<Jet> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(Jet::variable(n, order, i, x[i]));
  return out;
}

class ScalarField {
public:
  using DoubleFn = std::function<double(std::span<const double>)>;
  using JetFn = std::function<Jet(std::span<const Jet>)>;

  ScalarField() = default;

  template <class F>
  ScalarField(int n, F fn)
      : n_(n),
        eval_([fn](std::span<const double> x) { return static_cast<double>(fn(x)); }),
        jet_([fn](std::span<const Jet> x) { return Jet(fn(x)); }) {}

  ScalarField(int n, DoubleFn eval, JetFn jet) : n_(n), eval_(std::move(eval)), jet_(std::move(jet)) {}

  int arity() const noexcept { return n_; }
  explicit operator bool() const noexcept { return static_cast<bool>(eval_); }

  double operator()(const Point& x) const {
    require_arity(x.size(), n_, "scalar field");
    return eval_(as_span(x));
  }
  double operator()(std::span<const double> x) const { return eval_(x); }
  Jet operator()(std::span<const Jet> x) const {
    require_arity(static_cast<std::ptrdiff_t>(x.size()), n_, "scalar field");
    return jet_(x);
  }

private:
  int n_ = 0;
  DoubleFn eval_;
  JetFn jet_;
};

class VectorField {
public:
  using DoubleFn = std::function<std::vector<double>(std::span<const double>)>;
  using JetFn = std::function<std::vector<Jet>(std::span<const Jet>)>;

  VectorField() = default;

  template <class F>
  VectorField(int n, F fn)
      : n_(n),
        eval_([fn](std::span<const double> x) { return to_vector<double>(fn(x)); }),
        jet_([fn](std::span<const Jet> x) { return to_vector<Jet>(fn(x)); }) {}

  VectorField(int n, DoubleFn eval, JetFn jet) : n_(n), eval_(std::move(eval)), jet_(std::move(jet)) {}

  int arity() const noexcept { return n_; }
  explicit operator bool() const noexcept { return static_cast<bool>(eval_); }

  Point operator()(const Point& x) const {
    require_arity(x.size(), n_, "vector field");
    return to_point(checked(eval_(as_span(x))));
  }
  std::vector<double> operator()(std::span<const double> x) const { return checked(eval_(x)); }
  std::vector<Jet> operator()(std::span<const Jet> x) const {
    require_arity(static_cast<std::ptrdiff_t>(x.size()), n_, "vector field");
    return checked(jet_(x));
  }

  /// The zero field on R^n.
  static VectorField zero(int n) {
    return VectorField(n, [n](auto x) {
      using T = std::decay_t<decltype(x[0])>;
      return std::vector<T>(static_cast<std::size_t>(n), T(0.0));
    });
  }

  /// A constant field.
  static VectorField constant(const Point& c) {
    std::vector<double> v(c.data(), c.data() + c.size());
    return VectorField(static_cast<int>(c.size()), [v](auto x) {
      using T = std::decay_t<decltype(x[0])>;
      return std::vector<T>(v.begin(), v.end());
    });
  }

private:
  template <class T, class R>
  static std::vector<T> to_vector(R&& r) {
    std::vector<T> out;
    out.reserve(r.size());
    for (auto&& e : r) out.push_back(T(e));
    return out;
  }

  template <class V>
  V checked(V v) const {
    require_arity(static_cast<std::ptrdiff_t>(v.size()), n_, "vector field output");
    return v;
  }

  int n_ = 0;
  DoubleFn eval_;
  JetFn jet_;
};

/// n x n matrix-valued field; the callable returns n*n entries in row-major order.
class MatrixField {
public:
  using DoubleFn = std::function<std::vector<double>(std::span<const double>)>;
  using JetFn = std::function<std::vector<Jet>(std::span<const Jet>)>;

  MatrixField() = default;

  template <class F>
  MatrixField(int n, F fn)
      : n_(n),
        eval_([fn](std::span<const double> x) {
          auto r = fn(x);
          return std::vector<double>(r.begin(), r.end());
        }),
        jet_([fn](std::span<const Jet> x) {
          auto r = fn(x);
          std::vector<Jet> out;
          for (auto&& e : r) out.push_back(Jet(e));
          return out;
        }) {}

  static MatrixField constant(const Matrix& m) {
    const int n = static_cast<int>(m.rows());
    std::vector<double> entries;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) entries.push_back(m(i, j));
    return MatrixField(n, [entries](auto x) {
      using T = std::decay_t<decltype(x[0])>;
      return std::vector<T>(entries.begin(), entries.end());
    });
  }

  int arity() const noexcept { return n_; }

  Matrix operator()(const Point& x) const {
    require_arity(x.size(), n_, "matrix field");
    const auto e = eval_(as_span(x));
    require_arity(static_cast<std::ptrdiff_t>(e.size()), n_ * n_, "matrix field output");
    Matrix m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = e[static_cast<std::size_t>(i * n_ + j)];
    return m;
  }

  std::vector<Jet> operator()(std::span<const Jet> x) const {
    auto e = jet_(x);
    require_arity(static_cast<std::ptrdiff_t>(e.size()), n_ * n_, "matrix field output");
    return e;
  }

private:
  int n_ = 0;
  DoubleFn eval_;
  JetFn jet_;
};

}  // namespace sdpass
