#pragma once

// Truncated multivariate Taylor polynomials ("jets").
//
// A Jet stores the Taylor coefficients of a smooth function of `nvars`
// variables around a base point, up to total degree `order`. Arithmetic
// and the elementary functions below are exact to that order: dropping
// terms of higher degree is the only approximation. Coefficients are kept
// in graded order (all degree-0 terms, then degree 1, ...), so the layout
// of a lower order is a prefix of the layout of a higher order with the
// same number of variables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "sdpass/errors.hpp"

namespace sdpass {

using MultiIndex = std::vector<int>;

class JetLayout {
public:
  JetLayout(int nvars, int order) : nvars_(nvars), order_(order) {
    if (nvars < 1 || order < 0) {
      throw DimensionError("jet layout needs nvars >= 1 and order >= 0");
    }
    degree_start_.push_back(0);
    for (int d = 0; d <= order; ++d) {
      MultiIndex current(static_cast<std::size_t>(nvars), 0);
      append_degree(current, 0, d);
      degree_start_.push_back(multi_.size());
    }
    for (std::size_t k = 0; k < multi_.size(); ++k) {
      index_.emplace(multi_[k], static_cast<std::uint32_t>(k));
    }
    for (std::size_t i = 0; i < multi_.size(); ++i) {
      const int di = degree(i);
      for (std::size_t j = 0; j < size_up_to(order - di); ++j) {
        MultiIndex sum = multi_[i];
        for (int v = 0; v < nvars; ++v) {
          sum[v] += multi_[j][v];
        }
        products_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                             index_.at(sum)});
      }
    }
    shift_.resize(static_cast<std::size_t>(nvars));
    if (order > 0) {
      for (int v = 0; v < nvars; ++v) {
        auto& row = shift_[v];
        row.reserve(size_up_to(order - 1));
        for (std::size_t k = 0; k < size_up_to(order - 1); ++k) {
          MultiIndex up = multi_[k];
          up[v] += 1;
          row.push_back(index_.at(up));
        }
      }
    }
  }

  int nvars() const noexcept { return nvars_; }
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return multi_.size(); }

  /// Number of coefficients of total degree <= d.
  std::size_t size_up_to(int d) const noexcept {
    if (d < 0) return 0;
    return degree_start_[static_cast<std::size_t>(std::min(d, order_)) + 1];
  }

  int degree(std::size_t k) const noexcept {
    int d = 0;
    for (int e : multi_[k]) d += e;
    return d;
  }

  const MultiIndex& multi_index(std::size_t k) const { return multi_[k]; }

  /// Index of a multi-index, or -1 if it exceeds the layout's order.
  std::ptrdiff_t index_of(const MultiIndex& m) const {
    auto it = index_.find(m);
    return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

  /// Triples (i, j, k) with multi[i] + multi[j] == multi[k].
  const std::vector<std::array<std::uint32_t, 3>>& products() const noexcept { return products_; }

  /// shift(v)[k] is the index of multi[k] + e_v, for k of degree < order.
  const std::vector<std::uint32_t>& shift(int v) const { return shift_[static_cast<std::size_t>(v)]; }

private:
  void append_degree(MultiIndex& current, int var, int remaining) {
    if (var == nvars_ - 1) {
      current[var] = remaining;
      multi_.push_back(current);
      current[var] = 0;
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[var] = e;
      append_degree(current, var + 1, remaining - e);
    }
    current[var] = 0;
  }

  int nvars_;
  int order_;
  std::vector<MultiIndex> multi_;
  std::vector<std::size_t> degree_start_;
  std::map<MultiIndex, std::uint32_t> index_;
  std::vector<std::array<std::uint32_t, 3>> products_;
  std::vector<std::vector<std::uint32_t>> shift_;
};

using JetLayoutPtr = std::shared_ptr<const JetLayout>;

/// Shared, immutable layout for (nvars, order). Thread-safe.
inline JetLayoutPtr jet_layout(int nvars, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, JetLayoutPtr> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{nvars, order}];
  if (!slot) slot = std::make_shared<const JetLayout>(nvars, order);
  return slot;
}

class Jet {
public:
  /// A constant with no layout; combines with any jet.
  Jet(double value = 0.0) : c_{value} {}  // NOLINT(google-explicit-constructor)

  Jet(JetLayoutPtr layout, std::vector<double> coeffs) : layout_(std::move(layout)), c_(std::move(coeffs)) {
    if (c_.size() != layout_->size()) {
      throw DimensionError("jet coefficient count does not match its layout");
    }
  }

  static Jet constant(int nvars, int order, double value) {
    auto layout = jet_layout(nvars, order);
    std::vector<double> c(layout->size(), 0.0);
    c[0] = value;
    return Jet(std::move(layout), std::move(c));
  }

  /// The coordinate function `var` expanded around `value`.
  static Jet variable(int nvars, int order, int var, double value) {
    Jet j = constant(nvars, order, value);
    if (order >= 1) j.c_[1 + static_cast<std::size_t>(var)] = 1.0;
    return j;
  }

  bool is_constant() const noexcept { return layout_ == nullptr; }
  const JetLayoutPtr& layout() const noexcept { return layout_; }
  int nvars() const noexcept { return layout_ ? layout_->nvars() : 0; }
  /// Valid order; layoutless constants are exact to any order.
  int order() const noexcept { return layout_ ? layout_->order() : kExactOrder; }

  double value() const noexcept { return c_[0]; }
  const std::vector<double>& coeffs() const noexcept { return c_; }

  /// Polynomial coefficient of the monomial t^m (not scaled by factorials).
  double coeff(const MultiIndex& m) const {
    if (!layout_) {
      for (int e : m)
        if (e != 0) return 0.0;
      return c_[0];
    }
    const auto k = layout_->index_of(m);
    if (k < 0) throw JetOrderError(degree_of(m), order());
    return c_[static_cast<std::size_t>(k)];
  }

  /// First partial derivative with respect to variable `var` at the base point.
  double partial(int var) const {
    if (!layout_) return 0.0;
    if (layout_->order() < 1) throw JetOrderError(1, 0);
    return c_[1 + static_cast<std::size_t>(var)];
  }

  /// Mixed partial derivative d^m at the base point.
  double derivative(const MultiIndex& m) const {
    double fact = 1.0;
    for (int e : m)
      for (int i = 2; i <= e; ++i) fact *= i;
    return coeff(m) * fact;
  }

  Jet truncated(int order) const {
    if (!layout_ || order >= layout_->order()) return *this;
    if (order < 0) throw JetOrderError(0, order);
    auto layout = jet_layout(layout_->nvars(), order);
    std::vector<double> c(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(layout->size()));
    return Jet(std::move(layout), std::move(c));
  }

  Jet operator-() const {
    Jet r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }

  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator+(const Jet& a, const Jet& b) { return add(a, b, 1.0); }
  friend Jet operator-(const Jet& a, const Jet& b) { return add(a, b, -1.0); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    if (a.is_constant()) return scaled(b, a.c_[0]);
    if (b.is_constant()) return scaled(a, b.c_[0]);
    const auto& layout = common_layout(a, b);
    std::vector<double> c(layout->size(), 0.0);
    for (const auto& [i, j, k] : layout->products()) {
      c[k] += a.c_[i] * b.c_[j];
    }
    return Jet(layout, std::move(c));
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.is_constant()) return scaled(a, 1.0 / b.c_[0]);
    return a * reciprocal(b);
  }

  /// f(a) given d[k] = f^(k)(a0) / k!, k = 0..order.
  friend Jet compose(const Jet& a, std::span<const double> d) {
    if (a.is_constant()) return Jet(d[0]);
    const int m = a.order();
    Jet h = a;
    h.c_[0] = 0.0;
    Jet r = Jet::constant(a.nvars(), m, d[static_cast<std::size_t>(m)]);
    for (int k = m - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += d[static_cast<std::size_t>(k)];
    }
    return r;
  }

  friend Jet reciprocal(const Jet& a) {
    return a.apply([](double x0, int k) {
      return ((k % 2 == 0) ? 1.0 : -1.0) / std::pow(x0, k + 1);
    });
  }

  friend Jet sin(const Jet& a) {
    const double s = std::sin(a.value()), co = std::cos(a.value());
    return a.apply([s, co](double, int k) {
      const double cyc[4] = {s, co, -s, -co};
      return cyc[k % 4] / factorial(k);
    });
  }

  friend Jet cos(const Jet& a) {
    const double s = std::sin(a.value()), co = std::cos(a.value());
    return a.apply([s, co](double, int k) {
      const double cyc[4] = {co, -s, -co, s};
      return cyc[k % 4] / factorial(k);
    });
  }

  friend Jet exp(const Jet& a) {
    const double e = std::exp(a.value());
    return a.apply([e](double, int k) { return e / factorial(k); });
  }

  friend Jet log(const Jet& a) {
    return a.apply([](double x0, int k) {
      if (k == 0) return std::log(x0);
      return ((k % 2 == 1) ? 1.0 : -1.0) / (k * std::pow(x0, k));
    });
  }

  friend Jet pow(const Jet& a, double alpha) {
    return a.apply([alpha](double x0, int k) {
      double binom = 1.0;
      for (int i = 0; i < k; ++i) binom *= (alpha - i) / (i + 1);
      return binom * std::pow(x0, alpha - k);
    });
  }

  friend Jet sqrt(const Jet& a) { return pow(a, 0.5); }

  friend Jet tanh(const Jet& a) {
    const Jet e = exp(2.0 * a);
    return (e - 1.0) / (e + 1.0);
  }

  /// d/d(var) of the polynomial; the result is one order lower.
  friend Jet partial_derivative(const Jet& a, int var) {
    if (a.is_constant()) return Jet(0.0);
    const auto& src = *a.layout_;
    if (var < 0 || var >= src.nvars()) throw DimensionError("partial derivative variable out of range");
    if (src.order() < 1) throw JetOrderError(1, 0);
    auto layout = jet_layout(src.nvars(), src.order() - 1);
    std::vector<double> c(layout->size());
    const auto& up = src.shift(var);
    for (std::size_t k = 0; k < c.size(); ++k) {
      c[k] = (src.multi_index(k)[static_cast<std::size_t>(var)] + 1) * a.c_[up[k]];
    }
    return Jet(std::move(layout), std::move(c));
  }

  friend std::ostream& operator<<(std::ostream& os, const Jet& a) {
    os << "Jet(" << a.value();
    if (a.layout_) os << "; n=" << a.nvars() << ", order=" << a.order();
    return os << ')';
  }

  static constexpr int kExactOrder = 1 << 20;

private:
  static double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  }

  static int degree_of(const MultiIndex& m) {
    int d = 0;
    for (int e : m) d += e;
    return d;
  }

  template <class Coefficient>
  Jet apply(Coefficient coefficient) const {
    const int m = is_constant() ? 0 : order();
    std::vector<double> d(static_cast<std::size_t>(m) + 1);
    for (int k = 0; k <= m; ++k) d[static_cast<std::size_t>(k)] = coefficient(value(), k);
    return compose(*this, d);
  }

  static const JetLayoutPtr& common_layout(const Jet& a, const Jet& b) {
    if (a.layout_->nvars() != b.layout_->nvars()) {
      throw DimensionError("jets over different variable sets");
    }
    return a.layout_->order() <= b.layout_->order() ? a.layout_ : b.layout_;
  }

  static Jet scaled(const Jet& a, double s) {
    Jet r = a;
    for (auto& x : r.c_) x *= s;
    return r;
  }

  static Jet add(const Jet& a, const Jet& b, double sign) {
    if (b.is_constant()) {
      Jet r = a;
      r.c_[0] += sign * b.c_[0];
      return r;
    }
    if (a.is_constant()) {
      Jet r = scaled(b, sign);
      r.c_[0] += a.c_[0];
      return r;
    }
    const auto& layout = common_layout(a, b);
    std::vector<double> c(layout->size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = a.c_[k] + sign * b.c_[k];
    return Jet(layout, std::move(c));
  }

  JetLayoutPtr layout_;
  std::vector<double> c_;
};

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Jet& x) noexcept { return x.value(); }

/// Re-expresses `a` over a larger layout, mapping its variable i to `offset + i`.
inline Jet embed(const Jet& a, const JetLayoutPtr& target, int offset = 0) {
  std::vector<double> c(target->size(), 0.0);
  if (a.is_constant()) {
    c[0] = a.value();
    return Jet(target, std::move(c));
  }
  const auto& src = *a.layout();
  if (offset < 0 || offset + src.nvars() > target->nvars()) {
    throw DimensionError("jet embedding does not fit the target layout");
  }
  MultiIndex m(static_cast<std::size_t>(target->nvars()), 0);
  for (std::size_t k = 0; k < src.size(); ++k) {
    std::fill(m.begin(), m.end(), 0);
    const auto& sm = src.multi_index(k);
    for (int v = 0; v < src.nvars(); ++v) m[static_cast<std::size_t>(offset + v)] = sm[static_cast<std::size_t>(v)];
    const auto idx = target->index_of(m);
    if (idx >= 0) c[static_cast<std::size_t>(idx)] = a.coeffs()[k];
  }
  return Jet(target, std::move(c));
}

}  // namespace sdpass
