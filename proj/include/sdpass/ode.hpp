#pragma once

// Adaptive Dormand-Prince 5(4) integrator, generic over the scalar type.
//
// With T = Jet the integrator carries derivatives with respect to whatever
// the initial jets depend on (typically the held input u). Step sizes are
// chosen from the value parts only, so the jet part is the exact derivative
// of the discrete map actually computed.

#include <algorithm>
#include <initializer_list>
#include <utility>
#include <cmath>
#include <limits>
#include <cstddef>
#include <string>
#include <vector>

#include "sdpass/errors.hpp"
#include "sdpass/jet.hpp"

namespace sdpass {

struct OdeOptions {
  double rtol = 1e-12;
  double atol = 1e-12;
  /// Steps shorter than this fraction of the interval count as underflow.
  double min_step_fraction = 1e-12;
  long max_steps = 2'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

namespace detail {

// Dormand & Prince (1980) coefficients.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - bhat, bhat being the embedded 4th-order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

template <class T>
std::vector<T> axpy(const std::vector<T>& y, double h, std::initializer_list<std::pair<double, const std::vector<T>*>> terms) {
  std::vector<T> out = y;
  for (std::size_t i = 0; i < out.size(); ++i) {
    T acc(0.0);
    for (const auto& [a, k] : terms) {
      if (a != 0.0) acc = acc + a * (*k)[i];
    }
    out[i] = out[i] + h * acc;
  }
  return out;
}

template <class T>
double scaled_norm(const std::vector<T>& v, const std::vector<T>& y, double rtol, double atol) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double sc = atol + rtol * std::abs(value_of(y[i]));
    m = std::max(m, std::abs(value_of(v[i])) / sc);
  }
  return m;
}

inline std::vector<double> values(const std::vector<double>& y) { return y; }
inline std::vector<double> values(const std::vector<Jet>& y) {
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& e : y) out.push_back(e.value());
  return out;
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t1 (t1 > t0) and returns y(t1).
template <class T, class Rhs>
std::vector<T> integrate(Rhs&& rhs, std::vector<T> y, double t0, double t1, const OdeOptions& opt = {},
                         OdeStats* stats = nullptr) {
  using C = detail::Dopri5;
  if (!(t1 > t0)) {
    if (t1 == t0) return y;
    throw IntegratorError("integration interval must be increasing", t0, detail::values(y));
  }
  const double span = t1 - t0;
  const double min_step = span * opt.min_step_fraction;

  std::vector<T> k1 = rhs(t0, y);
  double h;
  {
    const double d0 = detail::scaled_norm(y, y, opt.rtol, opt.atol);
    const double d1 = detail::scaled_norm(k1, y, opt.rtol, opt.atol);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h = std::min(h, span);
  }

  double t = t0;
  long steps = 0;
  OdeStats local;
  while (t < t1) {
    if (++steps > opt.max_steps) {
      throw IntegratorError("integrator exceeded the maximum step count", t, detail::values(y));
    }
    bool last = false;
    if (t + h >= t1 || t1 - (t + h) < min_step) {
      h = t1 - t;
      last = true;
    }
    const auto k2 = rhs(t + C::c2 * h, detail::axpy(y, h, {{C::a21, &k1}}));
    const auto k3 = rhs(t + C::c3 * h, detail::axpy(y, h, {{C::a31, &k1}, {C::a32, &k2}}));
    const auto k4 = rhs(t + C::c4 * h, detail::axpy(y, h, {{C::a41, &k1}, {C::a42, &k2}, {C::a43, &k3}}));
    const auto k5 = rhs(t + C::c5 * h,
                        detail::axpy(y, h, {{C::a51, &k1}, {C::a52, &k2}, {C::a53, &k3}, {C::a54, &k4}}));
    const auto k6 = rhs(t + h, detail::axpy(y, h, {{C::a61, &k1}, {C::a62, &k2}, {C::a63, &k3},
                                                   {C::a64, &k4}, {C::a65, &k5}}));
    auto ynew = detail::axpy(y, h, {{C::b1, &k1}, {C::b3, &k3}, {C::b4, &k4}, {C::b5, &k5}, {C::b6, &k6}});
    const auto k7 = rhs(t + h, ynew);

    double err = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!std::isfinite(value_of(ynew[i]))) err = std::numeric_limits<double>::infinity();
      const double e = h * (C::e1 * value_of(k1[i]) + C::e3 * value_of(k3[i]) + C::e4 * value_of(k4[i]) +
                            C::e5 * value_of(k5[i]) + C::e6 * value_of(k6[i]) + C::e7 * value_of(k7[i]));
      const double sc =
          opt.atol + opt.rtol * std::max(std::abs(value_of(y[i])), std::abs(value_of(ynew[i])));
      err = std::max(err, std::abs(e) / sc);
    }
    if (!std::isfinite(err)) {
      // Overflow in the trial step: retry smaller; a true blow-up ends in underflow.
      ++local.rejected;
      h *= 0.2;
      if (h < min_step) {
        throw IntegratorError("non-finite state during integration (finite-time blow-up?)", t, detail::values(y));
      }
      continue;
    }

    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    if (err <= 1.0) {
      t = last ? t1 : t + h;
      y = std::move(ynew);
      k1 = k7;
      ++local.accepted;
      h *= factor;
    } else {
      ++local.rejected;
      h *= std::min(1.0, factor);
      if (h < min_step) {
        throw IntegratorError("integrator step size underflow", t, detail::values(y));
      }
    }
  }
  if (stats != nullptr) {
    stats->accepted += local.accepted;
    stats->rejected += local.rejected;
  }
  return y;
}

}  // namespace sdpass
