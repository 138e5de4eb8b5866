#pragma once

// Gauss-Legendre quadrature and a safeguarded scalar Newton solver.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sdpass/errors.hpp"

namespace sdpass {

struct QuadratureRule {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// n-point Gauss-Legendre rule mapped to [0, 1]. Cached; thread-safe.
inline const QuadratureRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (slot) return *slot;
  if (n < 1) throw DimensionError("quadrature needs at least one node");
  auto rule = std::make_unique<QuadratureRule>();
  rule->nodes.resize(static_cast<std::size_t>(n));
  rule->weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? x : p1;
      const double pnm1 = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pnm1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule->nodes[lo] = 0.5 * (1.0 - x);
    rule->nodes[hi] = 0.5 * (1.0 + x);
    rule->weights[lo] = rule->weights[hi] = 0.5 * w;
  }
  slot = std::move(rule);
  return *slot;
}

struct NewtonOptions {
  double tolerance = 1e-12;
  int max_iterations = 50;
  /// Initial half-width of the fallback bracket around the seed.
  double bracket_half_width = 0.5;
  double bracket_growth = 2.0;
  int max_bracket_expansions = 30;
};

struct NewtonResult {
  double root = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool bracketed = false;
};

/// Solves r(u) = 0 for a scalar u. `fn(u)` returns {r(u), r'(u)}.
///
/// Plain Newton from the seed first; if a step fails to decrease |r| the
/// solver expands a bracket [seed - w, seed + w] geometrically until r
/// changes sign and finishes with Newton steps kept inside the bracket
/// (bisection when a step leaves it).
inline NewtonResult safeguarded_newton(const std::function<std::pair<double, double>(double)>& fn, double seed,
                                       const NewtonOptions& opt = {}, const std::string& what = "newton") {
  NewtonResult best{seed, std::numeric_limits<double>::infinity(), 0, false};
  auto consider = [&best](double u, double r) {
    if (std::abs(r) < std::abs(best.residual)) {
      best.root = u;
      best.residual = r;
    }
  };

  double u = seed;
  auto [r, dr] = fn(u);
  const double r_seed = r;
  consider(u, r);
  int it = 0;
  while (it < opt.max_iterations && std::isfinite(r) && std::abs(r) > opt.tolerance) {
    if (!(std::isfinite(dr)) || dr == 0.0) break;
    const double next = u - r / dr;
    auto [rn, drn] = fn(next);
    ++it;
    if (!std::isfinite(rn) || std::abs(rn) >= std::abs(r)) break;
    u = next;
    r = rn;
    dr = drn;
    consider(u, r);
  }
  if (std::abs(best.residual) <= opt.tolerance) {
    best.iterations = it;
    return best;
  }

  // Bracketing phase. Every evaluated point takes part, so a pair of roots
  // straddling the seed is found even when both bracket ends share a sign.
  std::vector<std::pair<double, double>> samples{{seed, r_seed}};
  if (best.root != seed) samples.emplace_back(best.root, best.residual);
  double w = opt.bracket_half_width;
  double lo = seed, hi = seed, rlo = 0.0, rhi = 0.0;
  auto find_sign_change = [&]() {
    std::sort(samples.begin(), samples.end());
    bool found = false;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      const auto [a, ra] = samples[i];
      const auto [b, rb] = samples[i + 1];
      if (!std::isfinite(ra) || !std::isfinite(rb) || ra * rb > 0.0) continue;
      const double dseed = std::max(0.0, std::max(a - seed, seed - b));
      if (dseed < dist) {
        dist = dseed;
        lo = a, rlo = ra, hi = b, rhi = rb;
        found = true;
      }
    }
    return found;
  };
  int expansions = 0;
  for (;;) {
    for (double e : {seed - w, seed + w}) {
      const double r = fn(e).first;
      consider(e, r);
      samples.emplace_back(e, r);
    }
    if (find_sign_change()) break;
    if (++expansions > opt.max_bracket_expansions) {
      throw ConvergenceError(what + ": no sign change found around the seed", best.root, best.residual);
    }
    w *= opt.bracket_growth;
  }
  if (std::abs(best.residual) <= opt.tolerance) {
    best.iterations = it;
    best.bracketed = true;
    return best;
  }

  u = (best.root >= lo && best.root <= hi) ? best.root : 0.5 * (lo + hi);
  std::tie(r, dr) = fn(u);
  for (int k = 0; k < opt.max_iterations; ++k, ++it) {
    consider(u, r);
    if (std::abs(r) <= opt.tolerance) break;
    if ((r < 0.0) == (rlo < 0.0)) {
      lo = u;
      rlo = r;
    } else {
      hi = u;
      rhi = r;
    }
    double next = (std::isfinite(dr) && dr != 0.0) ? u - r / dr : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == u) break;
    u = next;
    std::tie(r, dr) = fn(u);
  }
  consider(u, r);
  best.iterations = it;
  best.bracketed = true;
  if (!(std::abs(best.residual) <= opt.tolerance)) {
    throw ConvergenceError(what + ": residual tolerance not met", best.root, best.residual);
  }
  return best;
}

/// Least-squares slope of log|err| against log h. Used for empirical orders of accuracy.
inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw DimensionError("slope fit needs >= 2 matching samples");
  const double n = static_cast<double>(h.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    mx += std::log(h[i]) / n;
    my += std::log(std::abs(err[i])) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double dx = std::log(h[i]) - mx;
    sxy += dx * (std::log(std::abs(err[i])) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace sdpass
