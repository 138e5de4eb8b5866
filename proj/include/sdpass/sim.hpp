#pragma once

// Closed-loop simulation: sampled-data loop with exact intersample plant
// integration, the continuous-time reference, the gravity pendulum design,
// and the storage RMSE between the two.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdpass/disgrad.hpp"
#include "sdpass/errors.hpp"
#include "sdpass/field.hpp"
#include "sdpass/passivation.hpp"
#include "sdpass/pch.hpp"
#include "sdpass/sdmodel.hpp"

namespace sdpass {

/// Damped gravity pendulum x = (q, p) with torque input, stabilized at (q_star, 0).
struct PendulumModel {
  double r = 0.4;
  double qstar = 0.0;
  ControlAffineSystem system;
  PortHamiltonianSystem pch;
  StorageDesign design;
  IdaClosedLoop closed_loop;
};

/// Closed-form discrete gradient of H_d = p^2/2 + 1 - cos(q - q_star).
inline Point pendulum_discrete_gradient(double qstar, const Point& nu, const Point& mu) {
  const double a = mu[0] - qstar;
  const double b = nu[0] - qstar;
  const double half = 0.5 * (a - b);
  // -(cos a - cos b)/(a - b) = sin((a + b)/2) * sin(half)/half
  const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
  Point g(2);
  g << std::sin(0.5 * (a + b)) * sinc, 0.5 * (mu[1] + nu[1]);
  return g;
}

inline PendulumModel pendulum_design(double r, double qstar) {
  if (!(r > 0.0)) throw std::invalid_argument("pendulum damping r must be positive");
  PendulumModel m;
  m.r = r;
  m.qstar = qstar;
  VectorField f(2, [r](auto x) {
    using std::sin;
    using T = std::decay_t<decltype(x[0])>;
    return std::vector<T>{x[1], -sin(x[0]) - r * x[1]};
  });
  VectorField g(2, [](auto x) {
    using T = std::decay_t<decltype(x[0])>;
    return std::vector<T>{T(0.0), T(1.0)};
  });
  m.system = ControlAffineSystem(f, g);

  ScalarField H(2, [](auto x) {
    using std::cos;
    return 0.5 * x[1] * x[1] + (1.0 - cos(x[0]));
  });
  ScalarField Hd(2, [qstar](auto x) {
    using std::cos;
    return 0.5 * x[1] * x[1] + (1.0 - cos(x[0] - qstar));
  });
  ScalarField gamma(2, [qstar](auto x) {
    using std::sin;
    return sin(x[0]) - sin(x[0] - qstar);
  });
  Matrix J(2, 2), R(2, 2);
  J << 0, 1, -1, 0;
  R << 0, 0, 0, r;
  m.pch = PortHamiltonianSystem(MatrixField::constant(J), MatrixField::constant(R), H, g);
  m.closed_loop = ida_closed_loop(MatrixField::constant(J), MatrixField::constant(R), Hd, g);

  Point xstar(2);
  xstar << qstar, 0.0;
  auto dg = DiscreteGradient::closed_form(
      Hd, [qstar](const Point& nu, const Point& mu) { return pendulum_discrete_gradient(qstar, nu, mu); });
  m.design = StorageDesign(m.system, Hd, gamma, xstar, dg);
  return m;
}

struct ExperimentConfig {
  double delta = 1.0;
  double horizon = 20.0;
  ControllerOrder order = ControllerOrder::series(1);
  double kappa = 0.0;
  double r = 0.4;
  double qstar = std::numbers::pi / 2;
  Point x0 = Point::Zero(2);
  std::string output;
  /// Points per sampling interval recorded for plotting; 0 or 1 disables.
  int intersample_density = 10;
  /// Record the per-interval storage matching error (one extra flow integration per step).
  bool record_residuals = true;

  void validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be > 0");
    if (!(horizon >= delta)) throw std::invalid_argument("horizon T must be >= delta");
    if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
    if (!(r > 0.0)) throw std::invalid_argument("r must be > 0");
    if (intersample_density < 0) throw std::invalid_argument("intersample density must be >= 0");
    if (!x0.allFinite()) throw std::invalid_argument("x0 must be finite");
  }

  /// Number of sampling intervals in the horizon.
  int steps() const {
    const double k = horizon / delta;
    const double kr = std::round(k);
    return static_cast<int>(std::abs(k - kr) < 1e-9 * std::max(1.0, k) ? kr : std::floor(k));
  }
};

struct TraceMeta {
  double delta = 0.0;
  std::string order;
  double kappa = 0.0;
  double r = 0.0;
  Point x0;
  Point xstar;
};

/// Closed-loop run sampled at t_k = k delta. inputs[k] and residuals[k] belong to
/// the interval [t_k, t_{k+1}), so they hold one entry fewer than states.
struct Trace {
  std::vector<double> times;
  std::vector<Point> states;
  std::vector<double> inputs;
  std::vector<double> storage;
  std::vector<double> residuals;
  TraceMeta meta;
  std::vector<double> dense_times;
  std::vector<Point> dense_states;

  std::size_t size() const noexcept { return times.size(); }
};

namespace detail {

inline void record_dense(Trace& tr, const SampledMap& exact, const Point& x, double t, double u, int density) {
  tr.dense_times.push_back(t);
  tr.dense_states.push_back(x);
  for (int j = 1; j < density; ++j) {
    const double s = exact.delta() * j / density;
    tr.dense_times.push_back(t + s);
    tr.dense_states.push_back(exact.with_delta(s)(x, u));
  }
}

}  // namespace detail

/// Sampled-data closed loop: u_k = ctrl(x_k) held over [k delta, (k+1) delta),
/// plant integrated exactly in between.
inline Trace simulate_sampled(const ExperimentConfig& cfg, const SampledController& ctrl) {
  cfg.validate();
  const StorageDesign& d = ctrl.design();
  const SampledMap& exact = ctrl.exact_map();
  const int K = cfg.steps();
  const int density = cfg.intersample_density > 1 ? cfg.intersample_density : 0;
  Trace tr;
  tr.meta = {ctrl.delta(), ctrl.order().str(), ctrl.kappa(), cfg.r, cfg.x0, d.equilibrium()};
  Point x = cfg.x0;
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  tr.storage.push_back(d.storage()(x));
  for (int k = 0; k < K; ++k) {
    const double u = ctrl(x);
    if (!std::isfinite(u)) throw Error("controller returned a non-finite input at step " + std::to_string(k));
    if (density > 0) detail::record_dense(tr, exact, x, k * ctrl.delta(), u, density);
    const Point next = exact(x, u);
    tr.inputs.push_back(u);
    if (cfg.record_residuals) {
      tr.residuals.push_back(d.storage()(next) - d.storage()(x) - isdm_rhs(d, ctrl.delta(), x, exact.ode_options()));
    }
    x = next;
    tr.times.push_back((k + 1) * ctrl.delta());
    tr.states.push_back(x);
    tr.storage.push_back(d.storage()(x));
  }
  if (density > 0) {
    tr.dense_times.push_back(tr.times.back());
    tr.dense_states.push_back(x);
  }
  return tr;
}

/// Continuous closed loop x' = f_d + g v with v = -kappa h_d, on the sampling grid of cfg.
inline Trace simulate_continuous(const ExperimentConfig& cfg, const StorageDesign& d, const OdeOptions& ode = {}) {
  cfg.validate();
  const int K = cfg.steps();
  const int density = cfg.intersample_density > 1 ? cfg.intersample_density : 0;
  Trace tr;
  tr.meta = {cfg.delta, "continuous", cfg.kappa, cfg.r, cfg.x0, d.equilibrium()};
  Point x = cfg.x0;
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  tr.storage.push_back(d.storage()(x));
  for (int k = 0; k < K; ++k) {
    tr.inputs.push_back(d.feedback()(x) - cfg.kappa * d.output()(x));
    if (density > 0) {
      for (int j = 0; j < density; ++j) {
        const double s = cfg.delta * j / density;
        tr.dense_times.push_back(k * cfg.delta + s);
        tr.dense_states.push_back(j == 0 ? x : closed_loop_flow(d, s, x, cfg.kappa, ode));
      }
    }
    x = closed_loop_flow(d, cfg.delta, x, cfg.kappa, ode);
    if (cfg.record_residuals) tr.residuals.push_back(0.0);
    tr.times.push_back((k + 1) * cfg.delta);
    tr.states.push_back(x);
    tr.storage.push_back(d.storage()(x));
  }
  if (density > 0) {
    tr.dense_times.push_back(tr.times.back());
    tr.dense_states.push_back(x);
  }
  return tr;
}

/// sqrt(mean_k (H_d(x_k^sd) - H_d(x_k^ct))^2) over the shared sampling instants.
inline double storage_rmse(const Trace& sampled, const Trace& reference, const ScalarField& Hd) {
  if (sampled.size() != reference.size() || sampled.size() == 0) {
    throw DimensionError("storage RMSE: traces do not share a sampling grid");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < sampled.size(); ++k) {
    if (std::abs(sampled.times[k] - reference.times[k]) > 1e-9 * std::max(1.0, std::abs(sampled.times[k]))) {
      throw DimensionError("storage RMSE: traces do not share a sampling grid");
    }
    const double e = Hd(sampled.states[k]) - Hd(reference.states[k]);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(sampled.size()));
}

struct SweepRow {
  double delta = 0.0;
  std::string order;
  double rmse = 0.0;
};

/// RMSE of H_d between each sampled controller order and the undamped (v = 0)
/// continuous loop, for every delta. Rows ordered by delta, then by order.
/// Runs up to `jobs` deltas concurrently; output order does not depend on it.
inline std::vector<SweepRow> sweep_rmse(const ExperimentConfig& base, const std::vector<double>& deltas,
                                        const std::vector<ControllerOrder>& orders, int jobs = 1) {
  const PendulumModel model = pendulum_design(base.r, base.qstar);
  auto run_one = [&](double delta) {
    ExperimentConfig cfg = base;
    cfg.delta = delta;
    cfg.kappa = 0.0;
    cfg.intersample_density = 0;
    cfg.record_residuals = false;
    const Trace ref = simulate_continuous(cfg, model.design);
    std::vector<SweepRow> rows;
    for (const auto& order : orders) {
      const SampledController ctrl(model.design, delta, order, {0.0});
      const Trace tr = simulate_sampled(cfg, ctrl);
      rows.push_back({delta, order.str(), storage_rmse(tr, ref, model.design.storage())});
    }
    return rows;
  };
  std::vector<std::vector<SweepRow>> results(deltas.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < deltas.size(); start += width) {
    std::vector<std::future<std::vector<SweepRow>>> batch;
    const std::size_t end = std::min(deltas.size(), start + width);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, run_one, deltas[i]));
    }
    for (std::size_t i = start; i < end; ++i) results[i] = batch[i - start].get();
  }
  std::vector<SweepRow> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

/// start:step:stop inclusive, tolerant to rounding at the upper end.
inline std::vector<double> parse_grid(const std::string& spec) {
  double a, s, b;
  char c1, c2;
  std::istringstream is(spec);
  if (!(is >> a >> c1 >> s >> c2 >> b) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof()) {
    throw std::invalid_argument("grid must be start:step:stop, got '" + spec + "'");
  }
  if (!(s > 0.0) || !(a > 0.0) || b < a) throw std::invalid_argument("grid needs 0 < start <= stop and step > 0");
  std::vector<double> out;
  const long n = static_cast<long>(std::floor((b - a) / s + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * s);
  return out;
}

// CSV.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trace_csv_header(int n) {
  if (n == 2) return "t,q,p,u,Hd,S_residual";
  std::string h = "t";
  for (int i = 0; i < n; ++i) h += ",x" + std::to_string(i);
  return h + ",u,Hd,S_residual";
}

/// One row per sampling instant; u and S_residual are NaN on the final row.
inline void write_trace_csv(std::ostream& os, const Trace& tr) {
  const int n = tr.states.empty() ? 2 : static_cast<int>(tr.states.front().size());
  os << trace_csv_header(n) << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << format_double(tr.times[k]);
    for (int i = 0; i < n; ++i) os << ',' << format_double(tr.states[k][i]);
    os << ',' << format_double(k < tr.inputs.size() ? tr.inputs[k] : nan);
    os << ',' << format_double(tr.storage[k]);
    os << ',' << format_double(k < tr.residuals.size() ? tr.residuals[k] : nan) << '\n';
  }
}

inline void write_dense_csv(std::ostream& os, const Trace& tr) {
  const int n = tr.dense_states.empty() ? 2 : static_cast<int>(tr.dense_states.front().size());
  os << (n == 2 ? std::string("t,q,p") : trace_csv_header(n).substr(0, trace_csv_header(n).find(",u"))) << '\n';
  for (std::size_t k = 0; k < tr.dense_times.size(); ++k) {
    os << format_double(tr.dense_times[k]);
    for (int i = 0; i < n; ++i) os << ',' << format_double(tr.dense_states[k][i]);
    os << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != t.header.size()) throw std::runtime_error("CSV row width does not match header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace sdpass
