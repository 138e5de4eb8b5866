// sdpass: command-line driver for sampled-data feedback passivation of the
// damped pendulum.
//
//   sdpass simulate  --delta 1 --kappa 0.1 --order 1 --T 20 --out run1/
//   sdpass sweep     --grid 0.05:0.05:1.5 --orders 0,1 --jobs 4
//   sdpass verify    [--only secant,order] [--inject-fault]
//   sdpass pch-check --delta 0.2 --x0 0.3,-0.1
//
// Exit codes: 0 success, 1 a verified property failed, 2 bad flags,
// 3 solver or integrator failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdpass/sdpass.hpp"

namespace {

enum Exit : int { kOk = 0, kPropertyFailed = 1, kBadFlags = 2, kSolverFailed = 3 };

struct Settings {
  double delta = 0.0;
  double kappa = 0.0;
  double r = 0.4;
  double qstar = std::numbers::pi / 2;
  std::string x0 = "0,0";
  std::string order = "1";
  double horizon = 20.0;
  std::string out;
  int jobs = 1;
  std::string grid = "0.05:0.05:1.5";
  std::vector<std::string> orders{"0", "1"};
  std::vector<std::string> only;
  bool inject_fault = false;
  int density = 10;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// "q,p" -> point; throws std::invalid_argument.
sdpass::Point parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    const std::string c = trim(cell);
    const double x = std::stod(c, &used);
    if (used != c.size() || !std::isfinite(x)) throw std::invalid_argument("bad number '" + c + "'");
    v.push_back(x);
  }
  if (v.size() != 2) throw std::invalid_argument("expected two comma-separated values q,p");
  sdpass::Point p(2);
  p << v[0], v[1];
  return p;
}

std::string check_point(const std::string& s) {
  try {
    parse_point(s);
    return {};
  } catch (const std::exception& e) {
    return "--x0: " + std::string(e.what());
  }
}

// key=value lines, '#' comments. Keys are long flag names without dashes.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot read '" + path + "'");
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--config", path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

std::string fmt(double v) { return sdpass::format_double(v); }

void write_file(const std::filesystem::path& path, const std::string& what,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot write " + what + " to '" + path.string() + "'");
  body(os);
}

int run_simulate(const Settings& s) {
  const auto model = sdpass::pendulum_design(s.r, s.qstar);
  sdpass::ExperimentConfig cfg;
  cfg.delta = s.delta;
  cfg.horizon = s.horizon;
  cfg.order = sdpass::ControllerOrder::parse(s.order);
  cfg.kappa = s.kappa;
  cfg.r = s.r;
  cfg.qstar = s.qstar;
  cfg.x0 = parse_point(s.x0);
  cfg.output = s.out;
  cfg.intersample_density = s.density;
  cfg.validate();

  const sdpass::SampledController ctrl(model.design, cfg.delta, cfg.order, {cfg.kappa});
  const auto sampled = sdpass::simulate_sampled(cfg, ctrl);
  const auto continuous = sdpass::simulate_continuous(cfg, model.design);

  const std::filesystem::path dir = s.out.empty() ? "." : s.out;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create output directory '" + dir.string() + "'");
  write_file(dir / "sampled.csv", "sampled trace", [&](auto& os) { sdpass::write_trace_csv(os, sampled); });
  write_file(dir / "continuous.csv", "continuous trace", [&](auto& os) { sdpass::write_trace_csv(os, continuous); });
  if (cfg.intersample_density > 1) {
    write_file(dir / "sampled_dense.csv", "dense trace", [&](auto& os) { sdpass::write_dense_csv(os, sampled); });
    write_file(dir / "continuous_dense.csv", "dense trace",
               [&](auto& os) { sdpass::write_dense_csv(os, continuous); });
  }

  const auto& xstar = model.design.equilibrium();
  std::ostringstream line;
  line << "order=" << cfg.order.str() << " delta=" << fmt(cfg.delta) << " kappa=" << fmt(cfg.kappa)
       << " steps=" << cfg.steps() << " final_error=" << fmt((sampled.states.back() - xstar).norm())
       << " final_Hd=" << fmt(sampled.storage.back())
       << " continuous_final_error=" << fmt((continuous.states.back() - xstar).norm())
       << " continuous_final_Hd=" << fmt(continuous.storage.back());
  write_file(dir / "summary.txt", "summary", [&](auto& os) { os << line.str() << '\n'; });
  std::cout << line.str() << '\n';
  return kOk;
}

int run_sweep(const Settings& s) {
  sdpass::ExperimentConfig base;
  base.horizon = s.horizon;
  base.r = s.r;
  base.qstar = s.qstar;
  base.x0 = parse_point(s.x0);
  std::vector<sdpass::ControllerOrder> orders;
  for (const auto& o : s.orders) orders.push_back(sdpass::ControllerOrder::parse(o));
  const auto deltas = sdpass::parse_grid(s.grid);
  for (double d : deltas) {
    if (d > s.horizon) throw std::invalid_argument("grid value " + fmt(d) + " exceeds the horizon T");
  }
  const auto rows = sdpass::sweep_rmse(base, deltas, orders, s.jobs);

  auto emit = [&rows](std::ostream& os) {
    os << "delta,p,rmse\n";
    for (const auto& r : rows) os << fmt(r.delta) << ',' << r.order << ',' << fmt(r.rmse) << '\n';
  };
  if (s.out.empty()) {
    emit(std::cout);
  } else {
    std::error_code ec;
    std::filesystem::create_directories(s.out, ec);
    if (ec) throw std::invalid_argument("cannot create output directory '" + s.out + "'");
    write_file(std::filesystem::path(s.out) / "sweep.csv", "sweep table", emit);
    std::cout << "sweep: " << rows.size() << " rows -> " << (std::filesystem::path(s.out) / "sweep.csv").string()
              << '\n';
  }
  return kOk;
}

int run_verify(const Settings& s) {
  sdpass::VerifyOptions opt;
  opt.r = s.r;
  opt.qstar = s.qstar;
  opt.only = s.only;
  if (s.inject_fault) opt.first_correction_sign = -1.0;
  const auto rep = sdpass::run_verification(opt);
  int passed = 0;
  for (const auto& p : rep.properties) {
    passed += p.passed ? 1 : 0;
    std::cout << (p.passed ? "PASS " : "FAIL ") << p.suite << ": " << p.name << " measured=" << fmt(p.measured)
              << " target=" << fmt(p.limit);
    if (!p.detail.empty()) std::cout << " (" << p.detail << ')';
    std::cout << '\n';
  }
  std::cout << "verify: " << passed << '/' << rep.properties.size() << " properties passed\n";
  if (!rep.passed()) {
    for (const auto& p : rep.properties) {
      if (!p.passed) std::cerr << "sdpass verify: property failed: " << p.suite << ": " << p.name << '\n';
    }
    return kPropertyFailed;
  }
  return kOk;
}

void print_matrix(const char* name, const sdpass::Matrix& m) {
  std::cout << name << " =";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::cout << (i == 0 ? " [" : "; ");
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::cout << (j ? " " : "") << fmt(m(i, j));
  }
  std::cout << "]\n";
}

int run_pch_check(const Settings& s) {
  const auto model = sdpass::pendulum_design(s.r, s.qstar);
  const auto x = parse_point(s.x0);
  const auto st = sdpass::sampled_pch_structure(model.closed_loop, s.delta, x);
  const auto dg = sdpass::DiscreteGradient::quadrature(model.closed_loop.H);

  const double skew = (st.J + st.J.transpose()).cwiseAbs().maxCoeff();
  const double sym = (st.R - st.R.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<sdpass::Matrix> es(st.R);
  const double min_eig = es.eigenvalues().minCoeff();
  const sdpass::Matrix continuous = model.closed_loop.structure_matrix(x);

  print_matrix("M", st.M);
  print_matrix("J", st.J);
  print_matrix("R", st.R);
  std::cout << "F2 = [" << fmt(st.F2[0]) << ' ' << fmt(st.F2[1]) << "]\n"
            << "condition = " << fmt(st.condition) << '\n'
            << "skew_defect = " << fmt(skew) << '\n'
            << "symmetry_defect = " << fmt(sym) << '\n'
            << "min_eig_R = " << fmt(min_eig) << '\n'
            << "residual = " << fmt(sdpass::pch_residual(model.closed_loop, s.delta, x, dg)) << '\n'
            << "flow_residual = " << fmt(sdpass::pch_flow_residual(model.closed_loop, s.delta, x, dg)) << '\n'
            << "deviation_from_continuous_M = " << fmt((st.M - continuous).cwiseAbs().maxCoeff()) << '\n';

  bool ok = skew <= 1e-12 && sym <= 1e-12;
  if (s.delta <= 0.5) ok = ok && min_eig >= -1e-10;
  if (!ok) {
    std::cerr << "sdpass pch-check: structure property failed at delta=" << fmt(s.delta) << '\n';
    return kPropertyFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-data feedback passivation of the damped pendulum", "sdpass"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; flags override it")->check(CLI::ExistingFile);

  Settings s;
  auto physical = [&s](CLI::App* sub) {
    sub->add_option("--r", s.r, "pendulum damping r")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--qstar", s.qstar, "target angle q*")->capture_default_str();
  };
  auto initial = [&s](CLI::App* sub) {
    sub->add_option("--x0", s.x0, "initial state q,p")->check(check_point)->capture_default_str();
  };

  auto* sim = app.add_subcommand("simulate", "sampled and continuous closed loops; CSV traces + summary");
  sim->add_option("--delta", s.delta, "sampling period")->required()->check(CLI::PositiveNumber);
  sim->add_option("--kappa", s.kappa, "damping gain")->check(CLI::NonNegativeNumber)->capture_default_str();
  physical(sim);
  initial(sim);
  sim->add_option("--order", s.order, "controller order")
      ->check(CLI::IsMember({"0", "1", "2", "exact"}))
      ->capture_default_str();
  sim->add_option("--T", s.horizon, "horizon")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--out", s.out, "output directory (default: current)");
  sim->add_option("--density", s.density, "intersample points per period in the dense CSVs (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "storage RMSE against the continuous loop over a delta grid");
  sweep->add_option("--grid", s.grid, "start:step:stop")->capture_default_str();
  sweep->add_option("--orders", s.orders, "comma-separated orders")
      ->delimiter(',')
      ->check(CLI::IsMember({"0", "1", "2", "exact"}))
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  physical(sweep);
  initial(sweep);
  sweep->add_option("--T", s.horizon, "horizon")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--out", s.out, "output directory for sweep.csv (default: stdout)");
  sweep->add_option("--jobs", s.jobs, "concurrent deltas")
      ->envname("SDPASS_JOBS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* verify = app.add_subcommand("verify", "property suites; exit 1 if any fails");
  verify->add_option("--only", s.only, "suites to run")
      ->delimiter(',')
      ->check(CLI::IsMember(sdpass::verification_suites()))
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  verify->add_flag("--inject-fault", s.inject_fault, "flip the sign of the first-order feedback correction");
  physical(verify);

  auto* pch = app.add_subcommand("pch-check", "discrete port-Hamiltonian structure at one state");
  pch->add_option("--delta", s.delta, "sampling period")->required()->check(CLI::PositiveNumber);
  physical(pch);
  initial(pch);

  for (auto* sub : {sim, sweep, verify, pch}) sub->fallthrough();

  // Config entries become flags placed right after the verb, ahead of the
  // user's own flags; with last-wins options the user's flags take precedence.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (!config_path.empty()) {
      std::size_t verb = args.size();
      CLI::App* verb_app = nullptr;
      for (std::size_t i = 0; i < args.size() && !verb_app; ++i) {
        for (auto* sub : {sim, sweep, verify, pch}) {
          if (args[i] == sub->get_name()) {
            verb = i;
            verb_app = sub;
          }
        }
      }
      if (verb_app) {
        std::vector<std::string> injected;
        for (const auto& [key, value] : read_config(config_path)) {
          const std::string flag = "--" + key;
          if (verb_app->get_option_no_throw(flag) != nullptr) {
            injected.push_back(flag);
            injected.push_back(value);
          } else if (sim->get_option_no_throw(flag) == nullptr && sweep->get_option_no_throw(flag) == nullptr &&
                     verify->get_option_no_throw(flag) == nullptr && pch->get_option_no_throw(flag) == nullptr) {
            throw CLI::ValidationError("--config", "unknown key '" + key + "'");
          }
        }
        args.insert(args.begin() + static_cast<std::ptrdiff_t>(verb) + 1, injected.begin(), injected.end());
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sdpass: " << e.what() << "\n\n" << app.help();
    return kBadFlags;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string verb = chosen->get_name();
  try {
    if (chosen == sim) return run_simulate(s);
    if (chosen == sweep) return run_sweep(s);
    if (chosen == verify) return run_verify(s);
    return run_pch_check(s);
  } catch (const sdpass::Error& e) {
    std::cerr << "sdpass " << verb << ": solver failure: " << e.what() << '\n';
    return kSolverFailed;
  } catch (const std::invalid_argument& e) {
    std::cerr << "sdpass " << verb << ": " << e.what() << "\n\n" << chosen->help();
    return kBadFlags;
  }
}
