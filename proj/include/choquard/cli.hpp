#pragma once

// Command-line front end. Commands:
//   solve | oracle | verify | gn | kernel | curve | sweep | potential-test
// Options come from flags and an optional flat `key = value` file given by
// --config; flags win. Exit codes: 0 success, 1 numerical failure, 2 usage.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "choquard/diagnostics.hpp"
#include "choquard/flow_oracle.hpp"
#include "choquard/io.hpp"
#include "choquard/linearization.hpp"
#include "choquard/shooting_solver.hpp"

namespace choquard::cli {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"solve", "oracle", "verify", "gn",
                                          "kernel", "curve", "sweep",
                                          "potential-test"};
  return c;
}

struct RunConfig {
  std::string command;
  ModelParams params{2.0, 1.0, 0.0};
  bool omega_given = false;
  bool sigma_given = false;

  // grid
  std::size_t grid_nodes = 8192;
  double r_max = 40.0;
  std::string grid_kind = "uniform";

  // shooting
  double tol = 1e-12;
  double q0_min = 1e-2, q0_max = 1e2;
  double a0_min = 1e-2, a0_max = 1e2;
  int max_iter = 200;
  int series_order = 4;

  // flow
  double flow_step = 1.0;
  std::size_t flow_max_steps = 200000;
  double energy_tol = 1e-14;
  std::string init = "gaussian";
  std::string profile;  // verify input / flow init = file

  // linearization
  int n_angles = 64;
  int n_eps = 24;
  double eps_max = 0.0;
  std::string direction = "kernel";
  int direction_index = 0;

  // sweep
  double p_min = 2.0, p_max = 2.3;
  int steps = 7;
  int jobs = 1;

  std::filesystem::path output_dir = ".";
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses argv into a RunConfig; throws UsageError on bad input and returns
/// nullopt when help was requested.
inline std::optional<RunConfig> parse(int argc, const char* const* argv,
                                      std::ostream& out = std::cout) {
  RunConfig c;
  CLI::App app{"Radial ground states of the Choquard equation"};
  app.set_config("--config", "", "flat key = value file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("command", c.command, "command to run")
      ->required()
      ->check(CLI::IsMember(commands()));
  auto* p_opt = app.add_option("--p", c.params.p, "nonlinearity exponent");
  auto* om = app.add_option("--omega", c.params.omega, "frequency");
  auto* sg = app.add_option("--sigma", c.params.sigma, "mass ||u||^2");
  app.add_option("--grid-nodes", c.grid_nodes, "number of grid nodes");
  app.add_option("--r-max", c.r_max, "outer radius");
  app.add_option("--grid-kind", c.grid_kind)->check(CLI::IsMember({"uniform", "geometric"}));
  app.add_option("--tol", c.tol, "integrator tolerance");
  app.add_option("--q0-min", c.q0_min);
  app.add_option("--q0-max", c.q0_max);
  app.add_option("--a0-min", c.a0_min);
  app.add_option("--a0-max", c.a0_max);
  app.add_option("--max-iter", c.max_iter);
  app.add_option("--series-order", c.series_order);
  app.add_option("--flow-step", c.flow_step, "pseudo-time step of the flow");
  app.add_option("--flow-max-steps", c.flow_max_steps);
  app.add_option("--energy-tol", c.energy_tol);
  app.add_option("--init", c.init)->check(CLI::IsMember({"gaussian", "exponential", "file"}));
  app.add_option("--profile", c.profile, "profile CSV (columns r,Q[,A])");
  app.add_option("--n-angles", c.n_angles);
  app.add_option("--n-eps", c.n_eps);
  app.add_option("--eps-max", c.eps_max, "0 picks half the positivity limit");
  app.add_option("--direction", c.direction)->check(CLI::IsMember({"kernel", "random"}));
  app.add_option("--direction-index", c.direction_index);
  app.add_option("--p-min", c.p_min);
  app.add_option("--p-max", c.p_max);
  app.add_option("--steps", c.steps);
  app.add_option("--jobs", c.jobs, "concurrent sweep cells");
  std::string out_dir;
  app.add_option("--out", out_dir, "output directory (default $CHOQUARD_OUT or .)");
  (void)p_opt;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  c.omega_given = om->count() > 0;
  c.sigma_given = sg->count() > 0;
  if (!out_dir.empty())
    c.output_dir = out_dir;
  else if (const char* env = std::getenv("CHOQUARD_OUT"); env && *env)
    c.output_dir = env;

  if (c.steps < 1) throw UsageError("--steps must be >= 1");
  if (c.jobs < 1) throw UsageError("--jobs must be >= 1");
  if (c.grid_nodes < RadialGrid::min_nodes) throw UsageError("--grid-nodes must be >= 64");
  if (!(c.r_max > 1.0)) throw UsageError("--r-max must exceed 1");
  if (c.omega_given && !(c.params.omega > 0.0)) throw UsageError("--omega must be > 0");
  if (c.sigma_given && !(c.params.sigma > 0.0)) throw UsageError("--sigma must be > 0");
  if (c.command == "verify" && c.profile.empty())
    throw UsageError("verify needs --profile");
  if (c.command == "solve" && c.omega_given && c.sigma_given)
    throw UsageError("solve takes --omega or --sigma, not both");
  return c;
}

namespace detail {

inline ShootingConfig shooting_config(const RunConfig& c) {
  ShootingConfig s;
  s.q0_bracket = {c.q0_min, c.q0_max};
  s.a0_bracket = {c.a0_min, c.a0_max};
  s.r_max = c.r_max;
  s.n_nodes = c.grid_nodes;
  s.grid_kind = grid_kind_from_string(c.grid_kind);
  s.integrator_tol = c.tol;
  s.max_iter = c.max_iter;
  s.series_order = c.series_order;
  return s;
}

/// Ground state at the requested omega, or at omega = 1 rescaled to sigma.
inline GroundStateSolution ground_state(const RunConfig& c, double p) {
  const auto cfg = shooting_config(c);
  if (c.sigma_given) return rescale_to_sigma(shoot(p, 1.0, cfg), c.params.sigma);
  return shoot(p, c.omega_given ? c.params.omega : 1.0, cfg);
}

inline std::filesystem::path out_file(const RunConfig& c, const std::string& name) {
  return c.output_dir / name;
}

inline void write_solution(const RunConfig& c, const GroundStateSolution& gs,
                           const std::string& prefix) {
  const auto tag = format_tag(gs.p);
  write_profile_csv(out_file(c, prefix + "ground_state_" + tag + ".csv"), gs.Q, gs.A);
  write_json(out_file(c, prefix + "ground_state_" + tag + ".json"), to_json(gs));
}

inline int cmd_solve(const RunConfig& c, std::ostream& out) {
  const auto gs = ground_state(c, c.params.p);
  write_solution(c, gs, "");
  out << "p=" << format_tag(gs.p) << " omega=" << format_double(gs.omega)
      << " sigma=" << format_double(gs.sigma) << " energy=" << format_double(gs.energy)
      << " pohozaev=" << gs.report.max_pohozaev_deviation() << '\n';
  return 0;
}

inline int cmd_oracle(const RunConfig& c, std::ostream& out) {
  const double p = c.params.p;
  FlowConfig fc;
  fc.step = c.flow_step;
  fc.max_steps = c.flow_max_steps;
  fc.energy_tol = c.energy_tol;
  fc.grid = make_grid(grid_kind_from_string(c.grid_kind), c.grid_nodes, c.r_max);
  fc.init = flow_init_from_string(c.init);
  if (fc.init == FlowInitKind::file) {
    if (c.profile.empty()) throw UsageError("--init file needs --profile");
    fc.init_profile = read_profile_csv(c.profile);
  }
  double sigma = c.params.sigma;
  if (!c.sigma_given) sigma = shoot(p, 1.0, shooting_config(c)).sigma;
  const auto run = flow_run(sigma, p, fc);
  write_solution(c, run.solution, "oracle_");
  std::vector<double> st, en, res;
  for (const auto& e : run.log) {
    st.push_back(static_cast<double>(e.step));
    en.push_back(e.energy);
    res.push_back(e.residual);
  }
  write_csv(out_file(c, "oracle_descent_" + format_tag(p) + ".csv"),
            {"step", "energy", "residual"}, {st, en, res});
  out << "p=" << format_tag(p) << " sigma=" << format_double(sigma)
      << " omega=" << format_double(run.solution.omega)
      << " energy=" << format_double(run.solution.energy)
      << " iterations=" << run.iterations << " residual=" << run.final_residual << '\n';
  return 0;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out) {
  const auto q = read_profile_csv(c.profile);
  const double sigma = inner(q, q);
  if (!(sigma > 0.0)) throw Error(ErrorCode::zero_profile, "profile has zero mass");
  ModelParams mp{c.params.p, c.params.omega, sigma};
  mp.validate();
  const auto rep = pohozaev_report(q, mp);
  nlohmann::json j{{"schema", schema_version},
                   {"profile", c.profile},
                   {"report", rep},
                   {"euler_lagrange_residual", euler_lagrange_residual(q, mp.p, mp.omega)}};
  write_json(out_file(c, "verify_" + format_tag(mp.p) + ".json"), j);
  out << "p=" << format_tag(mp.p) << " pohozaev=" << rep.max_pohozaev_deviation()
      << " c_star_direct=" << format_double(rep.c_star_direct)
      << " c_star_formula=" << format_double(rep.c_star_formula) << '\n';
  return rep.max_pohozaev_deviation() <= 1e-3 ? 0 : 1;
}

inline nlohmann::json gn_record(const GroundStateSolution& gs) {
  const auto& r = gs.report;
  nlohmann::json j{{"p", gs.p},
                   {"sigma", gs.sigma},
                   {"omega", gs.omega},
                   {"energy", gs.energy},
                   {"c_star_direct", r.c_star_direct},
                   {"c_star_formula", r.c_star_formula},
                   {"c_star_relative_difference",
                    std::abs(r.c_star_direct - r.c_star_formula) / r.c_star_direct}};
  const auto [beta, gamma] = exponents(gs.p);
  if (gamma < 1.0) {
    const double ss = s_star(gs.sigma, gs.p, r.c_star_direct);
    j["s_star"] = ss;
    j["phi_at_s_star"] = phi_sigma(ss, gs.sigma, gs.p, r.c_star_direct);
    j["grad_sq"] = r.grad_sq;
  }
  return j;
}

inline int cmd_gn(const RunConfig& c, std::ostream& out) {
  const auto gs = ground_state(c, c.params.p);
  auto j = gn_record(gs);
  j["schema"] = schema_version;
  const auto tag = format_tag(gs.p);
  if (j.contains("s_star")) {
    const double ss = j["s_star"];
    std::vector<double> s, phi;
    for (int i = 0; i <= 64; ++i) {
      s.push_back(3.0 * ss * i / 64.0);
      phi.push_back(phi_sigma(s.back(), gs.sigma, gs.p, gs.report.c_star_direct));
    }
    write_csv(out_file(c, "gn_phi_" + tag + ".csv"), {"s", "phi"}, {s, phi});
  }
  write_json(out_file(c, "gn_" + tag + ".json"), j);
  out << "p=" << tag << " c_star_direct=" << format_double(gs.report.c_star_direct)
      << " c_star_formula=" << format_double(gs.report.c_star_formula) << '\n';
  return 0;
}

inline int cmd_kernel(const RunConfig& c, std::ostream& out) {
  const auto gs = ground_state(c, c.params.p);
  KernelScanOptions ko;
  ko.n_angles = c.n_angles;
  const auto scan = kernel_scan(gs, gs.p, ko);
  write_json(out_file(c, "kernel_scan_" + format_tag(gs.p) + ".json"), to_json(scan, gs));
  out << "p=" << format_tag(gs.p) << " dimension_estimate=" << scan.dimension_estimate
      << " strict_kernel_count=" << scan.strict_kernel_count << '\n';
  return scan.dimension_estimate <= 2 ? 0 : 1;
}

inline int cmd_curve(const RunConfig& c, std::ostream& out) {
  const auto gs = ground_state(c, c.params.p);
  std::optional<RadialProfile> h;
  if (c.direction == "kernel") {
    KernelScanOptions ko;
    ko.n_angles = c.n_angles;
    const auto scan = kernel_scan(gs, gs.p, ko);
    if (const auto* best = best_candidate(scan)) h = best->w;
    else throw Error(ErrorCode::no_bracket, "kernel scan produced no candidate");
  } else {
    if (c.direction_index < 0) throw UsageError("--direction-index must be >= 0");
    h = random_directions(gs, c.direction_index + 1).back();
  }
  const auto curve = energy_curve(gs, *h, c.eps_max, c.n_eps);
  const auto tag = format_tag(gs.p);
  write_csv(out_file(c, "energy_curve_" + tag + ".csv"), {"eps", "K_closed", "K_direct"},
            {curve.eps_values, curve.K_closed, curve.K_values});
  auto j = to_json(curve);
  j["p"] = gs.p;
  j["direction"] = c.direction;
  write_json(out_file(c, "energy_curve_" + tag + ".json"), j);
  out << "p=" << tag << " K''(0)=" << format_double(curve.second_derivative)
      << " fitted_order=" << curve.fitted_order << " max_discrepancy=" << curve.max_discrepancy
      << '\n';
  return 0;
}

struct SweepCell {
  double p = 0.0;
  bool ok = false;
  nlohmann::json record;
  std::vector<double> row;
};

inline int cmd_sweep(const RunConfig& c, std::ostream& out) {
  std::vector<SweepCell> cells(static_cast<std::size_t>(c.steps));
  for (int i = 0; i < c.steps; ++i)
    cells[i].p = c.steps == 1 ? c.p_min
                              : c.p_min + (c.p_max - c.p_min) * i / (c.steps - 1);

  auto work = [&](SweepCell& cell) {
    try {
      const auto gs = ground_state(c, cell.p);
      KernelScanOptions ko;
      ko.n_angles = c.n_angles;
      const auto scan = kernel_scan(gs, gs.p, ko);
      auto j = to_json(gs);
      j["gn"] = gn_record(gs);
      j["dimension_estimate"] = scan.dimension_estimate;
      j["strict_kernel_count"] = scan.strict_kernel_count;
      write_json(out_file(c, "sweep_" + format_tag(cell.p) + ".json"), j);
      cell.row = {gs.p, gs.q0, gs.a0, gs.sigma, gs.omega, gs.energy,
                  gs.report.c_star_direct, gs.report.c_star_formula,
                  gs.report.omega_predicted, gs.report.max_pohozaev_deviation(),
                  gs.tail.decay_rate, gs.tail.d0,
                  static_cast<double>(scan.dimension_estimate)};
      cell.ok = true;
    } catch (const Error& e) {
      cell.record = {{"p", cell.p},
                     {"error", e.what()},
                     {"code", to_string(e.code())},
                     {"diagnostics", e.diagnostics()}};
      write_json(out_file(c, "sweep_" + format_tag(cell.p) + ".json"), cell.record);
    }
  };

  const int jobs = std::min<int>(c.jobs, c.steps);
  if (jobs <= 1) {
    for (auto& cell : cells) work(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < cells.size();) work(cells[i]);
      });
    for (auto& th : pool) th.join();
  }

  const std::vector<std::string> header{
      "p", "q0", "a0", "sigma", "omega", "energy", "c_star_direct", "c_star_formula",
      "omega_predicted", "max_pohozaev", "decay_rate", "d0", "dimension_estimate"};
  std::vector<std::vector<double>> cols(header.size());
  bool all_ok = true;
  for (const auto& cell : cells) {
    if (!cell.ok) {
      all_ok = false;
      continue;
    }
    for (std::size_t k = 0; k < header.size(); ++k) cols[k].push_back(cell.row[k]);
  }
  write_csv(out_file(c, "sweep_summary.csv"), header, cols);
  bool monotone = true;
  for (std::size_t i = 1; i < cols[6].size(); ++i)
    monotone = monotone && cols[6][i] < cols[6][i - 1];
  out << "cells=" << cells.size() << " converged=" << cols[0].size()
      << " c_star_decreasing=" << (monotone ? "yes" : "no") << '\n';
  for (std::size_t i = 0; i < cols[0].size(); ++i)
    out << "  p=" << format_tag(cols[0][i]) << " c_star=" << format_double(cols[6][i]) << '\n';
  return all_ok ? 0 : 1;
}

inline int cmd_potential_test(const RunConfig& c, std::ostream& out) {
  const auto rep = potential_self_test(2048);
  write_json(out_file(c, "potential_test.json"), rep.to_json());
  out << "ball_error=" << rep.ball_error << " ball_order=" << rep.ball_order
      << " harmonicity=" << rep.harmonicity << " gaussian_norms=" << rep.gaussian_norm_error
      << " passed=" << (rep.passed ? "yes" : "no") << '\n';
  return rep.passed ? 0 : 1;
}

}  // namespace detail

/// Dispatches one command; numerical failures are reported as JSON on err.
inline int run(const RunConfig& c, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  try {
    std::error_code ec;
    std::filesystem::create_directories(c.output_dir, ec);
    if (ec || !std::filesystem::is_directory(c.output_dir))
      throw UsageError("output directory not writable: " + c.output_dir.string());
    if (c.command == "solve") return detail::cmd_solve(c, out);
    if (c.command == "oracle") return detail::cmd_oracle(c, out);
    if (c.command == "verify") return detail::cmd_verify(c, out);
    if (c.command == "gn") return detail::cmd_gn(c, out);
    if (c.command == "kernel") return detail::cmd_kernel(c, out);
    if (c.command == "curve") return detail::cmd_curve(c, out);
    if (c.command == "sweep") return detail::cmd_sweep(c, out);
    if (c.command == "potential-test") return detail::cmd_potential_test(c, out);
    throw UsageError("unknown command '" + c.command + "'");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::usage) {
      err << "usage error: " << e.what() << '\n';
      return 2;
    }
    nlohmann::json j{{"error", e.what()},
                     {"code", to_string(e.code())},
                     {"command", c.command},
                     {"diagnostics", e.diagnostics()}};
    err << j.dump() << '\n';
    try {
      write_json(detail::out_file(c, c.command + "_error.json"), j);
    } catch (const Error&) {
    }
    return 1;
  }
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  try {
    const auto cfg = parse(argc, argv, out);
    if (!cfg) return 0;
    return run(*cfg, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace choquard::cli
