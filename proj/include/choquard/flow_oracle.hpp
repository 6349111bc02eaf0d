#pragma once

// Mass-constrained gradient flow for the ground state at fixed sigma. The
// step treats the linear part implicitly,
//     (1 + tau(-Delta + mu_n)) u* = u_n + tau N(u_n),   N(u) = I(|u|^p)|u|^{p-2}u,
// then rescales u* back onto ||u||^2 = sigma. mu_n = (D - G)/sigma is the
// multiplier that makes the step tangent to the mass sphere. The last grid
// node carries the Dirichlet condition u(r_max) = 0.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "choquard/functionals.hpp"
#include "choquard/radial_core.hpp"
#include "choquard/shooting_solver.hpp"

namespace choquard {

enum class FlowInitKind { gaussian, exponential, file };

inline std::string_view to_string(FlowInitKind k) {
  switch (k) {
    case FlowInitKind::gaussian: return "gaussian";
    case FlowInitKind::exponential: return "exponential";
    case FlowInitKind::file: return "file";
  }
  return "gaussian";
}

inline FlowInitKind flow_init_from_string(std::string_view s) {
  if (s == "gaussian") return FlowInitKind::gaussian;
  if (s == "exponential") return FlowInitKind::exponential;
  if (s == "file") return FlowInitKind::file;
  throw Error(ErrorCode::usage, "unknown flow init '" + std::string(s) + "'");
}

struct FlowConfig {
  double step = 1.0;
  std::size_t max_steps = 200000;
  double energy_tol = 1e-14;
  double residual_tol = 1e-6;  // relative EL residual also required
  GridPtr grid;
  FlowInitKind init = FlowInitKind::gaussian;
  /// profile used for init = file (already on any grid; it is resampled)
  std::optional<RadialProfile> init_profile;
  std::size_t transient = 50;
  std::size_t divergence_window = 200;

  void validate() const {
    if (!(step > 0.0)) throw Error(ErrorCode::out_of_range, "flow step must be > 0");
    if (!(energy_tol > 0.0))
      throw Error(ErrorCode::out_of_range, "energy_tol must be > 0");
    if (!grid) throw Error(ErrorCode::invalid_profile, "flow needs a grid");
    if (init == FlowInitKind::file && !init_profile)
      throw Error(ErrorCode::usage, "init = file needs an initial profile");
  }
};

struct FlowLogEntry {
  std::size_t step = 0;
  double energy = 0.0;
  double residual = 0.0;  // grid L^2 norm of -Delta u + mu u - N(u)
  double mu = 0.0;
};

struct FlowRun {
  GroundStateSolution solution;
  std::vector<FlowLogEntry> log;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  Warnings warnings;
};

namespace flow_detail {

/// Thomas algorithm; sub[i] couples i to i-1, sup[i] couples i to i+1.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub,
                                             std::vector<double> diag,
                                             std::vector<double> sup,
                                             std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  return x;
}

struct Stencil {
  // -Delta on nodes 0..n-2 with u_{n-1} = 0
  std::vector<double> sub, diag, sup;
};

inline Stencil dirichlet_stencil(const RadialGrid& g) {
  const auto r = g.nodes();
  const auto e = g.faces();
  const auto w = g.weights();
  const std::size_t m = g.size() - 1;
  Stencil s{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
            std::vector<double>(m, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    const double cp = e[i] * e[i] / (r[i + 1] - r[i]);
    s.diag[i] += cp / w[i];
    if (i + 1 < m) s.sup[i] = -cp / w[i];
    if (i > 0) {
      const double cm = e[i - 1] * e[i - 1] / (r[i] - r[i - 1]);
      s.diag[i] += cm / w[i];
      s.sub[i] = -cm / w[i];
    }
  }
  return s;
}

struct FlowState {
  double grad = 0.0, d = 0.0, mu = 0.0, energy = 0.0, residual = 0.0;
  RadialProfile nonlin;
};

inline FlowState evaluate(const RadialProfile& u, double p, double sigma) {
  const auto n = choquard_nonlinearity(u, p);
  const double g = grad_inner(u, u);
  const double d = inner(n, u);
  const double mu = (d - g) / sigma;
  auto res = axpby(1.0, neg_laplacian(u), mu, u);
  res = axpby(1.0, res, -1.0, n);
  // the Neumann operator differs from the Dirichlet one only at the last node
  std::vector<double> rv(res.values().begin(), res.values().end());
  rv.back() = 0.0;
  RadialProfile rp(u.grid_ptr(), std::move(rv));
  return {g, d, mu, 0.5 * g - d / (2.0 * p), l2_norm(rp), n};
}

inline RadialProfile normalise(std::vector<double> v, const GridPtr& grid,
                               double sigma) {
  v.back() = 0.0;
  RadialProfile u(grid, std::move(v));
  const double m = inner(u, u);
  if (!(m > 0.0))
    throw Error(ErrorCode::zero_profile, "mass normalisation of a zero profile");
  return u.scaled(std::sqrt(sigma / m));
}

inline RadialProfile initial_profile(const FlowConfig& cfg, double sigma) {
  const auto& g = cfg.grid;
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = (*g)[i];
    switch (cfg.init) {
      case FlowInitKind::gaussian: v[i] = std::exp(-0.5 * r * r); break;
      case FlowInitKind::exponential: v[i] = std::exp(-r); break;
      case FlowInitKind::file: v[i] = interpolate(*cfg.init_profile, r); break;
    }
  }
  return normalise(std::move(v), g, sigma);
}

}  // namespace flow_detail

/// Runs the flow and keeps its descent log.
inline FlowRun flow_run(double sigma, double p, const FlowConfig& cfg) {
  using namespace flow_detail;
  cfg.validate();
  if (!(sigma > 0.0)) throw Error(ErrorCode::out_of_range, "sigma must be > 0");
  if (!(p > p_lower && p < p_mass_critical))
    throw Error(ErrorCode::out_of_range, "the flow needs p in (5/3, 7/3)");

  std::vector<FlowLogEntry> log;
  Warnings warnings;
  if (p < 2.0) warnings.add("outside-uniqueness-hypothesis: p < 2");

  const auto& grid = cfg.grid;
  const auto st = dirichlet_stencil(*grid);
  const std::size_t m = grid->size() - 1;

  RadialProfile u = initial_profile(cfg, sigma);
  FlowState s = evaluate(u, p, sigma);
  log.push_back({0, s.energy, s.residual, s.mu});
  const double scale = std::max(l2_norm(s.nonlin), 1e-300);

  std::size_t rises = 0;
  double prev_energy = s.energy;
  bool converged = s.residual <= cfg.residual_tol * scale;
  std::size_t it = 0;
  while (!converged) {
    if (it >= cfg.max_steps) {
      nlohmann::json d{{"steps", it}, {"energy", s.energy}, {"residual", s.residual}};
      throw Error(ErrorCode::max_steps, "gradient flow hit max_steps", d);
    }
    ++it;
    std::vector<double> sub(m), diag(m), sup(m), rhs(m);
    const double tau = cfg.step;
    for (std::size_t i = 0; i < m; ++i) {
      sub[i] = tau * st.sub[i];
      sup[i] = tau * st.sup[i];
      diag[i] = 1.0 + tau * (st.diag[i] + s.mu);
      rhs[i] = u[i] + tau * s.nonlin[i];
    }
    auto x = solve_tridiagonal(std::move(sub), std::move(diag), std::move(sup),
                               std::move(rhs));
    x.push_back(0.0);
    u = normalise(std::move(x), grid, sigma);
    s = evaluate(u, p, sigma);
    log.push_back({it, s.energy, s.residual, s.mu});

    if (!std::isfinite(s.energy))
      throw Error(ErrorCode::divergence, "non-finite energy in the flow",
                  {{"step", it}});
    if (it > cfg.transient && s.energy > prev_energy + 1e-12 * std::abs(prev_energy)) {
      if (++rises > cfg.divergence_window)
        throw Error(ErrorCode::divergence, "energy increases persistently",
                    {{"step", it}, {"energy", s.energy}});
    } else {
      rises = 0;
    }
    converged = std::abs(s.energy - prev_energy) < cfg.energy_tol * std::abs(s.energy) &&
                s.residual <= cfg.residual_tol * scale;
    prev_energy = s.energy;
  }
  auto a = riesz_radial(abs_pow(u, p), &warnings);
  GroundStateSolution gs{u, std::move(a)};
  gs.p = p;
  gs.method = "flow";
  gs.omega = s.mu;
  gs.sigma = inner(u, u);
  gs.energy = s.energy;
  gs.q0 = u[0];
  gs.a0 = gs.A[0];
  gs.report = pohozaev_report(gs.Q, gs.params());
  try {
    gs.tail = tail_fit(gs.Q, gs.A);
  } catch (const Error&) {
    warnings.add("tail fit unavailable");
  }
  gs.resolved_radius = grid->r_max();
  gs.diagnostics = {{"iterations", it}, {"final_residual", s.residual}};
  if (!warnings.empty()) gs.diagnostics["warnings"] = warnings.messages;
  return FlowRun{std::move(gs), std::move(log), it, s.residual, std::move(warnings)};
}

inline GroundStateSolution flow_minimize(double sigma, double p,
                                         const FlowConfig& cfg) {
  return flow_run(sigma, p, cfg).solution;
}

inline const std::vector<FlowLogEntry>& energy_descent_log(const FlowRun& run) {
  return run.log;
}

/// Largest energy increase E_{n+1} - E_n after the transient (<= 0 for a
/// monotone descent).
inline double max_energy_rise(const std::vector<FlowLogEntry>& log,
                              std::size_t transient) {
  double worst = -INFINITY;
  for (std::size_t i = transient + 1; i < log.size(); ++i)
    worst = std::max(worst, log[i].energy - log[i - 1].energy);
  return worst;
}

}  // namespace choquard
