#pragma once

// Self-test of the radial potential solver against closed forms.

#include <cmath>
#include <numbers>

#include "json.hpp"
#include "choquard/radial_core.hpp"

namespace choquard {

/// Density of the unit-ball indicator, averaged over each finite-volume cell
/// so the discontinuity at r = 1 does not cost an order of accuracy.
inline RadialProfile ball_indicator(const GridPtr& grid, double radius = 1.0) {
  const auto e = grid->faces();
  const std::size_t n = grid->size();
  std::vector<double> v(n);
  double lo = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = i + 1 < n ? e[i] : grid->r_max();
    const double l = std::min(lo, radius), h = std::min(hi, radius);
    v[i] = (h * h * h - l * l * l) / (hi * hi * hi - lo * lo * lo);
    lo = hi;
  }
  return RadialProfile(grid, std::move(v));
}

/// I(1_{B_R})(r) = R^2/2 - r^2/6 inside, R^3/(3r) outside.
inline double ball_potential(double r, double radius = 1.0) {
  return r < radius ? 0.5 * radius * radius - r * r / 6.0
                    : radius * radius * radius / (3.0 * r);
}

/// A second-order error C h^2 (1 + D h) measures slightly below 2 on a
/// finite refinement pair; this is the allowance for the D h term.
inline constexpr double ball_order_slack = 0.01;

struct PotentialTestReport {
  std::size_t nodes = 0;
  double r_max = 0.0;
  double ball_error = 0.0;         // sup |I_h - I| on `nodes` nodes
  double ball_error_coarse = 0.0;  // same on nodes / 2
  double ball_order = 0.0;         // log2 of the ratio
  double harmonicity = 0.0;        // relative residual of Delta I(f) + f, Gaussian f
  double gaussian_potential_error = 0.0;
  double gaussian_norm_error = 0.0;
  double exponential_norm_error = 0.0;
  bool passed = false;

  nlohmann::json to_json() const {
    return {{"nodes", nodes},
            {"r_max", r_max},
            {"ball_error", ball_error},
            {"ball_error_coarse", ball_error_coarse},
            {"ball_order", ball_order},
            {"harmonicity", harmonicity},
            {"gaussian_potential_error", gaussian_potential_error},
            {"gaussian_norm_error", gaussian_norm_error},
            {"exponential_norm_error", exponential_norm_error},
            {"passed", passed}};
  }
};

inline double ball_error(std::size_t n, double r_max) {
  const auto g = make_grid(GridKind::uniform, n, r_max);
  const auto a = riesz_radial(ball_indicator(g));
  double err = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i)
    err = std::max(err, std::abs(a[i] - ball_potential((*g)[i])));
  return err;
}

inline PotentialTestReport potential_self_test(std::size_t n = 2048, double r_max = 8.0) {
  PotentialTestReport rep;
  rep.nodes = n;
  rep.r_max = r_max;
  rep.ball_error = ball_error(n, r_max);
  rep.ball_error_coarse = ball_error(n / 2, r_max);
  rep.ball_order = std::log2(rep.ball_error_coarse / rep.ball_error);

  const auto g = make_grid(GridKind::uniform, n, r_max);
  const auto f = RadialProfile::sample(g, [](double r) { return std::exp(-r * r); });
  const double hmax = laplacian_residual(f, riesz_radial(f), 0.5);
  rep.harmonicity = hmax / sup_norm(f);
  // I(e^{-r^2}) = sqrt(pi) erf(r) / (4 r)
  const double sp = std::sqrt(std::numbers::pi);
  double gerr = 0.0;
  const auto a = riesz_radial(f);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = (*g)[i];
    gerr = std::max(gerr, std::abs(a[i] - sp * std::erf(r) / (4.0 * r)));
  }
  rep.gaussian_potential_error = gerr;

  // ||e^{-r^2/2}||^2 = pi^{3/2}, ||e^{-r}||^2 = pi
  const double gauss = sp * std::numbers::pi;
  const auto u = RadialProfile::sample(g, [](double r) { return std::exp(-0.5 * r * r); });
  rep.gaussian_norm_error = std::abs(inner(u, u) - gauss) / gauss;
  const auto ge = make_grid(GridKind::uniform, n, 4.0 * r_max);
  const auto v = RadialProfile::sample(ge, [](double r) { return std::exp(-r); });
  rep.exponential_norm_error = std::abs(inner(v, v) - std::numbers::pi) / std::numbers::pi;

  rep.passed = rep.ball_error < 1e-4 && rep.ball_order >= 2.0 - ball_order_slack && rep.harmonicity < 1e-3 &&
               rep.gaussian_potential_error < 1e-4 &&
               rep.gaussian_norm_error < 1e-4 && rep.exponential_norm_error < 1e-4;
  return rep;
}

}  // namespace choquard
