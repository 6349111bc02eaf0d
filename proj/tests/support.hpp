#pragma once

// Shared fixtures and independent reference computations for the tests.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "choquard/shooting_solver.hpp"

namespace testing_support {

using namespace choquard;

/// Ground states are expensive; each (p, grid) pair is solved once per binary.
inline const GroundStateSolution& ground_state(double p, double r_max = 40.0,
                                               std::size_t nodes = 8192) {
  static std::mutex m;
  static std::map<std::array<double, 3>, std::unique_ptr<GroundStateSolution>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[{p, r_max, static_cast<double>(nodes)}];
  if (!slot) {
    ShootingConfig cfg;
    cfg.r_max = r_max;
    cfg.n_nodes = nodes;
    slot = std::make_unique<GroundStateSolution>(shoot(p, 1.0, cfg));
  }
  return *slot;
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// D(f, f) = (1/4 pi) int int f(x) f(y) / |x - y| for radial f, by nested
/// quadrature of 4 pi int int r^2 s^2 f(r) f(s) / max(r, s) split along the
/// diagonal: 8 pi int_0^R r f(r) int_0^r s^2 f(s) ds dr.
inline double nested_d_pair(const std::function<double(double)>& f, double R, int n) {
  auto inner = [&](double r) { return simpson([&](double s) { return s * s * f(s); }, 0.0, r, n); };
  return 8.0 * std::numbers::pi * simpson([&](double r) { return r * f(r) * inner(r); }, 0.0, R, n);
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Order of the mismatch between the order-K series evaluated at r and a
/// reference integration launched from r = 1e-3 with a K = 10 series.
/// Points below the integrator noise floor are dropped.
struct SeriesOrderStudy {
  std::vector<double> radii;
  std::vector<double> mismatch;
  double order = 0.0;
};

inline SeriesOrderStudy series_order_study(double q0, double a0, double p, int K,
                                           double floor = 1e-12) {
  const std::vector<double> rs{0.1, 0.2, 0.4, 0.8};
  SeriesOptions ro;
  ro.launch_radius = 1e-3;
  const auto ref = ground_series(q0, a0, p, 1.0, 10, ro);
  IntegrateOptions io;
  io.outputs = rs;
  io.stop_on_event = false;
  const auto tr = integrate(ref, p, 1.0, rs.back(), 1e-14, io);
  SeriesOrderStudy out;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    SeriesOptions o;
    o.launch_radius = rs[i];
    const auto v = evaluate_series(ground_series(q0, a0, p, 1.0, K, o), rs[i]);
    const double m = std::abs(v.first.value - tr.q[i]) + std::abs(v.second.value - tr.a[i]);
    if (m < floor) continue;
    out.radii.push_back(rs[i]);
    out.mismatch.push_back(m);
  }
  out.order = out.radii.size() >= 2 ? loglog_slope(out.radii, out.mismatch) : NAN;
  return out;
}

}  // namespace testing_support
