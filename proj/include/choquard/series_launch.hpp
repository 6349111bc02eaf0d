#pragma once

// Even power series at the regular singular point r = 0 of the radial
// Laplacian. Used to start ODE integration off the (2/r) singularity for
//   ground state:  Q'' + 2Q'/r = omega Q - A Q^{p-1},   A'' + 2A'/r = -Q^p
//   linearized:    w'' + 2w'/r = omega w - p B Q^{p-1} - (p-1) A Q^{p-2} w,
//                  B'' + 2B'/r = -Q^{p-1} w
// with zero first derivatives at the origin. Coefficients are stored in the
// variable t = r^2: u(r) = sum_k c_k t^k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "choquard/error.hpp"

namespace choquard {

namespace series_detail {

/// Coefficients 0..n of S(t)^alpha for S_0 > 0 (J.C.P. Miller recurrence).
inline std::vector<double> power(const std::vector<double>& s, double alpha,
                                 std::size_t n) {
  std::vector<double> out(n + 1, 0.0);
  out[0] = std::pow(s[0], alpha);
  for (std::size_t m = 1; m <= n; ++m) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= m && k < s.size(); ++k)
      acc += ((alpha + 1.0) * static_cast<double>(k) - static_cast<double>(m)) *
             s[k] * out[m - k];
    out[m] = acc / (static_cast<double>(m) * s[0]);
  }
  return out;
}

/// k-th coefficient of the product of two series
inline double cauchy(const std::vector<double>& a, const std::vector<double>& b,
                     std::size_t k) {
  double s = 0.0;
  for (std::size_t j = 0; j <= k; ++j)
    if (j < a.size() && k - j < b.size()) s += a[j] * b[k - j];
  return s;
}

/// Laplacian of t^{k+1} = r^{2k+2} is (2k+2)(2k+3) r^{2k}.
inline double lap_factor(std::size_t k) {
  return (2.0 * static_cast<double>(k) + 2.0) *
         (2.0 * static_cast<double>(k) + 3.0);
}

}  // namespace series_detail

struct SeriesLaunch {
  // For the linearized system these hold the w and B coefficients.
  std::vector<double> q_coeffs;  // c_0 .. c_K of the first component
  std::vector<double> a_coeffs;  // c_0 .. c_K of the second component
  int order = 0;                 // K
  double launch_radius = 0.0;
  // coefficient K+1 of each component, used for truncation estimates
  double q_next = 0.0;
  double a_next = 0.0;
  double convergence_radius = 0.0;  // ratio-test estimate in r
  Warnings warnings;
};

struct SeriesOptions {
  /// truncation-error target used to pick the launch radius
  double tol = 1e-12;
  /// > 0 forces the launch radius instead of choosing it
  double launch_radius = 0.0;
  /// upper cap for an adaptively chosen launch radius
  double max_radius = 0.5;
};

namespace series_detail {

inline double ratio_radius(const std::vector<double>& c, double next) {
  // ratio test on the last two available coefficients, in r
  const double last = c.back();
  if (next == 0.0 || last == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(std::abs(last / next));
}

inline void choose_radius(SeriesLaunch& s, const SeriesOptions& opts) {
  const double scale =
      std::max({std::abs(s.q_coeffs[0]), std::abs(s.a_coeffs[0]), 1e-300});
  const double next = std::max(std::abs(s.q_next), std::abs(s.a_next));
  s.convergence_radius = std::min(ratio_radius(s.q_coeffs, s.q_next),
                                  ratio_radius(s.a_coeffs, s.a_next));
  if (opts.launch_radius > 0.0) {
    s.launch_radius = opts.launch_radius;
    if (s.launch_radius > 0.5 * s.convergence_radius)
      s.warnings.add("series-divergence: launch radius " +
                     std::to_string(s.launch_radius) +
                     " beyond half the ratio-test radius " +
                     std::to_string(s.convergence_radius));
    return;
  }
  double r = opts.max_radius;
  if (next > 0.0)
    r = std::pow(opts.tol * scale / next,
                 1.0 / (2.0 * static_cast<double>(s.order) + 2.0));
  r = std::min({r, opts.max_radius, 0.5 * s.convergence_radius});
  s.launch_radius = r;
}

}  // namespace series_detail

/// Series of the regular ground-state solution with Q(0) = Q0, A(0) = A0.
inline SeriesLaunch ground_series(double q0, double a0, double p, double omega,
                                  int order, const SeriesOptions& opts = {}) {
  using namespace series_detail;
  if (order < 1) throw Error(ErrorCode::out_of_range, "series order K >= 1");
  if (!(p > 5.0 / 3.0 && p < 3.0))
    throw Error(ErrorCode::out_of_range, "p must lie in (5/3, 3)");
  if (q0 < 0.0) throw Error(ErrorCode::out_of_range, "Q0 must be >= 0");

  const auto K = static_cast<std::size_t>(order);
  SeriesLaunch s;
  s.order = order;
  std::vector<double> q(K + 2, 0.0), a(K + 2, 0.0);
  q[0] = q0;
  a[0] = a0;
  if (q0 > 0.0) {
    for (std::size_t k = 0; k <= K; ++k) {
      // Q^{p-1}, Q^p need q_0..q_k only
      const auto qpm1 = power(q, p - 1.0, k);
      const auto qp = power(q, p, k);
      q[k + 1] = (omega * q[k] - cauchy(a, qpm1, k)) / lap_factor(k);
      a[k + 1] = -qp[k] / lap_factor(k);
    }
  }
  s.q_next = q[K + 1];
  s.a_next = a[K + 1];
  q.resize(K + 1);
  a.resize(K + 1);
  s.q_coeffs = std::move(q);
  s.a_coeffs = std::move(a);
  choose_radius(s, opts);
  return s;
}

/// Series of the linearized system with w(0) = w0, B(0) = B0 around the
/// ground state described by `ground` (which must carry at least `order`
/// coefficients).
inline SeriesLaunch kernel_series(double w0, double b0,
                                  const SeriesLaunch& ground, double p,
                                  double omega, int order,
                                  const SeriesOptions& opts = {}) {
  using namespace series_detail;
  if (order < 1) throw Error(ErrorCode::out_of_range, "series order K >= 1");
  const auto K = static_cast<std::size_t>(order);
  if (ground.q_coeffs.size() < K + 1)
    throw Error(ErrorCode::out_of_range,
                "ground-state series shorter than requested order");
  if (!(ground.q_coeffs[0] > 0.0))
    throw Error(ErrorCode::out_of_range, "linearization needs Q0 > 0");

  std::vector<double> qg(ground.q_coeffs.begin(), ground.q_coeffs.begin() + K + 1);
  std::vector<double> ag(ground.a_coeffs.begin(), ground.a_coeffs.begin() + K + 1);
  const auto qpm1 = power(qg, p - 1.0, K);
  const auto qpm2 = power(qg, p - 2.0, K);
  std::vector<double> aq(K + 1);
  for (std::size_t k = 0; k <= K; ++k) aq[k] = cauchy(ag, qpm2, k);

  SeriesLaunch s;
  s.order = order;
  std::vector<double> w(K + 2, 0.0), b(K + 2, 0.0);
  w[0] = w0;
  b[0] = b0;
  for (std::size_t k = 0; k <= K; ++k) {
    w[k + 1] = (omega * w[k] - p * cauchy(b, qpm1, k) -
                (p - 1.0) * cauchy(aq, w, k)) /
               lap_factor(k);
    b[k + 1] = -cauchy(qpm1, w, k) / lap_factor(k);
  }
  s.q_next = w[K + 1];
  s.a_next = b[K + 1];
  w.resize(K + 1);
  b.resize(K + 1);
  s.q_coeffs = std::move(w);
  s.a_coeffs = std::move(b);

  SeriesOptions o = opts;
  if (o.launch_radius <= 0.0)
    o.max_radius = std::min(o.max_radius, ground.launch_radius);
  if (w0 == 0.0 && b0 == 0.0 && o.launch_radius <= 0.0) {
    s.launch_radius = o.max_radius;
    s.convergence_radius = std::numeric_limits<double>::infinity();
  } else {
    choose_radius(s, o);
  }
  return s;
}

struct SeriesValue {
  double value = 0.0;
  double derivative = 0.0;
  double second = 0.0;
};

struct SeriesPoint {
  SeriesValue first;   // Q (or w)
  SeriesValue second;  // A (or B)
};

namespace series_detail {
inline SeriesValue horner(const std::vector<double>& c, double r) {
  const double t = r * r;
  double v = 0.0, dv = 0.0, d2 = 0.0;  // in t
  for (std::size_t k = c.size(); k-- > 0;) {
    d2 = d2 * t + 2.0 * dv;
    dv = dv * t + v;
    v = v * t + c[k];
  }
  // d/dr = 2r d/dt ; d2/dr2 = 2 d/dt + 4 r^2 d2/dt2
  return {v, 2.0 * r * dv, 2.0 * dv + 4.0 * t * d2};
}
}  // namespace series_detail

/// Horner evaluation of both components and their r-derivatives.
inline SeriesPoint evaluate_series(const SeriesLaunch& s, double r,
                                   bool allow_beyond = false) {
  if (r < 0.0 || (!allow_beyond && r > s.launch_radius * (1.0 + 1e-12)))
    throw Error(ErrorCode::beyond_launch_radius,
                "r = " + std::to_string(r) + " outside launch radius " +
                    std::to_string(s.launch_radius));
  return {series_detail::horner(s.q_coeffs, r),
          series_detail::horner(s.a_coeffs, r)};
}

}  // namespace choquard
