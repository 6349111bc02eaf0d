#pragma once

// The operator obtained by linearizing the equation at the ground state Q,
//     L+ h = -Delta h + omega h - p I(Q^{p-1} h) Q^{p-1} - (p-1) I(Q^p) Q^{p-2} h,
// a shooting scan for decaying radial solutions of L+ h = 0 written as the
// local system
//     w'' + 2w'/r = omega w - p B Q^{p-1} - (p-1) A Q^{p-2} w,
//     B'' + 2B'/r = -Q^{p-1} w,
// and the energy along normalised perturbations of Q.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "choquard/functionals.hpp"
#include "choquard/ode.hpp"
#include "choquard/radial_core.hpp"
#include "choquard/series_launch.hpp"
#include "choquard/shooting_solver.hpp"

namespace choquard {

inline RadialProfile apply_lplus(const RadialProfile& h,
                                 const GroundStateSolution& gs, double p) {
  require_same_grid(h, gs.Q);
  const std::size_t n = h.size();
  std::vector<double> qpm1(n), qh(n);
  for (std::size_t i = 0; i < n; ++i) {
    qpm1[i] = std::pow(gs.Q[i], p - 1.0);
    qh[i] = qpm1[i] * h[i];
  }
  const auto bi = riesz_radial(RadialProfile(h.grid_ptr(), qh));
  const auto lap = neg_laplacian(h);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double qpm2 = qpm1[i] / gs.Q[i];
    out[i] = lap[i] + gs.omega * h[i] - p * bi[i] * qpm1[i] -
             (p - 1.0) * gs.A[i] * qpm2 * h[i];
  }
  return RadialProfile(h.grid_ptr(), std::move(out));
}

enum class KernelClass { decaying, growing, indeterminate };

inline std::string_view to_string(KernelClass c) {
  switch (c) {
    case KernelClass::decaying: return "decaying";
    case KernelClass::growing: return "growing";
    case KernelClass::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

struct KernelCandidate {
  RadialProfile w;
  RadialProfile B;
  double theta = 0.0;
  double w0 = 0.0;
  double b0 = 0.0;
  /// signed coefficient of the growing mode e^{sqrt(omega) r}/r at window_end
  double terminal_amplitude = 0.0;
  /// log10 of max/min of |w| r e^{sqrt(omega) r} over the outer third
  double growth_score = 0.0;
  KernelClass classification = KernelClass::indeterminate;
  double b_terminal = 0.0;  // B at window_end
  double window_end = 0.0;
  double c1 = 0.0;
  double d1 = 0.0;
  bool refined = false;  // produced by root refinement in theta
};

struct KernelScanOptions {
  int n_angles = 64;
  int series_order = 6;
  double integrator_tol = 1e-12;
  /// classification thresholds on the envelope ratio
  double decay_ratio = 10.0;
  double growth_ratio = 100.0;
  /// window_end = window_fraction * (first event radius of the shots)
  double window_fraction = 0.75;
};

struct KernelScan {
  std::vector<KernelCandidate> angles;
  std::vector<KernelCandidate> candidates;  // refined roots in theta
  int dimension_estimate = 0;
  /// refined roots whose B also settles to zero (decay of both components)
  int strict_kernel_count = 0;
  double window_end = 0.0;
  Warnings warnings;
};

namespace lin_detail {

struct Background {
  double q0, a0, omega, r_window;
};

inline Background background(const GroundStateSolution& gs,
                             const KernelScanOptions& opt) {
  Background bg{gs.q0, gs.a0, gs.omega, 0.0};
  double r_event = gs.resolved_radius;
  if (gs.key) {
    const auto& k = *gs.key;
    const double amp = std::pow(gs.dilation, dilation_exponent(k.p));
    bg.q0 = amp * k.q0();
    bg.a0 = amp * k.a0;
    ShootingConfig cfg;
    cfg.integrator_tol = k.integrator_tol;
    cfg.series_order = k.series_order;
    cfg.series_tol = k.series_tol;
    const double rmax = 4.0 * gs.Q.grid().r_max() * gs.dilation;
    const auto lo = shooting_detail::shoot_once(k.q0_lo, k.a0, k.p, k.integrator_tol, cfg, rmax);
    const auto hi = shooting_detail::shoot_once(k.q0_hi, k.a0, k.p, k.integrator_tol, cfg, rmax);
    r_event = std::min(lo.r_event, hi.r_event) / gs.dilation;
  }
  bg.r_window = std::min(opt.window_fraction * r_event, gs.Q.grid().r_max());
  return bg;
}

struct Shot {
  std::vector<double> r, w, dw, b;  // on grid nodes up to the window end
  double w_end = 0.0, dw_end = 0.0, b_end = 0.0, db_end = 0.0;
};

/// Joint integration of (Q, A, w, B) so Q is exactly the shooting trajectory.
inline Shot shoot_kernel(double w0, double b0, double p, const Background& bg,
                         const RadialGrid& grid, const KernelScanOptions& opt) {
  SeriesOptions so;
  so.tol = 1e-13;
  const auto gser = ground_series(bg.q0, bg.a0, p, bg.omega, opt.series_order, so);
  const auto kser = kernel_series(w0, b0, gser, p, bg.omega, opt.series_order, so);
  const double r0 = std::min(gser.launch_radius, kser.launch_radius);
  const auto g = evaluate_series(gser, r0);
  const auto k = evaluate_series(kser, r0);
  State<8> y{g.first.value, g.first.derivative, g.second.value, g.second.derivative,
             k.first.value, k.first.derivative, k.second.value, k.second.derivative};
  const double om = bg.omega;
  auto rhs = [p, om](double r, const State<8>& s, State<8>& d) {
    const double q = std::max(s[0], 0.0);
    const double qpm2 = q > 0.0 ? std::pow(q, p - 2.0) : 0.0;
    const double qpm1 = qpm2 * q;
    d[0] = s[1];
    d[1] = om * s[0] - s[2] * qpm1 - 2.0 * s[1] / r;
    d[2] = s[3];
    d[3] = -qpm1 * q - 2.0 * s[3] / r;
    d[4] = s[5];
    d[5] = om * s[4] - p * s[6] * qpm1 - (p - 1.0) * s[2] * qpm2 * s[4] -
           2.0 * s[5] / r;
    d[6] = s[7];
    d[7] = -qpm1 * s[4] - 2.0 * s[7] / r;
  };
  StepControl ctl;
  ctl.rtol = opt.integrator_tol;
  ctl.atol = 1e-30;
  Dopri5<8> stepper(ctl);
  Shot shot;
  double r = r0;
  for (std::size_t i = 0; i < grid.size() && grid[i] <= bg.r_window; ++i) {
    const double t = grid[i];
    if (t <= r0) {
      const auto kv = evaluate_series(kser, t);
      shot.r.push_back(t);
      shot.w.push_back(kv.first.value);
      shot.dw.push_back(kv.first.derivative);
      shot.b.push_back(kv.second.value);
      continue;
    }
    stepper.advance(rhs, y, r, t);
    r = t;
    shot.r.push_back(t);
    shot.w.push_back(y[4]);
    shot.dw.push_back(y[5]);
    shot.b.push_back(y[6]);
  }
  if (r < bg.r_window) stepper.advance(rhs, y, r, bg.r_window);
  shot.w_end = y[4];
  shot.dw_end = y[5];
  shot.b_end = y[6];
  shot.db_end = y[7];
  return shot;
}

inline double growing_coefficient(double w, double dw, double r, double k) {
  return 0.5 * r * std::exp(-k * r) * (w + (dw + w / r) / k);
}

inline double envelope_ratio(const Shot& s, double k, double r_window) {
  const double lo = 2.0 * r_window / 3.0;
  double first = NAN, mx = 0.0;
  for (std::size_t i = 0; i < s.r.size(); ++i) {
    if (s.r[i] < lo) continue;
    const double e = std::abs(s.w[i]) * s.r[i] * std::exp(k * s.r[i]);
    if (std::isnan(first)) first = e;
    mx = std::max(mx, e);
  }
  if (!(first > 0.0)) return INFINITY;
  return mx / first;
}

inline KernelCandidate make_candidate(double theta, double p,
                                      const Background& bg,
                                      const GroundStateSolution& gs,
                                      const KernelScanOptions& opt) {
  const double w0 = std::cos(theta), b0 = std::sin(theta);
  const auto s = shoot_kernel(w0, b0, p, bg, gs.Q.grid(), opt);
  const double k = std::sqrt(bg.omega);
  const auto& grid = gs.Q.grid_ptr();
  const std::size_t n = grid->size();
  std::vector<double> w(n, 0.0), b(n, 0.0);
  const std::size_t m = s.r.size();
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = s.w[i];
    b[i] = s.b[i];
  }
  // beyond the window: decaying envelope for w, harmonic continuation for B
  const double R = bg.r_window;
  const double beta = -R * R * s.db_end;
  const double alpha = s.b_end - beta / R;
  for (std::size_t i = m; i < n; ++i) {
    const double r = (*grid)[i];
    w[i] = s.w_end * (R / r) * std::exp(-k * (r - R));
    b[i] = alpha + beta / r;
  }
  KernelCandidate c{RadialProfile(grid, std::move(w)), RadialProfile(grid, std::move(b))};
  c.theta = theta;
  c.w0 = w0;
  c.b0 = b0;
  c.window_end = R;
  c.terminal_amplitude = growing_coefficient(s.w_end, s.dw_end, R, k);
  const double ratio = envelope_ratio(s, k, R);
  c.growth_score = std::log10(ratio);
  c.classification = ratio < opt.decay_ratio    ? KernelClass::decaying
                     : ratio > opt.growth_ratio ? KernelClass::growing
                                                : KernelClass::indeterminate;
  c.b_terminal = s.b_end;
  return c;
}

}  // namespace lin_detail

struct TailConstants {
  double c1_integral = 0.0;  // 4 pi int r^2 [p B Q^{p-1} + (p-1) A Q^{p-2} h]
  double c1_green = 0.0;     // (1/k) int s F(s) sinh(k s) ds
  double c1_fit = 0.0;       // r e^{k r} h -> c1, fitted as c + e/r
  double d1_integral = 0.0;  // 4 pi int r^2 Q^{p-1} h
  double d1_fit = 0.0;       // 4 pi * lim r (B - B_inf), fitted as B_inf + d/r
  double b_inf = 0.0;
  double envelope_constant = 0.0;  // sup |h| r e^{k r} over the window
  double last_zero = 0.0;          // largest r < window_end with a sign change of h
};

/// Both routes to the tail constants of a candidate, all restricted to the
/// window [0, window_end] where the candidate was integrated.
inline TailConstants tail_constants(const KernelCandidate& cand,
                                    const GroundStateSolution& gs, double p) {
  require_same_grid(cand.w, gs.Q);
  const auto& g = gs.Q.grid();
  const auto r = g.nodes();
  const auto vol = g.weights();
  const double k = std::sqrt(gs.omega);
  const double R = cand.window_end > 0.0 ? cand.window_end : g.r_max();
  TailConstants t;
  std::size_t last = 0;
  for (std::size_t i = 0; i < g.size() && r[i] <= R; ++i) {
    last = i;
    const double q = gs.Q[i];
    const double qpm1 = std::pow(q, p - 1.0);
    const double f = p * cand.B[i] * qpm1 + (p - 1.0) * gs.A[i] * (qpm1 / q) * cand.w[i];
    t.c1_integral += four_pi * vol[i] * f;
    t.c1_green += vol[i] / (r[i] * r[i]) * r[i] * f * std::sinh(k * r[i]) / k;
    t.d1_integral += four_pi * vol[i] * qpm1 * cand.w[i];
    t.envelope_constant =
        std::max(t.envelope_constant, std::abs(cand.w[i]) * r[i] * std::exp(k * r[i]));
    if (i > 0 && (cand.w[i] > 0) != (cand.w[i - 1] > 0)) t.last_zero = r[i];
  }
  // least squares on the outer third of the window
  auto fit = [&](auto&& y) {
    double s1 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i <= last; ++i) {
      if (r[i] < 2.0 * R / 3.0) continue;
      const double x = 1.0 / r[i], v = y(i);
      s1 += 1;
      sx += x;
      sy += v;
      sxx += x * x;
      sxy += x * v;
    }
    const double det = s1 * sxx - sx * sx;
    if (s1 < 3 || det == 0.0)
      throw Error(ErrorCode::fit_window_too_short, "tail window too short");
    return std::array<double, 2>{(sxx * sy - sx * sxy) / det, (s1 * sxy - sx * sy) / det};
  };
  t.c1_fit = fit([&](std::size_t i) { return cand.w[i] * r[i] * std::exp(k * r[i]); })[0];
  const auto bf = fit([&](std::size_t i) { return cand.B[i]; });
  t.b_inf = bf[0];
  t.d1_fit = four_pi * bf[1];
  return t;
}

/// Scans theta over the half circle, refines every sign change of the
/// terminal amplitude and classifies each direction.
inline KernelScan kernel_scan(const GroundStateSolution& gs, double p,
                              const KernelScanOptions& opt = {}) {
  using namespace lin_detail;
  if (opt.n_angles < 2) throw Error(ErrorCode::invalid_count, "n_angles >= 2");
  KernelScan scan;
  const auto bg = background(gs, opt);
  scan.window_end = bg.r_window;
  const double pi = std::numbers::pi;
  for (int k = 1; k <= opt.n_angles; ++k) {
    const double th = (k - 0.5) * pi / opt.n_angles;
    scan.angles.push_back(make_candidate(th, p, bg, gs, opt));
  }
  for (const auto& c : scan.angles)
    if (c.classification == KernelClass::indeterminate)
      scan.warnings.add("indeterminate-classification at theta = " +
                        std::to_string(c.theta));
  // theta and theta + pi describe the same direction up to sign, so the
  // terminal amplitude on the half circle changes sign once per root
  for (int k = 0; k + 1 < opt.n_angles; ++k) {
    const auto& a = scan.angles[k];
    const auto& b = scan.angles[k + 1];
    if ((a.terminal_amplitude > 0) == (b.terminal_amplitude > 0)) continue;
    ++scan.dimension_estimate;
    double lo = a.theta, hi = b.theta, flo = a.terminal_amplitude;
    for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double w0 = std::cos(mid), b0 = std::sin(mid);
      const auto s = shoot_kernel(w0, b0, p, bg, gs.Q.grid(), opt);
      const double f = growing_coefficient(s.w_end, s.dw_end, bg.r_window, std::sqrt(bg.omega));
      if ((f > 0) == (flo > 0)) {
        lo = mid;
        flo = f;
      } else {
        hi = mid;
      }
    }
    auto cand = make_candidate(0.5 * (lo + hi), p, bg, gs, opt);
    cand.refined = true;
    try {
      const auto tc = tail_constants(cand, gs, p);
      cand.c1 = tc.c1_integral;
      cand.d1 = tc.d1_integral;
      const double bscale = std::max(std::abs(cand.b0), std::abs(cand.w0));
      if (std::abs(tc.b_inf) <= 1e-6 * bscale &&
          cand.classification == KernelClass::decaying)
        ++scan.strict_kernel_count;
    } catch (const Error&) {
      scan.warnings.add("tail constants unavailable for a candidate");
    }
    scan.candidates.push_back(std::move(cand));
  }
  if (scan.dimension_estimate > 2)
    scan.warnings.add("dimension estimate above 2");
  return scan;
}

/// The refined candidate whose envelope grows least, if any.
inline const KernelCandidate* best_candidate(const KernelScan& scan) {
  const KernelCandidate* best = nullptr;
  for (const auto& c : scan.candidates)
    if (!best || c.growth_score < best->growth_score) best = &c;
  return best;
}

struct EnergyCurve {
  std::vector<double> eps_values;
  std::vector<double> K_values;    // direct energy of the normalised profile
  std::vector<double> K_closed;    // closed form including <grad Q, grad h>
  std::vector<double> K_literal;   // closed form without the cross term
  double K0 = 0.0;
  double first_derivative = 0.0;   // K'(0), central difference
  double second_derivative = 0.0;  // K''(0), central difference
  double third_derivative = 0.0;
  double fitted_order = 0.0;       // log-log slope of |K - K0 - eps K'(0)|
  double max_discrepancy = 0.0;    // max |K_closed - K_direct| / |K_direct|
  double max_literal_discrepancy = 0.0;
  double cross_term = 0.0;         // <grad Q, grad h>
  double eps_max = 0.0;
  double max_mass_error = 0.0;     // max | ||v_eps||^2 - sigma | / sigma
};

/// Projects h orthogonally to Q and scales it to unit norm.
inline RadialProfile orthonormalise(const RadialProfile& h,
                                    const RadialProfile& q) {
  const double c = inner(h, q) / inner(q, q);
  auto v = axpby(1.0, h, -c, q);
  const double nv = l2_norm(v);
  if (!(nv > 0.0)) throw Error(ErrorCode::zero_profile, "h is parallel to Q");
  return v.scaled(1.0 / nv);
}

/// Largest eps keeping Q + eps h positive, times the safety factor.
inline double positivity_limit(const RadialProfile& q, const RadialProfile& h,
                               double factor = 0.5) {
  double m = INFINITY;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (h[i] != 0.0) m = std::min(m, q[i] / std::abs(h[i]));
  return factor * m;
}

/// K(eps) = E(sqrt(sigma) (Q + eps h)/||Q + eps h||) on eps values
/// logarithmic in [1e-4, eps_max]; h is made orthonormal to Q first.
inline EnergyCurve energy_curve(const GroundStateSolution& gs,
                                const RadialProfile& h_in, double eps_max,
                                int n_eps) {
  const double p = gs.p;
  const auto& Q = gs.Q;
  const auto h = orthonormalise(h_in, Q);
  const double sigma = inner(Q, Q);
  const double limit = positivity_limit(Q, h, 1.0);
  if (eps_max <= 0.0) eps_max = 0.5 * limit;
  if (!(eps_max < limit))
    throw Error(ErrorCode::positivity_violation,
                "Q + eps h is not positive for eps <= eps_max",
                {{"eps_max", eps_max}, {"limit", limit}});
  if (n_eps < 4) throw Error(ErrorCode::invalid_count, "n_eps >= 4");
  const double eps_min = std::min(1e-4, 0.1 * eps_max);

  EnergyCurve c;
  c.eps_max = eps_max;
  const double G = grad_inner(Q, Q);
  const double H = grad_inner(h, h);
  c.cross_term = grad_inner(Q, h);

  auto direct = [&](double e) {
    const auto v = axpby(1.0, Q, e, h);
    const double m = inner(v, v);
    return energy(v.scaled(std::sqrt(sigma / m)), p);
  };
  auto closed = [&](double e, bool with_cross) {
    const auto v = axpby(1.0, Q, e, h);
    const double m = sigma + e * e;
    const double grad = G + (with_cross ? 2.0 * e * c.cross_term : 0.0) + e * e * H;
    return sigma * grad / (2.0 * m) -
           std::pow(sigma, p) * d_pair(v, p) / (2.0 * p * std::pow(m, p));
  };

  c.K0 = direct(0.0);
  for (int i = 0; i < n_eps; ++i) {
    const double e = eps_min * std::pow(eps_max / eps_min,
                                        static_cast<double>(i) / (n_eps - 1));
    const double kd = direct(e);
    const double kc = closed(e, true);
    const double kl = closed(e, false);
    c.eps_values.push_back(e);
    c.K_values.push_back(kd);
    c.K_closed.push_back(kc);
    c.K_literal.push_back(kl);
    c.max_discrepancy = std::max(c.max_discrepancy, std::abs(kc - kd) / std::abs(kd));
    c.max_literal_discrepancy =
        std::max(c.max_literal_discrepancy, std::abs(kl - kd) / std::abs(kd));
    const auto v = axpby(1.0, Q, e, h);
    c.max_mass_error =
        std::max(c.max_mass_error, std::abs(inner(v, v) - (sigma + e * e)) / sigma);
  }

  const double d = std::max(eps_min, 1e-3 * eps_max);
  const double kp = direct(d), km = direct(-d);
  const double kp2 = direct(2 * d), km2 = direct(-2 * d);
  c.first_derivative = (kp - km) / (2 * d);
  c.second_derivative = (kp - 2 * c.K0 + km) / (d * d);
  c.third_derivative = (kp2 - 2 * kp + 2 * km - km2) / (2 * d * d * d);

  // slope over the lower half of the eps grid
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int i = 0; i < (n_eps + 1) / 2; ++i) {
    const double e = c.eps_values[i];
    const double y = std::abs(c.K_values[i] - c.K0 - e * c.first_derivative);
    if (!(y > 0.0)) continue;
    const double lx = std::log(e), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  c.fitted_order = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : NAN;
  return c;
}

/// Seed of the generator for random perturbation directions.
inline constexpr std::uint64_t direction_seed = 20240607;

/// n directions h = Q g(r), g = sum_k a_k cos(k pi r / r_s), made orthonormal
/// to Q. The coefficients come straight from mt19937_64 output so that the
/// directions are identical on every platform.
inline std::vector<RadialProfile> random_directions(const GroundStateSolution& gs,
                                                    int n, int modes = 6,
                                                    std::uint64_t seed = direction_seed) {
  std::mt19937_64 gen(seed);
  const double rs = gs.resolved_radius > 0.0 ? gs.resolved_radius : gs.Q.grid().r_max();
  const double pi = std::numbers::pi;
  std::vector<RadialProfile> out;
  for (int j = 0; j < n; ++j) {
    std::vector<double> a(modes);
    for (auto& x : a) x = 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0;
    auto h = RadialProfile::sample(gs.Q.grid_ptr(), [&](double r) {
      double g = 0.0;
      for (int k = 0; k < modes; ++k) g += a[k] * std::cos(k * pi * std::min(r, rs) / rs);
      return g;
    });
    out.push_back(orthonormalise(product(h, gs.Q), gs.Q));
  }
  return out;
}

}  // namespace choquard
