#pragma once

// Two-parameter shooting for the radial ground state of
//     Q'' + 2Q'/r = omega Q - A Q^{p-1},   A'' + 2A'/r = -Q^p,
//     Q(0) = Q0, A(0) = A0, Q'(0) = A'(0) = 0.
//
// The shooter always works at omega = 1; other frequencies and masses are
// reached with the dilation u -> lambda^{2/(p-1)} u(lambda r), omega ->
// lambda^2 omega, which maps solutions to solutions (A scales like Q).
//
// Inner loop: for fixed A0, bisection on Q0 between an overshoot (Q crosses
// zero) and an undershoot (Q turns up) trajectory. Outer loop: bracketing
// root search on A0 for the decay condition A0 = int_0^inf s Q^p ds.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "choquard/functionals.hpp"
#include "choquard/ode.hpp"
#include "choquard/radial_core.hpp"
#include "choquard/series_launch.hpp"

namespace choquard {

/// u -> lambda^a u(lambda r) maps solutions at omega to solutions at
/// lambda^2 omega.
inline double dilation_exponent(double p) { return 2.0 / (p - 1.0); }

enum class ShotEvent { overshoot, undershoot, arrival };

inline std::string_view to_string(ShotEvent e) {
  switch (e) {
    case ShotEvent::overshoot: return "overshoot";
    case ShotEvent::undershoot: return "undershoot";
    case ShotEvent::arrival: return "arrival";
  }
  return "arrival";
}

struct EventLog {
  ShotEvent event = ShotEvent::arrival;
  double r_event = 0.0;
  double q_event = 0.0;
  double dq_event = 0.0;
  /// int_0^{r_event} s |Q|^p ds
  double s_moment = 0.0;
  bool blow_up = false;
};

struct Trajectory {
  // samples at the requested output radii that were reached
  std::vector<double> r, q, dq, a, da;
  EventLog log;
};

struct IntegrateOptions {
  std::span<const double> outputs;  // ascending radii to record
  double classify_threshold = 1e6;  // |Q| > threshold * Q0 is a blow-up
  bool stop_on_event = true;
};

namespace shooting_detail {

inline StepControl step_control(double tol) {
  StepControl c;
  c.rtol = tol;
  c.atol = 1e-3 * tol * 1e-6;
  c.h_init = 1e-3;
  c.h_max = 0.25;
  return c;
}

/// int_0^{r_L} s |Q|^p ds from the series (Simpson, 64 panels).
inline double series_moment(const SeriesLaunch& s, double p) {
  const int n = 64;
  const double h = s.launch_radius / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = i * h;
    const double q = evaluate_series(s, r, true).first.value;
    const double f = r * std::pow(std::abs(q), p);
    const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += wgt * f;
  }
  return acc * h / 3.0;
}

}  // namespace shooting_detail

/// Integrates the (Q, Q', A, A') system from the launch radius to r_max,
/// classifying the trajectory as it goes.
inline Trajectory integrate(const SeriesLaunch& launch, double p, double omega,
                            double r_max, double tol,
                            const IntegrateOptions& opts = {}) {
  Trajectory traj;
  const double q0 = launch.q_coeffs[0];
  const double r0 = launch.launch_radius;
  const auto start = evaluate_series(launch, r0);
  // state: Q, Q', A, A', int s|Q|^p
  State<5> y{start.first.value, start.first.derivative, start.second.value,
             start.second.derivative, shooting_detail::series_moment(launch, p)};

  auto rhs = [p, omega](double r, const State<5>& s, State<5>& d) {
    const double aq = std::abs(s[0]);
    const double qpm2 = aq == 0.0 ? 0.0 : std::pow(aq, p - 2.0);
    const double qp = aq * aq * qpm2;
    d[0] = s[1];
    d[1] = omega * s[0] - s[2] * qpm2 * s[0] - 2.0 * s[1] / r;
    d[2] = s[3];
    d[3] = -qp - 2.0 * s[3] / r;
    d[4] = r * qp;
  };

  bool classified = false;
  double r_prev = r0;
  State<5> y_prev = y;
  auto classify = [&](double r, const State<5>& s) {
    if (classified) return;
    auto mark = [&](ShotEvent e) {
      classified = true;
      traj.log.event = e;
      traj.log.r_event = r;
      traj.log.q_event = s[0];
      traj.log.dq_event = s[1];
      traj.log.s_moment = s[4];
    };
    if (s[0] <= 0.0) {
      mark(ShotEvent::overshoot);
      // linear interpolation to the crossing
      const double t = y_prev[0] / (y_prev[0] - s[0]);
      traj.log.r_event = r_prev + t * (r - r_prev);
      traj.log.dq_event = y_prev[1] + t * (s[1] - y_prev[1]);
      traj.log.q_event = 0.0;
      traj.log.s_moment = y_prev[4] + t * (s[4] - y_prev[4]);
    } else if (s[1] > 0.0) {
      mark(ShotEvent::undershoot);
    } else if (std::abs(s[0]) > opts.classify_threshold * std::max(q0, 1e-300)) {
      mark(ShotEvent::undershoot);
      traj.log.blow_up = true;
    }
  };

  classify(r0, y);
  Dopri5<5> stepper(shooting_detail::step_control(tol));
  auto observer = [&](double r, const State<5>& s) {
    classify(r, s);
    r_prev = r;
    y_prev = s;
    return !(classified && opts.stop_on_event);
  };

  auto record = [&](double r, const State<5>& s) {
    traj.r.push_back(r);
    traj.q.push_back(s[0]);
    traj.dq.push_back(s[1]);
    traj.a.push_back(s[2]);
    traj.da.push_back(s[3]);
  };

  double r = r0;
  bool stopped = classified && opts.stop_on_event;
  for (double target : opts.outputs) {
    if (stopped || target > r_max) break;
    if (target <= r0) {
      const auto v = evaluate_series(launch, target);
      record(target, {v.first.value, v.first.derivative, v.second.value,
                      v.second.derivative, 0.0});
      continue;
    }
    const double reached = stepper.advance(rhs, y, r, target, observer);
    r = reached;
    if (reached < target) {
      stopped = true;
      break;
    }
    record(target, y);
  }
  if (!stopped && r < r_max) {
    r = stepper.advance(rhs, y, r, r_max, observer);
  }
  if (!classified) {
    traj.log.event = ShotEvent::arrival;
    traj.log.r_event = r;
    traj.log.q_event = y[0];
    traj.log.dq_event = y[1];
    traj.log.s_moment = y[4];
  }
  return traj;
}

/// A0 - int_0^{r_event} s Q^p ds: zero for the decaying potential.
inline double a_infinity_defect(const Trajectory& traj, double a0) {
  return a0 - traj.log.s_moment;
}

/// Same quantity for a profile sampled on a grid.
inline double a_infinity_defect(const RadialProfile& q, double p, double a0) {
  const auto k = q.grid().inverse_radii();
  const auto w = q.grid().weights();
  double m = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    m += w[i] * std::pow(std::abs(q[i]), p) * k[i];
  return a0 - m;
}

/// Jump of the derivative of |u| at the first zero crossing, 2|u'(r0)|.
/// Nonzero means |u| cannot solve the radial equation across r0.
inline double zero_crossing_kink(const Trajectory& traj) {
  if (traj.log.event != ShotEvent::overshoot) return 0.0;
  return 2.0 * std::abs(traj.log.dq_event);
}

struct ShootingConfig {
  std::array<double, 2> q0_bracket{1e-2, 1e2};
  std::array<double, 2> a0_bracket{1e-2, 1e2};
  double r_max = 40.0;
  std::size_t n_nodes = 8192;
  GridKind grid_kind = GridKind::uniform;
  double integrator_tol = 1e-12;
  double classify_threshold = 1e6;
  int max_iter = 200;
  int series_order = 4;
  double series_tol = 1e-12;
  int q0_scan_points = 48;
  int a0_scan_points = 16;
  double pohozaev_tol = 1e-3;
  double potential_consistency_tol = 1e-4;

  void validate() const {
    if (!(q0_bracket[0] > 0.0 && q0_bracket[1] > q0_bracket[0]))
      throw Error(ErrorCode::no_bracket, "q0 bracket must be positive and nonempty");
    if (!(a0_bracket[0] > 0.0 && a0_bracket[1] > a0_bracket[0]))
      throw Error(ErrorCode::no_bracket, "a0 bracket must be positive and nonempty");
    if (!(r_max > 1.0)) throw Error(ErrorCode::invalid_radius, "r_max too small");
  }
};

/// Converged omega = 1 shooting data; enough to rebuild the profile on any grid.
struct ShootingKey {
  double a0 = 0.0;
  double q0_lo = 0.0;  // overshoot side
  double q0_hi = 0.0;  // undershoot side
  double p = 0.0;
  double integrator_tol = 1e-12;
  int series_order = 4;
  double series_tol = 1e-12;
  double classify_threshold = 1e6;

  double q0() const { return 0.5 * (q0_lo + q0_hi); }
};

struct TailFit {
  double c0 = 0.0;
  double d0 = 0.0;
  double decay_rate = 0.0;
  double ra_flatness = 0.0;  // (max - min)/mean of r A(r) over the outer quarter
  double window_lo = 0.0;
  double window_hi = 0.0;
};

struct GroundStateSolution {
  GroundStateSolution(RadialProfile q, RadialProfile a) : Q(std::move(q)), A(std::move(a)) {}

  RadialProfile Q;
  RadialProfile A;
  double p = 2.0;
  double q0 = 0.0;
  double a0 = 0.0;
  double omega = 1.0;
  double sigma = 0.0;
  double energy = 0.0;
  IdentityReport report;
  TailFit tail;
  std::string method;                // "shooting" or "flow"
  std::optional<ShootingKey> key;    // omega = 1 data, shooting only
  double dilation = 1.0;             // lambda relative to the omega = 1 state
  double resolved_radius = 0.0;      // last radius reached by the shot itself
  double potential_consistency = 0.0;  // sup |A_int - I(Q^p)| / sup |A_int|
  nlohmann::json diagnostics = nlohmann::json::object();

  ModelParams params() const { return {p, omega, sigma}; }
};

/// Least-squares fit of log(r Q) = log c0 - k r over the outer third of the
/// support of Q; r A(r) -> d0.
inline TailFit tail_fit(const RadialProfile& q, const RadialProfile& a) {
  const auto r = q.grid().nodes();
  std::size_t last = q.size();
  while (last > 0 && !(q[last - 1] > 0.0)) --last;
  if (last < 24)
    throw Error(ErrorCode::fit_window_too_short, "profile support too short");
  const double r_hi = r[last - 1];
  const double r_lo = 2.0 * r_hi / 3.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < last; ++i) {
    if (r[i] < r_lo) continue;
    const double x = r[i], yv = std::log(r[i] * q[i]);
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
    ++m;
  }
  if (m < 8)
    throw Error(ErrorCode::fit_window_too_short,
                "fewer than 8 nodes in the tail window");
  const double dm = static_cast<double>(m);
  const double slope = (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / dm;

  TailFit fit;
  fit.decay_rate = -slope;
  fit.c0 = std::exp(icpt);
  fit.window_lo = r_lo;
  fit.window_hi = r_hi;
  fit.d0 = r_hi * a[last - 1];

  const double q_lo = 0.75 * r_hi;
  double mn = INFINITY, mx = -INFINITY, sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < last; ++i) {
    if (r[i] < q_lo) continue;
    const double v = r[i] * a[i];
    mn = std::min(mn, v);
    mx = std::max(mx, v);
    sum += v;
    ++cnt;
  }
  fit.ra_flatness = cnt ? (mx - mn) / (sum / static_cast<double>(cnt)) : NAN;
  return fit;
}

inline TailFit tail_fit(const GroundStateSolution& gs) {
  return tail_fit(gs.Q, gs.A);
}

namespace shooting_detail {

struct Shot {
  EventLog log;
};

inline EventLog shoot_once(double q0, double a0, double p, double tol,
                           const ShootingConfig& cfg, double r_max) {
  SeriesOptions so;
  so.tol = cfg.series_tol;
  const auto s = ground_series(q0, a0, p, 1.0, cfg.series_order, so);
  IntegrateOptions io;
  io.classify_threshold = cfg.classify_threshold;
  return integrate(s, p, 1.0, r_max, tol, io).log;
}

struct Separatrix {
  double q_lo = 0.0, q_hi = 0.0;  // overshoot / undershoot
  EventLog lo, hi;
  int iterations = 0;
  int switches_seen = 0;  // number of event changes seen in the scan

  double moment() const { return 0.5 * (lo.s_moment + hi.s_moment); }
};

/// Largest Q0 where the event changes from overshoot (below) to undershoot
/// (above), for fixed A0.
inline std::optional<Separatrix> find_separatrix(
    double a0, double p, const ShootingConfig& cfg, double r_max,
    std::optional<std::array<double, 2>> hint = std::nullopt,
    bool check_monotone = false) {
  const double tol = cfg.integrator_tol;
  Separatrix sep;
  bool have = false;

  if (hint) {
    const auto lo = shoot_once((*hint)[0], a0, p, tol, cfg, r_max);
    const auto hi = shoot_once((*hint)[1], a0, p, tol, cfg, r_max);
    if (lo.event == ShotEvent::overshoot && hi.event == ShotEvent::undershoot) {
      sep.q_lo = (*hint)[0];
      sep.q_hi = (*hint)[1];
      sep.lo = lo;
      sep.hi = hi;
      have = true;
    }
  }
  if (!have) {
    const double factor =
        std::pow(cfg.q0_bracket[1] / cfg.q0_bracket[0],
                 1.0 / std::max(1, cfg.q0_scan_points - 1));
    double q = cfg.q0_bracket[1];
    auto ev = shoot_once(q, a0, p, tol, cfg, r_max);
    if (ev.event == ShotEvent::overshoot) return std::nullopt;
    ShotEvent prev_event = ev.event;
    while (q > cfg.q0_bracket[0] * (1.0 - 1e-12)) {
      const double qn = q / factor;
      const auto en = shoot_once(qn, a0, p, tol, cfg, r_max);
      if (en.event != prev_event) ++sep.switches_seen;
      prev_event = en.event;
      if (en.event == ShotEvent::overshoot) {
        sep.q_lo = qn;
        sep.lo = en;
        sep.q_hi = q;
        sep.hi = ev;
        have = true;
        break;
      }
      q = qn;
      ev = en;
    }
    if (!have) return std::nullopt;
  }

  if (check_monotone) {
    // the event type must change exactly once across the bracket
    int changes = 0;
    ShotEvent last = ShotEvent::overshoot;
    for (int k = 1; k <= 7; ++k) {
      const double q = sep.q_lo * std::pow(sep.q_hi / sep.q_lo, k / 8.0);
      const auto e = shoot_once(q, a0, p, tol, cfg, r_max).event;
      if (e != last) ++changes;
      last = e;
    }
    if (last != ShotEvent::undershoot) ++changes;
    if (changes > 1)
      throw Error(ErrorCode::invariant_violation,
                  "event type not monotone in Q0 across the final bracket",
                  {{"a0", a0}, {"q0_lo", sep.q_lo}, {"q0_hi", sep.q_hi}});
  }

  for (int it = 0; it < cfg.max_iter; ++it) {
    const double mid = 0.5 * (sep.q_lo + sep.q_hi);
    if (!(mid > sep.q_lo && mid < sep.q_hi)) break;
    const auto e = shoot_once(mid, a0, p, tol, cfg, r_max);
    ++sep.iterations;
    if (e.event == ShotEvent::overshoot) {
      sep.q_lo = mid;
      sep.lo = e;
    } else if (e.event == ShotEvent::undershoot) {
      sep.q_hi = mid;
      sep.hi = e;
    } else {
      sep.q_lo = sep.q_hi = mid;
      sep.lo = sep.hi = e;
      break;
    }
  }
  return sep;
}

}  // namespace shooting_detail

struct ShootingSearch {
  ShootingKey key;
  nlohmann::json diagnostics;
};

/// Finds (Q0, A0) of the omega = 1 ground state.
inline ShootingSearch find_shooting_parameters(double p,
                                               const ShootingConfig& cfg,
                                               double r_max_classify = 0.0) {
  using namespace shooting_detail;
  cfg.validate();
  if (!(p > p_lower && p < p_upper))
    throw Error(ErrorCode::out_of_range, "p must lie in (5/3, 3)");
  const double r_max = r_max_classify > 0.0 ? r_max_classify : cfg.r_max;

  nlohmann::json diag;
  diag["scan"] = nlohmann::json::array();

  // outer scan over A0
  struct Sample {
    double a0;
    Separatrix sep;
    double defect;
  };
  struct ScanPoint {
    double a0;
    std::optional<Sample> sample;
  };
  auto probe = [&](double a0) -> ScanPoint {
    auto sep = find_separatrix(a0, p, cfg, r_max);
    if (!sep) return {a0, std::nullopt};
    return {a0, Sample{a0, *sep, a0 - sep->moment()}};
  };
  std::vector<ScanPoint> scan;
  const double factor = std::pow(cfg.a0_bracket[1] / cfg.a0_bracket[0],
                                 1.0 / std::max(1, cfg.a0_scan_points - 1));
  double a = cfg.a0_bracket[0];
  for (int k = 0; k < cfg.a0_scan_points; ++k, a *= factor)
    scan.push_back(probe(a));

  std::vector<Sample> samples;
  std::vector<std::size_t> roots;
  auto collect = [&] {
    samples.clear();
    roots.clear();
    for (const auto& pt : scan)
      if (pt.sample) samples.push_back(*pt.sample);
    for (std::size_t i = 0; i + 1 < samples.size(); ++i)
      if ((samples[i].defect > 0) != (samples[i + 1].defect > 0))
        roots.push_back(i);
  };
  collect();
  // the root can sit just inside the edge of the A0 range where a
  // separatrix exists; refine around that edge
  for (int round = 0; round < 4 && roots.empty(); ++round) {
    std::vector<ScanPoint> extra;
    for (std::size_t i = 0; i + 1 < scan.size(); ++i) {
      if (scan[i].sample.has_value() == scan[i + 1].sample.has_value()) continue;
      const double f = std::pow(scan[i + 1].a0 / scan[i].a0, 1.0 / 9.0);
      for (int k = 1; k < 9; ++k)
        extra.push_back(probe(scan[i].a0 * std::pow(f, k)));
    }
    if (extra.empty()) break;
    scan.insert(scan.end(), extra.begin(), extra.end());
    std::sort(scan.begin(), scan.end(),
              [](const ScanPoint& x, const ScanPoint& y) { return x.a0 < y.a0; });
    collect();
  }
  for (const auto& pt : scan) {
    if (pt.sample)
      diag["scan"].push_back({{"a0", pt.a0},
                              {"separatrix", true},
                              {"q0", pt.sample->sep.q_lo},
                              {"defect", pt.sample->defect}});
    else
      diag["scan"].push_back({{"a0", pt.a0}, {"separatrix", false}});
  }
  diag["sign_changes"] = roots.size();
  if (roots.size() > 1) diag["multiple_roots"] = true;
  if (roots.empty())
    throw Error(ErrorCode::no_bracket,
                "no sign change of the decay defect over the A0 bracket", diag);

  Sample lo = samples[roots.front()];
  Sample hi = samples[roots.front() + 1];

  // Illinois-safeguarded regula falsi on A0; every evaluation is an inner
  // bisection warm-started between the neighbouring separatrices.
  auto eval = [&](double a0, const Sample& l, const Sample& h) -> Sample {
    const double qa = std::min(l.sep.q_lo, h.sep.q_lo);
    const double qb = std::max(l.sep.q_hi, h.sep.q_hi);
    auto sep = find_separatrix(a0, p, cfg, r_max,
                               std::array<double, 2>{qa * 0.98, qb * 1.02});
    if (!sep)
      throw Error(ErrorCode::no_bracket,
                  "lost the Q0 separatrix inside the A0 bracket",
                  {{"a0", a0}});
    return {a0, *sep, a0 - sep->moment()};
  };

  int side = 0;
  int outer_it = 0;
  bool converged = false;
  for (; outer_it < cfg.max_iter; ++outer_it) {
    const double width = hi.a0 - lo.a0;
    if (std::abs(width) <= 4.0 * std::numeric_limits<double>::epsilon() *
                               std::abs(hi.a0)) {
      converged = true;
      break;
    }
    double x = (lo.a0 * hi.defect - hi.a0 * lo.defect) / (hi.defect - lo.defect);
    if (!(x > lo.a0 && x < hi.a0)) x = 0.5 * (lo.a0 + hi.a0);
    const Sample s = eval(x, lo, hi);
    if (std::abs(s.defect) <= 1e-14 * std::abs(x)) {
      lo = hi = s;
      converged = true;
      break;
    }
    // Illinois: halve the stale end when the same end is retained twice
    if ((s.defect > 0) == (lo.defect > 0)) {
      lo = s;
      if (side == +1) hi.defect *= 0.5;
      side = +1;
    } else {
      hi = s;
      if (side == -1) lo.defect *= 0.5;
      side = -1;
    }
  }
  if (!converged)
    throw Error(ErrorCode::max_iter, "A0 search did not converge", diag);

  const Sample& best = std::abs(lo.defect) <= std::abs(hi.defect) ? lo : hi;
  // final inner solve from a fresh scan with the monotonicity check
  auto final_sep = find_separatrix(best.a0, p, cfg, r_max, std::nullopt, true);
  if (!final_sep)
    throw Error(ErrorCode::no_bracket, "separatrix lost at converged A0", diag);

  ShootingSearch out;
  out.key.a0 = best.a0;
  out.key.q0_lo = final_sep->q_lo;
  out.key.q0_hi = final_sep->q_hi;
  out.key.p = p;
  out.key.integrator_tol = cfg.integrator_tol;
  out.key.series_order = cfg.series_order;
  out.key.series_tol = cfg.series_tol;
  out.key.classify_threshold = cfg.classify_threshold;
  diag["outer_iterations"] = outer_it;
  diag["inner_iterations"] = final_sep->iterations;
  diag["defect"] = best.a0 - final_sep->moment();
  diag["r_event"] = {final_sep->lo.r_event, final_sep->hi.r_event};
  out.diagnostics = std::move(diag);
  return out;
}

struct AssembledProfile {
  std::vector<double> q, a;  // on the requested nodes (omega = 1 coordinates)
  std::size_t resolved = 0;  // nodes [0, resolved) come from the shot itself
  double tail_mismatch = 0.0;  // relative jump of Q'/Q where the tail is joined
};

namespace shooting_detail {

/// Decaying solution of Q'' + 2Q'/r = (1 - V(r)) Q integrated backward from
/// the last node (where it is stable) and returned on nodes[from..].
template <class Potential>
std::vector<double> backward_tail(std::span<const double> nodes,
                                  std::size_t from, Potential&& v, double tol,
                                  double* log_derivative_at_from) {
  const std::size_t n = nodes.size();
  std::vector<double> out(n - from, 0.0);
  const double rmax = nodes[n - 1];
  const double k = std::sqrt(std::max(1.0 - v(rmax), 1e-6));
  // state: log Q, (log Q)'  is unstable backwards; integrate Q itself with a
  // renormalisation after every node to stay in range
  State<2> y{1.0, -(k + 1.0 / rmax)};
  auto rhs = [&](double r, const State<2>& s, State<2>& d) {
    d[0] = s[1];
    d[1] = (1.0 - v(r)) * s[0] - 2.0 * s[1] / r;
  };
  Dopri5<2> stepper(step_control(tol));
  double log_scale = 0.0;
  out[n - 1 - from] = 1.0;  // relative to exp(log_scale) at the end
  std::vector<double> logs(n - from, 0.0);
  logs[n - 1 - from] = 0.0;
  double r = rmax;
  for (std::size_t i = n - 1; i-- > from;) {
    stepper.advance(rhs, y, r, nodes[i]);
    r = nodes[i];
    const double m = y[0];
    log_scale += std::log(std::abs(m));
    y[0] /= m;
    y[1] /= m;
    logs[i - from] = log_scale;
    if (i == from && log_derivative_at_from) *log_derivative_at_from = y[1];
  }
  // normalise to 1 at nodes[from]
  const double base = logs[0];
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::exp(logs[j] - base);
  return out;
}

}  // namespace shooting_detail

/// Rebuilds the omega = 1 profile (Q and the integrated A) on `nodes`.
/// Where the overshoot and undershoot shots separate, the solution is
/// continued by the stable backward integration of the linear tail equation.
inline AssembledProfile assemble_profile(const ShootingKey& key,
                                         std::span<const double> nodes,
                                         double join_level = 1e-5) {
  using namespace shooting_detail;
  const double p = key.p;
  SeriesOptions so;
  so.tol = key.series_tol;
  IntegrateOptions io;
  io.outputs = nodes;
  io.classify_threshold = key.classify_threshold;
  const double rmax = nodes.back();
  const auto lo = integrate(ground_series(key.q0_lo, key.a0, p, 1.0, key.series_order, so),
                            p, 1.0, rmax, key.integrator_tol, io);
  const auto hi = integrate(ground_series(key.q0_hi, key.a0, p, 1.0, key.series_order, so),
                            p, 1.0, rmax, key.integrator_tol, io);

  const std::size_t n = nodes.size();
  const std::size_t reach = std::min(lo.r.size(), hi.r.size());
  std::size_t rs = 0;
  while (rs < reach) {
    const double qm = 0.5 * (lo.q[rs] + hi.q[rs]);
    if (!(qm > 0.0) || std::abs(lo.q[rs] - hi.q[rs]) > 1e-6 * qm) break;
    if (lo.dq[rs] > 0.0 || hi.dq[rs] > 0.0) break;
    // below this level rounding in Q0 is amplified to visible size in both
    // shots alike, which the separation test cannot see
    if (qm < join_level * key.q0()) break;
    ++rs;
  }
  if (rs < 16)
    throw Error(ErrorCode::invariant_violation,
                "shots separate before the profile is resolved",
                {{"resolved_nodes", rs}});

  AssembledProfile out;
  out.q.assign(n, 0.0);
  out.a.assign(n, 0.0);
  for (std::size_t i = 0; i < rs; ++i) {
    out.q[i] = 0.5 * (lo.q[i] + hi.q[i]);
    out.a[i] = 0.5 * (lo.a[i] + hi.a[i]);
  }
  out.resolved = rs;
  if (rs == n) return out;

  // join point: last resolved node
  const std::size_t j = rs - 1;
  const double rj = nodes[j];
  const double qj = out.q[j];
  const double dqj = 0.5 * (lo.dq[j] + hi.dq[j]);
  const double aj = out.a[j];
  const double daj = 0.5 * (lo.da[j] + hi.da[j]);
  // harmonic continuation of A: alpha + beta / r
  const double beta = -rj * rj * daj;
  const double alpha = aj - beta / rj;
  auto a_tail = [alpha, beta](double r) { return alpha + beta / r; };

  // tail of Q; for p != 2 the potential A Q^{p-2} depends on Q, so iterate
  std::vector<double> shape(n - j, 0.0);
  for (std::size_t i = j; i < n; ++i)
    shape[i - j] = (rj / nodes[i]) * std::exp(-(nodes[i] - rj));
  double logd = 0.0;
  const int passes = (p == 2.0) ? 1 : 3;
  for (int pass = 0; pass < passes; ++pass) {
    auto v = [&](double r) {
      if (p == 2.0) return a_tail(r);
      // log-linear interpolation of the current tail estimate
      std::size_t i = static_cast<std::size_t>(
          std::upper_bound(nodes.begin() + j, nodes.end(), r) - nodes.begin());
      i = std::clamp<std::size_t>(i, j + 1, n - 1);
      const double r0 = nodes[i - 1], r1 = nodes[i];
      const double l0 = std::log(std::max(shape[i - 1 - j], 1e-300));
      const double l1 = std::log(std::max(shape[i - j], 1e-300));
      const double lq = l0 + (l1 - l0) * (r - r0) / (r1 - r0) + std::log(qj);
      return a_tail(r) * std::exp((p - 2.0) * lq);
    };
    shape = backward_tail(nodes, j, v, key.integrator_tol, &logd);
  }
  for (std::size_t i = j + 1; i < n; ++i) {
    out.q[i] = qj * shape[i - j];
    out.a[i] = a_tail(nodes[i]);
  }
  out.tail_mismatch = std::abs(logd - dqj / qj) / std::abs(dqj / qj);
  return out;
}

namespace shooting_detail {

inline GroundStateSolution build_solution(const ShootingKey& key, double lambda,
                                          const GridPtr& grid,
                                          const ShootingConfig& cfg,
                                          nlohmann::json diagnostics,
                                          bool enforce) {
  const double p = key.p;
  const auto ref_grid = scaled_grid(*grid, lambda);
  const auto prof = assemble_profile(key, ref_grid->nodes());
  const double amp = std::pow(lambda, dilation_exponent(p));

  std::vector<double> qv(grid->size()), av(grid->size());
  for (std::size_t i = 0; i < qv.size(); ++i) {
    qv[i] = amp * prof.q[i];
    av[i] = amp * prof.a[i];
  }
  RadialProfile q(grid, std::move(qv));
  RadialProfile a_int(grid, std::move(av));
  Warnings w;
  auto a = riesz_radial(abs_pow(q, p), &w);

  GroundStateSolution gs{std::move(q), std::move(a)};
  gs.p = p;
  gs.method = "shooting";
  gs.key = key;
  gs.dilation = lambda;
  gs.omega = lambda * lambda;
  gs.q0 = amp * key.q0();
  gs.a0 = amp * key.a0;
  gs.resolved_radius = (*grid)[prof.resolved - 1];
  gs.potential_consistency = relative_sup_distance(gs.A, a_int);
  const auto nr = norms(gs.Q, p);
  gs.sigma = nr.l2_sq;
  gs.energy = energy(gs.Q, p);
  gs.report = pohozaev_report(gs.Q, gs.params());
  gs.tail = tail_fit(gs.Q, gs.A);

  diagnostics["resolved_nodes"] = prof.resolved;
  diagnostics["tail_mismatch"] = prof.tail_mismatch;
  diagnostics["potential_consistency"] = gs.potential_consistency;
  if (!w.empty()) diagnostics["warnings"] = w.messages;
  gs.diagnostics = std::move(diagnostics);

  if (enforce) {
    std::string bad;
    for (double v : gs.Q.values())
      if (!(v > 0.0)) bad = "Q not positive on the grid";
    for (std::size_t i = 0; bad.empty() && i < gs.A.size(); ++i)
      if (!(gs.A[i] > 0.0)) bad = "A not positive on the grid";
    const auto r = grid->nodes();
    for (std::size_t i = 1; bad.empty() && i < gs.A.size(); ++i)
      if (r[i] * gs.A[i] < r[i - 1] * gs.A[i - 1] * (1.0 - 1e-12))
        bad = "r A(r) not increasing";
    if (bad.empty() && gs.report.max_pohozaev_deviation() > cfg.pohozaev_tol)
      bad = "Pohozaev residual above tolerance";
    if (bad.empty() && gs.potential_consistency > cfg.potential_consistency_tol)
      bad = "integrated A disagrees with I(Q^p)";
    if (!bad.empty()) {
      nlohmann::json d = gs.diagnostics;
      d["pohozaev_residuals"] = gs.report.pohozaev_residuals;
      throw Error(ErrorCode::invariant_violation, bad, d);
    }
  }
  return gs;
}

}  // namespace shooting_detail

/// Radial ground state at frequency omega on the grid described by cfg.
inline GroundStateSolution shoot(double p, double omega,
                                 const ShootingConfig& cfg) {
  if (!(omega > 0.0)) throw Error(ErrorCode::out_of_range, "omega must be > 0");
  const double lambda = std::sqrt(omega);
  const auto search =
      find_shooting_parameters(p, cfg, cfg.r_max * std::max(1.0, lambda));
  const auto grid = make_grid(cfg.grid_kind, cfg.n_nodes, cfg.r_max);
  return shooting_detail::build_solution(search.key, lambda, grid, cfg,
                                         search.diagnostics, true);
}

/// Applies the dilation symmetry by the factor lambda_rel (omega -> lambda^2
/// omega). Shooting states are rebuilt exactly from their key; others are
/// resampled.
inline GroundStateSolution dilate(const GroundStateSolution& gs,
                                  double lambda_rel) {
  if (!(lambda_rel > 0.0))
    throw Error(ErrorCode::out_of_range, "dilation factor must be positive");
  if (gs.key) {
    ShootingConfig cfg;
    cfg.integrator_tol = gs.key->integrator_tol;
    auto out = shooting_detail::build_solution(
        *gs.key, gs.dilation * lambda_rel, gs.Q.grid_ptr(), cfg,
        gs.diagnostics, false);
    return out;
  }
  const double amp = std::pow(lambda_rel, dilation_exponent(gs.p));
  auto q = resample_dilated(gs.Q, amp, lambda_rel);
  auto a = riesz_radial(abs_pow(q, gs.p));
  GroundStateSolution out{std::move(q), std::move(a)};
  out.p = gs.p;
  out.method = gs.method;
  out.dilation = gs.dilation * lambda_rel;
  out.omega = gs.omega * lambda_rel * lambda_rel;
  out.q0 = amp * gs.q0;
  out.a0 = amp * gs.a0;
  out.sigma = norms(out.Q, gs.p).l2_sq;
  out.energy = energy(out.Q, gs.p);
  out.report = pohozaev_report(out.Q, out.params());
  out.tail = tail_fit(out.Q, out.A);
  out.resolved_radius = gs.resolved_radius / lambda_rel;
  out.diagnostics = gs.diagnostics;
  return out;
}

/// Rescales to mass sigma_target: sigma scales as lambda^{(7-3p)/(p-1)}.
inline GroundStateSolution rescale_to_sigma(const GroundStateSolution& gs,
                                            double sigma_target) {
  if (!(sigma_target > 0.0))
    throw Error(ErrorCode::out_of_range, "sigma_target must be positive");
  const double p = gs.p;
  const double mass_exp = (7.0 - 3.0 * p) / (p - 1.0);
  if (std::abs(mass_exp) < 1e-12) {
    if (std::abs(sigma_target - gs.sigma) > 1e-12 * gs.sigma)
      throw Error(ErrorCode::gamma_equals_one,
                  "mass is dilation invariant at p = 7/3");
    return gs;
  }
  if (sigma_target == gs.sigma) return gs;
  const double lambda = std::pow(sigma_target / gs.sigma, 1.0 / mass_exp);
  return dilate(gs, lambda);
}

inline GroundStateSolution rescale_to_omega(const GroundStateSolution& gs,
                                            double omega_target) {
  if (!(omega_target > 0.0))
    throw Error(ErrorCode::out_of_range, "omega_target must be positive");
  if (omega_target == gs.omega) return gs;
  return dilate(gs, std::sqrt(omega_target / gs.omega));
}

}  // namespace choquard
