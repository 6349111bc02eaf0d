#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "choquard/error.hpp"

namespace choquard {

template <std::size_t N>
using State = std::array<double, N>;

struct StepControl {
  double rtol = 1e-11;
  double atol = 1e-15;
  double h_init = 1e-3;
  double h_max = 0.25;
  double h_min = 1e-14;
  std::size_t max_steps = 5'000'000;
};

template <std::size_t N>
class Dopri5 {
 public:
  explicit Dopri5(StepControl ctl) : ctl_(ctl), h_(ctl.h_init) {}

  /// Advances y from t to t_end (either direction). The observer is called
  /// after every accepted step as obs(t, y) and may return false to stop;
  /// the return value is the time actually reached.
  template <class Rhs, class Observer>
  double advance(Rhs&& f, State<N>& y, double t, double t_end, Observer&& obs) {
    const double dir = t_end >= t ? 1.0 : -1.0;
    if (t == t_end) return t;
    State<N> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, err;
    f(t, y, k1);
    std::size_t steps = 0;
    double h = std::min(std::abs(h_), ctl_.h_max);
    while (dir * (t_end - t) > 0.0) {
      if (++steps > ctl_.max_steps)
        throw Error(ErrorCode::step_underflow, "integrator step budget exhausted");
      bool last = false;
      if (h >= std::abs(t_end - t)) {
        h = std::abs(t_end - t);
        last = true;
      }
      const double hs = dir * h;

      for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hs * (a21 * k1[i]);
      f(t + c2 * hs, ytmp, k2);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      f(t + c3 * hs, ytmp, k3);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      f(t + c4 * hs, ytmp, k4);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                               a54 * k4[i]);
      f(t + c5 * hs, ytmp, k5);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                               a64 * k4[i] + a65 * k5[i]);
      f(t + hs, ytmp, k6);
      for (std::size_t i = 0; i < N; ++i)
        ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                               b5 * k5[i] + b6 * k6[i]);
      f(t + hs, ynew, k7);
      double en = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                       e6 * k6[i] + e7 * k7[i]);
        const double sc =
            ctl_.atol + ctl_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        en = std::max(en, std::abs(err[i]) / sc);
      }
      if (!std::isfinite(en)) {
        // shrink hard; a genuine non-finite state is reported below
        bool finite_state = true;
        for (double v : ynew) finite_state = finite_state && std::isfinite(v);
        if (!finite_state && h <= ctl_.h_min)
          throw Error(ErrorCode::nan_detected, "non-finite state at r = " +
                                                   std::to_string(t));
        h *= 0.1;
        if (h < ctl_.h_min)
          throw Error(ErrorCode::nan_detected,
                      "non-finite state at r = " + std::to_string(t));
        continue;
      }
      if (en <= 1.0) {
        t = last ? t_end : t + hs;
        y = ynew;
        k1 = k7;
        const double fac = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
        if (!last) h = std::min(h * fac, ctl_.h_max);
        h_ = std::max(h, ctl_.h_min);
        if (!obs(t, std::as_const(y))) return t;
      } else {
        h *= std::max(0.2, 0.9 * std::pow(en, -0.25));
        if (h < ctl_.h_min)
          throw Error(ErrorCode::step_underflow,
                      "step size underflow at r = " + std::to_string(t));
      }
    }
    return t;
  }

  template <class Rhs>
  double advance(Rhs&& f, State<N>& y, double t, double t_end) {
    return advance(f, y, t, t_end, [](double, const State<N>&) { return true; });
  }

 private:
  StepControl ctl_;
  double h_;

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace choquard
