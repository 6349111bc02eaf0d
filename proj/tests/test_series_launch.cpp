#include <gtest/gtest.h>

#include <cmath>

#include "choquard/series_launch.hpp"
#include "support.hpp"

using namespace choquard;

namespace {

const double q0 = 1.02149303627, a0 = 1.93832284015;  // p = 2 ground state

double ode_residual(const SeriesLaunch& s, double p, double omega, double r) {
  const auto v = evaluate_series(s, r);
  const double q = v.first.value, a = v.second.value;
  const double rq = v.first.second + 2 * v.first.derivative / r - omega * q +
                    a * std::pow(q, p - 1);
  const double ra = v.second.second + 2 * v.second.derivative / r + std::pow(q, p);
  return std::abs(rq) + std::abs(ra);
}

SeriesOptions at(double r) {
  SeriesOptions o;
  o.launch_radius = r;
  return o;
}

}  // namespace

TEST(GroundSeries, FirstCoefficients) {
  for (double p : {2.0, 2.2, 2.7}) {
    const double omega = 1.3;
    const auto s = ground_series(q0, a0, p, omega, 4);
    EXPECT_NEAR(s.q_coeffs[1], (omega * q0 - a0 * std::pow(q0, p - 1)) / 6, 1e-14);
    EXPECT_NEAR(s.a_coeffs[1], -std::pow(q0, p) / 6, 1e-14);
    EXPECT_EQ(s.q_coeffs.size(), 5u);
    EXPECT_GT(s.launch_radius, 0.0);
  }
}

TEST(GroundSeries, ZeroData) {
  const auto s = ground_series(0.0, 0.0, 2.2, 1.0, 4);
  for (double c : s.q_coeffs) EXPECT_EQ(c, 0.0);
  for (double c : s.a_coeffs) EXPECT_EQ(c, 0.0);
}

TEST(GroundSeries, Guards) {
  EXPECT_THROW(ground_series(1.0, 1.0, 2.0, 1.0, 0), Error);
  EXPECT_THROW(ground_series(1.0, 1.0, 3.5, 1.0, 4), Error);
  EXPECT_THROW(ground_series(-1.0, 1.0, 2.0, 1.0, 4), Error);
}

TEST(GroundSeries, LaunchRadiusMeetsTolerance) {
  SeriesOptions o;
  o.tol = 1e-12;
  const auto s = ground_series(q0, a0, 2.0, 1.0, 4, o);
  const double r = s.launch_radius;
  EXPECT_LE(std::abs(s.q_next) * std::pow(r, 10), 1.01e-12 * q0 * 2);
  EXPECT_LE(r, 0.5);
}

TEST(GroundSeries, DivergenceWarning) {
  const auto s = ground_series(50.0, 10.0, 2.0, 1.0, 4, at(0.5));
  EXPECT_FALSE(s.warnings.empty());
  EXPECT_TRUE(ground_series(q0, a0, 2.0, 1.0, 4, at(0.05)).warnings.empty());
}

TEST(Evaluate, AtOrigin) {
  const auto s = ground_series(q0, a0, 2.2, 1.0, 4);
  const auto v = evaluate_series(s, 0.0);
  EXPECT_EQ(v.first.value, q0);
  EXPECT_EQ(v.first.derivative, 0.0);
  EXPECT_EQ(v.second.value, a0);
  EXPECT_EQ(v.second.derivative, 0.0);
}

TEST(Evaluate, BeyondLaunchRadius) {
  const auto s = ground_series(q0, a0, 2.0, 1.0, 4, at(0.1));
  try {
    evaluate_series(s, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::beyond_launch_radius);
  }
  EXPECT_NO_THROW(evaluate_series(s, 0.2, true));
}

TEST(Evaluate, Evenness) {
  // Q'(r) / r -> 2 Q_2 and the second derivative has the same limit
  const auto s = ground_series(q0, a0, 2.2, 1.0, 5, at(0.3));
  const auto v = evaluate_series(s, 1e-4);
  EXPECT_NEAR(v.first.derivative / 1e-4, 2 * s.q_coeffs[1], 1e-6);
  EXPECT_NEAR(v.first.second, 2 * s.q_coeffs[1], 1e-6);
  EXPECT_THROW(evaluate_series(s, -0.1, true), Error);
}

TEST(Evaluate, OrderIncrementChange) {
  // K -> K+1 changes the value at r by c_{K+1} r^{2K+2}
  for (int K : {2, 3, 4}) {
    std::vector<double> r{0.1, 0.2, 0.4}, d;
    for (double x : r) {
      const double a = evaluate_series(ground_series(q0, a0, 2.2, 1.0, K, at(x)), x).first.value;
      const double b = evaluate_series(ground_series(q0, a0, 2.2, 1.0, K + 1, at(x)), x).first.value;
      d.push_back(std::abs(a - b));
    }
    EXPECT_NEAR(testing_support::loglog_slope(r, d), 2 * K + 2, 0.05);
  }
}

TEST(Evaluate, OdeResidualOrder) {
  for (double p : {2.0, 2.2})
    for (int K : {2, 3, 4}) {
      std::vector<double> r{0.1, 0.2, 0.4}, res;
      for (double x : r) res.push_back(ode_residual(ground_series(q0, a0, p, 1.0, K, at(x)), p, 1.0, x));
      EXPECT_GE(testing_support::loglog_slope(r, res), 2 * K - 0.05) << "p=" << p << " K=" << K;
    }
}

TEST(Evaluate, IntegratorCrossCheck) {
  for (double p : {2.0, 2.2})
    for (int K : {2, 3, 4}) {
      const auto st = testing_support::series_order_study(q0, a0, p, K);
      ASSERT_GE(st.radii.size(), 2u);
      EXPECT_NEAR(st.order, 2 * K + 2, 0.2) << "p=" << p << " K=" << K;
    }
}

TEST(KernelSeries, ZeroData) {
  const auto g = ground_series(q0, a0, 2.0, 1.0, 6);
  const auto s = kernel_series(0.0, 0.0, g, 2.0, 1.0, 6);
  for (double c : s.q_coeffs) EXPECT_EQ(c, 0.0);
  for (double c : s.a_coeffs) EXPECT_EQ(c, 0.0);
}

TEST(KernelSeries, SecondCoefficient) {
  for (double p : {2.0, 2.3}) {
    const double omega = 1.0, w0 = 0.7, b0 = -0.4;
    const auto g = ground_series(q0, a0, p, omega, 4);
    const auto s = kernel_series(w0, b0, g, p, omega, 4);
    const double expect = (omega * w0 - p * b0 * std::pow(q0, p - 1) -
                           (p - 1) * a0 * std::pow(q0, p - 2) * w0) / 6;
    EXPECT_NEAR(s.q_coeffs[1], expect, 1e-14);
    EXPECT_NEAR(s.a_coeffs[1], -std::pow(q0, p - 1) * w0 / 6, 1e-14);
  }
}

TEST(KernelSeries, Superposition) {
  const double p = 2.2;
  const auto g = ground_series(q0, a0, p, 1.0, 6);
  const auto u = kernel_series(1.0, 0.3, g, p, 1.0, 6, at(0.1));
  const auto v = kernel_series(-0.2, 1.0, g, p, 1.0, 6, at(0.1));
  const double a = 1.7, b = -0.6;
  const auto w = kernel_series(a * 1.0 + b * -0.2, a * 0.3 + b * 1.0, g, p, 1.0, 6, at(0.1));
  for (std::size_t k = 0; k < w.q_coeffs.size(); ++k) {
    EXPECT_NEAR(w.q_coeffs[k], a * u.q_coeffs[k] + b * v.q_coeffs[k], 1e-13 * (1 + std::abs(w.q_coeffs[k])));
    EXPECT_NEAR(w.a_coeffs[k], a * u.a_coeffs[k] + b * v.a_coeffs[k], 1e-13 * (1 + std::abs(w.a_coeffs[k])));
  }
}

TEST(KernelSeries, ShortGroundSeries) {
  const auto g = ground_series(q0, a0, 2.0, 1.0, 3);
  EXPECT_THROW(kernel_series(1.0, 0.0, g, 2.0, 1.0, 6), Error);
}
