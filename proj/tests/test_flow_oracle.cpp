#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <mutex>

#include "choquard/flow_oracle.hpp"
#include "support.hpp"

using namespace choquard;
using testing_support::ground_state;

namespace {

FlowConfig config_for(const GroundStateSolution& gs) {
  FlowConfig c;
  c.grid = gs.Q.grid_ptr();
  return c;
}

const FlowRun& flow_at(double p) {
  static std::mutex m;
  static std::map<double, std::unique_ptr<FlowRun>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[p];
  if (!slot) {
    const auto& gs = ground_state(p);
    slot = std::make_unique<FlowRun>(flow_run(gs.sigma, p, config_for(gs)));
  }
  return *slot;
}

FlowConfig small_grid() {
  FlowConfig c;
  c.grid = make_grid(GridKind::uniform, 2048, 30.0);
  return c;
}

}  // namespace

TEST(Flow, MatchesShooting) {
  for (double p : {2.0, 2.2}) {
    const auto& gs = ground_state(p);
    const auto& fl = flow_at(p).solution;
    EXPECT_LT(relative_sup_distance(fl.Q, gs.Q), 1e-3) << "p=" << p;
    EXPECT_NEAR(fl.energy / gs.energy, 1.0, 1e-4) << "p=" << p;
    EXPECT_EQ(fl.method, "flow");
  }
}

TEST(Flow, Multiplier) {
  for (double p : {2.0, 2.2}) {
    const auto& fl = flow_at(p).solution;
    EXPECT_NEAR(fl.omega, 1.0, 1e-3) << "p=" << p;
    EXPECT_NEAR(fl.report.omega_predicted / fl.omega, 1.0, 1e-3) << "p=" << p;
    EXPECT_NEAR(fl.sigma / ground_state(p).sigma, 1.0, 1e-12);
  }
}

TEST(Flow, MonotoneDescent) {
  for (double p : {2.0, 2.2}) {
    const auto& run = flow_at(p);
    const auto& log = energy_descent_log(run);
    ASSERT_GT(log.size(), 2u);
    EXPECT_LE(max_energy_rise(log, 0), 1e-12 * std::abs(run.solution.energy)) << "p=" << p;
    EXPECT_LT(log.back().energy, log.front().energy);
  }
}

TEST(Flow, ResidualAtConvergence) {
  for (double p : {2.0, 2.2}) {
    const auto& fl = flow_at(p).solution;
    EXPECT_LT(euler_lagrange_residual(fl.Q, p, fl.omega), 1e-4) << "p=" << p;
    EXPECT_LT(fl.report.max_pohozaev_deviation(), 1e-3) << "p=" << p;
  }
}

TEST(Flow, SharpConstantAgreesWithShooting) {
  for (double p : {2.0, 2.2}) {
    const double a = flow_at(p).solution.report.c_star_direct;
    const double b = ground_state(p).report.c_star_direct;
    EXPECT_NEAR(a / b, 1.0, 1e-5) << "p=" << p;
    EXPECT_NEAR(gn_functional(flow_at(p).solution.Q, p, a), 0.0, 1e-12);
  }
}

TEST(Flow, RestartFromConvergedState) {
  const auto& fl = flow_at(2.0).solution;
  auto cfg = config_for(ground_state(2.0));
  cfg.init = FlowInitKind::file;
  cfg.init_profile = fl.Q;
  const auto again = flow_run(fl.sigma, 2.0, cfg);
  EXPECT_EQ(again.iterations, 0u);
  EXPECT_LT(relative_sup_distance(again.solution.Q, fl.Q), 1e-12);
}

TEST(Flow, ExponentialInitialDataSameLimit) {
  const auto& gs = ground_state(2.2);
  auto cfg = config_for(gs);
  cfg.init = FlowInitKind::exponential;
  const auto fl = flow_minimize(gs.sigma, 2.2, cfg);
  EXPECT_LT(relative_sup_distance(fl.Q, flow_at(2.2).solution.Q), 1e-4);
}

TEST(Flow, ZeroInitialDataRejected) {
  auto cfg = small_grid();
  cfg.init = FlowInitKind::file;
  cfg.init_profile = RadialProfile::zeros(cfg.grid);
  try {
    flow_run(10.0, 2.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::zero_profile);
  }
}

TEST(Flow, Guards) {
  auto cfg = small_grid();
  EXPECT_THROW(flow_run(-1.0, 2.0, cfg), Error);
  EXPECT_THROW(flow_run(10.0, 2.4, cfg), Error);
  cfg.step = 0.0;
  EXPECT_THROW(flow_run(10.0, 2.0, cfg), Error);
  FlowConfig none;
  EXPECT_THROW(flow_run(10.0, 2.0, none), Error);
  cfg = small_grid();
  cfg.init = FlowInitKind::file;
  EXPECT_THROW(flow_run(10.0, 2.0, cfg), Error);
}

TEST(Flow, StepBudget) {
  auto cfg = small_grid();
  cfg.max_steps = 3;
  try {
    flow_run(30.0, 2.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::max_steps);
  }
}

TEST(Flow, WarnsBelowUniquenessRange) {
  const auto run = flow_run(30.0, 1.9, small_grid());
  EXPECT_TRUE(run.warnings.contains("p < 2"));
  EXPECT_FALSE(flow_at(2.0).warnings.contains("p < 2"));
}

TEST(Flow, InitKindNames) {
  EXPECT_EQ(flow_init_from_string("gaussian"), FlowInitKind::gaussian);
  EXPECT_EQ(flow_init_from_string("exponential"), FlowInitKind::exponential);
  EXPECT_EQ(flow_init_from_string("file"), FlowInitKind::file);
  EXPECT_THROW(flow_init_from_string("box"), Error);
  EXPECT_EQ(to_string(FlowInitKind::exponential), "exponential");
}
