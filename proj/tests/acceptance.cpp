// One line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "choquard/diagnostics.hpp"
#include "choquard/flow_oracle.hpp"
#include "choquard/linearization.hpp"
#include "support.hpp"

using namespace choquard;
using testing_support::ground_state;

namespace {

namespace tol {
constexpr double ball_error = 1e-4;
constexpr double ball_runtime_s = 1.0;
constexpr double pohozaev = 1e-3;
constexpr double pohozaev_runtime_s = 30.0;
constexpr double oracle_profile = 1e-3;
constexpr double oracle_energy = 1e-4;
constexpr double oracle_runtime_s = 300.0;
constexpr double multiplier = 1e-3;
constexpr double c_star = 1e-3;
constexpr double phi_energy = 1e-3;
constexpr double decay_rate = 0.01;
constexpr double flatness = 0.01;
constexpr double riesz_tail = 1e-3;
constexpr int kernel_dimension = 2;
constexpr double curve_discrepancy = 1e-6;
constexpr int random_directions = 20;
constexpr double symmetry = 1e-6;
}  // namespace tol

const double pi = std::numbers::pi;

int failures = 0;

void report(int id, const std::string& name, bool ok, std::string detail) {
  while (!detail.empty() && (detail.back() == ' ' || detail.back() == ';')) detail.pop_back();
  std::printf("%s [%2d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> sweep_exponents() {
  std::vector<double> p;
  for (int i = 0; i <= 6; ++i) p.push_back(2.0 + 0.05 * i);
  return p;
}

void riesz_exactness() {
  PotentialTestReport rep;
  const double t = seconds([&] { rep = potential_self_test(2048, 8.0); });
  const bool ok = rep.ball_error < tol::ball_error &&
                  rep.ball_order >= 2.0 - ball_order_slack && t < tol::ball_runtime_s;
  report(1, "Riesz potential of the unit ball", ok,
         fmt("max error %.3e on 2048 nodes, order %.4f, %.2f s", rep.ball_error, rep.ball_order, t));
}

void pohozaev_p2() {
  const GroundStateSolution* gs = nullptr;
  const double t = seconds([&] { gs = &ground_state(2.0); });
  const double dev = gs->report.max_pohozaev_deviation();
  report(2, "Pohozaev relations at p = 2", dev < tol::pohozaev && t < tol::pohozaev_runtime_s,
         fmt("max pairwise deviation %.3e, %.1f s", dev, t));
}

void oracle_equivalence() {
  bool ok = true;
  std::string detail;
  const double t = seconds([&] {
    for (double p : {2.0, 2.2}) {
      const auto& gs = ground_state(p);
      FlowConfig cfg;
      cfg.grid = gs.Q.grid_ptr();
      const auto fl = flow_minimize(gs.sigma, p, cfg);
      const double d = relative_sup_distance(fl.Q, gs.Q);
      const double e = std::abs(fl.energy / gs.energy - 1.0);
      ok = ok && d < tol::oracle_profile && e < tol::oracle_energy;
      detail += fmt("p=%.1f sup %.2e energy %.2e; ", p, d, e);
    }
  });
  report(3, "shooting and gradient flow agree", ok && t < tol::oracle_runtime_s,
         detail + fmt("%.1f s", t));
}

void multiplier_formula() {
  bool ok = true;
  double worst = 0.0;
  for (double p : sweep_exponents()) {
    const auto& gs = ground_state(p);
    const double d = std::abs(gs.report.omega_predicted / gs.omega - 1.0);
    worst = std::max(worst, d);
    ok = ok && d < tol::multiplier;
  }
  report(4, "multiplier formula over the sweep", ok, fmt("worst relative deviation %.3e", worst));
}

void sharp_constant() {
  bool ok = true;
  double worst_c = 0.0, worst_phi = 0.0;
  for (double p : sweep_exponents()) {
    const auto& r = ground_state(p).report;
    const double dc = std::abs(r.c_star_formula / r.c_star_direct - 1.0);
    const double dp = std::abs(r.phi_at_s_star / r.energy - 1.0);
    worst_c = std::max(worst_c, dc);
    worst_phi = std::max(worst_phi, dp);
    ok = ok && dc < tol::c_star && dp < tol::phi_energy;
  }
  report(5, "sharp constant two ways and phi(s*) = E", ok,
         fmt("worst C* deviation %.3e, worst phi deviation %.3e", worst_c, worst_phi));
}

void tail_laws() {
  // the p = 2 potential is Coulomb-like, so its rate needs a wide domain
  struct Case {
    double p, r_max;
    std::size_t nodes;
  };
  bool ok = true;
  std::string detail;
  for (const Case& c : {Case{2.0, 240.0, 32768}, Case{2.2, 40.0, 8192}}) {
    const auto& gs = ground_state(c.p, c.r_max, c.nodes);
    const double k = std::sqrt(gs.omega);
    const double dr = std::abs(gs.tail.decay_rate / k - 1.0);
    ok = ok && dr < tol::decay_rate && gs.tail.ra_flatness < tol::flatness && gs.tail.d0 > 0.0;
    detail += fmt("p=%.1f r_max=%.0f rate error %.2e flatness %.2e; ", c.p, c.r_max, dr,
                  gs.tail.ra_flatness);
  }
  report(6, "tail decay rate and potential tail", ok, detail);
}

void riesz_tail_p2() {
  const auto& gs = ground_state(2.0);
  const auto a = riesz_radial(abs_pow(gs.Q, 2.0));
  const double lhs = gs.Q.grid().r_max() * a.back();
  const double rhs = gs.sigma / (4.0 * pi);
  const double d = std::abs(lhs / rhs - 1.0);
  report(7, "r I(Q^2)(r_max) equals the mass over 4 pi", d < tol::riesz_tail,
         fmt("%.8f vs %.8f, relative %.2e", lhs, rhs, d));
}

void kernel_bound() {
  bool ok = true;
  std::string dims;
  for (double p : sweep_exponents()) {
    const auto scan = kernel_scan(ground_state(p), p);
    ok = ok && scan.dimension_estimate <= tol::kernel_dimension;
    dims += std::to_string(scan.dimension_estimate) + " ";
  }
  report(8, "kernel dimension estimate at most 2", ok, "estimates " + dims);
}

void energy_curve_algebra() {
  bool ok = true;
  double worst = 0.0, min_k2 = INFINITY;
  for (double p : {2.0, 2.2}) {
    const auto& gs = ground_state(p);
    for (const auto& h : random_directions(gs, tol::random_directions)) {
      const auto c = energy_curve(gs, h, 0.0, 24);
      worst = std::max(worst, c.max_discrepancy);
      min_k2 = std::min(min_k2, c.second_derivative);
      ok = ok && c.max_discrepancy < tol::curve_discrepancy && c.second_derivative > 0.0;
    }
  }
  report(9, "energy curve closed form and convexity", ok,
         fmt("worst discrepancy %.2e, smallest K''(0) %.4f (20 directions, p = 2 and 2.2)", worst,
             min_k2));
}

void series_order() {
  bool ok = true;
  std::string detail;
  for (double p : {2.0, 2.2}) {
    const auto& gs = ground_state(p);
    for (int K : {2, 3, 4}) {
      const auto st = testing_support::series_order_study(gs.q0, gs.a0, p, K);
      const bool good = st.radii.size() >= 2 && st.order >= 2.0 * K;
      ok = ok && good;
      detail += fmt("p=%.1f K=%.0f order %.2f; ", p, K, st.order);
    }
  }
  report(10, "series launch order", ok, detail);
}

void lplus_properties() {
  bool ok = true;
  double worst = 0.0, worst_q = -INFINITY;
  for (double p : {2.0, 2.2}) {
    const auto& gs = ground_state(p);
    const auto hs = random_directions(gs, 10);
    for (std::size_t i = 0; i + 1 < hs.size(); i += 2) {
      const double a = inner(apply_lplus(hs[i], gs, p), hs[i + 1]);
      const double b = inner(hs[i], apply_lplus(hs[i + 1], gs, p));
      const double rel = std::abs(a - b) / (l2_norm(hs[i]) * l2_norm(hs[i + 1]));
      worst = std::max(worst, rel);
      ok = ok && rel < tol::symmetry;
    }
    const double q = inner(apply_lplus(gs.Q, gs, p), gs.Q);
    worst_q = std::max(worst_q, q);
    ok = ok && q < 0.0;
  }
  report(11, "L+ symmetric and negative on Q", ok,
         fmt("worst asymmetry %.2e, largest <L+Q,Q> %.3f", worst, worst_q));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{
      riesz_exactness,      pohozaev_p2,  oracle_equivalence, multiplier_formula,
      sharp_constant,       tail_laws,    riesz_tail_p2,      kernel_bound,
      energy_curve_algebra, series_order, lplus_properties};
  int id = 0;
  for (const auto& c : criteria) {
    ++id;
    try {
      c();
    } catch (const std::exception& e) {
      report(id, "criterion raised", false, e.what());
    }
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
