#pragma once

// Energy, Gagliardo-Nirenberg functionals, Pohozaev identities and the
// closed-form constant relations for
//     -Delta u + omega u = I(|u|^p) |u|^{p-2} u   in R^3.

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "choquard/radial_core.hpp"

namespace choquard {

inline constexpr double p_lower = 5.0 / 3.0;
inline constexpr double p_upper = 3.0;
inline constexpr double p_mass_critical = 7.0 / 3.0;

struct ModelParams {
  double p = 2.0;
  double omega = 1.0;
  double sigma = 1.0;

  /// p in (5/3, 7/3): the range where the constrained problem is subcritical.
  bool admissible_range() const noexcept {
    return p > p_lower && p < p_mass_critical;
  }

  void validate() const {
    if (!(p > p_lower && p < p_upper))
      throw Error(ErrorCode::out_of_range, "p must lie in (5/3, 3)");
    if (!(omega > 0.0)) throw Error(ErrorCode::out_of_range, "omega must be > 0");
    if (!(sigma > 0.0)) throw Error(ErrorCode::out_of_range, "sigma must be > 0");
  }
};

struct Exponents {
  double beta;   // (5 - p) / 2
  double gamma;  // (3p - 5) / 2
};

/// Accepts the closed interval [5/3, 3] so boundary values can be inspected.
inline Exponents exponents(double p) {
  if (!(p >= p_lower - 1e-15 && p <= p_upper))
    throw Error(ErrorCode::out_of_range, "p must lie in [5/3, 3]");
  return {(5.0 - p) / 2.0, (3.0 * p - 5.0) / 2.0};
}

/// D(|u|^p, |u|^p) = <I(|u|^p), |u|^p>.
inline double d_pair(const RadialProfile& u, double p,
                     Warnings* warnings = nullptr) {
  const auto up = abs_pow(u, p);
  return inner(riesz_radial(up, warnings), up);
}

/// E_p(u) = 1/2 ||grad u||^2 - 1/(2p) D(|u|^p, |u|^p)
inline double energy(const RadialProfile& u, double p) {
  return 0.5 * grad_inner(u, u) - d_pair(u, p) / (2.0 * p);
}

/// ||u||^{5-p} ||grad u||^{3p-5}
inline double gn_product(double l2_sq, double grad_sq, double p) {
  const auto [beta, gamma] = exponents(p);
  return std::pow(l2_sq, beta) * std::pow(grad_sq, gamma);
}

/// F_p(u) = ||u||^{5-p} ||grad u||^{3p-5} - D / C*
inline double gn_functional(const RadialProfile& u, double p, double c_star) {
  if (!(c_star > 0.0))
    throw Error(ErrorCode::out_of_range, "c_star must be positive");
  const auto nr = norms(u, p);
  return gn_product(nr.l2_sq, nr.grad_sq, p) - d_pair(u, p) / c_star;
}

/// ||u||^{5-p} ||grad u||^{3p-5} / D; its infimum is 1 / C*.
inline double weinstein_quotient(const RadialProfile& u, double p) {
  const double d = d_pair(u, p);
  if (!(d > 0.0))
    throw Error(ErrorCode::zero_interaction, "D(|u|^p,|u|^p) vanishes");
  const auto nr = norms(u, p);
  return gn_product(nr.l2_sq, nr.grad_sq, p) / d;
}

/// C* from the energy level and the mass of a minimizer:
///     C* = p / gamma^gamma (2/(1-gamma))^{1-gamma} |E|^{1-gamma} / sigma^{p-gamma}
/// NaN when gamma >= 1.
inline double c_star_from_energy(double energy_level, double sigma, double p) {
  const auto [beta, gamma] = exponents(p);
  if (!(gamma < 1.0)) return std::numeric_limits<double>::quiet_NaN();
  return p / std::pow(gamma, gamma) * std::pow(2.0 / (1.0 - gamma), 1.0 - gamma) *
         std::pow(std::abs(energy_level), 1.0 - gamma) /
         std::pow(sigma, p - gamma);
}

/// omega solving omega^{1-gamma} = (C*/p) gamma^gamma / beta^{gamma-1} sigma^{p-1}.
inline double admissible_omega(double sigma, double p, double c_star) {
  if (!(c_star > 0.0))
    throw Error(ErrorCode::out_of_range, "c_star must be positive");
  if (!(sigma > 0.0)) throw Error(ErrorCode::out_of_range, "sigma must be > 0");
  const auto [beta, gamma] = exponents(p);
  if (std::abs(gamma - 1.0) < 1e-12)
    throw Error(ErrorCode::gamma_equals_one,
                "admissible omega undefined at p = 7/3");
  const double rhs = c_star / p * std::pow(gamma, gamma) /
                     std::pow(beta, gamma - 1.0) * std::pow(sigma, p - 1.0);
  return std::pow(rhs, 1.0 / (1.0 - gamma));
}

/// phi_sigma(s) = s/2 - (C* sigma^beta / 2p) s^gamma
inline double phi_sigma(double s, double sigma, double p, double c_star) {
  const auto [beta, gamma] = exponents(p);
  if (s == 0.0) return 0.0;
  return 0.5 * s - c_star * std::pow(sigma, beta) / (2.0 * p) * std::pow(s, gamma);
}

/// Unique positive root of s = (gamma/p) C* sigma^beta s^gamma; the
/// minimum point of phi_sigma.
inline double s_star(double sigma, double p, double c_star) {
  const auto [beta, gamma] = exponents(p);
  if (!(gamma < 1.0))
    throw Error(ErrorCode::gamma_equals_one, "s* requires gamma < 1");
  return std::pow(gamma / p * c_star * std::pow(sigma, beta),
                  1.0 / (1.0 - gamma));
}

/// mu^{3/2} u(mu r) resampled on the same grid (mass preserving dilation).
inline RadialProfile rescale_mu(const RadialProfile& u, double mu,
                                Warnings* warnings = nullptr) {
  if (!(mu > 0.0)) throw Error(ErrorCode::out_of_range, "mu must be positive");
  bool compressed = false;
  auto v = resample_dilated(u, std::pow(mu, 1.5), mu, &compressed);
  if (compressed)
    warn(warnings, "excessive-compression: mu * r_max exceeds source support");
  return v;
}

/// N(u) = I(|u|^p) |u|^{p-2} u
inline RadialProfile choquard_nonlinearity(const RadialProfile& u, double p) {
  const auto pot = riesz_radial(abs_pow(u, p));
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(u[i]);
    v[i] = a == 0.0 ? 0.0 : pot[i] * std::pow(a, p - 2.0) * u[i];
  }
  return RadialProfile(u.grid_ptr(), std::move(v));
}

/// ||-Delta u + omega u - N(u)|| / ||N(u)|| on the grid. The last node is
/// excluded (it carries the outer boundary condition).
inline double euler_lagrange_residual(const RadialProfile& u, double p,
                                      double omega) {
  const auto lap = neg_laplacian(u);
  const auto nl = choquard_nonlinearity(u, p);
  const auto w = u.grid().weights();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    const double res = lap[i] + omega * u[i] - nl[i];
    num += w[i] * res * res;
    den += w[i] * nl[i] * nl[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(four_pi * num);
}

struct IdentityReport {
  // signed relative deviations (a-b, b-c, a-c)/mean for
  // a = omega ||u||^2 / beta, b = ||grad u||^2 / gamma, c = D / p
  std::array<double, 3> pohozaev_residuals{};
  std::array<double, 3> pohozaev_values{};
  double k_E = 0.0;              // 2 E / (gamma - 1)
  double omega_predicted = 0.0;  // 2 beta E / ((gamma - 1) sigma)
  double c_star_direct = 0.0;    // D / (||u||^{5-p} ||grad u||^{3p-5})
  double c_star_formula = 0.0;   // from (E, sigma)
  std::array<bool, 3> lfm1_flags{};

  double p = 0.0;
  double omega = 0.0;             // frequency the checks were made against
  double sigma = 0.0;             // ||u||^2 of the profile
  double grad_sq = 0.0;
  double d_value = 0.0;
  double energy = 0.0;
  double omega_multiplier = 0.0;  // (D - ||grad u||^2) / sigma
  double omega_admissible = 0.0;  // omega paired with sigma through C*
  double c_star_reference = 0.0;  // C* used for the admissible pair
  double el_residual = 0.0;       // Euler-Lagrange residual at omega_admissible
  double phi_at_s_star = 0.0;     // phi_sigma(s*) with c_star_reference

  double max_pohozaev_deviation() const {
    double m = 0.0;
    for (double x : pohozaev_residuals) m = std::max(m, std::abs(x));
    return m;
  }
};

struct ReportOptions {
  /// relative tolerance for the equivalence flags
  double tol = 1e-3;
  /// sharp constant to test against; defaults to the profile's own quotient
  std::optional<double> c_star_reference;
};

inline IdentityReport pohozaev_report(const RadialProfile& u,
                                      const ModelParams& params,
                                      const ReportOptions& opts = {}) {
  const double p = params.p;
  const auto [beta, gamma] = exponents(p);
  IdentityReport rep;
  rep.p = p;
  rep.omega = params.omega;

  const auto nr = norms(u, p);
  rep.sigma = nr.l2_sq;
  rep.grad_sq = nr.grad_sq;
  rep.d_value = d_pair(u, p);
  rep.energy = 0.5 * rep.grad_sq - rep.d_value / (2.0 * p);

  const double a = params.omega * rep.sigma / beta;
  const double b = gamma != 0.0 ? rep.grad_sq / gamma
                                : std::numeric_limits<double>::quiet_NaN();
  const double c = rep.d_value / p;
  rep.pohozaev_values = {a, b, c};
  const double mean = (std::abs(a) + std::abs(b) + std::abs(c)) / 3.0;
  rep.pohozaev_residuals = {(a - b) / mean, (b - c) / mean, (a - c) / mean};

  rep.k_E = 2.0 * rep.energy / (gamma - 1.0);
  rep.omega_predicted = 2.0 * beta * rep.energy / ((gamma - 1.0) * rep.sigma);
  const double prod = gn_product(rep.sigma, rep.grad_sq, p);
  rep.c_star_direct = prod > 0.0 ? rep.d_value / prod
                                 : std::numeric_limits<double>::quiet_NaN();
  rep.c_star_formula = c_star_from_energy(rep.energy, rep.sigma, p);
  rep.omega_multiplier = (rep.d_value - rep.grad_sq) / rep.sigma;

  rep.c_star_reference = opts.c_star_reference.value_or(rep.c_star_direct);
  const bool subcritical = gamma < 1.0 && gamma > 0.0 &&
                           std::isfinite(rep.c_star_reference) &&
                           rep.c_star_reference > 0.0;
  if (subcritical) {
    rep.omega_admissible = admissible_omega(rep.sigma, p, rep.c_star_reference);
    rep.el_residual = euler_lagrange_residual(u, p, rep.omega_admissible);
    rep.phi_at_s_star =
        phi_sigma(s_star(rep.sigma, p, rep.c_star_reference), rep.sigma, p,
                  rep.c_star_reference);
    const double wb = rep.omega_admissible * rep.sigma / beta;
    rep.lfm1_flags[0] = std::abs(b - c) <= opts.tol * std::abs(c);
    rep.lfm1_flags[1] = std::abs(wb - c) <= opts.tol * std::abs(c);
    rep.lfm1_flags[2] = rep.el_residual <= opts.tol;
  } else {
    rep.omega_admissible = std::numeric_limits<double>::quiet_NaN();
    rep.el_residual = std::numeric_limits<double>::quiet_NaN();
    rep.phi_at_s_star = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

inline nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

template <std::size_t N>
inline nlohmann::json finite_or_null(const std::array<double, N>& xs) {
  auto j = nlohmann::json::array();
  for (double x : xs) j.push_back(finite_or_null(x));
  return j;
}

/// Non-finite entries (undefined for the given p) are written as null.
inline void to_json(nlohmann::json& j, const IdentityReport& r) {
  j = nlohmann::json{
      {"pohozaev_residuals", finite_or_null(r.pohozaev_residuals)},
      {"pohozaev_values", finite_or_null(r.pohozaev_values)},
      {"k_E", finite_or_null(r.k_E)},
      {"omega_predicted", finite_or_null(r.omega_predicted)},
      {"c_star_direct", finite_or_null(r.c_star_direct)},
      {"c_star_formula", finite_or_null(r.c_star_formula)},
      {"lfm1_flags", r.lfm1_flags},
      {"p", finite_or_null(r.p)},
      {"omega", finite_or_null(r.omega)},
      {"sigma", finite_or_null(r.sigma)},
      {"grad_sq", finite_or_null(r.grad_sq)},
      {"d_value", finite_or_null(r.d_value)},
      {"energy", finite_or_null(r.energy)},
      {"omega_multiplier", finite_or_null(r.omega_multiplier)},
      {"omega_admissible", finite_or_null(r.omega_admissible)},
      {"c_star_reference", finite_or_null(r.c_star_reference)},
      {"el_residual", finite_or_null(r.el_residual)},
      {"phi_at_s_star", finite_or_null(r.phi_at_s_star)},
  };
}

}  // namespace choquard
