#pragma once

// Radial grids, quadrature and the Newtonian (Riesz) potential for radial
// functions on R^3.
//
// Every radial integral carries the explicit 4*pi angular factor. The
// quadrature is a cell-volume rule: node i owns the shell between the face
// radii e_{i-1} and e_i (e_0 = 0, e_n = r_max), so that
//     int_0^{r_max} r^2 f(r) dr  ~  sum_i V_i f_i,   V_i = (e_i^3 - e_{i-1}^3)/3.
// The gradient form, the discrete Laplacian and the Riesz operator are all
// built on the same weights and are exactly symmetric with respect to the
// weighted inner product.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "choquard/error.hpp"

namespace choquard {

inline constexpr double four_pi = 4.0 * std::numbers::pi;

enum class GridKind { uniform, geometric, custom };

inline std::string_view to_string(GridKind k) {
  switch (k) {
    case GridKind::uniform: return "uniform";
    case GridKind::geometric: return "geometric";
    case GridKind::custom: return "custom";
  }
  return "custom";
}

inline GridKind grid_kind_from_string(std::string_view s) {
  if (s == "uniform") return GridKind::uniform;
  if (s == "geometric") return GridKind::geometric;
  if (s == "custom") return GridKind::custom;
  throw Error(ErrorCode::usage, "unknown grid kind '" + std::string(s) + "'");
}

class RadialGrid {
 public:
  static constexpr std::size_t min_nodes = 64;

  /// Builds a grid from explicit nodes; the kind is detected from spacing.
  static RadialGrid from_nodes(std::vector<double> nodes) {
    GridKind kind = GridKind::custom;
    if (nodes.size() >= 2) {
      const double h = nodes[1] - nodes[0];
      const double q = nodes[1] / nodes[0];
      bool uni = std::abs(nodes[0] - h) <= 1e-9 * std::abs(h);
      bool geo = q > 1.0;
      for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double d = nodes[i] - nodes[i - 1];
        uni = uni && std::abs(d - h) <= 1e-9 * std::abs(h);
        geo = geo && std::abs(nodes[i] / nodes[i - 1] - q) <= 1e-9 * q;
      }
      if (uni)
        kind = GridKind::uniform;
      else if (geo)
        kind = GridKind::geometric;
    }
    return RadialGrid(std::move(nodes), kind);
  }

  std::span<const double> nodes() const noexcept { return nodes_; }
  /// Cell volumes V_i (without the 4*pi factor).
  std::span<const double> weights() const noexcept { return weights_; }
  /// Face radii e_1..e_{n-1} between consecutive nodes.
  std::span<const double> faces() const noexcept { return faces_; }
  /// Cell-averaged 1/r: int s ds / int s^2 ds over cell i. Plays the role of
  /// 1/r_i in the potential so that int s f ds is integrated without the
  /// h^2 log h loss of the plain 1/r_i rule.
  std::span<const double> inverse_radii() const noexcept { return kernel_; }
  /// Exact cell integral of 1/max(r_i, s) against s^2 ds, divided by V_i:
  /// the diagonal of the potential kernel.
  std::span<const double> self_kernel() const noexcept { return self_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double r_max() const noexcept { return nodes_.back(); }
  double r_min() const noexcept { return nodes_.front(); }
  GridKind kind() const noexcept { return kind_; }
  double operator[](std::size_t i) const noexcept { return nodes_[i]; }

  /// Index of the last node r_i <= r (0 if r < r_1).
  std::size_t locate(double r) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
    if (it == nodes_.begin()) return 0;
    return static_cast<std::size_t>(it - nodes_.begin()) - 1;
  }

  bool same_as(const RadialGrid& other) const noexcept {
    return this == &other || nodes_ == other.nodes_;
  }

 private:
  RadialGrid(std::vector<double> nodes, GridKind kind)
      : nodes_(std::move(nodes)), kind_(kind) {
    if (nodes_.size() < min_nodes)
      throw Error(ErrorCode::invalid_count,
                  "grid needs at least 64 nodes, got " +
                      std::to_string(nodes_.size()));
    if (!(nodes_.front() > 0.0) || !std::isfinite(nodes_.back()))
      throw Error(ErrorCode::invalid_radius, "grid nodes must be positive");
    for (std::size_t i = 1; i < nodes_.size(); ++i)
      if (!(nodes_[i] > nodes_[i - 1]))
        throw Error(ErrorCode::invalid_radius,
                    "grid nodes must be strictly increasing");

    const std::size_t n = nodes_.size();
    faces_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
      faces_[i] = 0.5 * (nodes_[i] + nodes_[i + 1]);
    weights_.resize(n);
    kernel_.resize(n);
    self_.resize(n);
    double lo = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double hi = (i + 1 < n) ? faces_[i] : nodes_.back();
      // differences of powers are factored to avoid cancellation at large r
      weights_[i] = (hi - lo) * (hi * hi + hi * lo + lo * lo) / 3.0;
      // the last cell is a half cell ending at the node; use its mirror image
      const double top = i + 1 < n ? hi : 2.0 * hi - lo;
      kernel_[i] = 1.5 * (top + lo) / (top * top + top * lo + lo * lo);
      // int over the cell of s^2 / max(r_i, s), per unit volume
      const double ri = nodes_[i];
      self_[i] = ((ri - lo) * (ri * ri + ri * lo + lo * lo) / (3.0 * ri) +
                  0.5 * (hi - ri) * (hi + ri)) /
                 weights_[i];
      lo = hi;
    }
  }

  std::vector<double> nodes_;
  std::vector<double> faces_;
  std::vector<double> weights_;
  std::vector<double> kernel_;
  std::vector<double> self_;
  GridKind kind_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Uniform: r_i = i * r_max / n. Geometric: constant ratio from
/// first_node (default r_max * 1e-4) up to r_max.
inline GridPtr make_grid(GridKind kind, std::size_t n_nodes, double r_max,
                         double first_node = 0.0) {
  if (n_nodes < RadialGrid::min_nodes)
    throw Error(ErrorCode::invalid_count,
                "grid needs at least 64 nodes, got " + std::to_string(n_nodes));
  if (!(r_max > 0.0) || !std::isfinite(r_max))
    throw Error(ErrorCode::invalid_radius, "r_max must be positive");
  std::vector<double> nodes(n_nodes);
  switch (kind) {
    case GridKind::uniform:
      for (std::size_t i = 0; i < n_nodes; ++i)
        nodes[i] = r_max * static_cast<double>(i + 1) /
                   static_cast<double>(n_nodes);
      break;
    case GridKind::geometric: {
      const double r1 = first_node > 0.0 ? first_node : 1e-4 * r_max;
      if (!(r1 < r_max))
        throw Error(ErrorCode::invalid_radius, "first node beyond r_max");
      const double log_ratio =
          std::log(r_max / r1) / static_cast<double>(n_nodes - 1);
      for (std::size_t i = 0; i < n_nodes; ++i)
        nodes[i] = r1 * std::exp(log_ratio * static_cast<double>(i));
      nodes.back() = r_max;
      break;
    }
    case GridKind::custom:
      throw Error(ErrorCode::usage, "custom grids are built from nodes");
  }
  return std::make_shared<const RadialGrid>(
      RadialGrid::from_nodes(std::move(nodes)));
}

inline GridPtr make_grid_from_nodes(std::vector<double> nodes) {
  return std::make_shared<const RadialGrid>(
      RadialGrid::from_nodes(std::move(nodes)));
}

/// Grid whose nodes are those of `g` multiplied by `factor`.
inline GridPtr scaled_grid(const RadialGrid& g, double factor) {
  std::vector<double> nodes(g.nodes().begin(), g.nodes().end());
  for (double& r : nodes) r *= factor;
  return make_grid_from_nodes(std::move(nodes));
}

/// Samples of a radial function on a grid. Immutable once built.
class RadialProfile {
 public:
  RadialProfile(GridPtr grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw Error(ErrorCode::invalid_profile, "null grid");
    if (values_.size() != grid_->size())
      throw Error(ErrorCode::invalid_profile,
                  "profile length does not match grid");
    for (double v : values_)
      if (!std::isfinite(v))
        throw Error(ErrorCode::invalid_profile, "non-finite profile value");
  }

  template <class F>
  static RadialProfile sample(GridPtr grid, F&& f) {
    std::vector<double> v(grid->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f((*grid)[i]);
    return RadialProfile(std::move(grid), std::move(v));
  }

  static RadialProfile zeros(GridPtr grid) {
    std::vector<double> v(grid->size(), 0.0);
    return RadialProfile(std::move(grid), std::move(v));
  }

  const RadialGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double back() const noexcept { return values_.back(); }

  /// New profile with f applied to every sample.
  template <class F>
  RadialProfile map(F&& f) const {
    std::vector<double> v(values_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(values_[i]);
    return RadialProfile(grid_, std::move(v));
  }

  RadialProfile scaled(double a) const {
    return map([a](double x) { return a * x; });
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

inline void require_same_grid(const RadialProfile& a, const RadialProfile& b) {
  if (!a.grid().same_as(b.grid()))
    throw Error(ErrorCode::grid_mismatch, "profiles live on different grids");
}

/// a*f + b*g
inline RadialProfile axpby(double a, const RadialProfile& f, double b,
                           const RadialProfile& g) {
  require_same_grid(f, g);
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * f[i] + b * g[i];
  return RadialProfile(f.grid_ptr(), std::move(v));
}

inline RadialProfile product(const RadialProfile& f, const RadialProfile& g) {
  require_same_grid(f, g);
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f[i] * g[i];
  return RadialProfile(f.grid_ptr(), std::move(v));
}

/// |u|^e with |u| taken literally (0^e = 0 for e > 0).
inline RadialProfile abs_pow(const RadialProfile& u, double e) {
  return u.map([e](double x) { return x == 0.0 ? 0.0 : std::pow(std::abs(x), e); });
}

// ---------------------------------------------------------------------------
// quadrature

/// int_0^{r_max} r^2 f dr  (no angular factor)
inline double radial_moment(const RadialProfile& f) {
  const auto w = f.grid().weights();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
  return s;
}

/// <f, g>_{L^2(R^3)}
inline double inner(const RadialProfile& f, const RadialProfile& g) {
  require_same_grid(f, g);
  const auto w = f.grid().weights();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i] * g[i];
  return four_pi * s;
}

inline double l2_norm(const RadialProfile& f) { return std::sqrt(inner(f, f)); }

/// <grad u, grad v>_{L^2(R^3)} from face difference quotients.
inline double grad_inner(const RadialProfile& u, const RadialProfile& v) {
  require_same_grid(u, v);
  const auto r = u.grid().nodes();
  const auto e = u.grid().faces();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    const double dr = r[i + 1] - r[i];
    s += e[i] * e[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]) / dr;
  }
  return four_pi * s;
}

struct NormReport {
  double l2_sq = 0.0;    // ||u||^2_{L^2}
  double grad_sq = 0.0;  // ||grad u||^2_{L^2}
  double lp_p = 0.0;     // ||u||^p_{L^p}
};

inline NormReport norms(const RadialProfile& u, double p = 2.0) {
  NormReport out;
  out.l2_sq = inner(u, u);
  out.grad_sq = grad_inner(u, u);
  out.lp_p = four_pi * radial_moment(abs_pow(u, p));
  return out;
}

/// Second-order derivative estimate: centered on interior nodes, one-sided
/// three-point formula at both ends.
inline RadialProfile derivative(const RadialProfile& u) {
  const auto r = u.grid().nodes();
  const std::size_t n = u.size();
  std::vector<double> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
    d[i] = (-hp / (hm * (hm + hp))) * u[i - 1] +
           ((hp - hm) / (hm * hp)) * u[i] + (hm / (hp * (hm + hp))) * u[i + 1];
  }
  {
    const double h1 = r[1] - r[0], h2 = r[2] - r[1];
    d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * u[0] +
           (h1 + h2) / (h1 * h2) * u[1] - h1 / (h2 * (h1 + h2)) * u[2];
  }
  {
    const double h1 = r[n - 1] - r[n - 2], h2 = r[n - 2] - r[n - 3];
    d[n - 1] = (2 * h1 + h2) / (h1 * (h1 + h2)) * u[n - 1] -
               (h1 + h2) / (h1 * h2) * u[n - 2] +
               h1 / (h2 * (h1 + h2)) * u[n - 3];
  }
  return RadialProfile(u.grid_ptr(), std::move(d));
}

/// Conservative discrete -Delta with zero flux at r = 0 and r = r_max.
/// sum_i V_i v_i (-Delta u)_i == grad_inner(u, v) / (4 pi) exactly.
inline RadialProfile neg_laplacian(const RadialProfile& u) {
  const auto& g = u.grid();
  const auto r = g.nodes();
  const auto e = g.faces();
  const auto w = g.weights();
  const std::size_t n = u.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double flux = e[i] * e[i] * (u[i + 1] - u[i]) / (r[i + 1] - r[i]);
    out[i] -= flux;
    out[i + 1] += flux;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= w[i];
  return RadialProfile(u.grid_ptr(), std::move(out));
}

/// Newtonian potential I(f) = (-Delta)^{-1} f of a radial density:
///     I(f)(r) = (1/r) int_0^r s^2 f ds + int_r^inf s f ds,
/// i.e. int s^2 f(s) / max(r, s) ds, with the tail beyond r_max dropped.
inline RadialProfile riesz_radial(const RadialProfile& f,
                                  Warnings* warnings = nullptr,
                                  double tail_tol = 1e-8) {
  const auto& g = f.grid();
  const auto w = g.weights();
  const std::size_t n = f.size();

  const double tail = std::abs(f.back()) * g.r_max() * g.r_max();
  if (tail > tail_tol)
    warn(warnings, "tail-truncation: |f(r_max)| r_max^2 = " +
                       std::to_string(tail));

  // kernel k_{max(i,j)} off the diagonal with k the cell-averaged 1/r, and
  // the exact self-cell integral on it; symmetric in i, j
  const auto k = g.inverse_radii();
  const auto d = g.self_kernel();
  std::vector<double> out(n);
  double outer = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    out[j] = outer + w[j] * f[j] * d[j];
    outer += w[j] * f[j] * k[j];
  }
  double inner_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] += inner_sum * k[i];
    inner_sum += w[i] * f[i];
  }
  return RadialProfile(f.grid_ptr(), std::move(out));
}

/// Pointwise g'' + (2/r) g' + f with three-point finite differences on
/// interior nodes. Nodes 0, 1 and n-1 are set to zero: the stencil at node 1
/// reaches into the first cell, where the discrete potential carries an
/// O(h^2) error that the second difference turns into O(1).
inline RadialProfile harmonicity_defect(const RadialProfile& f,
                                        const RadialProfile& g) {
  require_same_grid(f, g);
  const auto r = g.grid().nodes();
  const std::size_t n = g.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
    const double g2 =
        2.0 * ((g[i + 1] - g[i]) / hp - (g[i] - g[i - 1]) / hm) / (hm + hp);
    const double g1 = (-hp / (hm * (hm + hp))) * g[i - 1] +
                      ((hp - hm) / (hm * hp)) * g[i] +
                      (hm / (hp * (hm + hp))) * g[i + 1];
    d[i] = g2 + 2.0 * g1 / r[i] + f[i];
  }
  return RadialProfile(g.grid_ptr(), std::move(d));
}

/// max of |g'' + (2/r) g' + f| over interior nodes with r_from <= r <= r_to.
inline double laplacian_residual(const RadialProfile& f, const RadialProfile& g,
                                 double r_from = 0.0,
                                 double r_to = std::numeric_limits<double>::infinity()) {
  const auto d = harmonicity_defect(f, g);
  const auto r = g.grid().nodes();
  double m = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (r[i] >= r_from && r[i] <= r_to) m = std::max(m, std::abs(d[i]));
  return m;
}

// ---------------------------------------------------------------------------
// resampling

/// Four-point Lagrange interpolation of an even radial function. Nodes are
/// mirrored through r = 0; returns 0 beyond r_max.
inline double interpolate(const RadialProfile& u, double x) {
  const auto& g = u.grid();
  const auto r = g.nodes();
  const std::size_t n = u.size();
  x = std::abs(x);
  if (x > g.r_max()) return 0.0;

  // Extended node k (k = -2, -1, 0, ..., n-1): k >= 0 -> r[k], k < 0 -> -r[-k-1]
  auto node = [&](long k) { return k >= 0 ? r[k] : -r[-k - 1]; };
  auto val = [&](long k) { return k >= 0 ? u[k] : u[-k - 1]; };

  long i = (x < r[0]) ? -1 : static_cast<long>(g.locate(x));  // node(i) <= x
  long start = std::clamp(i - 1, -2L, static_cast<long>(n) - 4);
  double s = 0.0;
  for (long a = start; a < start + 4; ++a) {
    double l = 1.0;
    for (long b = start; b < start + 4; ++b)
      if (b != a) l *= (x - node(b)) / (node(a) - node(b));
    s += l * val(a);
  }
  return s;
}

/// amplitude * u(lambda * r) on the same grid. Sets *compressed when part of
/// the target grid maps beyond the source support.
inline RadialProfile resample_dilated(const RadialProfile& u, double amplitude,
                                      double lambda,
                                      bool* compressed = nullptr) {
  if (lambda == 1.0) return u.scaled(amplitude);
  const auto r = u.grid().nodes();
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = amplitude * interpolate(u, lambda * r[i]);
  if (compressed) *compressed = lambda * u.grid().r_max() > u.grid().r_max();
  return RadialProfile(u.grid_ptr(), std::move(v));
}

/// Restriction of a profile to a common grid by interpolation.
inline RadialProfile resample_onto(const RadialProfile& u, GridPtr target) {
  return RadialProfile::sample(std::move(target),
                               [&](double x) { return interpolate(u, x); });
}

/// sup |f - g| / sup |g|
inline double relative_sup_distance(const RadialProfile& f,
                                    const RadialProfile& g) {
  require_same_grid(f, g);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    num = std::max(num, std::abs(f[i] - g[i]));
    den = std::max(den, std::abs(g[i]));
  }
  return den > 0.0 ? num / den : num;
}

inline double sup_norm(const RadialProfile& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace choquard
