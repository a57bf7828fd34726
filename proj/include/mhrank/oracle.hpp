#pragma once

#include "mhrank/common.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace mhrank {

namespace detail {

inline std::string short_number(double v, int digits = 3) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace detail

/// Uniform 1D grid [lower, upper] with n_points nodes.
struct Grid {
  double lower = -15.0;
  double upper = 15.0;
  std::size_t n_points = 4001;

  void validate() const {
    if (!(lower < upper)) throw ConfigError("grid: lower must be < upper");
    if (n_points < 3) throw ConfigError("grid: need at least 3 nodes");
  }
  double spacing() const { return (upper - lower) / static_cast<double>(n_points - 1); }
  double node(std::size_t i) const {
    return i + 1 == n_points ? upper : lower + static_cast<double>(i) * spacing();
  }
  double weight(std::size_t i) const {
    return (i == 0 || i + 1 == n_points) ? 0.5 * spacing() : spacing();
  }
  bool operator==(const Grid&) const = default;
};

/// Trapezoid rule of `values` on `grid`.
inline double trapezoid(const Grid& grid, const std::vector<double>& values) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += grid.weight(i) * values[i];
  return acc;
}

/// A probability density tabulated on a uniform grid; nonnegative, finite,
/// and integrating to 1 +- 1e-6 under the trapezoid rule.
class GridDensity {
 public:
  static constexpr double kNormTolerance = 1e-6;

  GridDensity(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.n_points) throw ArgumentError("grid density: value count does not match grid");
    for (double v : values_)
      if (!std::isfinite(v) || v < 0.0) throw ArgumentError("grid density: values must be finite and >= 0");
    const double mass = trapezoid(grid_, values_);
    if (std::abs(mass - 1.0) > kNormTolerance)
      throw GridCoverageError("grid density integrates to " + detail::short_number(mass, 9) + " on [" +
                              detail::short_number(grid_.lower) + ", " + detail::short_number(grid_.upper) +
                              "]; widen or refine the grid");
  }

  /// Tabulates exp(log_density) at the nodes. The density must already be
  /// normalized to within tolerance on the grid.
  static GridDensity tabulate(const Grid& grid, const std::function<double(double)>& log_density) {
    grid.validate();
    std::vector<double> v(grid.n_points);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(log_density(grid.node(i)));
    return GridDensity(grid, std::move(v));
  }

  /// Rescales arbitrary nonnegative values to unit trapezoid mass.
  static GridDensity normalized(const Grid& grid, std::vector<double> values) {
    grid.validate();
    const double mass = trapezoid(grid, values);
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ArgumentError("grid density: zero or non-finite mass");
    for (double& v : values) v /= mass;
    return GridDensity(grid, std::move(values));
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Density after one transition, and the mass defect |int p^{n+1} - 1|
/// measured before renormalization.
struct Evolution {
  GridDensity density;
  double normalization_defect;
};

namespace detail {

inline void require_same_grid(const GridDensity& a, const GridDensity& b, const char* what) {
  if (!(a.grid() == b.grid())) throw ArgumentError(std::string(what) + ": densities are on different grids");
}

inline Evolution renormalize(const Grid& grid, std::vector<double> out) {
  for (double& v : out) v = std::max(v, 0.0);
  const double mass = trapezoid(grid, out);
  const double defect = std::abs(mass - 1.0);
  if (!(defect <= 1e-3))
    throw GridCoverageError("evolution lost " + detail::short_number(defect) + " of its mass; grid too narrow or coarse");
  for (double& v : out) v /= mass;
  return {GridDensity(grid, std::move(out)), defect};
}

}  // namespace detail

/// Exact one-step evolution of the independence sampler with proposal q:
/// p^{n+1}(y) = q(y) I_n(y) + p^n(y) (1 - I(y)), where
/// I_n(y) = int p^n(x) alpha(x,y) dx and I(y) = int q(x) alpha(y,x) dx.
inline Evolution evolve_is(const GridDensity& p, const GridDensity& q, const GridDensity& f,
                           std::size_t workers = 1) {
  detail::require_same_grid(p, q, "evolve_is");
  detail::require_same_grid(p, f, "evolve_is");
  const Grid& grid = p.grid();
  const std::size_t g = grid.n_points;
  // alpha(x,y) = min(1, w(y)/w(x)) with importance weight w = f/q.
  std::vector<double> w(g);
  for (std::size_t i = 0; i < g; ++i) {
    if (!(f[i] > 0.0)) throw ArgumentError("evolve_is: target must be > 0 on the grid");
    w[i] = q[i] > 0.0 ? f[i] / q[i] : std::numeric_limits<double>::infinity();
  }
  std::vector<double> out(g);
  parallel_for(g, workers, [&](std::size_t y) {
    double i_n = 0.0;
    double i_all = 0.0;
    for (std::size_t x = 0; x < g; ++x) {
      const double t = grid.weight(x);
      if (q[y] > 0.0 && !std::isinf(w[x])) i_n += t * p[x] * std::min(1.0, w[y] / w[x]);
      if (q[x] > 0.0 && !std::isinf(w[y])) i_all += t * q[x] * std::min(1.0, w[x] / w[y]);
    }
    out[y] = q[y] * i_n + p[y] * (1.0 - i_all);
  });
  return detail::renormalize(grid, std::move(out));
}

/// Probability mass, under f, of random-walk proposals N(x, sigma^2) that
/// land outside the grid.
inline double rwmh_leak(const GridDensity& f, double sigma) {
  const Grid& grid = f.grid();
  double leak = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double x = grid.node(i);
    const double out = 0.5 * std::erfc((grid.upper - x) / (sigma * std::numbers::sqrt2)) +
                       0.5 * std::erfc((x - grid.lower) / (sigma * std::numbers::sqrt2));
    leak += grid.weight(i) * f[i] * out;
  }
  return leak;
}

/// Exact one-step evolution of random-walk Metropolis with Gaussian
/// increments of standard deviation sigma:
/// p^{n+1}(y) = J_n(y) + p^n(y) (1 - J(y)).
/// The grid must resolve sigma (sigma >= 4 spacings) and contain the
/// proposals: the f-weighted mass proposed outside the grid must be < 1e-8.
inline Evolution evolve_rwmh(const GridDensity& p, double sigma, const GridDensity& f, std::size_t workers = 1) {
  detail::require_same_grid(p, f, "evolve_rwmh");
  if (!(sigma > 0.0)) throw ArgumentError("evolve_rwmh: sigma must be > 0");
  const Grid& grid = p.grid();
  const std::size_t g = grid.n_points;
  const double dx = grid.spacing();
  if (sigma < 4.0 * dx)
    throw GridCoverageError("evolve_rwmh: grid spacing " + detail::short_number(dx) + " does not resolve sigma " +
                            detail::short_number(sigma));
  const double leak = rwmh_leak(f, sigma);
  if (!(leak < 1e-8))
    throw GridCoverageError("evolve_rwmh: proposals leave the grid with probability " + detail::short_number(leak) +
                            "; widen the grid");
  for (std::size_t i = 0; i < g; ++i)
    if (!(f[i] > 0.0)) throw ArgumentError("evolve_rwmh: target must be > 0 on the grid");

  const std::size_t reach = std::min<std::size_t>(g, static_cast<std::size_t>(std::ceil(40.0 * sigma / dx)) + 1);
  std::vector<double> kern(reach);
  for (std::size_t k = 0; k < reach; ++k) {
    const double d = static_cast<double>(k) * dx / sigma;
    kern[k] = std::exp(-0.5 * d * d) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  std::vector<double> out(g);
  parallel_for(g, workers, [&](std::size_t y) {
    double j_n = 0.0;
    double j_all = 0.0;
    const std::size_t lo = y >= reach ? y - reach + 1 : 0;
    const std::size_t hi = std::min(g, y + reach);
    for (std::size_t x = lo; x < hi; ++x) {
      const double kq = grid.weight(x) * kern[x > y ? x - y : y - x];
      j_n += kq * p[x] * std::min(1.0, f[y] / f[x]);
      j_all += kq * std::min(1.0, f[x] / f[y]);
    }
    out[y] = j_n + p[y] * (1.0 - j_all);
  });
  return detail::renormalize(grid, std::move(out));
}

/// K(p, f) = int p log(p / f), with 0 log 0 = 0.
inline double quad_kl(const GridDensity& p, const GridDensity& f) {
  detail::require_same_grid(p, f, "quad_kl");
  std::vector<double> v(p.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (p[i] > 0.0) {
      if (!(f[i] > 0.0)) throw ArgumentError("quad_kl: f must be > 0 where p > 0");
      v[i] = p[i] * std::log(p[i] / f[i]);
    }
  }
  return trapezoid(p.grid(), v);
}

/// H(p) = int p log p, with 0 log 0 = 0.
inline double quad_entropy(const GridDensity& p) {
  std::vector<double> v(p.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (p[i] > 0.0) v[i] = p[i] * std::log(p[i]);
  return trapezoid(p.grid(), v);
}

/// int p(x) g(x) dx for a function tabulated on the same grid.
inline double quad_expectation(const GridDensity& p, const std::vector<double>& g_values) {
  if (g_values.size() != p.size()) throw ArgumentError("quad_expectation: size mismatch");
  std::vector<double> v(p.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (p[i] > 0.0) v[i] = p[i] * g_values[i];
  return trapezoid(p.grid(), v);
}

struct Minorization {
  double a = 0.0;
  bool minorized = false;  // false when a <= 1e-12: no useful uniform bound on the grid
};

/// Grid approximation of the largest a with q >= a f, clamped to [0, 1].
inline Minorization minorization_constant(const GridDensity& q, const GridDensity& f) {
  detail::require_same_grid(q, f, "minorization_constant");
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(f[i] > 0.0)) throw ArgumentError("minorization_constant: f must be > 0 on the grid");
    a = std::min(a, q[i] / f[i]);
  }
  a = std::clamp(a, 0.0, 1.0);
  return {a, a > 1e-12};
}

/// Grid sup of |p0/f - 1|.
inline double sup_ratio_deviation(const GridDensity& p0, const GridDensity& f) {
  detail::require_same_grid(p0, f, "sup_ratio_deviation");
  double k = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    if (!(f[i] > 0.0)) throw ArgumentError("sup_ratio_deviation: f must be > 0 on the grid");
    k = std::max(k, std::abs(p0[i] / f[i] - 1.0));
  }
  return k;
}

/// Constants of the geometric Kullback bound under q >= a f.
struct GeometricBoundParams {
  double a = 1.0;
  double kappa = 0.0;

  double rho() const { return 1.0 - a; }
  void validate() const {
    if (!(a > 0.0 && a <= 1.0)) throw ArgumentError("bound: a must lie in (0, 1]");
    if (!(kappa >= 0.0)) throw ArgumentError("bound: kappa must be >= 0");
  }
};

/// kappa rho^n (1 + kappa rho^n), an upper bound on K(p^n, f).
inline double prop1_bound(const GeometricBoundParams& params, std::size_t n) {
  params.validate();
  const double t = params.kappa * std::pow(params.rho(), static_cast<double>(n));
  return t * (1.0 + t);
}

}  // namespace mhrank
