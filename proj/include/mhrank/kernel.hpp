#pragma once

#include "mhrank/common.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

namespace mhrank {

/// Radially symmetric smoothing kernels on R^s.
///
/// Epanechnikov is K(u) = c_s (1 - |u|^2) on the unit ball and zero outside,
/// with c_s = (s + 2) / (2 V_s) and V_s the unit-ball volume (c_1 = 3/4,
/// c_2 = 2/pi). It is bounded and vanishes outside a sphere, which is what
/// the split-sample entropy estimator needs for consistency.
///
/// Gaussian is the standard normal density on R^s. It has unbounded support,
/// so estimates built with it are outside the consistency guarantee; it is
/// offered for comparison and as the adaptive proposal's kernel.
enum class Kernel { epanechnikov, gaussian };

inline std::string_view to_string(Kernel k) {
  return k == Kernel::epanechnikov ? "epanechnikov" : "gaussian";
}

inline Kernel kernel_from_string(std::string_view name) {
  if (name == "epanechnikov") return Kernel::epanechnikov;
  if (name == "gaussian") return Kernel::gaussian;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

/// Volume of the unit ball in R^s.
inline double unit_ball_volume(int s) {
  return std::pow(std::numbers::pi, 0.5 * s) / std::tgamma(0.5 * s + 1.0);
}

/// Radius outside of which the kernel is exactly zero (infinite for gaussian).
inline double support_radius(Kernel k) {
  return k == Kernel::epanechnikov ? 1.0 : std::numeric_limits<double>::infinity();
}

/// Normalizing constant of the kernel in dimension `s`.
inline double kernel_normalizer(Kernel k, int s) {
  if (k == Kernel::epanechnikov) return (s + 2.0) / (2.0 * unit_ball_volume(s));
  return std::pow(2.0 * std::numbers::pi, -0.5 * s);
}

/// Unnormalized kernel shape at squared norm `u2`.
inline double kernel_profile(Kernel k, double u2) {
  if (k == Kernel::epanechnikov) return u2 > 1.0 ? 0.0 : 1.0 - u2;
  return std::exp(-0.5 * u2);
}

/// Kernel value at a point with squared Euclidean norm `u2`, in dimension `s`.
inline double kernel_value(Kernel k, double u2, int s) {
  return kernel_normalizer(k, s) * kernel_profile(k, u2);
}

/// Draws u ~ K on R^s.
inline Vector sample_kernel(Kernel k, int s, Rng& rng) {
  Vector u(s);
  std::normal_distribution<double> normal;
  for (int d = 0; d < s; ++d) u[d] = normal(rng);
  if (k == Kernel::gaussian) return u;
  // Radial law of Epanechnikov: |u|^2 ~ Beta(s/2, 2), direction uniform.
  std::gamma_distribution<double> ga(0.5 * s, 1.0), gb(2.0, 1.0);
  const double g1 = ga(rng);
  const double g2 = gb(rng);
  const double r = std::sqrt(g1 / (g1 + g2));
  return u * (r / u.norm());
}

}  // namespace mhrank
