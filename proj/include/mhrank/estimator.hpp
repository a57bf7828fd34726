#pragma once

#include "mhrank/common.hpp"
#include "mhrank/density.hpp"
#include "mhrank/kernel.hpp"
#include "mhrank/snapshots.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mhrank {

/// Tuning of the split-sample entropy estimator: bandwidth
/// h_N = bandwidth_scale * N^(-alpha) and threshold a_N = threshold_scale / log N.
struct EstimatorParams {
  double alpha = 0.2;
  double bandwidth_scale = 1.0;
  Kernel kernel = Kernel::epanechnikov;
  double threshold_scale = 0.01;
  int dimension = 1;

  /// alpha 0.2 in 1D, 0.3 in 2D, and 0.5/s beyond.
  static EstimatorParams defaults(int dimension) {
    EstimatorParams p;
    p.dimension = dimension;
    p.alpha = dimension == 1 ? 0.2 : dimension == 2 ? 0.3 : 0.5 / dimension;
    p.validate();
    return p;
  }

  /// Consistency requires 0 < alpha < 1/s.
  void validate() const {
    if (dimension < 1) throw ConfigError("estimator: dimension must be positive");
    if (!(alpha > 0.0 && alpha < 1.0 / dimension))
      throw ConfigError("estimator: alpha must lie in (0, 1/s) = (0, " + std::to_string(1.0 / dimension) + ")");
    if (!(bandwidth_scale > 0.0)) throw ConfigError("estimator: bandwidth_scale must be > 0");
    if (!(threshold_scale > 0.0)) throw ConfigError("estimator: threshold_scale must be > 0");
  }

  double bandwidth(std::size_t n) const { return bandwidth_scale * std::pow(static_cast<double>(n), -alpha); }

  double threshold(std::size_t n) const {
    const double a = threshold_scale / std::log(static_cast<double>(n));
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("estimator: threshold a_N = " + std::to_string(a) + " is outside (0, 1) for N = " +
                        std::to_string(n));
    return a;
  }

  bool operator==(const EstimatorParams&) const = default;
};

/// Even-position rows (1-indexed 2, 4, ...) go to Y, odd-position rows
/// (1-indexed 1, 3, ...) to Z.
inline std::pair<Matrix, Matrix> split_sample(MatrixRef points) {
  const auto n = points.rows();
  if (n < 2) throw ArgumentError("split_sample: need at least 2 points");
  Matrix y(n / 2, points.cols());
  Matrix z((n + 1) / 2, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i % 2 == 1) y.row(i / 2) = points.row(i);
    else z.row(i / 2) = points.row(i);
  }
  return {std::move(y), std::move(z)};
}

/// Parzen-Rosenblatt estimate (1 / (M h^s)) sum_i K((x - Z_i) / h), by a
/// direct loop over Z.
inline double kde_eval(const Vector& x, MatrixRef z, double h, Kernel kernel) {
  if (!(h > 0.0)) throw ArgumentError("kde_eval: bandwidth must be > 0");
  if (z.rows() < 1) throw ArgumentError("kde_eval: empty sample");
  if (x.size() != z.cols()) throw ArgumentError("kde_eval: dimension mismatch");
  const int s = static_cast<int>(z.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double u2 = (x.transpose() - z.row(i)).squaredNorm() / (h * h);
    acc += kernel_profile(kernel, u2);
  }
  return kernel_normalizer(kernel, s) * acc / (static_cast<double>(z.rows()) * std::pow(h, s));
}

/// kde_eval over a fixed sample, with Z sorted on its first coordinate so
/// that compactly supported kernels only visit the points within h * r.
class KdeEvaluator {
 public:
  KdeEvaluator(MatrixRef z, double h, Kernel kernel) : h_(h), kernel_(kernel) {
    if (!(h > 0.0)) throw ArgumentError("kde: bandwidth must be > 0");
    if (z.rows() < 1) throw ArgumentError("kde: empty sample");
    const auto m = z.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return z(a, 0) < z(b, 0); });
    sorted_.resize(m, z.cols());
    keys_.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      sorted_.row(i) = z.row(order[static_cast<std::size_t>(i)]);
      keys_[static_cast<std::size_t>(i)] = sorted_(i, 0);
    }
    const int s = static_cast<int>(z.cols());
    prefactor_ = kernel_normalizer(kernel, s) / (static_cast<double>(m) * std::pow(h, s));
  }

  template <class Row>
  double operator()(const Row& x) const {
    std::size_t begin = 0;
    std::size_t end = keys_.size();
    const double reach = h_ * support_radius(kernel_);
    if (std::isfinite(reach)) {
      begin = static_cast<std::size_t>(std::lower_bound(keys_.begin(), keys_.end(), x(0) - reach) - keys_.begin());
      end = static_cast<std::size_t>(std::upper_bound(keys_.begin(), keys_.end(), x(0) + reach) - keys_.begin());
    }
    const double inv_h2 = 1.0 / (h_ * h_);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double u2 = 0.0;
      for (Eigen::Index d = 0; d < sorted_.cols(); ++d) {
        const double diff = x(d) - sorted_(static_cast<Eigen::Index>(i), d);
        u2 += diff * diff;
      }
      acc += kernel_profile(kernel_, u2 * inv_h2);
    }
    return prefactor_ * acc;
  }

 private:
  Matrix sorted_;
  std::vector<double> keys_;
  double h_;
  Kernel kernel_;
  double prefactor_ = 0.0;
};

struct EntropyEstimate {
  double value = 0.0;
  std::size_t n_thresholded = 0;  // Y points rejected by the a_N indicator
  bool degenerate = false;        // every Y point was rejected
};

/// Split-sample entropy estimate of H(p) = int p log p:
/// (1 / [N/2]) sum_i log p_hat(Y_i) 1{p_hat(Y_i) >= a_N}, with p_hat the
/// kernel estimate built on Z. The divisor counts all Y points.
inline EntropyEstimate entropy_estimate(MatrixRef points, const EstimatorParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 4) throw ArgumentError("entropy_estimate: need N >= 4");
  if (points.cols() != params.dimension) throw ArgumentError("entropy_estimate: dimension mismatch");
  const auto [y, z] = split_sample(points);
  const KdeEvaluator p_hat(z, params.bandwidth(n), params.kernel);
  const double a_n = params.threshold(n);

  EntropyEstimate out;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double p = p_hat(y.row(i));
    if (p >= a_n) sum += std::log(p);
    else ++out.n_thresholded;
  }
  out.degenerate = out.n_thresholded == static_cast<std::size_t>(y.rows());
  out.value = out.degenerate ? 0.0 : sum / static_cast<double>(y.rows());
  return out;
}

/// Mean of the target's scale-free log kernel over the rows.
inline double mean_log_kernel(MatrixRef points, const TargetDensity& target) {
  if (points.rows() < 1) throw ArgumentError("mc_log_phi: empty sample");
  // Running mean (exact when log phi is constant).
  double mean = 0.0;
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    const double v = target.log_kernel(points.row(j).transpose());
    if (!std::isfinite(v))
      throw DataError("mc_log_phi: log phi is not finite at chain " + std::to_string(j));
    mean += (v - mean) / static_cast<double>(j + 1);
  }
  return mean;
}

/// Monte-Carlo estimate (1/N) sum_j log phi(X_j).
inline double mc_log_phi(MatrixRef points, const TargetDensity& target) {
  return mean_log_kernel(points, target) + target.log_scale();
}

struct DivergenceRecord {
  std::size_t n = 0;
  double entropy_estimate = 0.0;
  double mean_log_phi = 0.0;
  double mean_log_kernel = 0.0;  // mean_log_phi without the target's constant log-scale
  std::optional<double> kullback_estimate;
  std::size_t n_thresholded = 0;
  bool degenerate = false;
};

/// Per-iteration estimates for one strategy, plus the conditions they were
/// computed under (checked before two curves are compared).
struct DivergenceCurve {
  std::string strategy_id;
  std::size_t n_chains = 0;
  EstimatorParams params;
  std::string target_name;
  double target_log_scale = 0.0;
  std::string init_label;
  std::vector<DivergenceRecord> records;
};

/// Estimates for every slice 0..n0 of an ensemble run. K_N is reported when
/// the target's normalizing constant is known.
inline DivergenceCurve divergence_curve(const EnsembleSnapshots& snaps, const TargetDensity& target,
                                        const EstimatorParams& params, std::size_t workers = 1,
                                        std::string init_label = {}) {
  params.validate();
  if (snaps.dimension() != target.dimension() || params.dimension != target.dimension())
    throw ArgumentError("divergence_curve: dimension mismatch");
  DivergenceCurve curve{snaps.strategy_id(), snaps.n_chains(), params, target.name(), target.log_scale(),
                        std::move(init_label), {}};
  curve.records.resize(snaps.n_iters() + 1);
  parallel_for(curve.records.size(), workers, [&](std::size_t n) {
    const auto slice = snaps.slice(n);
    DivergenceRecord rec;
    rec.n = n;
    try {
      const auto h = entropy_estimate(slice, params);
      rec.entropy_estimate = h.value;
      rec.n_thresholded = h.n_thresholded;
      rec.degenerate = h.degenerate;
      rec.mean_log_kernel = mean_log_kernel(slice, target);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + ", iteration " + std::to_string(n) + " of '" +
                      snaps.strategy_id() + "'");
    }
    rec.mean_log_phi = rec.mean_log_kernel + target.log_scale();
    if (const auto log_c = target.log_norm())
      rec.kullback_estimate = rec.entropy_estimate - (rec.mean_log_phi + *log_c);
    curve.records[n] = rec;
  });
  return curve;
}

struct DivergenceDiff {
  std::size_t n;
  double value;
};

/// D_N(n) = [H_N^a - mean log phi^a] - [H_N^b - mean log phi^b]; positive
/// when `a` is further from the target than `b`. Needs no normalizing constant.
inline std::vector<DivergenceDiff> divergence_diff(const DivergenceCurve& a, const DivergenceCurve& b) {
  auto fail = [&](const std::string& what) {
    throw ComparabilityError("curves '" + a.strategy_id + "' and '" + b.strategy_id + "' differ in " + what);
  };
  if (a.records.size() != b.records.size()) fail("number of iterations");
  if (a.n_chains != b.n_chains) fail("number of chains");
  if (!(a.params == b.params)) fail("estimator parameters");
  if (a.target_name != b.target_name || a.target_log_scale != b.target_log_scale) fail("target");
  if (a.init_label != b.init_label) fail("initial distribution");
  std::vector<DivergenceDiff> out;
  out.reserve(a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    out.push_back({ra.n, (ra.entropy_estimate - ra.mean_log_kernel) - (rb.entropy_estimate - rb.mean_log_kernel)});
  }
  return out;
}

}  // namespace mhrank
