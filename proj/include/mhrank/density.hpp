#pragma once

#include "mhrank/common.hpp"
#include "mhrank/kernel.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mhrank {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(v_i)), stable for very negative entries.
inline double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

/// Multivariate normal N(mean, cov) with a cached Cholesky factor.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto s = mean_.size();
    if (s == 0 || cov_.rows() != s || cov_.cols() != s)
      throw ArgumentError("gaussian: covariance shape does not match mean");
    if (!cov_.isApprox(cov_.transpose(), 1e-12))
      throw ArgumentError("gaussian: covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success)
      throw ArgumentError("gaussian: covariance is not positive definite");
    chol_ = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < s; ++i) log_det += 2.0 * std::log(chol_(i, i));
    log_const_ = -0.5 * (static_cast<double>(s) * std::log(2.0 * std::numbers::pi) + log_det);
  }

  /// Isotropic N(mean, sd^2 I).
  static Gaussian isotropic(Vector mean, double sd) {
    if (!(sd > 0.0) || !std::isfinite(sd)) throw ArgumentError("gaussian: sd must be positive");
    const auto s = mean.size();
    Matrix cov = Matrix::Identity(s, s) * (sd * sd);
    return Gaussian(std::move(mean), std::move(cov));
  }

  int dimension() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Eigen::MatrixXd& chol() const { return chol_; }

  double log_density(const Vector& x) const {
    const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_const_ - 0.5 * z.squaredNorm();
  }

  Vector sample(Rng& rng) const {
    std::normal_distribution<double> normal;
    Vector z(mean_.size());
    for (Eigen::Index d = 0; d < z.size(); ++d) z[d] = normal(rng);
    return mean_ + chol_ * z;
  }

 private:
  Vector mean_;
  Matrix cov_;
  Eigen::MatrixXd chol_;
  double log_const_ = 0.0;
};

/// Finite mixture sum_i w_i N(mu_i, Sigma_i). Weights are positive and sum to one.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Gaussian> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (weights_.empty() || weights_.size() != components_.size())
      throw ArgumentError("mixture: need one weight per component");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw ArgumentError("mixture: weights must be > 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("mixture: weights must sum to 1");
    for (const auto& c : components_)
      if (c.dimension() != components_.front().dimension())
        throw ArgumentError("mixture: components differ in dimension");
    log_weights_.reserve(weights_.size());
    for (double w : weights_) log_weights_.push_back(std::log(w));
  }

  /// 1D mixture from (weight, mean, variance) triples.
  static GaussianMixture univariate(const std::vector<double>& weights,
                                    const std::vector<double>& means,
                                    const std::vector<double>& variances) {
    if (means.size() != weights.size() || variances.size() != weights.size())
      throw ArgumentError("mixture: parameter lists differ in length");
    std::vector<Gaussian> comps;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(variances[i] > 0.0)) throw ArgumentError("mixture: variance must be > 0");
      comps.emplace_back(Vector::Constant(1, means[i]), Matrix::Constant(1, 1, variances[i]));
    }
    return GaussianMixture(weights, std::move(comps));
  }

  int dimension() const { return components_.front().dimension(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Gaussian>& components() const { return components_; }

  double log_density(const Vector& x) const {
    if (x.size() != dimension())
      throw ArgumentError("mixture: point has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(dimension()));
    std::vector<double> terms(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i)
      terms[i] = log_weights_[i] + components_[i].log_density(x);
    return log_sum_exp(terms);
  }

  Vector sample(Rng& rng) const {
    const double u = uniform01(rng);
    double cum = 0.0;
    std::size_t k = components_.size() - 1;
    for (std::size_t i = 0; i + 1 < weights_.size(); ++i) {
      cum += weights_[i];
      if (u < cum) {
        k = i;
        break;
      }
    }
    return components_[k].sample(rng);
  }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Gaussian> components_;
};

/// The trimodal 1D benchmark: weights (0.5, 0.3, 0.2), means (0, 9, -6),
/// variances (2, 1, 1).
inline GaussianMixture benchmark_mixture_1d() {
  return GaussianMixture::univariate({0.5, 0.3, 0.2}, {0.0, 9.0, -6.0}, {2.0, 1.0, 1.0});
}

/// Stand-in 2D mixture with three nearly disconnected modes: weights
/// (0.4, 0.35, 0.25), means (0,0), (8,8), (-6,4), covariances 2I, I, I.
/// Illustrative only; not a published parameter set.
inline GaussianMixture standin_mixture_2d() {
  auto mean = [](double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
  };
  std::vector<Gaussian> comps{
      Gaussian(mean(0, 0), Matrix::Identity(2, 2) * 2.0),
      Gaussian(mean(8, 8), Matrix::Identity(2, 2)),
      Gaussian(mean(-6, 4), Matrix::Identity(2, 2)),
  };
  return GaussianMixture({0.4, 0.35, 0.25}, std::move(comps));
}

/// Target f = C phi, known through log phi. The unnormalized log density is
/// split into a log-kernel function and a constant log-scale, so that
/// log phi(x) = log_kernel(x) + log_scale. Everything that only needs phi up
/// to a constant (acceptance ratios, chain moves, divergence differences)
/// reads the kernel, which makes rescaling phi an exact no-op there.
class TargetDensity {
 public:
  using LogFn = std::function<double(const Vector&)>;

  TargetDensity(std::string name, int dimension, LogFn log_kernel, double log_scale = 0.0,
                std::optional<double> log_norm = std::nullopt)
      : name_(std::move(name)),
        dimension_(dimension),
        log_kernel_(std::move(log_kernel)),
        log_scale_(log_scale),
        log_norm_(log_norm) {
    if (dimension_ < 1) throw ArgumentError("target: dimension must be positive");
    if (!log_kernel_) throw ArgumentError("target: missing log density");
  }

  /// Fully known target f given by a Gaussian mixture (log C = 0).
  static TargetDensity from_mixture(std::string name, GaussianMixture mixture) {
    auto shared = std::make_shared<const GaussianMixture>(std::move(mixture));
    TargetDensity t(std::move(name), shared->dimension(),
                    [shared](const Vector& x) { return shared->log_density(x); }, 0.0, 0.0);
    t.mixture_ = shared;
    return t;
  }

  const std::string& name() const { return name_; }
  int dimension() const { return dimension_; }

  /// log phi(x) without the constant log-scale term.
  double log_kernel(const Vector& x) const {
    if (x.size() != dimension_) throw ArgumentError("target: dimension mismatch");
    return log_kernel_(x);
  }
  double log_phi(const Vector& x) const { return log_kernel(x) + log_scale_; }
  double log_scale() const { return log_scale_; }

  /// log C with f = C phi, when known.
  std::optional<double> log_norm() const { return log_norm_; }

  /// Same target with phi replaced by factor * phi (C divided by factor).
  TargetDensity scaled(double factor) const {
    if (!(factor > 0.0)) throw ArgumentError("target: scale factor must be positive");
    TargetDensity t = *this;
    t.log_scale_ += std::log(factor);
    if (t.log_norm_) *t.log_norm_ -= std::log(factor);
    return t;
  }

  /// Same target with the normalizing constant treated as unknown.
  TargetDensity without_norm() const {
    TargetDensity t = *this;
    t.log_norm_.reset();
    return t;
  }

  /// Present when the target is a Gaussian mixture (it can then be sampled directly).
  const std::shared_ptr<const GaussianMixture>& mixture() const { return mixture_; }

  /// Correlation, when the target is a standard bivariate normal.
  std::optional<double> bivariate_rho() const { return rho_; }

  static TargetDensity bivariate_normal(double rho) {
    if (!(std::abs(rho) < 1.0)) throw ConfigError("bivariate normal: |rho| must be < 1");
    Matrix cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    std::vector<Gaussian> c{Gaussian(Vector::Zero(2), cov)};
    auto t = from_mixture("bivariate_normal", GaussianMixture({1.0}, std::move(c)));
    t.rho_ = rho;
    return t;
  }

 private:
  std::string name_;
  int dimension_;
  LogFn log_kernel_;
  double log_scale_;
  std::optional<double> log_norm_;
  std::shared_ptr<const GaussianMixture> mixture_;
  std::optional<double> rho_;
};

// ---------------------------------------------------------------------------
// Proposal densities

struct GaussianProposal {
  Gaussian law;
};

/// Student t(dof) with location and scale, 1D. Includes its normalizing constant.
struct StudentProposal {
  double dof;
  double location = 0.0;
  double scale = 1.0;
};

struct UniformBoxProposal {
  Vector lower;
  Vector upper;
};

/// Kernel density with per-coordinate bandwidths:
/// q(x) = 1 / (M prod_d h_d) sum_i K((x - p_i) / h).
struct KdeProposal {
  Matrix points;
  Vector bandwidth;
  Kernel kernel = Kernel::gaussian;
};

struct MixtureProposal {
  std::shared_ptr<const GaussianMixture> law;
};

/// Evaluable and samplable density used as an independence proposal or as
/// an initial distribution.
class ProposalDensity {
 public:
  using Kind =
      std::variant<GaussianProposal, StudentProposal, UniformBoxProposal, KdeProposal, MixtureProposal>;

  explicit ProposalDensity(Kind kind) : kind_(std::move(kind)) { validate(); }

  static ProposalDensity gaussian(Vector mean, double sd) {
    return ProposalDensity(GaussianProposal{Gaussian::isotropic(std::move(mean), sd)});
  }
  static ProposalDensity gaussian(double mean, double sd) {
    return gaussian(Vector::Constant(1, mean), sd);
  }
  static ProposalDensity student(double dof, double location = 0.0, double scale = 1.0) {
    return ProposalDensity(StudentProposal{dof, location, scale});
  }
  static ProposalDensity uniform_box(Vector lower, Vector upper) {
    return ProposalDensity(UniformBoxProposal{std::move(lower), std::move(upper)});
  }
  static ProposalDensity kde(Matrix points, Vector bandwidth, Kernel kernel = Kernel::gaussian) {
    return ProposalDensity(KdeProposal{std::move(points), std::move(bandwidth), kernel});
  }
  static ProposalDensity mixture(GaussianMixture m) {
    return ProposalDensity(MixtureProposal{std::make_shared<const GaussianMixture>(std::move(m))});
  }
  static ProposalDensity mixture(std::shared_ptr<const GaussianMixture> m) {
    return ProposalDensity(MixtureProposal{std::move(m)});
  }

  const Kind& kind() const { return kind_; }

  int dimension() const {
    return std::visit(
        [](const auto& k) -> int {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianProposal>) return k.law.dimension();
          else if constexpr (std::is_same_v<T, StudentProposal>) return 1;
          else if constexpr (std::is_same_v<T, UniformBoxProposal>) return static_cast<int>(k.lower.size());
          else if constexpr (std::is_same_v<T, KdeProposal>) return static_cast<int>(k.points.cols());
          else return k.law->dimension();
        },
        kind_);
  }

  double log_density(const Vector& x) const {
    if (x.size() != dimension()) throw ArgumentError("proposal: dimension mismatch");
    return std::visit([&](const auto& k) { return log_density_of(k, x); }, kind_);
  }

  double density(const Vector& x) const { return std::exp(log_density(x)); }

  Vector sample(Rng& rng) const {
    return std::visit([&](const auto& k) { return sample_of(k, rng); }, kind_);
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianProposal>)
            os << "gaussian(dim=" << k.law.dimension() << ")";
          else if constexpr (std::is_same_v<T, StudentProposal>)
            os << "student(" << k.dof << ", " << k.location << ", " << k.scale << ")";
          else if constexpr (std::is_same_v<T, UniformBoxProposal>)
            os << "uniform_box(dim=" << k.lower.size() << ")";
          else if constexpr (std::is_same_v<T, KdeProposal>)
            os << "kde(points=" << k.points.rows() << ", " << to_string(k.kernel) << ")";
          else
            os << "mixture(components=" << k.law->components().size() << ")";
        },
        kind_);
    return os.str();
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, StudentProposal>) {
            if (!(k.dof >= 1.0)) throw ArgumentError("student: degrees of freedom must be >= 1");
            if (!(k.scale > 0.0)) throw ArgumentError("student: scale must be > 0");
          } else if constexpr (std::is_same_v<T, UniformBoxProposal>) {
            if (k.lower.size() == 0 || k.lower.size() != k.upper.size())
              throw ArgumentError("uniform_box: bounds differ in dimension");
            if (!(k.lower.array() < k.upper.array()).all())
              throw ArgumentError("uniform_box: lower must be < upper");
          } else if constexpr (std::is_same_v<T, KdeProposal>) {
            if (k.points.rows() == 0) throw ArgumentError("kde: no points");
            if (k.bandwidth.size() != k.points.cols())
              throw ArgumentError("kde: one bandwidth per coordinate required");
            if (!(k.bandwidth.array() > 0.0).all())
              throw ArgumentError("kde: bandwidths must be > 0");
          } else if constexpr (std::is_same_v<T, MixtureProposal>) {
            if (!k.law) throw ArgumentError("mixture proposal: missing law");
          }
        },
        kind_);
  }

  static double log_density_of(const GaussianProposal& k, const Vector& x) {
    return k.law.log_density(x);
  }
  static double log_density_of(const StudentProposal& k, const Vector& x) {
    const double d = k.dof;
    const double t = (x[0] - k.location) / k.scale;
    return std::lgamma(0.5 * (d + 1.0)) - std::lgamma(0.5 * d) - 0.5 * std::log(d * std::numbers::pi) -
           std::log(k.scale) - 0.5 * (d + 1.0) * std::log1p(t * t / d);
  }
  static double log_density_of(const UniformBoxProposal& k, const Vector& x) {
    if ((x.array() < k.lower.array()).any() || (x.array() > k.upper.array()).any()) return kNegInf;
    return -(k.upper - k.lower).array().log().sum();
  }
  static double log_density_of(const KdeProposal& k, const Vector& x) {
    const auto m = k.points.rows();
    const int s = static_cast<int>(k.points.cols());
    const double log_prefactor = std::log(kernel_normalizer(k.kernel, s)) -
                                 std::log(static_cast<double>(m)) - k.bandwidth.array().log().sum();
    if (k.kernel == Kernel::gaussian) {
      std::vector<double> terms(static_cast<std::size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i) {
        const double u2 = ((x.transpose() - k.points.row(i)).array() / k.bandwidth.transpose().array())
                              .square()
                              .sum();
        terms[static_cast<std::size_t>(i)] = -0.5 * u2;
      }
      return log_prefactor + log_sum_exp(terms);
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double u2 = ((x.transpose() - k.points.row(i)).array() / k.bandwidth.transpose().array())
                            .square()
                            .sum();
      acc += kernel_profile(k.kernel, u2);
    }
    return acc > 0.0 ? log_prefactor + std::log(acc) : kNegInf;
  }
  static double log_density_of(const MixtureProposal& k, const Vector& x) {
    return k.law->log_density(x);
  }

  static Vector sample_of(const GaussianProposal& k, Rng& rng) { return k.law.sample(rng); }
  static Vector sample_of(const StudentProposal& k, Rng& rng) {
    std::student_t_distribution<double> t(k.dof);
    return Vector::Constant(1, k.location + k.scale * t(rng));
  }
  static Vector sample_of(const UniformBoxProposal& k, Rng& rng) {
    Vector x(k.lower.size());
    for (Eigen::Index d = 0; d < x.size(); ++d)
      x[d] = k.lower[d] + (k.upper[d] - k.lower[d]) * uniform01(rng);
    return x;
  }
  static Vector sample_of(const KdeProposal& k, Rng& rng) {
    const auto m = static_cast<std::uint64_t>(k.points.rows());
    const auto i = static_cast<Eigen::Index>(std::min<std::uint64_t>(
        m - 1, static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(m))));
    const Vector u = sample_kernel(k.kernel, static_cast<int>(k.points.cols()), rng);
    return k.points.row(i).transpose() + k.bandwidth.cwiseProduct(u);
  }
  static Vector sample_of(const MixtureProposal& k, Rng& rng) { return k.law->sample(rng); }

  Kind kind_;
};

/// Built-in targets.
inline TargetDensity benchmark_target_1d() {
  return TargetDensity::from_mixture("benchmark_mixture_1d", benchmark_mixture_1d());
}
inline TargetDensity standin_target_2d() {
  return TargetDensity::from_mixture("standin_mixture_2d", standin_mixture_2d());
}
inline TargetDensity normal_target(double mean = 0.0, double sd = 1.0) {
  if (!(sd > 0.0) || !std::isfinite(mean)) throw ArgumentError("normal target: need finite mean and sd > 0");
  return TargetDensity::from_mixture("normal",
                                     GaussianMixture::univariate({1.0}, {mean}, {sd * sd}));
}

}  // namespace mhrank
