#pragma once

#include "mhrank/common.hpp"
#include "mhrank/density.hpp"
#include "mhrank/snapshots.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mhrank {

/// Independence sampler: q(y|x) = q(y).
struct IndependenceSampler {
  ProposalDensity proposal;
};

/// Random-walk Metropolis with Gaussian increments N(0, step_cov).
struct RandomWalk {
  Gaussian increment;

  static RandomWalk isotropic(double sigma, int dimension) {
    return {Gaussian::isotropic(Vector::Zero(dimension), sigma)};
  }
};

/// Systematic-scan Gibbs sampler for the standard bivariate normal with
/// correlation rho: x1 | x2 ~ N(rho x2, 1 - rho^2) and symmetrically.
struct BivariateGibbs {
  double rho;
};

/// Pooled-history bandwidth rule for the adaptive proposal.
struct ScottRule {
  double scale = 1.0;
};

/// Independence sampler whose proposal is rebuilt, at fixed iterations, as a
/// kernel density estimate of the pooled history of all chains.
struct AdaptiveSampler {
  ProposalDensity initial;
  ProposalDensity current;
  std::vector<std::size_t> update_times;  // sorted, unique
  ScottRule bandwidth_rule{};
  std::size_t pool_cap = 5000;
  std::size_t updates_applied = 0;
};

/// A simulation strategy: one Markov transition mechanism for a target.
struct Strategy {
  using Kind = std::variant<IndependenceSampler, RandomWalk, BivariateGibbs, AdaptiveSampler>;

  std::string id;
  Kind kind;
  std::shared_ptr<const TargetDensity> target;

  static Strategy independence(std::string id, ProposalDensity q, std::shared_ptr<const TargetDensity> f) {
    return make(std::move(id), IndependenceSampler{std::move(q)}, std::move(f));
  }
  static Strategy random_walk(std::string id, double sigma, std::shared_ptr<const TargetDensity> f) {
    const int s = f ? f->dimension() : 1;
    return make(std::move(id), RandomWalk::isotropic(sigma, s), std::move(f));
  }
  static Strategy random_walk(std::string id, Matrix step_cov, std::shared_ptr<const TargetDensity> f) {
    const auto s = step_cov.rows();
    return make(std::move(id), RandomWalk{Gaussian(Vector::Zero(s), std::move(step_cov))}, std::move(f));
  }
  static Strategy gibbs(std::string id, double rho, std::shared_ptr<const TargetDensity> f) {
    return make(std::move(id), BivariateGibbs{rho}, std::move(f));
  }
  static Strategy adaptive(std::string id, ProposalDensity initial, std::vector<std::size_t> update_times,
                           std::shared_ptr<const TargetDensity> f, ScottRule rule = {},
                           std::size_t pool_cap = 5000) {
    std::sort(update_times.begin(), update_times.end());
    update_times.erase(std::unique(update_times.begin(), update_times.end()), update_times.end());
    ProposalDensity current = initial;
    return make(std::move(id),
                AdaptiveSampler{std::move(initial), std::move(current), std::move(update_times), rule, pool_cap},
                std::move(f));
  }

  bool is_adaptive() const { return std::holds_alternative<AdaptiveSampler>(kind); }

  /// Checks the structural invariants against the target.
  void validate() const {
    if (id.empty()) throw ConfigError("strategy: empty id");
    if (!target) throw ConfigError("strategy '" + id + "': no target");
    const int s = target->dimension();
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IndependenceSampler>) {
            if (k.proposal.dimension() != s) throw ConfigError("strategy '" + id + "': proposal dimension mismatch");
          } else if constexpr (std::is_same_v<T, RandomWalk>) {
            if (k.increment.dimension() != s) throw ConfigError("strategy '" + id + "': step covariance dimension mismatch");
          } else if constexpr (std::is_same_v<T, BivariateGibbs>) {
            if (!(std::abs(k.rho) < 1.0)) throw ConfigError("strategy '" + id + "': |rho| must be < 1");
            if (s != 2) throw ConfigError("strategy '" + id + "': gibbs needs a 2D target");
            const auto rho = target->bivariate_rho();
            if (!rho || *rho != k.rho)
              throw ConfigError("strategy '" + id + "': gibbs conditionals do not match the target");
          } else {
            if (k.initial.dimension() != s) throw ConfigError("strategy '" + id + "': proposal dimension mismatch");
            if (k.update_times.empty()) throw ConfigError("strategy '" + id + "': adaptive needs update times");
            if (k.pool_cap < 2) throw ConfigError("strategy '" + id + "': pool cap must be >= 2");
          }
        },
        kind);
  }

 private:
  static Strategy make(std::string id, Kind kind, std::shared_ptr<const TargetDensity> f) {
    Strategy st{std::move(id), std::move(kind), std::move(f)};
    st.validate();
    return st;
  }
};

/// Current position of one chain. `log_phi_cached` holds log phi(position)
/// without the target's constant log-scale term (see TargetDensity).
struct ChainState {
  Vector position;
  double log_phi_cached = 0.0;
  std::uint64_t accept_count = 0;
  std::uint64_t step_count = 0;

  static ChainState at(Vector x, const TargetDensity& target) {
    const double lp = target.log_kernel(x);
    return {std::move(x), lp, 0, 0};
  }
};

/// Metropolis-Hastings acceptance probability
/// min{1, phi(y) q(x|y) / (phi(x) q(y|x))} with q_xy = q(x|y), q_yx = q(y|x).
/// `log_phi_x` and `log_phi_y` are the target's scale-free log-kernel values,
/// so the result does not depend on the target's constant factor.
inline double acceptance_ratio(const TargetDensity& /*target*/, double q_xy, double q_yx, double log_phi_x,
                               double log_phi_y) {
  if (!(q_yx > 0.0) || !std::isfinite(q_yx))
    throw InvalidProposal("proposal produced a point its own density rates impossible");
  if (!std::isfinite(q_xy) || q_xy < 0.0) throw ArgumentError("acceptance: q(x|y) must be finite and >= 0");
  if (log_phi_y == kNegInf || q_xy == 0.0) return 0.0;
  return std::min(1.0, std::exp(log_phi_y - log_phi_x) * q_xy / q_yx);
}

/// Log-domain variant of acceptance_ratio taking log q(x|y) and log q(y|x).
inline double acceptance_ratio_log(double log_q_xy, double log_q_yx, double log_phi_x, double log_phi_y) {
  if (log_q_yx == kNegInf || std::isnan(log_q_yx))
    throw InvalidProposal("proposal produced a point its own density rates impossible");
  if (log_phi_y == kNegInf || log_q_xy == kNegInf) return 0.0;
  const double log_a = (log_phi_y - log_phi_x) + (log_q_xy - log_q_yx);
  return log_a >= 0.0 ? 1.0 : std::exp(log_a);
}

/// Deterministic replacements for the random draws of one step (testing hook).
struct StepOverrides {
  std::optional<Vector> proposal;
  std::optional<double> uniform;
};

namespace detail {

inline const ProposalDensity* independence_proposal(const Strategy& st) {
  if (const auto* is = std::get_if<IndependenceSampler>(&st.kind)) return &is->proposal;
  if (const auto* ad = std::get_if<AdaptiveSampler>(&st.kind)) return &ad->current;
  return nullptr;
}

}  // namespace detail

/// One Metropolis-Hastings transition for independence, random-walk and
/// adaptive strategies. Moves to y iff u < alpha(x, y).
inline ChainState mh_step(const Strategy& strategy, ChainState state, Rng& rng,
                          const StepOverrides& overrides = {}) {
  const TargetDensity& target = *strategy.target;
  Vector y;
  double alpha = 0.0;
  if (const ProposalDensity* q = detail::independence_proposal(strategy)) {
    y = overrides.proposal ? *overrides.proposal : q->sample(rng);
    const double log_phi_y = target.log_kernel(y);
    alpha = acceptance_ratio_log(q->log_density(state.position), q->log_density(y), state.log_phi_cached,
                                 log_phi_y);
    const double u = overrides.uniform ? *overrides.uniform : uniform01(rng);
    ++state.step_count;
    if (u < alpha) {
      state.position = std::move(y);
      state.log_phi_cached = log_phi_y;
      ++state.accept_count;
    }
    return state;
  }
  const auto* rw = std::get_if<RandomWalk>(&strategy.kind);
  if (!rw) throw ArgumentError("mh_step: strategy '" + strategy.id + "' is not a Metropolis-Hastings kind");
  y = overrides.proposal ? *overrides.proposal : Vector(state.position + rw->increment.sample(rng));
  const double log_phi_y = target.log_kernel(y);
  alpha = acceptance_ratio_log(0.0, 0.0, state.log_phi_cached, log_phi_y);
  const double u = overrides.uniform ? *overrides.uniform : uniform01(rng);
  ++state.step_count;
  if (u < alpha) {
    state.position = std::move(y);
    state.log_phi_cached = log_phi_y;
    ++state.accept_count;
  }
  return state;
}

/// One systematic-scan Gibbs sweep. Each coordinate is redrawn from its full
/// conditional given the freshest value of the other. `normals`, when
/// non-empty, supplies the two standard-normal innovations.
inline ChainState gibbs_step(const Strategy& strategy, ChainState state, Rng& rng,
                             std::span<const double> normals = {}) {
  const auto* g = std::get_if<BivariateGibbs>(&strategy.kind);
  if (!g) throw ArgumentError("gibbs_step: strategy '" + strategy.id + "' is not a Gibbs kind");
  if (!(std::abs(g->rho) < 1.0)) throw ConfigError("gibbs_step: |rho| must be < 1");
  if (!normals.empty() && normals.size() != 2) throw ArgumentError("gibbs_step: need two injected normals");
  const double sd = std::sqrt(1.0 - g->rho * g->rho);
  std::normal_distribution<double> normal;
  for (int d = 0; d < 2; ++d) {
    const double z = normals.empty() ? normal(rng) : normals[static_cast<std::size_t>(d)];
    state.position[d] = g->rho * state.position[1 - d] + sd * z;
  }
  state.log_phi_cached = strategy.target->log_kernel(state.position);
  ++state.step_count;
  ++state.accept_count;
  return state;
}

/// One transition of any strategy kind.
inline ChainState step(const Strategy& strategy, ChainState state, Rng& rng) {
  if (std::holds_alternative<BivariateGibbs>(strategy.kind)) return gibbs_step(strategy, std::move(state), rng);
  return mh_step(strategy, std::move(state), rng);
}

/// Rows of `pool` kept when thinning it to at most `cap` points:
/// indices floor(i * total / cap), i = 0..cap-1.
inline std::vector<Eigen::Index> thinning_indices(Eigen::Index total, std::size_t cap) {
  std::vector<Eigen::Index> idx;
  if (static_cast<std::size_t>(total) <= cap) {
    idx.resize(static_cast<std::size_t>(total));
    for (Eigen::Index i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
  }
  idx.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i)
    idx.push_back(static_cast<Eigen::Index>((static_cast<unsigned __int128>(i) * total) / cap));
  return idx;
}

/// Gaussian-kernel density of the given points with Scott's bandwidth
/// h_d = scale * sd_d * M^(-1/(s+4)).
inline ProposalDensity scott_kde(Matrix points, ScottRule rule = {}) {
  const auto m = points.rows();
  const auto s = points.cols();
  if (m < 2) throw DataError("kde: need at least two points");
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::RowVectorXd var =
      (points.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(m - 1);
  const double factor = rule.scale * std::pow(static_cast<double>(m), -1.0 / (static_cast<double>(s) + 4.0));
  Vector h = var.transpose().array().sqrt() * factor;
  if (!(h.array() > 0.0).all()) throw DataError("kde: pooled history has a coordinate with zero spread");
  return ProposalDensity::kde(std::move(points), std::move(h), Kernel::gaussian);
}

/// Rebuilds an adaptive strategy's proposal from slices 0..at_iteration of
/// `history` (all chains pooled, thinned to the pool cap). The input
/// strategy is left unchanged.
inline Strategy adaptive_update(const Strategy& strategy, const EnsembleSnapshots& history,
                                std::size_t at_iteration) {
  const auto* ad = std::get_if<AdaptiveSampler>(&strategy.kind);
  if (!ad) throw ArgumentError("adaptive_update: strategy '" + strategy.id + "' is not adaptive");
  if (!std::binary_search(ad->update_times.begin(), ad->update_times.end(), at_iteration))
    throw ArgumentError("adaptive_update: iteration " + std::to_string(at_iteration) +
                        " is not an update time of '" + strategy.id + "'");
  const auto pooled = history.history(at_iteration);
  const auto keep = thinning_indices(pooled.rows(), ad->pool_cap);
  Matrix points(static_cast<Eigen::Index>(keep.size()), pooled.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) points.row(static_cast<Eigen::Index>(i)) = pooled.row(keep[i]);

  Strategy next = strategy;
  auto& nad = std::get<AdaptiveSampler>(next.kind);
  nad.current = scott_kde(std::move(points), ad->bandwidth_rule);
  ++nad.updates_applied;
  return next;
}

}  // namespace mhrank
