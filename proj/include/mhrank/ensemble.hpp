#pragma once

#include "mhrank/common.hpp"
#include "mhrank/density.hpp"
#include "mhrank/sampler.hpp"
#include "mhrank/snapshots.hpp"

#include <algorithm>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

namespace mhrank {

struct PointMass {
  Vector at;
};

/// Common starting law p^0 of every compared strategy.
class InitialDistribution {
 public:
  using Kind = std::variant<ProposalDensity, PointMass>;

  InitialDistribution(ProposalDensity p) : kind_(std::move(p)) {}  // NOLINT(google-explicit-constructor)
  InitialDistribution(PointMass p) : kind_(std::move(p)) {}        // NOLINT(google-explicit-constructor)

  int dimension() const {
    if (const auto* p = std::get_if<ProposalDensity>(&kind_)) return p->dimension();
    return static_cast<int>(std::get<PointMass>(kind_).at.size());
  }

  Vector sample(Rng& rng) const {
    if (const auto* p = std::get_if<ProposalDensity>(&kind_)) return p->sample(rng);
    return std::get<PointMass>(kind_).at;
  }

  /// The density of p^0, when it has one.
  const ProposalDensity* density() const { return std::get_if<ProposalDensity>(&kind_); }

 private:
  Kind kind_;
};

struct EnsembleOptions {
  std::size_t workers = 1;                 // 0 = hardware concurrency
  std::uint64_t max_values = 200'000'000;  // cap on N (n0 + 1) s
};

/// Runs N independent chains of `strategy` for n_iters transitions from a
/// common initial law and records every time slice. Chain j draws from a
/// stream seeded by (master_seed, strategy.id, j), so the tensor does not
/// depend on the worker count. Adaptive strategies are rebuilt from slices
/// 0..n at each update time n, identically for every chain, before the
/// transition n -> n+1.
inline EnsembleSnapshots run_ensemble(const Strategy& strategy, const InitialDistribution& init,
                                      std::size_t n_chains, std::size_t n_iters, std::uint64_t master_seed,
                                      const EnsembleOptions& options = {}) {
  strategy.validate();
  const int s = strategy.target->dimension();
  if (init.dimension() != s) throw ConfigError("ensemble: initial distribution dimension mismatch");
  if (n_chains < 2) throw ArgumentError("ensemble: n_chains must be >= 2");
  const long double values = static_cast<long double>(n_chains) * (n_iters + 1) * s;
  if (values > static_cast<long double>(options.max_values))
    throw CapacityError("ensemble: " + std::to_string(static_cast<unsigned long long>(values)) +
                        " stored values exceed the cap of " + std::to_string(options.max_values));

  EnsembleSnapshots snaps(strategy.id, n_chains, n_iters, s, master_seed);
  std::vector<Rng> streams;
  streams.reserve(n_chains);
  for (std::size_t j = 0; j < n_chains; ++j) streams.push_back(make_stream(master_seed, strategy.id, j));

  std::vector<ChainState> states(n_chains);
  parallel_for(n_chains, options.workers, [&](std::size_t j) {
    Vector x0 = init.sample(streams[j]);
    snaps.set_state(0, j, x0);
    states[j] = ChainState::at(std::move(x0), *strategy.target);
  });

  Strategy current = strategy;
  std::vector<unsigned char> moved(n_chains);
  for (std::size_t n = 0; n < n_iters; ++n) {
    if (const auto* ad = std::get_if<AdaptiveSampler>(&current.kind);
        ad && std::binary_search(ad->update_times.begin(), ad->update_times.end(), n)) {
      current = adaptive_update(current, snaps, n);
    }
    parallel_for(n_chains, options.workers, [&](std::size_t j) {
      const auto before = states[j].accept_count;
      states[j] = step(current, std::move(states[j]), streams[j]);
      moved[j] = states[j].accept_count != before;
      snaps.set_state(n + 1, j, states[j].position);
    });
    std::size_t accepted = 0;
    for (auto m : moved) accepted += m;
    snaps.set_acceptance(n, static_cast<double>(accepted) / static_cast<double>(n_chains));
  }
  return snaps;
}

}  // namespace mhrank
