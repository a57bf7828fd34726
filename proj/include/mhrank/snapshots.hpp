#pragma once

#include "mhrank/common.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mhrank {

/// States of N independent chains at every iteration 0..n0, stored
/// iteration-major so that each time slice is a contiguous N x s block.
class EnsembleSnapshots {
 public:
  using SliceView = Eigen::Map<const Matrix>;

  EnsembleSnapshots(std::string strategy_id, std::size_t n_chains, std::size_t n_iters,
                    int dimension, std::uint64_t master_seed)
      : strategy_id_(std::move(strategy_id)),
        n_chains_(n_chains),
        n_iters_(n_iters),
        dimension_(dimension),
        master_seed_(master_seed) {
    if (n_chains_ < 2) throw ArgumentError("ensemble: n_chains must be >= 2");
    if (dimension_ < 1) throw ArgumentError("ensemble: dimension must be positive");
    states_.assign((n_iters_ + 1) * n_chains_ * static_cast<std::size_t>(dimension_), 0.0);
    acceptance_.assign(n_iters_, 0.0);
  }

  const std::string& strategy_id() const { return strategy_id_; }
  std::size_t n_chains() const { return n_chains_; }
  std::size_t n_iters() const { return n_iters_; }
  int dimension() const { return dimension_; }
  std::uint64_t master_seed() const { return master_seed_; }

  /// The i.i.d. sample of p^n, one row per chain.
  SliceView slice(std::size_t n) const {
    if (n > n_iters_)
      throw ArgumentError("slice: iteration " + std::to_string(n) + " outside 0.." +
                          std::to_string(n_iters_));
    return SliceView(states_.data() + offset(n, 0), static_cast<Eigen::Index>(n_chains_), dimension_);
  }

  /// Slices 0..n stacked into one (N (n+1)) x s block.
  Eigen::Map<const Matrix> history(std::size_t n) const {
    if (n > n_iters_) throw ArgumentError("history: iteration out of range");
    return {states_.data(), static_cast<Eigen::Index>((n + 1) * n_chains_), dimension_};
  }

  void set_state(std::size_t n, std::size_t chain, const Vector& x) {
    if (!x.allFinite())
      throw DataError("ensemble: non-finite state for chain " + std::to_string(chain) +
                      " at iteration " + std::to_string(n));
    std::copy(x.data(), x.data() + dimension_, states_.begin() + static_cast<std::ptrdiff_t>(offset(n, chain)));
  }

  /// Mean acceptance of the transition n -> n+1, for n in 0..n0-1.
  const std::vector<double>& acceptance() const { return acceptance_; }
  void set_acceptance(std::size_t n, double rate) { acceptance_.at(n) = rate; }

  /// Transitions performed to fill the tensor.
  std::uint64_t transitions() const { return static_cast<std::uint64_t>(n_chains_) * n_iters_; }

  const std::vector<double>& raw() const { return states_; }

  bool operator==(const EnsembleSnapshots&) const = default;

 private:
  std::size_t offset(std::size_t n, std::size_t chain) const {
    return (n * n_chains_ + chain) * static_cast<std::size_t>(dimension_);
  }

  std::string strategy_id_;
  std::size_t n_chains_;
  std::size_t n_iters_;
  int dimension_;
  std::uint64_t master_seed_;
  std::vector<double> states_;
  std::vector<double> acceptance_;
};

}  // namespace mhrank
