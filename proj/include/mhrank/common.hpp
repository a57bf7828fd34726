#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mhrank {

/// A point in the state space R^s.
using Vector = Eigen::VectorXd;

/// Row-major sample matrix: one row per draw, one column per coordinate.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixRef = Eigen::Ref<const Matrix>;

/// Random stream owned by exactly one chain or caller.
using Rng = std::mt19937_64;

// Error taxonomy. The CLI maps ConfigError to exit code 2 and every other
// mhrank::Error to exit code 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct InvalidProposal : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct ComparabilityError : Error {
  using Error::Error;
};
struct GridCoverageError : Error {
  using Error::Error;
};
struct UnsupportedConfiguration : Error {
  using Error::Error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of the stream for chain `chain` of strategy `strategy_id`.
/// Depends only on its arguments, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view strategy_id,
                                 std::uint64_t chain) {
  std::uint64_t h = detail::splitmix64(master_seed);
  h = detail::splitmix64(h ^ detail::fnv1a(strategy_id));
  return detail::splitmix64(h ^ detail::splitmix64(chain + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t master_seed, std::string_view strategy_id,
                       std::uint64_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(master_seed, strategy_id, chain)),
                    static_cast<std::uint32_t>(derive_seed(master_seed, strategy_id, chain) >> 32)};
  return Rng(seq);
}

/// Uniform draw on [0, 1) that does not depend on the library's
/// uniform_real_distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Runs fn(i) for i in [0, n) over up to `workers` threads with contiguous
/// static partitioning. Each index is visited by exactly one thread.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mhrank
