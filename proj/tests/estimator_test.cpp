#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <numbers>
#include <numeric>
#include <random>

using namespace mhrank;
using testing_support::median;
using testing_support::share;
using testing_support::vec;

namespace {

const double kNormalEntropy = -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

// int f log f of the benchmark mixture on [-15, 15] with 4001 nodes
// (tests/reference/quadrature_reference.py).
constexpr double kMixtureEntropy = -2.60953285607133;

// int phi log phi 1{phi >= 1/log 2000} for the standard normal: the functional
// the estimator targets when the threshold constant is 1
// (tests/reference/quadrature_reference.py).
constexpr double kNormalThresholdedEntropy = -1.0294983148678654;

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

std::vector<double> entropy_errors(const ProposalDensity& law, std::size_t n, const EstimatorParams& p, double truth,
                                   int seeds) {
  std::vector<double> err;
  for (int s = 0; s < seeds; ++s) {
    Rng rng = make_stream(static_cast<std::uint64_t>(s), "entropy", n);
    err.push_back(entropy_estimate(testing_support::draws(law, n, rng), p).value - truth);
  }
  return err;
}

double abs_median(std::vector<double> v) {
  for (auto& x : v) x = std::abs(x);
  return median(v);
}

DivergenceCurve curve_for(const Strategy& st, const InitialDistribution& init, std::size_t n, std::size_t n0,
                          std::uint64_t seed, const TargetDensity& target, const std::string& init_label = "p0") {
  const auto snaps = run_ensemble(st, init, n, n0, seed);
  return divergence_curve(snaps, target, EstimatorParams::defaults(target.dimension()), 1, init_label);
}

}  // namespace

TEST(SplitSample, OddAndEvenPositions) {
  const auto [y5, z5] = split_sample(column({1, 2, 3, 4, 5}));
  EXPECT_EQ(y5, column({2, 4}));
  EXPECT_EQ(z5, column({1, 3, 5}));
  const auto [y4, z4] = split_sample(column({1, 2, 3, 4}));
  EXPECT_EQ(y4, column({2, 4}));
  EXPECT_EQ(z4, column({1, 3}));
  const auto [y2, z2] = split_sample(column({1, 2}));
  EXPECT_EQ(y2, column({2}));
  EXPECT_EQ(z2, column({1}));
  EXPECT_THROW(split_sample(column({1})), ArgumentError);
}

TEST(KdeEval, HandEvaluations) {
  EXPECT_DOUBLE_EQ(kde_eval(vec({0.0}), column({0.0}), 1.0, Kernel::epanechnikov), 0.75);
  EXPECT_EQ(kde_eval(vec({2.5}), column({0.0, 1.0}), 1.0, Kernel::epanechnikov), 0.0);
  EXPECT_DOUBLE_EQ(kde_eval(vec({0.5}), column({0.0, 1.0}), 1.0, Kernel::epanechnikov), 0.5625);
  EXPECT_THROW(kde_eval(vec({0.0}), column({0.0}), 0.0, Kernel::epanechnikov), ArgumentError);
}

TEST(KdeEval, WindowedEvaluatorMatchesNaiveLoop) {
  Rng rng(21);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (Kernel k : {Kernel::epanechnikov, Kernel::gaussian})
    for (int s : {1, 2, 3})
      for (double h : {0.05, 0.4, 3.0}) {
        Matrix z(300, s);
        for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
        const KdeEvaluator fast(z, h, k);
        for (int t = 0; t < 200; ++t) {
          Vector x(s);
          for (int d = 0; d < s; ++d) x[d] = normal(rng);
          const double ref = kde_eval(x, z, h, k);
          ASSERT_NEAR(fast(x), ref, 1e-12 * std::max(1.0, ref)) << "s=" << s << " h=" << h;
        }
      }
}

TEST(Entropy, DegenerateWhenEveryPointIsThresholded) {
  EstimatorParams p;
  const auto e = entropy_estimate(column({0, 1000, 2000, 3000, 4000, 5000}), p);
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.n_thresholded, 3u);
}

TEST(Entropy, DivisorCountsAllYPoints) {
  // Y = {0.1, 500}; only the first has Z neighbours.
  EstimatorParams p;
  const auto pts = column({0.0, 0.1, 0.2, 500.0});
  const auto e = entropy_estimate(pts, p);
  const double h = p.bandwidth(4);
  const double p_hat = kde_eval(vec({0.1}), column({0.0, 0.2}), h, Kernel::epanechnikov);
  EXPECT_EQ(e.n_thresholded, 1u);
  EXPECT_FALSE(e.degenerate);
  EXPECT_DOUBLE_EQ(e.value, std::log(p_hat) / 2.0);
}

TEST(Entropy, StandardNormalWithStatedDefaults) {
  EstimatorParams p;
  p.threshold_scale = 0.1;
  EXPECT_LE(abs_median(entropy_errors(ProposalDensity::gaussian(0, 1), 2000, p, kNormalEntropy, 10)), 0.1);
}

TEST(Entropy, StandardNormalWithUnitThresholdConstant) {
  // With c_a = 1 the indicator removes |x| > 1.49, so the estimate tracks the
  // thresholded functional, not the full entropy.
  EstimatorParams p;
  p.threshold_scale = 1.0;
  const auto err = entropy_errors(ProposalDensity::gaussian(0, 1), 2000, p, kNormalThresholdedEntropy, 10);
  EXPECT_LE(abs_median(err), 0.1);
  EXPECT_GT(median(err) + kNormalThresholdedEntropy - kNormalEntropy, 0.25);
}

TEST(Entropy, BenchmarkMixtureAgainstQuadrature) {
  const auto q = ProposalDensity::mixture(benchmark_mixture_1d());
  EXPECT_LE(abs_median(entropy_errors(q, 2000, EstimatorParams{}, kMixtureEntropy, 10)), 0.1);
}

TEST(Entropy, ErrorShrinksWithSampleSize) {
  const auto q = ProposalDensity::gaussian(0, 1);
  const double small = abs_median(entropy_errors(q, 250, EstimatorParams{}, kNormalEntropy, 20));
  const double large = abs_median(entropy_errors(q, 4000, EstimatorParams{}, kNormalEntropy, 20));
  EXPECT_LE(large, small);
}

TEST(Entropy, InvariantToPermutingYAndZ) {
  Rng rng(4);
  const Matrix pts = testing_support::draws(ProposalDensity::mixture(benchmark_mixture_1d()), 1001, rng);
  const auto [y, z] = split_sample(pts);
  const double ref = entropy_estimate(pts, EstimatorParams{}).value;
  auto rebuild = [&](const std::vector<Eigen::Index>& py, const std::vector<Eigen::Index>& pz) {
    Matrix out(pts.rows(), 1);
    for (Eigen::Index i = 0; i < y.rows(); ++i) out(2 * i + 1, 0) = y(py[static_cast<std::size_t>(i)], 0);
    for (Eigen::Index i = 0; i < z.rows(); ++i) out(2 * i, 0) = z(pz[static_cast<std::size_t>(i)], 0);
    return out;
  };
  std::vector<Eigen::Index> iy(static_cast<std::size_t>(y.rows())), iz(static_cast<std::size_t>(z.rows()));
  std::iota(iy.begin(), iy.end(), 0);
  std::iota(iz.begin(), iz.end(), 0);
  EXPECT_EQ(entropy_estimate(rebuild(iy, iz), EstimatorParams{}).value, ref);
  auto sy = iy, sz = iz;
  std::shuffle(sy.begin(), sy.end(), rng);
  std::shuffle(sz.begin(), sz.end(), rng);
  EXPECT_NEAR(entropy_estimate(rebuild(sy, iz), EstimatorParams{}).value, ref, 1e-12);
  EXPECT_NEAR(entropy_estimate(rebuild(iy, sz), EstimatorParams{}).value, ref, 1e-12);
  // Reordering across the split is a different estimate.
  Matrix rev = pts.colwise().reverse();
  const Eigen::RowVectorXd first = rev.row(0);
  rev.row(0) = rev.row(1);
  rev.row(1) = first;
  EXPECT_NE(entropy_estimate(rev, EstimatorParams{}).value, ref);
}

TEST(EstimatorParams, AdmissibleRanges) {
  EstimatorParams p;
  p.alpha = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = EstimatorParams::defaults(2);
  EXPECT_EQ(p.alpha, 0.3);
  p.alpha = 0.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = EstimatorParams{};
  p.threshold_scale = 10.0;
  EXPECT_THROW(p.threshold(100), ConfigError);
  p.threshold_scale = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = EstimatorParams{};
  EXPECT_DOUBLE_EQ(p.bandwidth(1024), std::pow(1024.0, -0.2));
  EXPECT_DOUBLE_EQ(p.threshold(1000), 0.01 / std::log(1000.0));
}

TEST(McLogPhi, ConstantAndSinglePoint) {
  const double c = 0.37;
  const TargetDensity flat("flat", 1, [&](const Vector&) { return std::log(c); });
  Rng rng(1);
  EXPECT_EQ(mc_log_phi(testing_support::draws(ProposalDensity::gaussian(0, 5), 777, rng), flat), std::log(c));
  EXPECT_NEAR(mc_log_phi(column({0.0}), normal_target()), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(mc_log_phi(column({0.0}), normal_target()), -0.9189, 1e-4);
  EXPECT_NEAR(mc_log_phi(column({0.0}), normal_target().scaled(10.0)), -0.9189385332046727 + std::log(10.0), 1e-14);
}

TEST(DivergenceCurve, StartAtTargetIsNearZero) {
  auto f = share(benchmark_target_1d());
  const auto st = Strategy::independence("exact", ProposalDensity::mixture(f->mixture()), f);
  std::vector<double> k0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    k0.push_back(std::abs(*curve_for(st, ProposalDensity::mixture(f->mixture()), 2000, 1, seed, *f).records[0].kullback_estimate));
  EXPECT_LE(median(k0), 0.15);
}

TEST(DivergenceCurve, UnknownConstantLeavesKullbackEmpty) {
  auto f = share(benchmark_target_1d().without_norm());
  const auto c = curve_for(Strategy::random_walk("rw", 2.0, f), ProposalDensity::gaussian(0, 1), 200, 5, 1, *f);
  ASSERT_EQ(c.records.size(), 6u);
  for (const auto& r : c.records) EXPECT_FALSE(r.kullback_estimate);
}

TEST(DivergenceCurve, GaussianIndependenceSamplerDecreases) {
  auto f = share(benchmark_target_1d());
  const auto c = curve_for(Strategy::independence("s3", ProposalDensity::gaussian(0, 3), f),
                           ProposalDensity::gaussian(0, 1), 500, 30, 1, *f);
  // Spearman rank correlation of (n, K_N).
  const std::size_t m = c.records.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return *c.records[a].kullback_estimate < *c.records[b].kullback_estimate; });
  std::vector<double> rank(m);
  for (std::size_t r = 0; r < m; ++r) rank[order[r]] = static_cast<double>(r);
  double d2 = 0.0;
  for (std::size_t n = 0; n < m; ++n) d2 += std::pow(static_cast<double>(n) - rank[n], 2);
  const double rho = 1.0 - 6.0 * d2 / (static_cast<double>(m) * (static_cast<double>(m * m) - 1.0));
  EXPECT_LT(rho, 0.0);
}

TEST(DivergenceCurve, MatchesPerSliceOperations) {
  auto f = share(benchmark_target_1d());
  const auto snaps = run_ensemble(Strategy::random_walk("rw", 2.0, f), ProposalDensity::gaussian(0, 1), 300, 4, 2);
  const auto p = EstimatorParams::defaults(1);
  const auto c = divergence_curve(snaps, *f, p, 3);
  for (std::size_t n = 0; n <= 4; ++n) {
    const auto h = entropy_estimate(snaps.slice(n), p);
    EXPECT_EQ(c.records[n].entropy_estimate, h.value);
    EXPECT_EQ(c.records[n].n_thresholded, h.n_thresholded);
    EXPECT_EQ(c.records[n].mean_log_phi, mc_log_phi(snaps.slice(n), *f));
    EXPECT_EQ(*c.records[n].kullback_estimate, h.value - mc_log_phi(snaps.slice(n), *f));
  }
}

TEST(DivergenceCurve, SliceErrorsNameTheIteration) {
  const TargetDensity half("half_line", 1, [](const Vector& x) { return x[0] < 0.0 ? kNegInf : -x[0]; });
  EnsembleSnapshots snaps("bad", 4, 2, 1, 0);
  for (std::size_t n = 0; n <= 2; ++n)
    for (std::size_t j = 0; j < 4; ++j) snaps.set_state(n, j, vec({n == 2 && j == 1 ? -1.0 : 1.0 + j}));
  try {
    divergence_curve(snaps, half, EstimatorParams{});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("chain 1"), std::string::npos) << what;
    EXPECT_NE(what.find("iteration 2"), std::string::npos) << what;
  }
}

TEST(DivergenceDiff, IdentityAntisymmetryAndScale) {
  auto f = share(benchmark_target_1d());
  const InitialDistribution init = ProposalDensity::gaussian(0, 1);
  const auto a = curve_for(Strategy::independence("a", ProposalDensity::gaussian(0, 3), f), init, 400, 10, 3, *f);
  const auto b = curve_for(Strategy::random_walk("b", 2.0, f), init, 400, 10, 3, *f);

  for (const auto& d : divergence_diff(a, a)) EXPECT_EQ(d.value, 0.0);
  const auto ab = divergence_diff(a, b), ba = divergence_diff(b, a);
  for (std::size_t n = 0; n < ab.size(); ++n) {
    EXPECT_EQ(ab[n].value, -ba[n].value);
    EXPECT_NEAR(ab[n].value, *a.records[n].kullback_estimate - *b.records[n].kullback_estimate, 1e-12);
  }

  for (double scale : {10.0, 1e-7, 3.3e5}) {
    auto g = share(benchmark_target_1d().scaled(scale));
    const auto as = curve_for(Strategy::independence("a", ProposalDensity::gaussian(0, 3), g), init, 400, 10, 3, *g);
    const auto bs = curve_for(Strategy::random_walk("b", 2.0, g), init, 400, 10, 3, *g);
    const auto abs = divergence_diff(as, bs);
    for (std::size_t n = 0; n < ab.size(); ++n)
      EXPECT_EQ(std::memcmp(&abs[n].value, &ab[n].value, sizeof(double)), 0) << "scale " << scale << " n " << n;
  }
}

TEST(DivergenceDiff, MismatchedConditionsAreRejected) {
  auto f = share(benchmark_target_1d());
  const InitialDistribution init = ProposalDensity::gaussian(0, 1);
  const auto st = Strategy::random_walk("a", 2.0, f);
  const auto base = curve_for(st, init, 100, 5, 1, *f);
  EXPECT_THROW(divergence_diff(base, curve_for(st, init, 120, 5, 1, *f)), ComparabilityError);
  EXPECT_THROW(divergence_diff(base, curve_for(st, init, 100, 6, 1, *f)), ComparabilityError);
  EXPECT_THROW(divergence_diff(base, curve_for(st, init, 100, 5, 1, *f, "other")), ComparabilityError);
  auto other = base;
  other.params.bandwidth_scale = 2.0;
  EXPECT_THROW(divergence_diff(base, other), ComparabilityError);
  other = base;
  other.target_log_scale = std::log(10.0);
  EXPECT_THROW(divergence_diff(base, other), ComparabilityError);
}

TEST(CurveCsv, RoundTripsAllColumns) {
  auto f = share(benchmark_target_1d());
  const auto c = curve_for(Strategy::random_walk("rw", 2.0, f), ProposalDensity::gaussian(0, 1), 100, 3, 1, *f);
  auto u = c;
  u.strategy_id = "unknown_c";
  for (auto& r : u.records) r.kullback_estimate.reset();
  const auto text = curves_csv({c, u});
  EXPECT_EQ(text.substr(0, text.find('\n')), "n,strategy_id,entropy_estimate,mean_log_phi,kullback_estimate,n_thresholded");
  const auto back = read_curves_csv(text);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t n = 0; n <= 3; ++n) {
    EXPECT_EQ(back[0].records[n].entropy_estimate, c.records[n].entropy_estimate);
    EXPECT_EQ(back[0].records[n].mean_log_phi, c.records[n].mean_log_phi);
    EXPECT_EQ(back[0].records[n].kullback_estimate, c.records[n].kullback_estimate);
    EXPECT_FALSE(back[1].records[n].kullback_estimate);
  }
}
