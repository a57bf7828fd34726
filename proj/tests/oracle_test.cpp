#include "test_support.hpp"

#include <gtest/gtest.h>

#include <array>
#include <numbers>

using namespace mhrank;

namespace {

// Reference values from tests/reference/quadrature_reference.py (NumPy, same
// trapezoid formulas, written independently of the C++ evolution code).
constexpr double kMixtureEntropy = -2.60953285607133;
constexpr double kMinorizationSigma3 = 0.0070330171415352695;
constexpr double kKappaStdNormalInit = 1.828427100378223;
constexpr double kNormalEntropyGrid = -1.4189385332048945;
constexpr double kKlHalfSdNormal = 0.318147180559995;

constexpr std::array<double, 21> kIsSigma3 = {
    0.7891962778371714,  0.4704874637644915,  0.3748036497102682,  0.3229259750305104,  0.2884900124177688,
    0.26331839463018936, 0.24383775790594578, 0.22813792894288323, 0.21507868729857357, 0.20393418150888679,
    0.1942220656566288,  0.185611247052433,   0.17786831638868053, 0.17082486698907712, 0.1643568172490667,
    0.15837094672568394, 0.15279592024031943, 0.14757618340081807, 0.1426677384526558,  0.13803517599228535,
    0.13364955989160685};

constexpr std::array<double, 21> kRwmhSigma1 = {
    3.1814718055999502e-01, 9.9379704648418721e-02, 3.9541452330763470e-02, 1.7697883501891814e-02,
    8.4879253927697268e-03, 4.2522725114060691e-03, 2.1935759966040138e-03, 1.1551507371560972e-03,
    6.1753167597283841e-04, 3.3386597128153917e-04, 1.8206106361554343e-04, 9.9942174591092722e-05,
    5.5148942343362144e-05, 3.0556527415322553e-05, 1.6985610380867039e-05, 9.4663447446695880e-06,
    5.2866771085472884e-06, 2.9573660059001771e-06, 1.6565640492918991e-06, 9.2892325513659929e-07,
    5.2135065211357899e-07};

const Grid kMixtureGrid{-15.0, 15.0, 4001};
const Grid kNormalGrid{-10.0, 10.0, 4001};
// Wide enough that random-walk proposals from the mode at 9 stay on the grid.
const Grid kWideGrid{-25.0, 25.0, 4001};

GridDensity mixture_on(const Grid& g) {
  const auto m = benchmark_mixture_1d();
  return GridDensity::tabulate(g, [&](double x) { return m.log_density(Vector::Constant(1, x)); });
}

GridDensity normal_on(const Grid& g, double mean, double sd) {
  return GridDensity::tabulate(g, [=](double x) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd * std::sqrt(2.0 * std::numbers::pi));
  });
}

std::vector<double> is_curve(const Grid& g, double sigma, std::size_t n0) {
  const auto f = mixture_on(g);
  const auto q = normal_on(g, 0, sigma);
  GridDensity p = normal_on(g, 0, 1);
  std::vector<double> k{quad_kl(p, f)};
  for (std::size_t n = 0; n < n0; ++n) {
    p = evolve_is(p, q, f).density;
    k.push_back(quad_kl(p, f));
  }
  return k;
}

double max_abs_diff(const GridDensity& a, const GridDensity& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Quadrature, EntropyAndDivergenceOfClosedForms) {
  const auto f = normal_on(kNormalGrid, 0, 1);
  EXPECT_NEAR(quad_entropy(f), kNormalEntropyGrid, 1e-12);
  EXPECT_NEAR(quad_entropy(f), -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e), 1e-9);
  const auto p = normal_on(kNormalGrid, 0, 0.5);
  EXPECT_NEAR(quad_kl(p, f), kKlHalfSdNormal, 1e-12);
  EXPECT_NEAR(quad_kl(p, f), std::log(2.0) + 0.125 - 0.5, 1e-9);
  EXPECT_EQ(quad_kl(f, f), 0.0);
  EXPECT_NEAR(quad_entropy(mixture_on(kMixtureGrid)), kMixtureEntropy, 1e-12);
}

TEST(Quadrature, ExpectationMatchesEntropyForLogDensity) {
  const auto f = mixture_on(kMixtureGrid);
  std::vector<double> log_f(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) log_f[i] = std::log(f[i]);
  EXPECT_NEAR(quad_expectation(f, log_f), quad_entropy(f), 1e-14);
  EXPECT_THROW(quad_expectation(f, std::vector<double>(3)), ArgumentError);
}

TEST(Evolution, IndependenceSamplerMatchesReference) {
  const auto k = is_curve(kMixtureGrid, 3.0, 20);
  for (std::size_t n = 0; n <= 20; ++n) EXPECT_NEAR(k[n], kIsSigma3[n], 1e-10) << "n=" << n;
}

TEST(Evolution, RandomWalkMatchesReference) {
  const auto f = normal_on(kNormalGrid, 0, 1);
  GridDensity p = normal_on(kNormalGrid, 0, 0.5);
  EXPECT_NEAR(quad_kl(p, f), kRwmhSigma1[0], 1e-12);
  for (std::size_t n = 1; n <= 20; ++n) {
    p = evolve_rwmh(p, 1.0, f).density;
    EXPECT_NEAR(quad_kl(p, f), kRwmhSigma1[n], 1e-10) << "n=" << n;
  }
}

TEST(Evolution, ExactProposalReachesTargetInOneStep) {
  const auto f = mixture_on(kMixtureGrid);
  const auto ev = evolve_is(normal_on(kMixtureGrid, 0, 1), f, f);
  EXPECT_LT(max_abs_diff(ev.density, f), 1e-9);
  EXPECT_LT(std::abs(quad_kl(ev.density, f)), 1e-9);
}

TEST(Evolution, TargetIsStationary) {
  const auto f = mixture_on(kMixtureGrid);
  EXPECT_LT(max_abs_diff(evolve_is(f, normal_on(kMixtureGrid, 0, 3), f).density, f), 1e-10);
  const auto wide = mixture_on(kWideGrid);
  for (double sigma : {0.5, 1.0, 2.0}) {
    const auto ev = evolve_rwmh(wide, sigma, wide);
    EXPECT_LT(max_abs_diff(ev.density, wide), 1e-10) << sigma;
    EXPECT_LT(ev.normalization_defect, 1e-8);
  }
}

TEST(Evolution, DivergenceNeverIncreases) {
  for (double sigma : {1.0, 2.0, 3.0}) {
    const auto k = is_curve(kMixtureGrid, sigma, 20);
    for (std::size_t n = 1; n < k.size(); ++n) EXPECT_LE(k[n], k[n - 1] + 1e-12) << "is sigma " << sigma;
  }
  const auto f = mixture_on(kWideGrid);
  for (double sigma : {0.5, 1.0, 2.0}) {
    GridDensity p = normal_on(kWideGrid, 0, 1);
    double prev = quad_kl(p, f);
    for (int n = 0; n < 20; ++n) {
      p = evolve_rwmh(p, sigma, f).density;
      const double k = quad_kl(p, f);
      EXPECT_LE(k, prev + 1e-12) << "rwmh sigma " << sigma;
      prev = k;
    }
  }
}

TEST(Evolution, GridRefinementChangesLittle) {
  const auto coarse = is_curve(kMixtureGrid, 3.0, 10);
  const auto fine = is_curve(Grid{-15.0, 15.0, 8001}, 3.0, 10);
  for (std::size_t n = 0; n <= 10; ++n) EXPECT_LT(std::abs(coarse[n] - fine[n]), 1e-4) << n;
}

TEST(Evolution, WorkerCountDoesNotChangeResult) {
  const auto f = mixture_on(kMixtureGrid);
  const auto p = normal_on(kMixtureGrid, 0, 1);
  const auto q = normal_on(kMixtureGrid, 0, 3);
  const auto a = evolve_is(p, q, f, 1), b = evolve_is(p, q, f, 4);
  EXPECT_EQ(a.density.values(), b.density.values());
  const auto fw = mixture_on(kWideGrid);
  const auto pw = normal_on(kWideGrid, 0, 1);
  const auto c = evolve_rwmh(pw, 2.0, fw, 1), d = evolve_rwmh(pw, 2.0, fw, 3);
  EXPECT_EQ(c.density.values(), d.density.values());
}

TEST(Evolution, ReportsSmallMassDefect) {
  const auto f = mixture_on(kMixtureGrid);
  const auto ev = evolve_is(normal_on(kMixtureGrid, 0, 1), normal_on(kMixtureGrid, 0, 3), f);
  EXPECT_GE(ev.normalization_defect, 0.0);
  EXPECT_LT(ev.normalization_defect, 1e-6);
  EXPECT_NEAR(trapezoid(kMixtureGrid, ev.density.values()), 1.0, 1e-12);
}

TEST(Bound, MinorizationAndKappa) {
  const auto f = mixture_on(kMixtureGrid);
  const auto m3 = minorization_constant(normal_on(kMixtureGrid, 0, 3), f);
  EXPECT_NEAR(m3.a, kMinorizationSigma3, 1e-15);
  EXPECT_TRUE(m3.minorized);
  const auto m1 = minorization_constant(normal_on(kMixtureGrid, 0, 1), f);
  EXPECT_LT(m1.a, 1e-40);
  EXPECT_FALSE(m1.minorized);
  EXPECT_EQ(minorization_constant(f, f).a, 1.0);
  EXPECT_NEAR(sup_ratio_deviation(normal_on(kMixtureGrid, 0, 1), f), kKappaStdNormalInit, 1e-12);
  EXPECT_EQ(sup_ratio_deviation(f, f), 0.0);
}

TEST(Bound, GeometricFormula) {
  EXPECT_DOUBLE_EQ(prop1_bound({0.5, 1.0}, 0), 2.0);
  EXPECT_DOUBLE_EQ(prop1_bound({0.5, 1.0}, 1), 0.75);
  EXPECT_DOUBLE_EQ(prop1_bound({0.5, 2.0}, 3), 0.25 * 1.25);
  EXPECT_EQ(prop1_bound({1.0, 3.0}, 1), 0.0);
  EXPECT_THROW(prop1_bound({0.0, 1.0}, 1), ArgumentError);
  EXPECT_THROW(prop1_bound({0.5, -1.0}, 1), ArgumentError);
}

TEST(Bound, EnvelopesExactEvolution) {
  const auto f = mixture_on(kMixtureGrid);
  const auto p0 = normal_on(kMixtureGrid, 0, 1);
  for (double sigma : {2.0, 2.5, 3.0}) {
    const auto q = normal_on(kMixtureGrid, 0, sigma);
    const auto m = minorization_constant(q, f);
    ASSERT_TRUE(m.minorized);
    const GeometricBoundParams b{m.a, sup_ratio_deviation(p0, f)};
    const auto k = is_curve(kMixtureGrid, sigma, 20);
    for (std::size_t n = 0; n <= 20; ++n) EXPECT_LE(k[n], prop1_bound(b, n) + 1e-3) << sigma << " " << n;
  }
}

TEST(GridDensityTest, RejectsBadInput) {
  EXPECT_THROW(GridDensity(Grid{0, 1, 3}, {1.0, -1.0, 1.0}), ArgumentError);
  EXPECT_THROW(GridDensity(Grid{0, 1, 3}, {1.0, 1.0}), ArgumentError);
  EXPECT_THROW(GridDensity(Grid{0, 1, 3}, {1.0, std::nan(""), 1.0}), ArgumentError);
  EXPECT_THROW(GridDensity(Grid{0, 1, 3}, {2.0, 2.0, 2.0}), GridCoverageError);
  EXPECT_NO_THROW(GridDensity(Grid{0, 1, 3}, {1.0, 1.0, 1.0}));
  EXPECT_THROW(Grid({1, 1, 10}).validate(), ConfigError);
  EXPECT_THROW(Grid({0, 1, 2}).validate(), ConfigError);
  EXPECT_THROW(GridDensity::normalized(Grid{0, 1, 3}, {0.0, 0.0, 0.0}), ArgumentError);
}

TEST(GridDensityTest, CoverageErrors) {
  // N(0, 10^2) has about 13% of its mass outside [-15, 15].
  EXPECT_THROW(normal_on(kMixtureGrid, 0, 10), GridCoverageError);
  const auto f = mixture_on(kMixtureGrid);
  const auto p = normal_on(kMixtureGrid, 0, 1);
  EXPECT_THROW(evolve_rwmh(p, 5.0, f), GridCoverageError);      // proposals leave the grid
  EXPECT_THROW(evolve_rwmh(p, 0.01, f), GridCoverageError);     // spacing 0.0075 does not resolve sigma
  EXPECT_THROW(evolve_rwmh(p, 0.0, f), ArgumentError);
  EXPECT_THROW(evolve_is(p, normal_on(kNormalGrid, 0, 1), f), ArgumentError);
  EXPECT_THROW(quad_kl(p, normal_on(kNormalGrid, 0, 1)), ArgumentError);
}
