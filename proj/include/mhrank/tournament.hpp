#pragma once

#include "mhrank/config.hpp"
#include "mhrank/ensemble.hpp"
#include "mhrank/estimator.hpp"
#include "mhrank/io.hpp"
#include "mhrank/oracle.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mhrank {

/// Outcome of one incumbent-vs-challenger comparison.
struct PairDecision {
  std::string incumbent;
  std::string challenger;
  double window_mean = 0.0;  // mean of D_N(incumbent, challenger) over the window
  std::string winner;
  std::vector<int> signs;  // sign of D_N at every n
  std::vector<DivergenceDiff> diff;

  std::string pair() const { return incumbent + ":" + challenger; }
};

struct TournamentResult {
  std::string winner_id;
  std::vector<PairDecision> decisions;
  std::vector<DivergenceCurve> curves;  // config order
  std::uint64_t transitions = 0;
  std::size_t window_start = 0;
};

/// Sequential elimination over stored curves: the incumbent starts as the
/// first curve; challenger i replaces it iff the mean of D_N(incumbent, i)
/// over n in [window_start, n0] is strictly positive.
inline TournamentResult decide(std::vector<DivergenceCurve> curves, std::size_t window_start) {
  if (curves.empty()) throw ConfigError("tournament: no strategies");
  const std::size_t n0 = curves.front().records.size() - 1;
  if (window_start > n0)
    throw ConfigError("tournament: decision window starts at " + std::to_string(window_start) +
                      " after the last iteration " + std::to_string(n0));
  TournamentResult res;
  res.window_start = window_start;
  std::size_t best = 0;
  for (std::size_t i = 1; i < curves.size(); ++i) {
    PairDecision d;
    d.incumbent = curves[best].strategy_id;
    d.challenger = curves[i].strategy_id;
    d.diff = divergence_diff(curves[best], curves[i]);
    double sum = 0.0;
    for (const auto& v : d.diff) {
      d.signs.push_back(v.value > 0.0 ? 1 : v.value < 0.0 ? -1 : 0);
      if (v.n >= window_start) sum += v.value;
    }
    d.window_mean = sum / static_cast<double>(n0 - window_start + 1);
    if (d.window_mean > 0.0) best = i;
    d.winner = curves[best].strategy_id;
    res.decisions.push_back(std::move(d));
  }
  res.winner_id = curves[best].strategy_id;
  res.curves = std::move(curves);
  return res;
}

/// Simulates every strategy once, estimates its curve, and runs the
/// elimination. Total cost is N k n0 transitions.
inline TournamentResult run_tournament(const Experiment& ex) {
  const auto& cfg = ex.config;
  const std::size_t k = ex.strategies.size();
  std::vector<DivergenceCurve> curves(k);
  std::vector<std::uint64_t> transitions(k, 0);
  const std::size_t outer = cfg.parallel_strategies ? cfg.workers : 1;
  const std::size_t inner = cfg.parallel_strategies ? 1 : cfg.workers;
  parallel_for(k, outer, [&](std::size_t i) {
    const auto& st = ex.strategies[i];
    try {
      const auto snaps = run_ensemble(st, ex.init, ex.n_chains, cfg.n_iters, cfg.seed,
                                      EnsembleOptions{inner, cfg.max_values});
      transitions[i] = snaps.transitions();
      curves[i] = divergence_curve(snaps, *ex.target, ex.params, inner, cfg.init);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw Error("strategy '" + st.id + "': " + e.what());
    }
  });
  auto res = decide(std::move(curves), cfg.window_start);
  for (auto t : transitions) res.transitions += t;
  return res;
}

inline TournamentResult run_tournament(const ExperimentConfig& cfg) { return run_tournament(build_experiment(cfg)); }

inline std::string diffs_csv(const TournamentResult& res) {
  std::string out = "n,pair,D_N\n";
  for (const auto& d : res.decisions)
    for (const auto& v : d.diff) out += std::to_string(v.n) + ',' + d.pair() + ',' + format_double(v.value) + '\n';
  return out;
}

inline std::string decisions_csv(const TournamentResult& res) {
  std::string out = "pair,window_mean,winner\n";
  for (const auto& d : res.decisions) out += d.pair() + ',' + format_double(d.window_mean) + ',' + d.winner + '\n';
  return out;
}

/// Writes curves.csv, diffs.csv, decisions.csv and run_manifest.conf (a
/// config that reproduces the run) into `dir`.
inline std::vector<std::filesystem::path> emit_csv(const TournamentResult& res, const ExperimentConfig& cfg,
                                                   const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files{dir / "curves.csv", dir / "diffs.csv", dir / "decisions.csv",
                                           dir / "run_manifest.conf"};
  write_file(files[0], curves_csv(res.curves));
  write_file(files[1], diffs_csv(res));
  write_file(files[2], decisions_csv(res));
  write_file(files[3], "# winner = " + res.winner_id + "\n# transitions = " + std::to_string(res.transitions) +
                           "\n" + to_text(cfg));
  return files;
}

// ---------------------------------------------------------------------------
// Oracle check

struct OracleRow {
  std::size_t n = 0;
  double estimate = 0.0;  // K_N
  double oracle = 0.0;    // quadrature K(p^n, f)
  std::optional<double> bound;
};

struct OracleStrategyReport {
  std::string strategy_id;
  std::vector<OracleRow> rows;
  double max_abs_discrepancy = 0.0;
  std::optional<Minorization> minorization;  // IS only
  std::optional<double> kappa;
  double max_normalization_defect = 0.0;
  DivergenceCurve estimated;
  DivergenceCurve oracle_curve;  // strategy_id suffixed "::oracle"
};

struct OracleReport {
  std::vector<OracleStrategyReport> strategies;
  double max_abs_discrepancy = 0.0;
};

/// Side-by-side estimated K_N and quadrature K(p^n, f) for each IS / RWMH
/// strategy of a 1D experiment with a known normalizing constant.
inline OracleReport run_oracle_check(const Experiment& ex) {
  const auto& cfg = ex.config;
  const auto& target = *ex.target;
  if (target.dimension() != 1) throw UnsupportedConfiguration("oracle: only one-dimensional targets are supported");
  const auto log_c = target.log_norm();
  if (!log_c) throw UnsupportedConfiguration("oracle: the target's normalizing constant must be known");
  const ProposalDensity* p0_law = ex.init.density();
  if (!p0_law) throw UnsupportedConfiguration("oracle: the initial distribution must have a density");
  for (const auto& st : ex.strategies)
    if (!std::holds_alternative<IndependenceSampler>(st.kind) && !std::holds_alternative<RandomWalk>(st.kind))
      throw UnsupportedConfiguration("oracle: strategy '" + st.id + "' is neither an independence sampler nor a random walk");

  const Grid& grid = cfg.oracle_grid;
  grid.validate();
  auto at = [](double x) { return Vector::Constant(1, x); };
  const auto f = GridDensity::tabulate(grid, [&](double x) { return target.log_phi(at(x)) + *log_c; });
  const auto p0 = GridDensity::tabulate(grid, [&](double x) { return p0_law->log_density(at(x)); });
  std::vector<double> log_phi(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) log_phi[i] = target.log_phi(at(grid.node(i)));

  OracleReport report;
  for (const auto& st : ex.strategies) {
    OracleStrategyReport r;
    r.strategy_id = st.id;
    const auto snaps = run_ensemble(st, ex.init, ex.n_chains, cfg.n_iters, cfg.seed,
                                    EnsembleOptions{cfg.workers, cfg.max_values});
    r.estimated = divergence_curve(snaps, target, ex.params, cfg.workers, cfg.init);
    r.oracle_curve = DivergenceCurve{st.id + "::oracle", ex.n_chains, ex.params, target.name(),
                                     target.log_scale(), cfg.init, {}};

    std::optional<GridDensity> q;
    std::optional<GeometricBoundParams> bound;
    double sigma = 0.0;
    if (const auto* is = std::get_if<IndependenceSampler>(&st.kind)) {
      q = GridDensity::tabulate(grid, [&](double x) { return is->proposal.log_density(at(x)); });
      r.minorization = minorization_constant(*q, f);
      r.kappa = sup_ratio_deviation(p0, f);
      if (r.minorization->minorized) bound = GeometricBoundParams{r.minorization->a, *r.kappa};
    } else {
      sigma = std::sqrt(std::get<RandomWalk>(st.kind).increment.cov()(0, 0));
    }

    GridDensity p = p0;
    for (std::size_t n = 0; n <= cfg.n_iters; ++n) {
      if (n > 0) {
        auto ev = q ? evolve_is(p, *q, f, cfg.workers) : evolve_rwmh(p, sigma, f, cfg.workers);
        r.max_normalization_defect = std::max(r.max_normalization_defect, ev.normalization_defect);
        p = std::move(ev.density);
      }
      OracleRow row;
      row.n = n;
      row.oracle = quad_kl(p, f);
      row.estimate = r.estimated.records[n].kullback_estimate.value();
      if (bound) row.bound = prop1_bound(*bound, n);
      r.max_abs_discrepancy = std::max(r.max_abs_discrepancy, std::abs(row.estimate - row.oracle));
      r.rows.push_back(row);

      DivergenceRecord rec;
      rec.n = n;
      rec.entropy_estimate = quad_entropy(p);
      rec.mean_log_phi = quad_expectation(p, log_phi);
      rec.mean_log_kernel = rec.mean_log_phi - target.log_scale();
      rec.kullback_estimate = row.oracle;
      r.oracle_curve.records.push_back(rec);
    }
    report.max_abs_discrepancy = std::max(report.max_abs_discrepancy, r.max_abs_discrepancy);
    report.strategies.push_back(std::move(r));
  }
  return report;
}

inline OracleReport run_oracle_check(const ExperimentConfig& cfg) { return run_oracle_check(build_experiment(cfg)); }

inline std::string oracle_report_csv(const OracleReport& report) {
  std::string out = "strategy_id,n,kullback_estimate,kullback_oracle,abs_discrepancy,bound\n";
  for (const auto& s : report.strategies)
    for (const auto& r : s.rows)
      out += s.strategy_id + ',' + std::to_string(r.n) + ',' + format_double(r.estimate) + ',' +
             format_double(r.oracle) + ',' + format_double(std::abs(r.estimate - r.oracle)) + ',' +
             (r.bound ? format_double(*r.bound) : std::string()) + '\n';
  return out;
}

}  // namespace mhrank
