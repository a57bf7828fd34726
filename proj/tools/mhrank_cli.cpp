// mhrank: rank MCMC strategies by the Kullback divergence of their
// successive densities, estimated from parallel chains.
//
//   mhrank simulate --config exp.conf [--strategy id]
//   mhrank estimate --config exp.conf --snapshots out/snapshots_id.csv
//   mhrank compare  --config exp.conf
//   mhrank oracle   --config exp.conf
//
// Exit codes: 0 success, 2 configuration error, 3 runtime or data error.

#include "mhrank/mhrank.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> n_chains;
  std::optional<std::size_t> n_iters;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment file")->required();
  cmd->add_option("--seed", f.seed, "Master seed (overrides config)");
  cmd->add_option("--out", f.out, "Output directory (overrides config)");
  cmd->add_option("--n-chains", f.n_chains, "Number of parallel chains N (overrides config)");
  cmd->add_option("--n-iters", f.n_iters, "Iterations n0 per chain (overrides config)");
  cmd->add_option("--workers", f.workers, "Worker threads, 0 = all cores (overrides config)");
}

mhrank::ExperimentConfig load(const CommonFlags& f) {
  auto cfg = mhrank::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.n_chains) cfg.n_chains = *f.n_chains;
  if (f.n_iters) cfg.n_iters = *f.n_iters;
  if (f.workers) cfg.workers = *f.workers;
  return cfg;
}

const mhrank::Strategy& pick(const mhrank::Experiment& ex, const std::string& id) {
  if (id.empty()) return ex.strategies.front();
  for (const auto& st : ex.strategies)
    if (st.id == id) return st;
  throw mhrank::ConfigError("no strategy with id '" + id + "'");
}

int cmd_simulate(const CommonFlags& f, const std::string& strategy_id) {
  const auto ex = mhrank::build_experiment(load(f));
  const auto& st = pick(ex, strategy_id);
  const auto snaps = mhrank::run_ensemble(st, ex.init, ex.n_chains, ex.config.n_iters, ex.config.seed,
                                          {ex.config.workers, ex.config.max_values});
  const std::filesystem::path dir = ex.config.out;
  mhrank::write_file(dir / ("snapshots_" + st.id + ".csv"), mhrank::snapshots_csv(snaps));
  std::string acc = "n,acceptance\n";
  for (std::size_t n = 0; n < snaps.acceptance().size(); ++n)
    acc += std::to_string(n) + ',' + mhrank::format_double(snaps.acceptance()[n]) + '\n';
  mhrank::write_file(dir / ("acceptance_" + st.id + ".csv"), acc);
  std::cout << "simulated '" << st.id << "': " << snaps.n_chains() << " chains x " << snaps.n_iters()
            << " iterations -> " << (dir / ("snapshots_" + st.id + ".csv")).string() << '\n';
  return 0;
}

int cmd_estimate(const CommonFlags& f, const std::string& snapshots_path) {
  const auto ex = mhrank::build_experiment(load(f));
  const auto snaps = mhrank::read_snapshots_csv(mhrank::read_file(snapshots_path));
  const auto curve = mhrank::divergence_curve(snaps, *ex.target, ex.params, ex.config.workers, ex.config.init);
  const std::filesystem::path out = std::filesystem::path(ex.config.out) / "curves.csv";
  mhrank::write_file(out, mhrank::curves_csv({curve}));
  std::cout << "estimated '" << curve.strategy_id << "' over " << curve.records.size() << " slices -> "
            << out.string() << '\n';
  return 0;
}

int cmd_compare(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto res = mhrank::run_tournament(cfg);
  const auto files = mhrank::emit_csv(res, cfg, cfg.out);
  for (const auto& d : res.decisions)
    std::printf("%-24s mean D_N over [%zu, %zu] = %+.6f  -> %s\n", d.pair().c_str(), res.window_start,
                d.diff.size() - 1, d.window_mean, d.winner.c_str());
  std::cout << "winner: " << res.winner_id << " (" << res.transitions << " transitions)\n";
  std::cout << "wrote " << files.front().parent_path().string() << "/{curves,diffs,decisions}.csv\n";
  return 0;
}

int cmd_oracle(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto report = mhrank::run_oracle_check(cfg);
  std::vector<mhrank::DivergenceCurve> curves;
  for (const auto& s : report.strategies) {
    curves.push_back(s.estimated);
    curves.push_back(s.oracle_curve);
  }
  const std::filesystem::path dir = cfg.out;
  mhrank::write_file(dir / "oracle.csv", mhrank::curves_csv(curves));
  mhrank::write_file(dir / "oracle_report.csv", mhrank::oracle_report_csv(report));
  for (const auto& s : report.strategies) {
    std::cout << s.strategy_id;
    if (s.minorization)
      std::printf("  a* = %.6g%s  kappa* = %.6g", s.minorization->a,
                  s.minorization->minorized ? "" : " (not uniformly minorized on grid)", *s.kappa);
    std::printf("\n  %4s %12s %12s %12s\n", "n", "K_N", "K_oracle", "bound");
    for (const auto& r : s.rows) {
      std::printf("  %4zu %12.6f %12.6f", r.n, r.estimate, r.oracle);
      if (r.bound) std::printf(" %12.6g", *r.bound);
      std::printf("\n");
    }
    std::printf("  max |K_N - K_oracle| = %.6f\n", s.max_abs_discrepancy);
  }
  std::cout << "wrote " << (dir / "oracle.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank MCMC strategies by estimated Kullback divergence to the target"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string strategy_id;
  std::string snapshots_path;

  auto* simulate = app.add_subcommand("simulate", "Run one strategy's chains and dump every time slice");
  add_common(simulate, f);
  simulate->add_option("--strategy", strategy_id, "Strategy id (default: first in config)");

  auto* estimate = app.add_subcommand("estimate", "Estimate the divergence curve of a snapshot dump");
  add_common(estimate, f);
  estimate->add_option("--snapshots", snapshots_path, "Snapshot CSV written by simulate")->required();

  auto* compare = app.add_subcommand("compare", "Run the full strategy tournament");
  add_common(compare, f);

  auto* oracle = app.add_subcommand("oracle", "Compare estimates with the exact quadrature evolution (1D)");
  add_common(oracle, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(f, strategy_id);
    if (*estimate) return cmd_estimate(f, snapshots_path);
    if (*compare) return cmd_compare(f);
    return cmd_oracle(f);
  } catch (const mhrank::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
