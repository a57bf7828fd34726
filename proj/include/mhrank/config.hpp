#pragma once

// Experiment files are flat `key = value` text. Lines starting with '#' are
// comments; `strategy` may repeat and its order is the tournament order.
// Unknown keys are errors. Keys are documented in configs/README.md.

#include "mhrank/common.hpp"
#include "mhrank/density.hpp"
#include "mhrank/ensemble.hpp"
#include "mhrank/estimator.hpp"
#include "mhrank/io.hpp"
#include "mhrank/oracle.hpp"
#include "mhrank/sampler.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mhrank {

/// One `strategy = id: kind args` line, kept as text so a run manifest
/// reproduces it verbatim.
struct StrategySpec {
  std::string id;
  std::string definition;  // everything after "id:"
};

struct ExperimentConfig {
  std::string target = "benchmark_mixture_1d";
  double target_scale = 1.0;      // phi <- target_scale * phi
  bool target_normalized = true;  // false hides log C from the estimator
  std::string init = "normal(0, 1)";
  std::vector<StrategySpec> strategies;
  std::optional<std::size_t> n_chains;  // default 500 in 1D, 200 otherwise
  std::size_t n_iters = 30;
  std::uint64_t seed = 1;
  std::string out = "results";
  std::optional<double> alpha;  // default by dimension
  double bandwidth_scale = 1.0;
  double threshold_scale = 0.01;
  Kernel kernel = Kernel::epanechnikov;
  std::size_t window_start = 3;
  Grid oracle_grid{};
  std::size_t pool_cap = 5000;
  double adaptive_bandwidth_scale = 1.0;
  std::size_t workers = 1;
  bool parallel_strategies = false;
  std::uint64_t max_values = 200'000'000;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline double config_number(std::string_view text, std::string_view key) {
  try {
    return parse_double(text, key);
  } catch (const DataError&) {
    throw ConfigError("'" + std::string(key) + "': '" + std::string(text) + "' is not a number");
  }
}

inline std::size_t config_count(std::string_view text, std::string_view key) {
  const double v = config_number(text, key);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e15)
    throw ConfigError("'" + std::string(key) + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::uint64_t config_u64(std::string_view text, std::string_view key) {
  const auto t = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError("'" + std::string(key) + "' must be an unsigned 64-bit integer");
  return v;
}

inline bool config_bool(std::string_view text, std::string_view key) {
  const auto t = trim(text);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError("'" + std::string(key) + "' must be true or false");
}

/// `name` or `name(a, b, ...)`.
struct Call {
  std::string name;
  std::vector<double> args;
};

inline Call parse_call(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  const auto open = t.find('(');
  Call c;
  if (open == std::string::npos) {
    c.name = t;
  } else {
    if (t.back() != ')') throw ConfigError(std::string(what) + ": unbalanced parentheses in '" + t + "'");
    c.name = trim(std::string_view(t).substr(0, open));
    const auto inner = trim(std::string_view(t).substr(open + 1, t.size() - open - 2));
    if (!inner.empty())
      for (const auto& a : split(inner, ',')) c.args.push_back(config_number(a, what));
  }
  if (c.name.empty()) throw ConfigError(std::string(what) + ": empty specification");
  return c;
}

inline void expect_args(const Call& c, std::initializer_list<std::size_t> counts, std::string_view what) {
  for (auto n : counts)
    if (c.args.size() == n) return;
  throw ConfigError(std::string(what) + ": wrong number of arguments to '" + c.name + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const auto line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::trim(std::string_view(line).substr(0, eq));
    const auto value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key != "strategy" && !seen.insert(key).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    if (key == "target") cfg.target = value;
    else if (key == "target.scale") cfg.target_scale = detail::config_number(value, key);
    else if (key == "target.normalized") cfg.target_normalized = detail::config_bool(value, key);
    else if (key == "init") cfg.init = value;
    else if (key == "strategy") {
      const auto colon = value.find(':');
      if (colon == std::string::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": strategy must read 'id: kind args'");
      StrategySpec spec{detail::trim(std::string_view(value).substr(0, colon)),
                        detail::trim(std::string_view(value).substr(colon + 1))};
      for (char c : spec.id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
          throw ConfigError("line " + std::to_string(line_no) + ": strategy id '" + spec.id +
                            "' may only contain letters, digits, '_', '-', '.'");
      cfg.strategies.push_back(std::move(spec));
    } else if (key == "n_chains") cfg.n_chains = detail::config_count(value, key);
    else if (key == "n_iters") cfg.n_iters = detail::config_count(value, key);
    else if (key == "seed") cfg.seed = detail::config_u64(value, key);
    else if (key == "out") cfg.out = value;
    else if (key == "estimator.alpha") cfg.alpha = detail::config_number(value, key);
    else if (key == "estimator.bandwidth_scale") cfg.bandwidth_scale = detail::config_number(value, key);
    else if (key == "estimator.threshold_scale") cfg.threshold_scale = detail::config_number(value, key);
    else if (key == "estimator.kernel") cfg.kernel = kernel_from_string(value);
    else if (key == "decision.window_start") cfg.window_start = detail::config_count(value, key);
    else if (key == "oracle.lower") cfg.oracle_grid.lower = detail::config_number(value, key);
    else if (key == "oracle.upper") cfg.oracle_grid.upper = detail::config_number(value, key);
    else if (key == "oracle.points") cfg.oracle_grid.n_points = detail::config_count(value, key);
    else if (key == "adaptive.pool_cap") cfg.pool_cap = detail::config_count(value, key);
    else if (key == "adaptive.bandwidth_scale") cfg.adaptive_bandwidth_scale = detail::config_number(value, key);
    else if (key == "workers") cfg.workers = detail::config_count(value, key);
    else if (key == "parallel_strategies") cfg.parallel_strategies = detail::config_bool(value, key);
    else if (key == "max_values") cfg.max_values = detail::config_count(value, key);
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

/// Config text that parses back to `cfg` (used for run manifests).
inline std::string to_text(const ExperimentConfig& cfg) {
  std::string s;
  auto kv = [&](std::string_view k, const std::string& v) {
    s += k;
    s += " = ";
    s += v;
    s += '\n';
  };
  kv("target", cfg.target);
  kv("target.scale", format_double(cfg.target_scale));
  kv("target.normalized", cfg.target_normalized ? "true" : "false");
  kv("init", cfg.init);
  for (const auto& st : cfg.strategies) kv("strategy", st.id + ": " + st.definition);
  if (cfg.n_chains) kv("n_chains", std::to_string(*cfg.n_chains));
  kv("n_iters", std::to_string(cfg.n_iters));
  kv("seed", std::to_string(cfg.seed));
  kv("out", cfg.out);
  if (cfg.alpha) kv("estimator.alpha", format_double(*cfg.alpha));
  kv("estimator.bandwidth_scale", format_double(cfg.bandwidth_scale));
  kv("estimator.threshold_scale", format_double(cfg.threshold_scale));
  kv("estimator.kernel", std::string(to_string(cfg.kernel)));
  kv("decision.window_start", std::to_string(cfg.window_start));
  kv("oracle.lower", format_double(cfg.oracle_grid.lower));
  kv("oracle.upper", format_double(cfg.oracle_grid.upper));
  kv("oracle.points", std::to_string(cfg.oracle_grid.n_points));
  kv("adaptive.pool_cap", std::to_string(cfg.pool_cap));
  kv("adaptive.bandwidth_scale", format_double(cfg.adaptive_bandwidth_scale));
  kv("workers", std::to_string(cfg.workers));
  kv("parallel_strategies", cfg.parallel_strategies ? "true" : "false");
  kv("max_values", std::to_string(cfg.max_values));
  return s;
}

/// Target from its specification: benchmark_mixture_1d, standin_mixture_2d,
/// normal(mean, sd), bivariate_normal(rho), or mixture(w, mean, var, ...).
inline TargetDensity make_target(const std::string& spec) {
  const auto c = detail::parse_call(spec, "target");
  if (c.name == "benchmark_mixture_1d") {
    detail::expect_args(c, {0}, "target");
    return benchmark_target_1d();
  }
  if (c.name == "standin_mixture_2d") {
    detail::expect_args(c, {0}, "target");
    return standin_target_2d();
  }
  try {
    if (c.name == "normal") {
      detail::expect_args(c, {2}, "target");
      return normal_target(c.args[0], c.args[1]);
    }
    if (c.name == "bivariate_normal") {
      detail::expect_args(c, {1}, "target");
      return TargetDensity::bivariate_normal(c.args[0]);
    }
    if (c.name == "mixture") {
      if (c.args.empty() || c.args.size() % 3 != 0)
        throw ConfigError("target: mixture takes (weight, mean, variance) triples");
      std::vector<double> w, m, v;
      for (std::size_t i = 0; i < c.args.size(); i += 3) {
        w.push_back(c.args[i]);
        m.push_back(c.args[i + 1]);
        v.push_back(c.args[i + 2]);
      }
      return TargetDensity::from_mixture("mixture", GaussianMixture::univariate(w, m, v));
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("target: ") + e.what());
  }
  throw ConfigError("target: unknown target '" + c.name + "'");
}

/// Proposal/initial law in dimension s: normal(mean, sd), student(dof[, loc,
/// scale]), uniform_box(lo, hi[, lo2, hi2, ...]), or `target` (the target
/// mixture itself).
inline ProposalDensity make_proposal(const std::string& spec, const TargetDensity& target) {
  const auto c = detail::parse_call(spec, "proposal");
  const int s = target.dimension();
  try {
    if (c.name == "normal") {
      detail::expect_args(c, {2}, "proposal");
      return ProposalDensity::gaussian(Vector::Constant(s, c.args[0]), c.args[1]);
    }
    if (c.name == "student") {
      detail::expect_args(c, {1, 3}, "proposal");
      if (s != 1) throw ConfigError("proposal: student is one-dimensional");
      return c.args.size() == 1 ? ProposalDensity::student(c.args[0])
                                : ProposalDensity::student(c.args[0], c.args[1], c.args[2]);
    }
    if (c.name == "uniform_box") {
      Vector lo(s), hi(s);
      if (c.args.size() == 2) {
        lo.setConstant(c.args[0]);
        hi.setConstant(c.args[1]);
      } else if (c.args.size() == 2 * static_cast<std::size_t>(s)) {
        for (int d = 0; d < s; ++d) {
          lo[d] = c.args[2 * static_cast<std::size_t>(d)];
          hi[d] = c.args[2 * static_cast<std::size_t>(d) + 1];
        }
      } else {
        throw ConfigError("proposal: uniform_box takes (lo, hi) or one (lo, hi) pair per coordinate");
      }
      return ProposalDensity::uniform_box(lo, hi);
    }
    if (c.name == "target") {
      detail::expect_args(c, {0}, "proposal");
      if (!target.mixture()) throw ConfigError("proposal: 'target' needs a mixture target");
      return ProposalDensity::mixture(target.mixture());
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("proposal: ") + e.what());
  }
  throw ConfigError("proposal: unknown distribution '" + c.name + "'");
}

/// Initial law: any proposal specification, or point(x1, ..., xs).
inline InitialDistribution make_initial(const std::string& spec, const TargetDensity& target) {
  const auto c = detail::parse_call(spec, "init");
  if (c.name == "point") {
    if (c.args.size() != static_cast<std::size_t>(target.dimension()))
      throw ConfigError("init: point needs one coordinate per dimension");
    return PointMass{Eigen::Map<const Vector>(c.args.data(), static_cast<Eigen::Index>(c.args.size()))};
  }
  return make_proposal(spec, target);
}

namespace detail {

/// Splits on whitespace outside parentheses.
inline std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (std::isspace(static_cast<unsigned char>(ch)) && depth == 0) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

/// Strategy from `is <law>`, `rwmh <sigma>`, `gibbs <rho>`, or
/// `adaptive <law> updates <n1> <n2> ...`.
inline Strategy make_strategy(const StrategySpec& spec, const std::shared_ptr<const TargetDensity>& target,
                              const ExperimentConfig& cfg) {
  const auto tok = detail::tokens(spec.definition);
  const std::string where = "strategy '" + spec.id + "'";
  if (tok.empty()) throw ConfigError(where + ": missing kind");
  try {
    if (tok[0] == "is") {
      if (tok.size() != 2) throw ConfigError(where + ": expected 'is <law>'");
      return Strategy::independence(spec.id, make_proposal(tok[1], *target), target);
    }
    if (tok[0] == "rwmh") {
      if (tok.size() != 2) throw ConfigError(where + ": expected 'rwmh <sigma>'");
      return Strategy::random_walk(spec.id, detail::config_number(tok[1], where), target);
    }
    if (tok[0] == "gibbs") {
      if (tok.size() != 2) throw ConfigError(where + ": expected 'gibbs <rho>'");
      return Strategy::gibbs(spec.id, detail::config_number(tok[1], where), target);
    }
    if (tok[0] == "adaptive") {
      if (tok.size() < 4 || tok[2] != "updates")
        throw ConfigError(where + ": expected 'adaptive <law> updates <n1> ...'");
      std::vector<std::size_t> times;
      for (std::size_t i = 3; i < tok.size(); ++i) times.push_back(detail::config_count(tok[i], where));
      return Strategy::adaptive(spec.id, make_proposal(tok[1], *target), std::move(times), target,
                                ScottRule{cfg.adaptive_bandwidth_scale}, cfg.pool_cap);
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown kind '" + tok[0] + "'");
}

/// A validated configuration with all objects constructed.
struct Experiment {
  ExperimentConfig config;
  std::shared_ptr<const TargetDensity> target;
  InitialDistribution init;
  std::vector<Strategy> strategies;
  EstimatorParams params;
  std::size_t n_chains;
};

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  if (!(cfg.target_scale > 0.0)) throw ConfigError("target.scale must be > 0");
  TargetDensity t = make_target(cfg.target).scaled(cfg.target_scale);
  if (!cfg.target_normalized) t = t.without_norm();
  auto target = std::make_shared<const TargetDensity>(std::move(t));
  const int s = target->dimension();

  auto init = make_initial(cfg.init, *target);
  if (cfg.strategies.empty()) throw ConfigError("at least one strategy is required");
  std::set<std::string> ids;
  std::vector<Strategy> strategies;
  for (const auto& spec : cfg.strategies) {
    if (!ids.insert(spec.id).second) throw ConfigError("duplicate strategy id '" + spec.id + "'");
    strategies.push_back(make_strategy(spec, target, cfg));
  }
  const std::size_t n_chains = cfg.n_chains.value_or(s == 1 ? 500 : 200);
  if (n_chains < 4) throw ConfigError("n_chains must be >= 4");
  if (cfg.n_iters < 1) throw ConfigError("n_iters must be >= 1");

  EstimatorParams params = EstimatorParams::defaults(s);
  if (cfg.alpha) params.alpha = *cfg.alpha;
  params.bandwidth_scale = cfg.bandwidth_scale;
  params.threshold_scale = cfg.threshold_scale;
  params.kernel = cfg.kernel;
  params.validate();
  params.threshold(n_chains);
  return {cfg, std::move(target), std::move(init), std::move(strategies), params, n_chains};
}

}  // namespace mhrank
