#pragma once

#include "mhrank/common.hpp"
#include "mhrank/estimator.hpp"
#include "mhrank/snapshots.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mhrank {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline double parse_double(std::string_view text, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw DataError("cannot parse '" + std::string(text) + "' as a number (" + std::string(what) + ")");
  return v;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Writes `content` to `path`, creating parent directories.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw Error("write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline constexpr std::string_view kCurvesHeader =
    "n,strategy_id,entropy_estimate,mean_log_phi,kullback_estimate,n_thresholded";

/// Curve rows in the fixed column order; kullback_estimate is empty when the
/// normalizing constant is unknown.
inline void append_curve_csv(std::string& out, const DivergenceCurve& curve) {
  for (const auto& r : curve.records) {
    out += std::to_string(r.n);
    out += ',';
    out += curve.strategy_id;
    out += ',';
    out += format_double(r.entropy_estimate);
    out += ',';
    out += format_double(r.mean_log_phi);
    out += ',';
    if (r.kullback_estimate) out += format_double(*r.kullback_estimate);
    out += ',';
    out += std::to_string(r.n_thresholded);
    out += '\n';
  }
}

inline std::string curves_csv(const std::vector<DivergenceCurve>& curves) {
  std::string out(kCurvesHeader);
  out += '\n';
  for (const auto& c : curves) append_curve_csv(out, c);
  return out;
}

/// Parses curves.csv back into per-strategy curves (in first-appearance
/// order). Only the columns of the file are restored; mean_log_kernel is set
/// to mean_log_phi.
inline std::vector<DivergenceCurve> read_curves_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCurvesHeader) throw DataError("curves.csv: unexpected header");
  std::vector<DivergenceCurve> curves;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw DataError("curves.csv: expected 6 columns in '" + line + "'");
    if (curves.empty() || curves.back().strategy_id != f[1]) {
      curves.emplace_back();
      curves.back().strategy_id = f[1];
    }
    DivergenceRecord r;
    r.n = static_cast<std::size_t>(parse_double(f[0], "n"));
    r.entropy_estimate = parse_double(f[2], "entropy_estimate");
    r.mean_log_phi = parse_double(f[3], "mean_log_phi");
    r.mean_log_kernel = r.mean_log_phi;
    if (!f[4].empty()) r.kullback_estimate = parse_double(f[4], "kullback_estimate");
    r.n_thresholded = static_cast<std::size_t>(parse_double(f[5], "n_thresholded"));
    curves.back().records.push_back(r);
  }
  return curves;
}

/// Snapshot dump: a comment line with run metadata, a header
/// `chain,iteration,x1..xs`, then one row per (chain, iteration), chain-major.
inline std::string snapshots_csv(const EnsembleSnapshots& snaps) {
  std::string out = "# strategy_id=" + snaps.strategy_id() + " n_chains=" + std::to_string(snaps.n_chains()) +
                    " n_iters=" + std::to_string(snaps.n_iters()) + " dimension=" +
                    std::to_string(snaps.dimension()) + " master_seed=" + std::to_string(snaps.master_seed()) +
                    "\nchain,iteration";
  for (int d = 1; d <= snaps.dimension(); ++d) out += ",x" + std::to_string(d);
  out += '\n';
  for (std::size_t j = 0; j < snaps.n_chains(); ++j) {
    for (std::size_t n = 0; n <= snaps.n_iters(); ++n) {
      out += std::to_string(j) + ',' + std::to_string(n);
      const auto slice = snaps.slice(n);
      for (int d = 0; d < snaps.dimension(); ++d) out += ',' + format_double(slice(static_cast<Eigen::Index>(j), d));
      out += '\n';
    }
  }
  return out;
}

inline EnsembleSnapshots read_snapshots_csv(const std::string& text) {
  std::istringstream is(text);
  std::string meta;
  if (!std::getline(is, meta) || meta.rfind("# ", 0) != 0) throw DataError("snapshots: missing metadata line");
  std::string id;
  std::size_t n_chains = 0, n_iters = 0;
  int dim = 0;
  std::uint64_t seed = 0;
  for (const auto& kv : split(std::string_view(meta).substr(2), ' ')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    auto u64 = [&] {
      std::uint64_t v = 0;
      const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
      if (res.ec != std::errc() || res.ptr != val.data() + val.size())
        throw DataError("snapshots: bad metadata value '" + kv + "'");
      return v;
    };
    if (key == "strategy_id") id = val;
    else if (key == "n_chains") n_chains = u64();
    else if (key == "n_iters") n_iters = u64();
    else if (key == "dimension") dim = static_cast<int>(u64());
    else if (key == "master_seed") seed = u64();
  }
  if (id.empty() || n_chains < 2 || dim < 1) throw DataError("snapshots: incomplete metadata line");
  EnsembleSnapshots snaps(id, n_chains, n_iters, dim, seed);
  std::string line;
  std::getline(is, line);  // column header
  std::size_t rows = 0;
  Vector x(dim);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != static_cast<std::size_t>(dim) + 2) throw DataError("snapshots: bad row '" + line + "'");
    const auto j = static_cast<std::size_t>(parse_double(f[0], "chain"));
    const auto n = static_cast<std::size_t>(parse_double(f[1], "iteration"));
    if (j >= n_chains || n > n_iters) throw DataError("snapshots: index out of range in '" + line + "'");
    for (int d = 0; d < dim; ++d) x[d] = parse_double(f[static_cast<std::size_t>(d) + 2], "coordinate");
    snaps.set_state(n, j, x);
    ++rows;
  }
  if (rows != n_chains * (n_iters + 1)) throw DataError("snapshots: expected " + std::to_string(n_chains * (n_iters + 1)) + " rows, found " + std::to_string(rows));
  return snaps;
}

}  // namespace mhrank
