#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace portopt {

/// Full optimization run driven by a config file: load the price panel, then
/// per risk package filter assets by the volatility cap, cluster the
/// surviving trends, keep the best Sharpe asset per cluster, optimize a
/// holding-constrained trajectory over the reduced universe, and write
/// trajectory_<label>.csv plus metrics_<label>.json. One shared ensemble of
/// random feasible baselines runs on the no-cap reduced universe; frontier.csv
/// collects package rows and baseline rows. Cluster diagnostics and soft
/// risk-cap checks go to out. Returns 0 on success, 2 on config/input
/// problems, 3 when a package's filtered universe is empty (naming it).
/// Artifacts are byte-identical for a fixed config and seed, whatever the
/// thread count.
int run_optimize(const std::string& config_path, std::ostream& out, std::ostream& err);

/// Re-checks a written trajectory against the holding rule. Returns 0 when
/// clean, 1 with the first violating (date, asset) printed, 2 on unreadable
/// or malformed input.
int run_verify(const std::string& trajectory_path, int min_hold, std::ostream& out,
               std::ostream& err);

/// Prints per-package metrics from a frontier CSV and each package's Sharpe
/// percentile among the baseline rows (midrank convention; undefined when no
/// comparable baselines exist). Returns 0, or 2 on unreadable input.
int run_report(const std::string& frontier_path, std::ostream& out, std::ostream& err);

/// Writes a synthetic price panel (min(7, assets) planted trend groups) for
/// offline runs and tests. Returns 0, or 2 on impossible parameters.
int run_gen_data(std::uint64_t seed, int assets, int days, const std::string& out_path,
                 std::ostream& out, std::ostream& err);

} // namespace portopt
