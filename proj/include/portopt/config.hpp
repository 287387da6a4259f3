#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace portopt {

/// One risk appetite: a volatility ceiling for the asset pre-filter and the
/// risk-aversion weight used in the step cost. gamma_auto selects gamma by
/// sweeping the configured grid and keeping the run whose realized
/// annualized volatility is closest to the cap without exceeding it.
struct RiskPackage {
    std::string label;
    double cap = 0.0;
    double gamma = 1.0;
    bool gamma_auto = false;
};

/// Parsed key = value run configuration. Field semantics and defaults are
/// documented in the README's configuration table; validation happens at
/// parse time and reports the offending key.
struct RunConfig {
    std::string input;
    std::string output_dir;
    int window = 60;
    double periods_per_year = 252.0;
    double hp_lambda = 10000.0;
    int max_clusters = 12;
    double plateau_tol = 0.05;
    double risk_slack = 0.0;
    int bundles = 5;
    int bit_depth = 2;
    std::optional<double> diversification_cap; // derives the depth when set
    bool rho_auto = true;
    double rho = 0.0; // used only when rho_auto is false
    int min_hold = 7;
    std::size_t pool_limit = 32;
    bool resample_on_exhaustion = false;
    bool in_sample = false;
    int n_reads = 512;
    int sweeps = 1000;
    std::optional<double> beta_initial;
    std::optional<double> beta_final;
    int baseline_count = 1000;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<double> gamma_grid = {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<RiskPackage> packages;
};

/// Reads "key = value" lines ('#' starts a comment, blank lines skipped).
/// Repeated `package = label,cap,gamma` lines accumulate; every other key
/// may appear once. Unknown keys, duplicate keys, malformed values, and
/// range violations all throw ConfigError naming the key and line.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);

} // namespace portopt
