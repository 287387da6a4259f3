#include "portopt/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <string>
#include <string_view>

#include "portopt/errors.hpp"
#include "portopt/text.hpp"

namespace portopt {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(int line, const std::string& key, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line) + ", key '" + key + "': " + msg);
}

double number(int line, const std::string& key, std::string_view value) {
    double v = 0.0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(v))
        fail(line, key, "not a finite number: '" + std::string(value) + "'");
    return v;
}

long integer(int line, const std::string& key, std::string_view value) {
    long v = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        fail(line, key, "not an integer: '" + std::string(value) + "'");
    return v;
}

std::uint64_t unsigned64(int line, const std::string& key, std::string_view value) {
    std::uint64_t v = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        fail(line, key, "not an unsigned integer: '" + std::string(value) + "'");
    return v;
}

bool boolean(int line, const std::string& key, std::string_view value) {
    if (value == "true") return true;
    if (value == "false") return false;
    fail(line, key, "expected true or false, got '" + std::string(value) + "'");
}

bool valid_label(std::string_view label) {
    if (label.empty()) return false;
    for (char c : label) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

} // namespace

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::set<std::string> seen;
    bool bit_depth_set = false;

    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (std::size_t hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value, got '" + std::string(line) + "'");
        const std::string key{trim(line.substr(0, eq))};
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");

        if (key != "package" && !seen.insert(key).second)
            fail(line_no, key, "duplicate key");

        if (key == "input") {
            if (value.empty()) fail(line_no, key, "path must not be empty");
            cfg.input = std::string(value);
        } else if (key == "output_dir") {
            if (value.empty()) fail(line_no, key, "path must not be empty");
            cfg.output_dir = std::string(value);
        } else if (key == "window") {
            cfg.window = static_cast<int>(integer(line_no, key, value));
            if (cfg.window < 2) fail(line_no, key, "must be >= 2");
        } else if (key == "periods_per_year") {
            cfg.periods_per_year = number(line_no, key, value);
            if (!(cfg.periods_per_year > 0.0)) fail(line_no, key, "must be > 0");
        } else if (key == "hp_lambda") {
            cfg.hp_lambda = number(line_no, key, value);
            if (cfg.hp_lambda < 0.0) fail(line_no, key, "must be >= 0");
        } else if (key == "max_clusters") {
            cfg.max_clusters = static_cast<int>(integer(line_no, key, value));
            if (cfg.max_clusters < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "plateau_tol") {
            cfg.plateau_tol = number(line_no, key, value);
            if (!(cfg.plateau_tol > 0.0)) fail(line_no, key, "must be > 0");
        } else if (key == "risk_slack") {
            cfg.risk_slack = number(line_no, key, value);
            if (cfg.risk_slack < 0.0) fail(line_no, key, "must be >= 0");
        } else if (key == "bundles") {
            cfg.bundles = static_cast<int>(integer(line_no, key, value));
            if (cfg.bundles < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "bit_depth") {
            cfg.bit_depth = static_cast<int>(integer(line_no, key, value));
            if (cfg.bit_depth < 1) fail(line_no, key, "must be >= 1");
            bit_depth_set = true;
        } else if (key == "diversification_cap") {
            const double c = number(line_no, key, value);
            if (!(c > 0.0)) fail(line_no, key, "must be > 0");
            cfg.diversification_cap = c;
        } else if (key == "rho") {
            if (value == "auto") {
                cfg.rho_auto = true;
            } else {
                cfg.rho = number(line_no, key, value);
                cfg.rho_auto = false;
                if (!(cfg.rho > 0.0)) fail(line_no, key, "must be > 0 or 'auto'");
            }
        } else if (key == "min_hold") {
            cfg.min_hold = static_cast<int>(integer(line_no, key, value));
            if (cfg.min_hold < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "pool_limit") {
            const long v = integer(line_no, key, value);
            if (v < 1) fail(line_no, key, "must be >= 1");
            cfg.pool_limit = static_cast<std::size_t>(v);
        } else if (key == "resample_on_exhaustion") {
            cfg.resample_on_exhaustion = boolean(line_no, key, value);
        } else if (key == "in_sample") {
            cfg.in_sample = boolean(line_no, key, value);
        } else if (key == "n_reads") {
            cfg.n_reads = static_cast<int>(integer(line_no, key, value));
            if (cfg.n_reads < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "sweeps") {
            cfg.sweeps = static_cast<int>(integer(line_no, key, value));
            if (cfg.sweeps < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "beta_initial") {
            const double b = number(line_no, key, value);
            if (!(b > 0.0)) fail(line_no, key, "must be > 0");
            cfg.beta_initial = b;
        } else if (key == "beta_final") {
            const double b = number(line_no, key, value);
            if (!(b > 0.0)) fail(line_no, key, "must be > 0");
            cfg.beta_final = b;
        } else if (key == "baseline_count") {
            cfg.baseline_count = static_cast<int>(integer(line_no, key, value));
            if (cfg.baseline_count < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "seed") {
            cfg.seed = unsigned64(line_no, key, value);
        } else if (key == "threads") {
            cfg.threads = static_cast<int>(integer(line_no, key, value));
            if (cfg.threads < 1) fail(line_no, key, "must be >= 1");
        } else if (key == "gamma_grid") {
            cfg.gamma_grid.clear();
            for (const std::string& cell : split_csv(value)) {
                const double g = number(line_no, key, cell);
                if (g < 0.0) fail(line_no, key, "grid values must be >= 0");
                cfg.gamma_grid.push_back(g);
            }
            if (cfg.gamma_grid.empty()) fail(line_no, key, "grid must not be empty");
        } else if (key == "package") {
            const std::vector<std::string> cells = split_csv(value);
            if (cells.size() != 3)
                fail(line_no, key, "expected label,cap,gamma, got '" + std::string(value) + "'");
            RiskPackage pkg;
            pkg.label = cells[0];
            if (!valid_label(pkg.label))
                fail(line_no, key, "label must match [A-Za-z0-9_-]+: '" + pkg.label + "'");
            if (pkg.label == "baseline")
                fail(line_no, key, "label 'baseline' is reserved for frontier rows");
            for (const RiskPackage& other : cfg.packages)
                if (other.label == pkg.label)
                    fail(line_no, key, "duplicate package label '" + pkg.label + "'");
            pkg.cap = number(line_no, key, cells[1]);
            if (!(pkg.cap > 0.0)) fail(line_no, key, "cap must be > 0");
            if (cells[2] == "auto") {
                pkg.gamma_auto = true;
            } else {
                pkg.gamma = number(line_no, key, cells[2]);
                if (pkg.gamma < 0.0) fail(line_no, key, "gamma must be >= 0 or 'auto'");
            }
            cfg.packages.push_back(std::move(pkg));
        } else {
            fail(line_no, key, "unknown key");
        }
    }

    if (cfg.input.empty()) throw ConfigError("config key 'input' is required");
    if (cfg.output_dir.empty()) throw ConfigError("config key 'output_dir' is required");
    if (cfg.packages.empty()) throw ConfigError("config needs at least one package line");
    if (bit_depth_set && cfg.diversification_cap)
        throw ConfigError("config keys 'bit_depth' and 'diversification_cap' are exclusive");
    if (cfg.beta_initial && cfg.beta_final && !(*cfg.beta_initial < *cfg.beta_final))
        throw ConfigError("config key 'beta_initial' must be below beta_final");
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

} // namespace portopt
