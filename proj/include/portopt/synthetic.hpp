#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "portopt/market_data.hpp"

namespace portopt {

/// Parameters for the bundled price generator. Assets are assigned to trend
/// groups round-robin (asset n belongs to group n % n_groups); every member
/// of a group shares one sinusoid log-price trend and one daily drift, and
/// gets its own bounded mean-reverting wiggle whose scale spans a wide
/// volatility range so risk caps separate the universe.
struct SyntheticSpec {
    int n_assets = 20;
    int n_days = 311;
    int n_groups = 7;
    std::uint64_t seed = 0;
};

/// Deterministic synthetic price panel: same spec, same bytes. Asset columns
/// are generated from independent substreams, so extending n_assets leaves
/// the existing columns unchanged. Dates are consecutive calendar days from
/// 2020-01-02. Throws DomainError on non-positive sizes or when n_groups is
/// not in [1, n_assets].
PriceTable synthetic_prices(const SyntheticSpec& spec);

/// Writes the wide panel ("date,<id>,..." header) in the format load_prices
/// reads back, with shortest round-trip number formatting.
void write_prices_csv(const PriceTable& table, std::ostream& os);
void write_prices_csv_file(const PriceTable& table, const std::string& path);

} // namespace portopt
