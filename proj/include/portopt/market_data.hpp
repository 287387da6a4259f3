#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace portopt {

struct PriceSeries {
    std::string asset_id;
    std::vector<std::string> dates; // ISO-8601, strictly increasing
    std::vector<double> prices;     // positive, aligned with dates
};

/// Result of loading one price panel; all series share the same date grid.
struct PriceTable {
    std::vector<PriceSeries> series;
    std::size_t dropped_rows = 0; // rows discarded because a cell was empty
};

/// Log returns r_{t,n} = ln(p_{t+1,n} / p_{t,n}); row t is labeled with the
/// later date, so values has one row fewer than the price grid.
struct ReturnMatrix {
    std::vector<std::string> assets;
    std::vector<std::string> dates;
    Eigen::MatrixXd values;
};

/// Per-step market estimate over a trailing window of return rows.
struct MarketSnapshot {
    int t = 0;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma; // symmetric, ridge on the diagonal
};

struct AssetStats {
    std::string asset_id;
    double volatility = 0.0; // annualized
    double sharpe = 0.0;     // annualized; meaningless unless sharpe_defined
    bool sharpe_defined = false;
};

/// Reads a CSV panel with header "date,<id>,...". Rows with any empty cell
/// are dropped and counted (inner join on dates). Throws ParseError for
/// malformed rows (with the line number), DataError for non-positive prices
/// (naming asset and date) or disordered/duplicate dates, and
/// InsufficientDataError when fewer than two complete rows survive.
PriceTable load_prices(std::istream& in);
PriceTable load_prices_file(const std::string& path);

/// Requires at least two shared dates and identical grids across series.
ReturnMatrix log_returns(const std::vector<PriceSeries>& series);

/// Mean and sample covariance (denominator window - 1) of return rows
/// [t - window, t), symmetrized by construction, with ridge
/// 1e-8 * trace / n_assets added to the diagonal. Requires window >= 2 and
/// t >= window (insufficient history otherwise).
MarketSnapshot estimate_snapshot(const ReturnMatrix& returns, int t, int window);

/// Annualized volatility (sample stdev * sqrt(periods_per_year)) and Sharpe
/// (mean * periods_per_year / volatility) per asset over the whole matrix.
/// Flat assets get sharpe_defined = false and must rank after defined ones
/// wherever stats are ordered.
std::vector<AssetStats> asset_stats(const ReturnMatrix& returns, double periods_per_year);

} // namespace portopt
