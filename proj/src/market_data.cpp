#include "portopt/market_data.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

#include "portopt/errors.hpp"
#include "portopt/text.hpp"

namespace portopt {

namespace {

bool iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    const int month = (s[5] - '0') * 10 + (s[6] - '0');
    const int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

} // namespace

PriceTable load_prices(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("price file: empty input");
    const auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "date")
        throw ParseError("price file: header must be date,<asset>,... (got '" + line + "')");
    const std::size_t n_assets = header.size() - 1;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].empty()) throw ParseError("price file: empty asset id in header");
        for (std::size_t j = i + 1; j < header.size(); ++j)
            if (header[i] == header[j])
                throw ParseError("price file: duplicate asset id '" + header[i] + "'");
    }

    PriceTable table;
    table.series.resize(n_assets);
    for (std::size_t n = 0; n < n_assets; ++n) table.series[n].asset_id = header[n + 1];

    std::vector<double> row(n_assets);
    std::string last_date;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError("price file line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        const std::string& date = cells[0];
        if (!iso_date(date))
            throw ParseError("price file line " + std::to_string(line_no) +
                             ": bad date '" + date + "' (want YYYY-MM-DD)");

        bool missing = false;
        for (std::size_t n = 0; n < n_assets && !missing; ++n) missing = cells[n + 1].empty();
        if (missing) {
            ++table.dropped_rows;
            continue;
        }

        for (std::size_t n = 0; n < n_assets; ++n)
            row[n] = parse_double(cells[n + 1],
                                  "price file line " + std::to_string(line_no) + ", asset " +
                                      header[n + 1]);

        if (!last_date.empty()) {
            if (date == last_date) throw DataError("price file: duplicate date " + date);
            if (date < last_date)
                throw DataError("price file: dates out of order at " + date + " (after " +
                                last_date + ")");
        }
        for (std::size_t n = 0; n < n_assets; ++n)
            if (!(row[n] > 0.0))
                throw DataError("asset " + header[n + 1] + " at " + date +
                                ": non-positive price " + fmt_double(row[n]));

        for (std::size_t n = 0; n < n_assets; ++n) {
            table.series[n].dates.push_back(date);
            table.series[n].prices.push_back(row[n]);
        }
        last_date = date;
    }

    const std::size_t kept = table.series.empty() ? 0 : table.series[0].dates.size();
    if (kept < 2)
        throw InsufficientDataError("price file: " + std::to_string(kept) +
                                    " complete rows after dropping " +
                                    std::to_string(table.dropped_rows) + "; need at least 2");
    return table;
}

PriceTable load_prices_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file: " + path);
    return load_prices(in);
}

ReturnMatrix log_returns(const std::vector<PriceSeries>& series) {
    if (series.empty()) throw InsufficientDataError("log returns: no series");
    const auto& grid = series.front().dates;
    if (grid.size() < 2)
        throw InsufficientDataError("log returns: need at least 2 dates, got " +
                                    std::to_string(grid.size()));
    for (const PriceSeries& s : series) {
        if (s.prices.size() != s.dates.size())
            throw AlignmentError("log returns: asset " + s.asset_id + " has " +
                                 std::to_string(s.prices.size()) + " prices for " +
                                 std::to_string(s.dates.size()) + " dates");
        if (s.dates != grid)
            throw AlignmentError("log returns: asset " + s.asset_id +
                                 " is not on the shared date grid");
        for (double p : s.prices)
            if (!(p > 0.0))
                throw DataError("log returns: asset " + s.asset_id + " has non-positive price");
    }

    ReturnMatrix r;
    const int rows = static_cast<int>(grid.size()) - 1;
    const int cols = static_cast<int>(series.size());
    r.values.resize(rows, cols);
    r.dates.assign(grid.begin() + 1, grid.end());
    for (int n = 0; n < cols; ++n) {
        r.assets.push_back(series[n].asset_id);
        for (int t = 0; t < rows; ++t)
            r.values(t, n) = std::log(series[n].prices[t + 1] / series[n].prices[t]);
    }
    return r;
}

MarketSnapshot estimate_snapshot(const ReturnMatrix& returns, int t, int window) {
    const int rows = static_cast<int>(returns.values.rows());
    const int n = static_cast<int>(returns.values.cols());
    if (window < 2) throw DomainError("snapshot: window must be >= 2");
    if (n < 1) throw DomainError("snapshot: no assets");
    if (t > rows)
        throw DomainError("snapshot: t=" + std::to_string(t) + " beyond " +
                          std::to_string(rows) + " return rows");
    if (t < window)
        throw InsufficientDataError("snapshot at t=" + std::to_string(t) + " needs " +
                                    std::to_string(window) + " rows of history");

    MarketSnapshot snap;
    snap.t = t;
    const auto block = returns.values.middleRows(t - window, window);
    // Serial accumulation: keeps every entry independent of column alignment,
    // so permuting or duplicating assets reproduces identical bits.
    snap.mu.resize(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < window; ++k) acc += block(k, i);
        snap.mu(i) = acc / window;
    }

    // Explicit i <= j loops keep the matrix symmetric to the last bit and make
    // duplicated columns land on identical entries.
    snap.sigma.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < window; ++k)
                acc += (block(k, i) - snap.mu(i)) * (block(k, j) - snap.mu(j));
            const double cov = acc / (window - 1);
            snap.sigma(i, j) = cov;
            snap.sigma(j, i) = cov;
        }

    const double ridge = 1e-8 * snap.sigma.trace() / n;
    snap.sigma.diagonal().array() += ridge;
    return snap;
}

std::vector<AssetStats> asset_stats(const ReturnMatrix& returns, double periods_per_year) {
    const int rows = static_cast<int>(returns.values.rows());
    const int n = static_cast<int>(returns.values.cols());
    if (!(periods_per_year > 0.0)) throw DomainError("asset stats: periods_per_year must be > 0");
    if (rows < 2) throw InsufficientDataError("asset stats: need at least 2 return rows");

    std::vector<AssetStats> out(n);
    for (int c = 0; c < n; ++c) {
        const auto col = returns.values.col(c);
        bool constant = true;
        double sum = 0.0;
        for (int k = 0; k < rows; ++k) {
            sum += col(k);
            constant = constant && col(k) == col(0);
        }
        const double mean = sum / rows;
        double acc = 0.0;
        if (!constant) // a constant series has zero variance, not rounding dust
            for (int k = 0; k < rows; ++k) acc += (col(k) - mean) * (col(k) - mean);
        const double sd = std::sqrt(acc / (rows - 1));

        AssetStats& s = out[c];
        s.asset_id = returns.assets[c];
        s.volatility = sd * std::sqrt(periods_per_year);
        s.sharpe_defined = s.volatility > 0.0;
        s.sharpe = s.sharpe_defined ? mean * periods_per_year / s.volatility : 0.0;
    }
    return out;
}

} // namespace portopt
