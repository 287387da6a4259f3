#include "portopt/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "portopt/errors.hpp"
#include "portopt/rng.hpp"
#include "portopt/text.hpp"

namespace portopt {

namespace {

bool is_leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

int days_in_month(int y, int m) {
    static const int table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return table[m - 1];
}

std::string pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

std::string iso_date(int y, int m, int d) {
    return pad(y, 4) + "-" + pad(m, 2) + "-" + pad(d, 2);
}

std::vector<std::string> calendar(int n_days) {
    int y = 2020, m = 1, d = 2;
    std::vector<std::string> dates;
    dates.reserve(static_cast<std::size_t>(n_days));
    for (int i = 0; i < n_days; ++i) {
        dates.push_back(iso_date(y, m, d));
        if (++d > days_in_month(y, m)) {
            d = 1;
            if (++m > 12) {
                m = 1;
                ++y;
            }
        }
    }
    return dates;
}

std::string asset_name(int index, int n_assets) {
    int width = 2;
    for (int v = n_assets - 1; v >= 100; v /= 10) ++width;
    return "A" + pad(index, width);
}

double next_uniform(std::mt19937_64& rng) {
    // (0, 1]: the +1 keeps log() away from zero.
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

double next_gaussian(std::mt19937_64& rng) {
    double u1 = next_uniform(rng);
    double u2 = next_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

} // namespace

PriceTable synthetic_prices(const SyntheticSpec& spec) {
    if (spec.n_assets < 1) throw DomainError("synthetic_prices: n_assets must be >= 1");
    if (spec.n_days < 2) throw DomainError("synthetic_prices: n_days must be >= 2");
    if (spec.n_groups < 1 || spec.n_groups > spec.n_assets)
        throw DomainError("synthetic_prices: n_groups must be in [1, n_assets]");

    // Group g trends on a sinusoid with g+2 full cycles over the panel, so
    // the planted shapes are mutually orthogonal whatever n_days is. The
    // amplitude grows with the cycle count (smoothing filters bite harder at
    // short periods), and the longest periods are paired with the strongest
    // drifts to keep good risk-adjusted assets available at low volatility.
    static const double drift_table[] = {0.0008, 0.0007, 0.0005, 0.0004,
                                         0.0002, 0.0,    -0.0003};
    const double golden_angle = 2.399963229728653;
    const double kappa = 0.5;

    std::vector<std::string> dates = calendar(spec.n_days);

    PriceTable table;
    table.series.reserve(static_cast<std::size_t>(spec.n_assets));
    for (int n = 0; n < spec.n_assets; ++n) {
        int g = n % spec.n_groups;
        double omega = 2.0 * 3.14159265358979323846 * (g + 2) / spec.n_days;
        double phase = golden_angle * g;
        double amp = 0.16 * (1.0 + 0.10 * g);
        double drift = drift_table[g % 7];

        std::mt19937_64 rng = make_stream(spec.seed, static_cast<std::uint64_t>(n));
        double sigma_x = 0.003 + 0.022 * next_uniform(rng);
        double lp0 = std::log(20.0 + 60.0 * next_uniform(rng));

        PriceSeries series;
        series.asset_id = asset_name(n, spec.n_assets);
        series.dates = dates;
        series.prices.reserve(dates.size());
        double x = 0.0;
        for (int t = 0; t < spec.n_days; ++t) {
            double lp = lp0 + drift * t + amp * std::sin(omega * t + phase) + x;
            series.prices.push_back(std::exp(lp));
            x = kappa * x + sigma_x * next_gaussian(rng);
        }
        table.series.push_back(std::move(series));
    }
    return table;
}

void write_prices_csv(const PriceTable& table, std::ostream& os) {
    if (table.series.empty()) throw DataError("write_prices_csv: no series");
    const std::vector<std::string>& dates = table.series.front().dates;
    for (const PriceSeries& s : table.series)
        if (s.dates != dates || s.prices.size() != dates.size())
            throw AlignmentError("write_prices_csv: series grids differ");

    os << "date";
    for (const PriceSeries& s : table.series) os << ',' << s.asset_id;
    os << '\n';
    for (std::size_t t = 0; t < dates.size(); ++t) {
        os << dates[t];
        for (const PriceSeries& s : table.series) os << ',' << fmt_double(s.prices[t]);
        os << '\n';
    }
}

void write_prices_csv_file(const PriceTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + path);
    write_prices_csv(table, out);
}

} // namespace portopt
