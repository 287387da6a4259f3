#include "portopt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "portopt/config.hpp"
#include "portopt/errors.hpp"
#include "portopt/market_data.hpp"
#include "portopt/qubo.hpp"
#include "portopt/reduction.hpp"
#include "portopt/rng.hpp"
#include "portopt/sampler.hpp"
#include "portopt/synthetic.hpp"
#include "portopt/text.hpp"
#include "portopt/trajectory.hpp"

namespace portopt {

namespace {

// Deterministic work distribution: workers pull indices from a counter, every
// result lands in its own slot, and the caller consumes slots in index order.
// Content therefore never depends on the worker count.
void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn) {
    const int workers = std::max(1, std::min(threads, n_tasks));
    if (workers == 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_tasks));
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

struct PanelContext {
    PriceTable table;
    ReturnMatrix returns;
    std::vector<AssetStats> stats;
    Eigen::MatrixXd distances; // pairwise trend distances over all assets
};

PanelContext load_context(const RunConfig& cfg) {
    PanelContext ctx;
    ctx.table = load_prices_file(cfg.input);
    ctx.returns = log_returns(ctx.table.series);
    ctx.stats = asset_stats(ctx.returns, cfg.periods_per_year);

    std::vector<TrendSeries> trends;
    trends.reserve(ctx.table.series.size());
    for (const PriceSeries& s : ctx.table.series) {
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
            s.prices.data(), static_cast<long>(s.prices.size()));
        trends.push_back({s.asset_id, hp_filter(y, cfg.hp_lambda)});
    }
    ctx.distances = trend_distance_matrix(trends);

    if (ctx.returns.values.rows() - cfg.window < 1)
        throw InsufficientDataError(
            "window " + std::to_string(cfg.window) + " leaves no trading steps for " +
            std::to_string(ctx.returns.values.rows()) + " return rows");
    return ctx;
}

struct UniverseChoice {
    std::vector<int> columns; // panel columns of the selected assets, ascending
    std::vector<std::string> ids;
    int candidates = 0; // assets that survived the volatility cap
    int n_clusters = 0;
    std::vector<int> empty_clusters;
};

// Risk pre-filter, clustering of the survivors, one champion per cluster.
UniverseChoice choose_universe(const PanelContext& ctx, const RunConfig& cfg, double cap) {
    const double effective = cap * (1.0 + cfg.risk_slack);
    std::vector<int> kept;
    for (int n = 0; n < static_cast<int>(ctx.stats.size()); ++n)
        if (ctx.stats[n].volatility <= effective) kept.push_back(n);
    if (kept.empty())
        throw EmptyUniverseError("no asset within volatility cap " + fmt_double(cap));

    const long m = static_cast<long>(kept.size());
    Eigen::MatrixXd sub(m, m);
    std::vector<AssetStats> sub_stats;
    sub_stats.reserve(kept.size());
    for (long i = 0; i < m; ++i) {
        sub_stats.push_back(ctx.stats[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])]);
        for (long j = 0; j < m; ++j)
            sub(i, j) = ctx.distances(kept[static_cast<std::size_t>(i)],
                                      kept[static_cast<std::size_t>(j)]);
    }

    const int max_c = std::min<int>(cfg.max_clusters, static_cast<int>(kept.size()));
    const int k = select_n_clusters(sub, max_c, cfg.plateau_tol);
    const ClusterAssignment assignment = cluster_assets(sub, k);
    const ReducedUniverse reduced = reduce_universe(sub_stats, assignment, effective);

    std::map<std::string, int> column_of;
    for (int n = 0; n < static_cast<int>(ctx.table.series.size()); ++n)
        column_of[ctx.table.series[static_cast<std::size_t>(n)].asset_id] = n;

    UniverseChoice out;
    out.candidates = static_cast<int>(kept.size());
    out.n_clusters = k;
    out.empty_clusters = reduced.empty_clusters;
    for (const std::string& id : reduced.selected) out.columns.push_back(column_of.at(id));
    std::sort(out.columns.begin(), out.columns.end());
    for (int c : out.columns)
        out.ids.push_back(ctx.table.series[static_cast<std::size_t>(c)].asset_id);
    return out;
}

// Step s always estimates over return rows [s, s + window). In causal mode
// the step trades the next row and is labeled with its date; in in-sample
// mode the step trades the first row of its own estimation window.
std::vector<MarketSnapshot> universe_snapshots(const PanelContext& ctx, const RunConfig& cfg,
                                               const std::vector<int>& columns) {
    const long rows = ctx.returns.values.rows();
    ReturnMatrix sub;
    sub.dates = ctx.returns.dates;
    sub.values.resize(rows, static_cast<long>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        sub.assets.push_back(ctx.returns.assets[static_cast<std::size_t>(columns[j])]);
        sub.values.col(static_cast<long>(j)) =
            ctx.returns.values.col(columns[j]);
    }
    const long n_steps = rows - cfg.window;
    std::vector<MarketSnapshot> snaps;
    snaps.reserve(static_cast<std::size_t>(n_steps));
    for (long s = 0; s < n_steps; ++s)
        snaps.push_back(estimate_snapshot(sub, static_cast<int>(s) + cfg.window, cfg.window));
    return snaps;
}

std::vector<std::string> step_dates(const PanelContext& ctx, const RunConfig& cfg) {
    const long rows = ctx.returns.values.rows();
    const long n_steps = rows - cfg.window;
    const long first = cfg.in_sample ? 0 : cfg.window;
    return {ctx.returns.dates.begin() + first, ctx.returns.dates.begin() + first + n_steps};
}

Encoding universe_encoding(const RunConfig& cfg, int n_assets) {
    if (cfg.diversification_cap)
        return make_encoding_capped(n_assets, cfg.bundles, *cfg.diversification_cap);
    return make_encoding(n_assets, cfg.bundles, cfg.bit_depth);
}

std::uint64_t package_sampler_seed(std::uint64_t seed, int package_index) {
    return mix64(mix64(seed) ^ mix64(static_cast<std::uint64_t>(2 * package_index + 2)));
}

std::uint64_t baseline_seed(std::uint64_t seed) {
    return mix64(mix64(seed) ^ mix64(1));
}

enum class PackageStatus { ok, empty_universe, failed };

struct PackageOutcome {
    PackageStatus status = PackageStatus::ok;
    std::string message;
    UniverseChoice universe;
    double gamma = 0.0;
    Trajectory trajectory;
    TrajectoryMetrics metrics;
};

std::vector<StepCostParams> step_costs(const std::vector<MarketSnapshot>& snaps,
                                       const RunConfig& cfg, double gamma) {
    std::vector<StepCostParams> params;
    params.reserve(snaps.size());
    for (const MarketSnapshot& snap : snaps) {
        StepCostParams p;
        p.mu = snap.mu;
        p.sigma = snap.sigma;
        p.gamma = gamma;
        p.rho = cfg.rho_auto ? auto_rho(snap.mu, snap.sigma, gamma, cfg.bundles) : cfg.rho;
        params.push_back(std::move(p));
    }
    return params;
}

PackageOutcome run_package(const PanelContext& ctx, const RunConfig& cfg,
                           const RiskPackage& pkg, int package_index) {
    PackageOutcome out;
    try {
        out.universe = choose_universe(ctx, cfg, pkg.cap);
        const Encoding enc = universe_encoding(cfg, static_cast<int>(out.universe.columns.size()));
        const std::vector<MarketSnapshot> snaps = universe_snapshots(ctx, cfg, out.universe.columns);

        SamplerConfig sc;
        sc.n_reads = cfg.n_reads;
        sc.sweeps = cfg.sweeps;
        sc.beta_initial = cfg.beta_initial;
        sc.beta_final = cfg.beta_final;
        sc.seed = package_sampler_seed(cfg.seed, package_index);
        const SimulatedAnnealer annealer(sc);

        const HoldingRule rule{cfg.min_hold};
        BuildOptions opts;
        opts.pool_limit = cfg.pool_limit;
        opts.resample_on_exhaustion = cfg.resample_on_exhaustion;

        auto run_gamma = [&](double gamma) {
            Trajectory traj = build_trajectory(step_costs(snaps, cfg, gamma), enc, annealer,
                                               rule, opts);
            TrajectoryMetrics m = trajectory_metrics(traj, snaps, cfg.periods_per_year);
            return std::make_pair(std::move(traj), m);
        };

        if (!pkg.gamma_auto) {
            out.gamma = pkg.gamma;
            auto [traj, metrics] = run_gamma(pkg.gamma);
            out.trajectory = std::move(traj);
            out.metrics = metrics;
        } else {
            // Keep the gamma whose realized volatility lands closest under
            // the cap; when nothing fits, the most conservative run wins.
            bool have = false, have_fit = false;
            for (double gamma : cfg.gamma_grid) {
                auto [traj, metrics] = run_gamma(gamma);
                const bool fits = metrics.annualized_volatility <= pkg.cap;
                bool better = false;
                if (!have)
                    better = true;
                else if (fits != have_fit)
                    better = fits;
                else if (fits)
                    better = metrics.annualized_volatility > out.metrics.annualized_volatility;
                else
                    better = metrics.annualized_volatility < out.metrics.annualized_volatility;
                if (better) {
                    out.gamma = gamma;
                    out.trajectory = std::move(traj);
                    out.metrics = metrics;
                    have = true;
                    have_fit = fits;
                }
            }
        }
    } catch (const EmptyUniverseError& e) {
        out.status = PackageStatus::empty_universe;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.status = PackageStatus::failed;
        out.message = e.what();
    }
    return out;
}

std::vector<TrajectoryMetrics> run_baseline_ensemble(const PanelContext& ctx,
                                                     const RunConfig& cfg,
                                                     const UniverseChoice& universe) {
    const Encoding enc = universe_encoding(cfg, static_cast<int>(universe.columns.size()));
    const std::vector<MarketSnapshot> snaps = universe_snapshots(ctx, cfg, universe.columns);
    const HoldingRule rule{cfg.min_hold};
    const std::uint64_t seed = baseline_seed(cfg.seed);
    const int n = cfg.baseline_count;

    const int chunks = std::max(1, std::min(cfg.threads, n));
    std::vector<std::vector<std::pair<Trajectory, TrajectoryMetrics>>> parts(
        static_cast<std::size_t>(chunks));
    parallel_for(chunks, cfg.threads, [&](int w) {
        const int first = static_cast<int>(static_cast<long>(n) * w / chunks);
        const int last = static_cast<int>(static_cast<long>(n) * (w + 1) / chunks);
        if (last > first)
            parts[static_cast<std::size_t>(w)] = random_baseline(
                snaps, enc, rule, last - first, seed, cfg.periods_per_year, first);
    });

    std::vector<TrajectoryMetrics> metrics;
    metrics.reserve(static_cast<std::size_t>(n));
    for (const auto& part : parts)
        for (const auto& [traj, m] : part) metrics.push_back(m);
    return metrics;
}

std::string frontier_row(const std::string& label, const TrajectoryMetrics& m) {
    std::string row = label;
    row += ',';
    row += fmt_double(m.annualized_volatility);
    row += ',';
    row += fmt_double(m.annualized_return);
    row += ',';
    if (m.sharpe_defined) row += fmt_double(m.sharpe);
    row += '\n';
    return row;
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) out += ' ';
        out += ids[i];
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + path.string());
    out << content;
    if (!out) throw DataError("failed writing " + path.string());
}

} // namespace

int run_optimize(const std::string& config_path, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = parse_config_file(config_path);
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }

    try {
        const PanelContext ctx = load_context(cfg);
        out << "loaded " << ctx.table.series.size() << " assets, " << ctx.returns.values.rows()
            << " return rows (" << ctx.table.dropped_rows << " incomplete rows dropped)\n";

        const int n_packages = static_cast<int>(cfg.packages.size());
        std::vector<PackageOutcome> outcomes(static_cast<std::size_t>(n_packages));
        parallel_for(n_packages, cfg.threads, [&](int i) {
            outcomes[static_cast<std::size_t>(i)] =
                run_package(ctx, cfg, cfg.packages[static_cast<std::size_t>(i)], i);
        });
        for (int i = 0; i < n_packages; ++i) {
            const PackageOutcome& o = outcomes[static_cast<std::size_t>(i)];
            if (o.status == PackageStatus::empty_universe) {
                err << "package " << cfg.packages[static_cast<std::size_t>(i)].label << ": "
                    << o.message << '\n';
                return 3;
            }
            if (o.status == PackageStatus::failed) {
                err << "package " << cfg.packages[static_cast<std::size_t>(i)].label << ": "
                    << o.message << '\n';
                return 2;
            }
        }

        const UniverseChoice baseline_universe =
            choose_universe(ctx, cfg, std::numeric_limits<double>::infinity());
        const std::vector<TrajectoryMetrics> baselines =
            run_baseline_ensemble(ctx, cfg, baseline_universe);

        const std::vector<std::string> dates = step_dates(ctx, cfg);
        for (int i = 0; i < n_packages; ++i) {
            const RiskPackage& pkg = cfg.packages[static_cast<std::size_t>(i)];
            const PackageOutcome& o = outcomes[static_cast<std::size_t>(i)];
            out << "package " << pkg.label << ": " << o.universe.candidates
                << " assets under cap " << fmt_double(pkg.cap) << ", " << o.universe.n_clusters
                << " clusters, universe " << join_ids(o.universe.ids) << ", gamma "
                << fmt_double(o.gamma) << ", fallbacks " << o.trajectory.fallback_count << '\n';
            if (!o.universe.empty_clusters.empty()) {
                out << "package " << pkg.label << ": clusters without survivors:";
                for (int c : o.universe.empty_clusters) out << ' ' << c;
                out << '\n';
            }
            if (o.metrics.annualized_volatility > pkg.cap * 1.25)
                out << "warning: package " << pkg.label << " realized annualized volatility "
                    << fmt_double(o.metrics.annualized_volatility) << " exceeds cap "
                    << fmt_double(pkg.cap) << " x 1.25\n";
        }
        out << "baseline universe: " << join_ids(baseline_universe.ids) << " ("
            << baseline_universe.n_clusters << " clusters, " << baselines.size()
            << " trajectories)\n";

        const std::filesystem::path dir(cfg.output_dir);
        std::filesystem::create_directories(dir);
        for (int i = 0; i < n_packages; ++i) {
            const RiskPackage& pkg = cfg.packages[static_cast<std::size_t>(i)];
            const PackageOutcome& o = outcomes[static_cast<std::size_t>(i)];

            std::ostringstream csv;
            write_trajectory_csv(o.trajectory, dates, o.universe.ids, csv);
            write_file(dir / ("trajectory_" + pkg.label + ".csv"), csv.str());

            std::ostringstream json;
            write_metrics_json(o.metrics, o.trajectory.fallback_count, json);
            write_file(dir / ("metrics_" + pkg.label + ".json"), json.str());

            out << "wrote " << (dir / ("trajectory_" + pkg.label + ".csv")).string() << '\n';
            out << "wrote " << (dir / ("metrics_" + pkg.label + ".json")).string() << '\n';
        }

        std::string frontier = "label,annualized_volatility,annualized_return,sharpe\n";
        for (int i = 0; i < n_packages; ++i)
            frontier += frontier_row(cfg.packages[static_cast<std::size_t>(i)].label,
                                     outcomes[static_cast<std::size_t>(i)].metrics);
        for (const TrajectoryMetrics& m : baselines) frontier += frontier_row("baseline", m);
        write_file(dir / "frontier.csv", frontier);
        out << "wrote " << (dir / "frontier.csv").string() << '\n';
        return 0;
    } catch (const EmptyUniverseError& e) {
        err << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }
}

int run_verify(const std::string& trajectory_path, int min_hold, std::ostream& out,
               std::ostream& err) {
    try {
        if (min_hold < 1) throw DomainError("hold must be >= 1");
        std::ifstream in(trajectory_path, std::ios::binary);
        if (!in) throw DataError("cannot open trajectory file: " + trajectory_path);
        std::vector<std::string> dates;
        std::vector<std::string> ids;
        const Trajectory traj = read_trajectory_csv(in, &dates, &ids);
        const auto violation = find_holding_violation(traj, HoldingRule{min_hold});
        if (violation) {
            out << "holding violation: " << ids[static_cast<std::size_t>(violation->asset)]
                << " sold on " << dates[static_cast<std::size_t>(violation->step)]
                << " before " << min_hold << " steps elapsed\n";
            return 1;
        }
        out << "ok: " << traj.steps.size() << " steps, " << ids.size()
            << " assets, holding rule " << min_hold << " satisfied\n";
        return 0;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }
}

int run_report(const std::string& frontier_path, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream in(frontier_path, std::ios::binary);
        if (!in) throw DataError("cannot open frontier file: " + frontier_path);

        std::string line;
        if (!std::getline(in, line))
            throw DataError("frontier file is empty: " + frontier_path);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != "label,annualized_volatility,annualized_return,sharpe")
            throw ParseError("unexpected frontier header: '" + line + "'");

        struct Row {
            std::string label;
            double volatility = 0.0;
            double ret = 0.0;
            double sharpe = 0.0;
            bool sharpe_defined = false;
        };
        std::vector<Row> packages;
        std::vector<double> baseline_sharpes;
        int line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::vector<std::string> cells = split_csv(line);
            if (cells.size() != 4)
                throw ParseError("frontier line " + std::to_string(line_no) +
                                 ": expected 4 fields");
            Row row;
            row.label = cells[0];
            const std::string what = "frontier line " + std::to_string(line_no);
            row.volatility = parse_double(cells[1], what);
            row.ret = parse_double(cells[2], what);
            if (!cells[3].empty()) {
                row.sharpe = parse_double(cells[3], what);
                row.sharpe_defined = true;
            }
            if (row.label == "baseline") {
                if (row.sharpe_defined) baseline_sharpes.push_back(row.sharpe);
            } else {
                packages.push_back(std::move(row));
            }
        }
        if (packages.empty()) throw DataError("frontier has no package rows");

        for (const Row& pkg : packages) {
            out << "package " << pkg.label << ": annualized_volatility "
                << fmt_double(pkg.volatility) << ", annualized_return " << fmt_double(pkg.ret)
                << ", sharpe " << (pkg.sharpe_defined ? fmt_double(pkg.sharpe) : "undefined");
            if (pkg.sharpe_defined && !baseline_sharpes.empty()) {
                long less = 0;
                long equal = 0;
                for (double b : baseline_sharpes) {
                    if (b < pkg.sharpe) ++less;
                    if (b == pkg.sharpe) ++equal;
                }
                const double pct = 100.0 * (static_cast<double>(less) + 0.5 * static_cast<double>(equal)) /
                                   static_cast<double>(baseline_sharpes.size());
                out << ", sharpe percentile " << fmt_double(pct) << " of "
                    << baseline_sharpes.size() << " baselines";
            } else {
                out << ", sharpe percentile undefined";
            }
            out << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }
}

int run_gen_data(std::uint64_t seed, int assets, int days, const std::string& out_path,
                 std::ostream& out, std::ostream& err) {
    try {
        SyntheticSpec spec;
        spec.n_assets = assets;
        spec.n_days = days;
        spec.n_groups = std::min(7, assets);
        spec.seed = seed;
        write_prices_csv_file(synthetic_prices(spec), out_path);
        out << "wrote " << out_path << ": " << assets << " assets x " << days
            << " days (seed " << seed << ")\n";
        return 0;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }
}

} // namespace portopt
