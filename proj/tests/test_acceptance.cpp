#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "portopt/market_data.hpp"
#include "portopt/pipeline.hpp"
#include "portopt/qubo.hpp"
#include "portopt/reduction.hpp"
#include "portopt/rng.hpp"
#include "portopt/sampler.hpp"
#include "portopt/synthetic.hpp"
#include "portopt/text.hpp"
#include "portopt/trajectory.hpp"

#include "support/oracles.hpp"

using namespace portopt;
using testsupport::next_uniform;
using testsupport::nth_state;
using testsupport::random_covariance;
namespace fs = std::filesystem;

namespace {

// Every tolerance and budget the suite enforces, in one place.
constexpr double kCostTol = 1e-9;    // qubo vs direct cost, per state
constexpr double kEnergyTol = 1e-9;  // annealer vs exhaustive minimum
constexpr double kFilterTol = 1e-8;  // trend filter identities
constexpr double kQuboSeconds = 5.0;
constexpr double kAnnealSeconds = 60.0;
constexpr double kPanelSeconds = 300.0;

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

bool report(const char* name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << std::endl;
    return ok;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("portopt_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

StepCostParams random_step(std::mt19937_64& rng, int n, double gamma, bool rho_auto,
                           int bundles) {
    StepCostParams p;
    p.mu.resize(n);
    for (int i = 0; i < n; ++i) p.mu(i) = 0.5 * (next_uniform(rng) - 0.5);
    p.sigma = random_covariance(rng, n, 0.8);
    p.gamma = gamma;
    p.rho = rho_auto ? auto_rho(p.mu, p.sigma, gamma, bundles)
                     : 0.9 + next_uniform(rng);
    return p;
}

} // namespace

TEST_CASE("criterion 1: step qubo reproduces the direct cost on every bit vector") {
    Stopwatch watch;
    bool ok = true;
    const double gammas[] = {0.0, 0.5, 2.0, 8.0};

    for (int i = 0; i < 50 && ok; ++i) {
        std::mt19937_64 rng = make_stream(101, static_cast<std::uint64_t>(i));
        const int n = 1 + i % 4;
        const int depth = 1 + i % 3;
        const int bundles = (1 << depth) - 1 + i % 4;
        const Encoding enc = make_encoding(n, bundles, depth);

        StepCostParams p;
        p.mu.resize(n);
        for (int a = 0; a < n; ++a) p.mu(a) = 0.4 * (next_uniform(rng) - 0.5);
        p.sigma = random_covariance(rng, n, 0.6);
        p.gamma = gammas[i % 4];
        if (i % 3 == 0)
            p.rho = 0.0;
        else if (i % 3 == 1)
            p.rho = auto_rho(p.mu, p.sigma, p.gamma, bundles);
        else
            p.rho = 0.5 + next_uniform(rng);

        const QuboProblem problem = build_step_qubo(p, enc);
        const int nb = enc.n_bits();
        for (std::uint64_t m = 0; m < (1ull << nb); ++m) {
            const BitVector x = nth_state(m, nb);

            // Cost recomputed from scratch: hand-decoded weights, explicit sums.
            double ret = 0.0, var = 0.0, total = 0.0;
            for (int a = 0; a < n; ++a) {
                int units = 0;
                for (int q = 0; q < depth; ++q)
                    units += static_cast<int>(x[a * depth + q]) << q;
                const double w = static_cast<double>(units) / bundles;
                ret += p.mu(a) * w;
                total += w;
            }
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    int ua = 0, ub = 0;
                    for (int q = 0; q < depth; ++q) {
                        ua += static_cast<int>(x[a * depth + q]) << q;
                        ub += static_cast<int>(x[b * depth + q]) << q;
                    }
                    var += (static_cast<double>(ua) / bundles) * p.sigma(a, b) *
                           (static_cast<double>(ub) / bundles);
                }
            const double direct =
                -ret + 0.5 * p.gamma * var + p.rho * (total - 1.0) * (total - 1.0);

            if (std::abs(problem.energy(x) - direct) > kCostTol) {
                MESSAGE("instance ", i, " state ", m, ": energy ", problem.energy(x),
                        " direct ", direct);
                ok = false;
                break;
            }
            if (std::abs(step_cost(decode(x, enc), p) - direct) > kCostTol) {
                MESSAGE("instance ", i, " state ", m, ": step_cost disagrees");
                ok = false;
                break;
            }
        }
    }

    if (watch.seconds() >= kQuboSeconds) {
        MESSAGE("took ", watch.seconds(), "s, budget ", kQuboSeconds);
        ok = false;
    }
    CHECK(report("criterion 1: step qubo reproduces the direct cost on every bit vector", ok));
}

TEST_CASE("criterion 2: annealer recovers exact minima on small problems") {
    Stopwatch watch;
    int matches = 0;
    const int n_problems = 100;

    for (int i = 0; i < n_problems; ++i) {
        std::mt19937_64 rng = make_stream(202, static_cast<std::uint64_t>(i));
        const int nb = 10 + i % 5;
        QuboProblem problem;
        problem.q = Eigen::MatrixXd::Zero(nb, nb);
        for (int r = 0; r < nb; ++r)
            for (int c = r; c < nb; ++c) {
                const double v = 2.0 * (next_uniform(rng) - 0.5);
                problem.q(r, c) = v;
                problem.q(c, r) = v;
            }
        problem.offset = next_uniform(rng) - 0.5;

        SamplerConfig sc;
        sc.seed = 7000 + static_cast<std::uint64_t>(i);
        const SimulatedAnnealer annealer(sc);
        const SamplePool pool = annealer.sample(problem, 0);
        const BitVector exact = brute_force_min(problem);
        if (!pool.entries.empty() &&
            std::abs(pool.entries.front().energy - problem.energy(exact)) <= kEnergyTol)
            ++matches;
    }

    bool ok = matches >= 99;
    if (!ok) MESSAGE("only ", matches, "/", n_problems, " ground states found");
    if (watch.seconds() >= kAnnealSeconds) {
        MESSAGE("took ", watch.seconds(), "s, budget ", kAnnealSeconds);
        ok = false;
    }
    CHECK(report("criterion 2: annealer recovers exact minima on small problems", ok));
}

TEST_CASE("criterion 3: automatic penalty forces the exact minimizer onto the budget") {
    bool ok = true;
    const double gammas[] = {0.0, 0.5, 2.0, 8.0};

    for (int i = 0; i < 50 && ok; ++i) {
        std::mt19937_64 rng = make_stream(303, static_cast<std::uint64_t>(i));
        const int n = 2 + i % 3;
        const int bundles = 5;
        const Encoding enc = make_encoding(n, bundles, 2);

        StepCostParams p;
        p.mu.resize(n);
        for (int a = 0; a < n; ++a) p.mu(a) = 2.0 * (next_uniform(rng) - 0.5);
        p.sigma = random_covariance(rng, n, 1.0);
        p.gamma = gammas[i % 4];
        p.rho = auto_rho(p.mu, p.sigma, p.gamma, bundles);

        const BitVector best = brute_force_min(build_step_qubo(p, enc));
        int total = 0;
        for (int u : decode_units(best, enc)) total += u;
        if (total != bundles) {
            MESSAGE("instance ", i, ": minimizer holds ", total, "/", bundles, " slices");
            ok = false;
        }
    }
    CHECK(report("criterion 3: automatic penalty forces the exact minimizer onto the budget", ok));
}

TEST_CASE("criterion 4: built trajectories always honor the holding rule") {
    bool ok = true;
    int sabotaged = 0;
    const int holds[] = {1, 3, 7};
    const double gammas[] = {0.0, 0.5, 2.0, 8.0};

    for (int j = 0; j < 1000 && ok; ++j) {
        std::mt19937_64 rng = make_stream(404, static_cast<std::uint64_t>(j));
        const int n = 2 + j % 2;
        const int depth = 1 + j % 2;
        const int bundles = (1 << depth) - 1 + j % 3;
        const Encoding enc = make_encoding(n, bundles, depth);
        const int steps = 6 + j % 5;
        const HoldingRule rule{holds[j % 3]};

        std::vector<StepCostParams> params;
        for (int t = 0; t < steps; ++t)
            params.push_back(random_step(rng, n, gammas[j % 4], j % 2 == 0, bundles));

        SamplerConfig sc;
        sc.n_reads = 8;
        sc.sweeps = 40;
        sc.seed = static_cast<std::uint64_t>(j);
        Trajectory traj = build_trajectory(params, enc, SimulatedAnnealer(sc), rule);

        if (!verify_trajectory(traj, rule) || find_holding_violation(traj, rule)) {
            MESSAGE("run ", j, ": builder emitted an illegal trajectory");
            ok = false;
            break;
        }

        // Plant one early sale and demand the checker pins exactly that step.
        if (rule.min_hold_days < 2) continue;
        for (int t = 0; t + 1 < steps; ++t) {
            bool done = false;
            for (int a = 0; a < n; ++a) {
                const double before = t == 0 ? 0.0 : traj.steps[t - 1].weights(a);
                if (traj.steps[t].weights(a) > before) {
                    Trajectory tampered = traj;
                    tampered.steps[t + 1].weights(a) =
                        traj.steps[t].weights(a) - 1.0 / bundles;
                    const auto violation = find_holding_violation(tampered, rule);
                    if (!violation || violation->step != t + 1 || violation->asset != a) {
                        MESSAGE("run ", j, ": planted sale at step ", t + 1, " asset ", a,
                                " was not flagged");
                        ok = false;
                    }
                    ++sabotaged;
                    done = true;
                    break;
                }
            }
            if (done) break;
        }
    }

    if (sabotaged < 100) {
        MESSAGE("only ", sabotaged, " sabotage checks ran");
        ok = false;
    }
    CHECK(report("criterion 4: built trajectories always honor the holding rule", ok));
}

TEST_CASE("criterion 5: trajectory builder matches an independent greedy reference") {
    bool ok = true;
    const int holds[] = {1, 3, 7};
    const double gammas[] = {0.5, 2.0, 8.0, 0.0};

    for (int j = 0; j < 20 && ok; ++j) {
        std::mt19937_64 rng = make_stream(505, static_cast<std::uint64_t>(j));
        const int n = 2 + j % 2;
        const int depth = 1 + (j >> 1) % 2;
        const int bundles = (1 << depth) - 1 + j % 3;
        const Encoding enc = make_encoding(n, bundles, depth);
        const int steps = 5 + j % 4;
        const int hold = holds[j % 3];
        const std::size_t pool_limit = 3 + j % 6;

        std::vector<StepCostParams> params;
        for (int t = 0; t < steps; ++t)
            params.push_back(random_step(rng, n, gammas[j % 4], j % 2 == 1, bundles));

        BuildOptions opts;
        opts.pool_limit = pool_limit;
        const Trajectory traj = build_trajectory(params, enc, testsupport::ExhaustiveSampler{},
                                                 HoldingRule{hold}, opts);
        const testsupport::GreedyReference ref =
            testsupport::greedy_reference(params, enc, hold, pool_limit);

        if (traj.steps.size() != ref.weights.size() || traj.fallback_count != ref.fallbacks) {
            MESSAGE("instance ", j, ": shape or fallback mismatch");
            ok = false;
            break;
        }
        for (int t = 0; t < steps && ok; ++t)
            for (int a = 0; a < n; ++a)
                if (traj.steps[t].weights(a) != ref.weights[t](a)) {
                    MESSAGE("instance ", j, " step ", t, " asset ", a, ": ",
                            traj.steps[t].weights(a), " vs ", ref.weights[t](a));
                    ok = false;
                    break;
                }
    }
    CHECK(report("criterion 5: trajectory builder matches an independent greedy reference", ok));
}

TEST_CASE("criterion 6: optimized packages beat random portfolios on the bundled panel") {
    Stopwatch watch;
    bool ok = true;
    const fs::path dir = fresh_dir("panel");
    const fs::path out_dir = dir / "out";

    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "input = " << PORTOPT_REPO_DIR << "/data/synthetic.csv\n"
            << "output_dir = " << out_dir.string() << "\n"
            << "window = 60\n"
            << "plateau_tol = 0.02\n"
            << "min_hold = 7\n"
            << "n_reads = 48\n"
            << "sweeps = 150\n"
            << "baseline_count = 1000\n"
            << "seed = 1\n"
            << "threads = 4\n"
            << "package = min_risk,0.22,2\n"
            << "package = low,0.3,2\n"
            << "package = mid,0.42,2\n"
            << "package = high,0.55,2\n";
    }

    std::ostringstream out, err;
    const int rc = run_optimize((dir / "run.cfg").string(), out, err);
    if (rc != 0) {
        MESSAGE("optimize exited ", rc, ": ", err.str());
        ok = false;
    }

    std::vector<double> package_sharpes;
    std::vector<double> baseline_sharpes;
    if (ok) {
        std::ifstream frontier(out_dir / "frontier.csv");
        std::string line;
        std::getline(frontier, line); // header
        while (std::getline(frontier, line)) {
            if (line.empty()) continue;
            const std::vector<std::string> cells = split_csv(line);
            if (cells.size() != 4 || cells[3].empty()) continue;
            const double sharpe = std::stod(cells[3]);
            if (cells[0] == "baseline")
                baseline_sharpes.push_back(sharpe);
            else
                package_sharpes.push_back(sharpe);
        }
        if (package_sharpes.size() != 4 || baseline_sharpes.size() < 900) {
            MESSAGE("frontier holds ", package_sharpes.size(), " packages and ",
                    baseline_sharpes.size(), " scored baselines");
            ok = false;
        }
    }

    if (ok) {
        std::sort(baseline_sharpes.begin(), baseline_sharpes.end());
        const std::size_t idx = static_cast<std::size_t>(
            std::ceil(0.90 * static_cast<double>(baseline_sharpes.size()))) - 1;
        const double p90 = baseline_sharpes[idx];
        for (std::size_t i = 0; i < package_sharpes.size(); ++i)
            if (!(package_sharpes[i] > p90)) {
                MESSAGE("package ", i, " sharpe ", package_sharpes[i],
                        " does not clear the 90th percentile ", p90);
                ok = false;
            }
    }

    if (watch.seconds() >= kPanelSeconds) {
        MESSAGE("took ", watch.seconds(), "s, budget ", kPanelSeconds);
        ok = false;
    }
    CHECK(report("criterion 6: optimized packages beat random portfolios on the bundled panel",
                 ok));
}

TEST_CASE("criterion 7: planted trend groups are recovered and reduced one per cluster") {
    bool ok = true;

    SyntheticSpec spec;
    spec.n_assets = 20;
    spec.n_days = 311;
    spec.n_groups = 7;
    spec.seed = 11;
    const PriceTable table = synthetic_prices(spec);

    std::vector<TrendSeries> trends;
    for (const PriceSeries& s : table.series) {
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
            s.prices.data(), static_cast<long>(s.prices.size()));
        trends.push_back({s.asset_id, hp_filter(y, 1e4)});
    }
    const Eigen::MatrixXd dist = trend_distance_matrix(trends);

    const int k = select_n_clusters(dist, 12, 0.02);
    if (k != 7) {
        MESSAGE("elbow picked ", k, " clusters");
        ok = false;
    }

    const ClusterAssignment assignment = cluster_assets(dist, 7);
    const std::vector<AssetStats> stats = asset_stats(log_returns(table.series), 252.0);
    const ReducedUniverse reduced = reduce_universe(stats, assignment, 1e9);

    if (reduced.selected.size() != 7 || !reduced.empty_clusters.empty()) {
        MESSAGE("reduced to ", reduced.selected.size(), " assets with ",
                reduced.empty_clusters.size(), " empty clusters");
        ok = false;
    } else {
        std::set<int> groups;
        for (const std::string& id : reduced.selected) {
            const int index = std::stoi(id.substr(1));
            groups.insert(index % 7);
        }
        if (groups.size() != 7) {
            MESSAGE("champions cover only ", groups.size(), " of the planted groups");
            ok = false;
        }
    }
    CHECK(report("criterion 7: planted trend groups are recovered and reduced one per cluster",
                 ok));
}

TEST_CASE("criterion 8: trend filter is exact on degenerate inputs and lowers its objective") {
    bool ok = true;
    const double lambdas[] = {1.0, 10.0, 100.0, 1600.0, 1e4, 1e5};

    for (int s = 0; s < 100 && ok; ++s) {
        std::mt19937_64 rng = make_stream(808, static_cast<std::uint64_t>(s));
        const int T = 10 + s % 90;
        const double lambda = lambdas[s % 6];

        Eigen::VectorXd walk(T);
        walk(0) = next_uniform(rng);
        for (int t = 1; t < T; ++t) walk(t) = walk(t - 1) + 0.1 * (next_uniform(rng) - 0.5);

        if ((hp_filter(walk, 0.0) - walk).cwiseAbs().maxCoeff() > kFilterTol) {
            MESSAGE("series ", s, ": lambda 0 is not the identity");
            ok = false;
            break;
        }

        const double a = next_uniform(rng);
        const double b = 0.2 * (next_uniform(rng) - 0.5);
        Eigen::VectorXd line(T);
        for (int t = 0; t < T; ++t) line(t) = a + b * t;
        if ((hp_filter(line, lambda) - line).cwiseAbs().maxCoeff() > kFilterTol) {
            MESSAGE("series ", s, ": linear input moved under lambda ", lambda);
            ok = false;
            break;
        }

        // Objective recomputed with an explicit second-difference matrix.
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(T - 2, T);
        for (int r = 0; r < T - 2; ++r) {
            d(r, r) = 1.0;
            d(r, r + 1) = -2.0;
            d(r, r + 2) = 1.0;
        }
        auto objective = [&](const Eigen::VectorXd& v) {
            return (walk - v).squaredNorm() + lambda * (d * v).squaredNorm();
        };
        const Eigen::VectorXd trend = hp_filter(walk, lambda);
        if (objective(trend) > objective(walk) + kFilterTol) {
            MESSAGE("series ", s, ": filtering raised the objective");
            ok = false;
        }
    }
    CHECK(report(
        "criterion 8: trend filter is exact on degenerate inputs and lowers its objective", ok));
}

TEST_CASE("criterion 9: identical configurations reproduce artifacts byte for byte") {
    bool ok = true;
    const fs::path dir = fresh_dir("repro");

    auto write_cfg = [&](const fs::path& path, const fs::path& out_dir, int threads) {
        std::ofstream cfg(path);
        cfg << "input = " << PORTOPT_REPO_DIR << "/data/synthetic_small.csv\n"
            << "output_dir = " << out_dir.string() << "\n"
            << "window = 40\n"
            << "min_hold = 7\n"
            << "n_reads = 32\n"
            << "sweeps = 80\n"
            << "baseline_count = 60\n"
            << "gamma_grid = 0.5,2\n"
            << "seed = 42\n"
            << "threads = " << threads << "\n"
            << "package = steady,0.9,1\n"
            << "package = roam,2.0,auto\n";
    };

    const char* files[] = {"trajectory_steady.csv", "trajectory_roam.csv",
                           "metrics_steady.json", "metrics_roam.json", "frontier.csv"};
    std::ostringstream out, err;

    write_cfg(dir / "a.cfg", dir / "out_a", 1);
    write_cfg(dir / "b.cfg", dir / "out_b", 1);
    write_cfg(dir / "c.cfg", dir / "out_c", 3);
    for (const char* name : {"a.cfg", "b.cfg", "c.cfg"}) {
        const int rc = run_optimize((dir / name).string(), out, err);
        if (rc != 0) {
            MESSAGE(name, " exited ", rc, ": ", err.str());
            ok = false;
        }
    }

    if (ok)
        for (const char* name : files) {
            const std::string a = slurp(dir / "out_a" / name);
            if (a.empty() || a != slurp(dir / "out_b" / name) ||
                a != slurp(dir / "out_c" / name)) {
                MESSAGE(name, " differs between identical runs");
                ok = false;
            }
        }
    CHECK(report("criterion 9: identical configurations reproduce artifacts byte for byte", ok));
}
