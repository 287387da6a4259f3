#include "portopt/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/rng.hpp"
#include "portopt/text.hpp"

namespace portopt {

namespace {

void check_rule(const HoldingRule& rule) {
    if (rule.min_hold_days < 1)
        throw DomainError("holding period must be at least 1 step, got " +
                          std::to_string(rule.min_hold_days));
}

void check_params(const std::vector<StepCostParams>& params, const Encoding& enc) {
    if (params.empty()) throw DataError("no step parameters");
    for (std::size_t t = 0; t < params.size(); ++t) {
        const auto& p = params[t];
        const std::string where = "step " + std::to_string(t);
        if (p.mu.size() != enc.n_assets || p.sigma.rows() != enc.n_assets ||
            p.sigma.cols() != enc.n_assets)
            throw AlignmentError(where + " data does not match the " +
                                 std::to_string(enc.n_assets) + "-asset encoding");
        if (!std::isfinite(p.gamma) || p.gamma < 0.0 || !std::isfinite(p.rho) || p.rho < 0.0)
            throw DomainError(where + " has invalid gamma or rho");
        for (int i = 0; i < enc.n_assets; ++i) {
            if (!std::isfinite(p.mu(i))) throw DataError(where + " mu has a non-finite value");
            for (int j = 0; j < enc.n_assets; ++j)
                if (!std::isfinite(p.sigma(i, j)))
                    throw DataError(where + " sigma has a non-finite value");
        }
    }
}

// Incremental purchase-age bookkeeping shared by the builders. The verifier
// below deliberately avoids this struct.
struct AgeTracker {
    Eigen::VectorXd prev;
    std::vector<int> last_increase;

    explicit AgeTracker(int n_assets)
        : prev(Eigen::VectorXd::Zero(n_assets)), last_increase(n_assets, -1) {}

    bool allows(const Eigen::VectorXd& cand, int t, int min_hold) const {
        for (Eigen::Index n = 0; n < prev.size(); ++n) {
            if (!(cand(n) < prev(n))) continue;
            const int bought = last_increase[static_cast<std::size_t>(n)];
            if (bought >= 0 && t - bought < min_hold) return false;
        }
        return true;
    }

    void advance(const Eigen::VectorXd& chosen, int t) {
        for (Eigen::Index n = 0; n < prev.size(); ++n)
            if (chosen(n) > prev(n)) last_increase[static_cast<std::size_t>(n)] = t;
        prev = chosen;
    }
};

} // namespace

std::vector<RankedCandidate> rank_step_candidates(const SamplePool& pool, const Encoding& enc,
                                                  const Eigen::VectorXd& mu,
                                                  const Eigen::MatrixXd& sigma,
                                                  std::size_t pool_limit) {
    if (pool_limit < 1) throw DomainError("pool limit must be positive");
    if (pool.entries.empty()) throw EmptyPoolError("no candidates to rank");
    if (mu.size() != enc.n_assets || sigma.rows() != enc.n_assets ||
        sigma.cols() != enc.n_assets)
        throw AlignmentError("step data does not match the " +
                             std::to_string(enc.n_assets) + "-asset encoding");
    for (int i = 0; i < enc.n_assets; ++i) {
        if (!std::isfinite(mu(i))) throw DataError("mu has a non-finite value");
        for (int j = 0; j < enc.n_assets; ++j)
            if (!std::isfinite(sigma(i, j))) throw DataError("sigma has a non-finite value");
    }

    struct Row {
        RankedCandidate cand;
        int cls = 0;
    };
    std::vector<Row> rows;
    rows.reserve(pool.entries.size());
    for (const auto& entry : pool.entries) {
        Row row;
        row.cand.state = entry.state;
        row.cand.holdings = decode(entry.state, enc);
        row.cand.energy = entry.energy;
        const auto& w = row.cand.holdings.weights;
        double ret = 0.0;
        for (int i = 0; i < enc.n_assets; ++i) ret += mu(i) * w(i);
        double var = 0.0;
        for (int i = 0; i < enc.n_assets; ++i)
            for (int j = 0; j < enc.n_assets; ++j) var += w(i) * sigma(i, j) * w(j);
        if (var < 0.0) var = 0.0; // quadratic form may round below zero
        if (var > 0.0) {
            row.cls = 1;
            row.cand.score = ret / std::sqrt(var);
        } else {
            row.cls = ret > 0.0 ? 0 : 2;
            row.cand.score = ret;
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.cls != b.cls) return a.cls < b.cls;
        if (a.cand.score != b.cand.score) return a.cand.score > b.cand.score;
        if (a.cand.energy != b.cand.energy) return a.cand.energy < b.cand.energy;
        return bit_vector_less(a.cand.state, b.cand.state);
    });
    if (rows.size() > pool_limit) rows.resize(pool_limit);

    std::vector<RankedCandidate> out;
    out.reserve(rows.size());
    for (auto& row : rows) out.push_back(std::move(row.cand));
    return out;
}

bool check_holding(const Trajectory& prefix, const Holdings& candidate, int t,
                   const HoldingRule& rule) {
    check_rule(rule);
    if (static_cast<int>(prefix.steps.size()) != t)
        throw AlignmentError("prefix covers " + std::to_string(prefix.steps.size()) +
                             " steps, expected " + std::to_string(t));
    if (t == 0) return true;
    const Eigen::Index n_assets = prefix.steps[0].weights.size();
    if (candidate.weights.size() != n_assets)
        throw AlignmentError("candidate has " + std::to_string(candidate.weights.size()) +
                             " assets, prefix has " + std::to_string(n_assets));
    AgeTracker ages(static_cast<int>(n_assets));
    for (int s = 0; s < t; ++s) {
        if (prefix.steps[s].weights.size() != n_assets)
            throw AlignmentError("prefix step " + std::to_string(s) + " has a different size");
        ages.advance(prefix.steps[s].weights, s);
    }
    return ages.allows(candidate.weights, t, rule.min_hold_days);
}

Trajectory build_trajectory(const std::vector<StepCostParams>& params, const Encoding& enc,
                            const Sampler& sampler, const HoldingRule& rule,
                            const BuildOptions& opts) {
    check_rule(rule);
    check_params(params, enc);
    if (opts.pool_limit < 1) throw DomainError("pool limit must be positive");

    Trajectory traj;
    traj.steps.reserve(params.size());
    AgeTracker ages(enc.n_assets);
    for (std::size_t t = 0; t < params.size(); ++t) {
        const int step = static_cast<int>(t);
        const QuboProblem problem = build_step_qubo(params[t], enc);

        const RankedCandidate* pick = nullptr;
        std::vector<RankedCandidate> ranked = rank_step_candidates(
            sampler.sample(problem, 2 * t), enc, params[t].mu, params[t].sigma,
            opts.pool_limit);
        for (const auto& cand : ranked)
            if (ages.allows(cand.holdings.weights, step, rule.min_hold_days)) {
                pick = &cand;
                break;
            }
        std::vector<RankedCandidate> retried;
        if (pick == nullptr && opts.resample_on_exhaustion) {
            retried = rank_step_candidates(sampler.sample(problem, 2 * t + 1), enc,
                                           params[t].mu, params[t].sigma, opts.pool_limit);
            for (const auto& cand : retried)
                if (ages.allows(cand.holdings.weights, step, rule.min_hold_days)) {
                    pick = &cand;
                    break;
                }
        }

        Holdings chosen = pick != nullptr ? pick->holdings : Holdings{ages.prev};
        if (pick == nullptr) ++traj.fallback_count;
        ages.advance(chosen.weights, step);
        traj.steps.push_back(std::move(chosen));
    }
    traj.last_increase = ages.last_increase;
    return traj;
}

std::optional<HoldingViolation> find_holding_violation(const Trajectory& traj,
                                                       const HoldingRule& rule) {
    check_rule(rule);
    const auto& steps = traj.steps;
    if (steps.empty()) return std::nullopt;
    const Eigen::Index n_assets = steps[0].weights.size();
    for (const auto& step : steps)
        if (step.weights.size() != n_assets)
            throw AlignmentError("trajectory steps disagree on the asset count");

    for (std::size_t t = 1; t < steps.size(); ++t) {
        for (Eigen::Index n = 0; n < n_assets; ++n) {
            if (!(steps[t].weights(n) < steps[t - 1].weights(n))) continue;
            int bought = -1;
            for (int s = static_cast<int>(t) - 1; s >= 0; --s) {
                const double before = s == 0 ? 0.0 : steps[s - 1].weights(n);
                if (steps[s].weights(n) > before) {
                    bought = s;
                    break;
                }
            }
            if (bought >= 0 && static_cast<int>(t) - bought < rule.min_hold_days)
                return HoldingViolation{static_cast<int>(t), static_cast<int>(n)};
        }
    }
    return std::nullopt;
}

bool verify_trajectory(const Trajectory& traj, const HoldingRule& rule) {
    return !find_holding_violation(traj, rule).has_value();
}

TrajectoryMetrics trajectory_metrics(const Trajectory& traj,
                                     const std::vector<MarketSnapshot>& snapshots,
                                     double periods_per_year) {
    if (traj.steps.empty()) throw DataError("empty trajectory");
    if (traj.steps.size() != snapshots.size())
        throw AlignmentError("trajectory has " + std::to_string(traj.steps.size()) +
                             " steps, snapshots " + std::to_string(snapshots.size()));
    if (!(periods_per_year > 0.0)) throw DomainError("periods per year must be positive");

    double total = 0.0;
    double risk = 0.0;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& w = traj.steps[t].weights;
        const auto& snap = snapshots[t];
        if (snap.mu.size() != w.size() || snap.sigma.rows() != w.size() ||
            snap.sigma.cols() != w.size())
            throw AlignmentError("snapshot " + std::to_string(t) +
                                 " does not match the holdings size");
        for (Eigen::Index i = 0; i < w.size(); ++i) total += snap.mu(i) * w(i);
        for (Eigen::Index i = 0; i < w.size(); ++i)
            for (Eigen::Index j = 0; j < w.size(); ++j)
                risk += w(i) * snap.sigma(i, j) * w(j);
    }
    if (risk < 0.0) risk = 0.0;

    TrajectoryMetrics m;
    m.total_return = total;
    m.volatility = std::sqrt(risk);
    m.sharpe_defined = m.volatility > 0.0;
    m.sharpe = m.sharpe_defined ? m.total_return / m.volatility : 0.0;
    const double horizon = static_cast<double>(traj.steps.size());
    m.annualized_return = m.total_return * periods_per_year / horizon;
    m.annualized_volatility = m.volatility * std::sqrt(periods_per_year / horizon);
    return m;
}

std::vector<std::pair<Trajectory, TrajectoryMetrics>> random_baseline(
    const std::vector<MarketSnapshot>& snapshots, const Encoding& enc,
    const HoldingRule& rule, int n_trajectories, std::uint64_t seed,
    double periods_per_year, int first_stream) {
    check_rule(rule);
    if (snapshots.empty()) throw DataError("no snapshots");
    if (n_trajectories < 1) throw DomainError("need at least one trajectory");
    if (first_stream < 0) throw DomainError("first_stream must be nonnegative");
    if (!(periods_per_year > 0.0)) throw DomainError("periods per year must be positive");
    for (const auto& snap : snapshots)
        if (snap.mu.size() != enc.n_assets || snap.sigma.rows() != enc.n_assets ||
            snap.sigma.cols() != enc.n_assets)
            throw AlignmentError("snapshot does not match the " +
                                 std::to_string(enc.n_assets) + "-asset encoding");

    constexpr int max_attempts = 1000;
    const int nb = enc.n_bits();

    std::vector<std::pair<Trajectory, TrajectoryMetrics>> out;
    out.reserve(static_cast<std::size_t>(n_trajectories));
    for (int j = 0; j < n_trajectories; ++j) {
        auto rng = make_stream(seed, static_cast<std::uint64_t>(first_stream + j));
        Trajectory traj;
        traj.steps.reserve(snapshots.size());
        AgeTracker ages(enc.n_assets);
        for (std::size_t t = 0; t < snapshots.size(); ++t) {
            BitVector x(static_cast<std::size_t>(nb));
            bool normalized = false;
            for (int attempt = 0; attempt < max_attempts && !normalized; ++attempt) {
                int total = 0;
                for (int n = 0; n < enc.n_assets; ++n)
                    for (int q = 0; q < enc.bit_depth; ++q) {
                        const auto bit = static_cast<std::uint8_t>(rng() & 1u);
                        x[static_cast<std::size_t>(n * enc.bit_depth + q)] = bit;
                        total += static_cast<int>(bit) << q;
                    }
                normalized = total == enc.bundles;
            }
            const int step = static_cast<int>(t);
            Holdings chosen{ages.prev};
            if (normalized) {
                Holdings drawn = decode(x, enc);
                if (ages.allows(drawn.weights, step, rule.min_hold_days))
                    chosen = std::move(drawn);
                else
                    ++traj.fallback_count;
            } else {
                ++traj.fallback_count;
            }
            ages.advance(chosen.weights, step);
            traj.steps.push_back(std::move(chosen));
        }
        traj.last_increase = ages.last_increase;
        TrajectoryMetrics metrics = trajectory_metrics(traj, snapshots, periods_per_year);
        out.emplace_back(std::move(traj), metrics);
    }
    return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::vector<std::string>& dates,
                          const std::vector<std::string>& asset_ids, std::ostream& os) {
    if (dates.size() != traj.steps.size())
        throw AlignmentError("got " + std::to_string(dates.size()) + " dates for " +
                             std::to_string(traj.steps.size()) + " steps");
    os << "date,asset_id,weight\n";
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& w = traj.steps[t].weights;
        if (static_cast<std::size_t>(w.size()) != asset_ids.size())
            throw AlignmentError("step " + std::to_string(t) + " has " +
                                 std::to_string(w.size()) + " weights for " +
                                 std::to_string(asset_ids.size()) + " asset ids");
        for (Eigen::Index n = 0; n < w.size(); ++n)
            os << dates[t] << ',' << asset_ids[static_cast<std::size_t>(n)] << ','
               << fmt_double(w(n)) << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& is, std::vector<std::string>* dates,
                               std::vector<std::string>* asset_ids) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line)) throw ParseError("empty trajectory file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,asset_id,weight")
        throw ParseError("line 1: expected header date,asset_id,weight");

    std::vector<std::string> date_list;
    std::vector<std::string> id_list;
    std::vector<std::vector<double>> weight_rows;
    std::unordered_set<std::string> finished;

    std::string cur_date;
    std::vector<std::string> cur_ids;
    std::vector<double> cur_weights;
    auto flush_block = [&]() {
        if (cur_date.empty()) return;
        std::unordered_set<std::string> unique(cur_ids.begin(), cur_ids.end());
        if (unique.size() != cur_ids.size())
            throw DataError("date " + cur_date + " lists an asset twice");
        if (id_list.empty())
            id_list = cur_ids;
        else if (cur_ids != id_list)
            throw AlignmentError("date " + cur_date +
                                 " lists different assets than earlier dates");
        date_list.push_back(cur_date);
        weight_rows.push_back(cur_weights);
        finished.insert(cur_date);
    };

    while (std::getline(is, line)) {
        ++line_no;
        const std::string at = "line " + std::to_string(line_no);
        const auto cells = split_csv(line);
        if (cells.size() != 3)
            throw ParseError(at + ": expected 3 fields, got " + std::to_string(cells.size()));
        const double w = parse_double(cells[2], at);
        if (!std::isfinite(w) || w < 0.0)
            throw DataError(at + ": weight must be finite and non-negative");
        if (cells[0] != cur_date) {
            if (finished.count(cells[0]) > 0)
                throw DataError(at + ": date " + cells[0] + " appears in separate blocks");
            flush_block();
            cur_date = cells[0];
            cur_ids.clear();
            cur_weights.clear();
        }
        cur_ids.push_back(cells[1]);
        cur_weights.push_back(w);
    }
    flush_block();
    if (weight_rows.empty()) throw DataError("trajectory file has no rows");

    Trajectory traj;
    traj.steps.reserve(weight_rows.size());
    AgeTracker ages(static_cast<int>(id_list.size()));
    for (std::size_t t = 0; t < weight_rows.size(); ++t) {
        Holdings h;
        h.weights = Eigen::VectorXd(static_cast<Eigen::Index>(id_list.size()));
        for (std::size_t n = 0; n < weight_rows[t].size(); ++n)
            h.weights(static_cast<Eigen::Index>(n)) = weight_rows[t][n];
        ages.advance(h.weights, static_cast<int>(t));
        traj.steps.push_back(std::move(h));
    }
    traj.last_increase = ages.last_increase;
    if (dates != nullptr) *dates = date_list;
    if (asset_ids != nullptr) *asset_ids = id_list;
    return traj;
}

void write_metrics_json(const TrajectoryMetrics& metrics, int fallback_count,
                        std::ostream& os) {
    nlohmann::json j;
    j["total_return"] = metrics.total_return;
    j["volatility"] = metrics.volatility;
    if (metrics.sharpe_defined)
        j["sharpe"] = metrics.sharpe;
    else
        j["sharpe"] = nullptr;
    j["annualized_return"] = metrics.annualized_return;
    j["annualized_volatility"] = metrics.annualized_volatility;
    j["fallback_count"] = fallback_count;
    os << j.dump(2) << '\n';
}

} // namespace portopt
