#include "portopt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

#include "portopt/errors.hpp"
#include "portopt/rng.hpp"
#include "portopt/text.hpp"

namespace portopt {

namespace {

// 53-bit uniform in [0, 1).
inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Schedule {
    double beta_initial;
    double ratio; // per-sweep multiplier
};

Schedule resolve_schedule(const SamplerConfig& cfg, const QuboProblem& p) {
    double qmax = p.q.cwiseAbs().maxCoeff();
    if (qmax == 0.0) qmax = 1.0;
    const double bi = cfg.beta_initial.value_or(0.1 / qmax);
    const double bf = cfg.beta_final.value_or(50.0 / qmax);
    if (!(bi > 0.0) || !(bf > bi))
        throw ConfigError("sampler: schedule requires 0 < beta_initial < beta_final (got " +
                          fmt_double(bi) + ", " + fmt_double(bf) + ")");
    Schedule s{bi, 1.0};
    if (cfg.sweeps > 1) s.ratio = std::pow(bf / bi, 1.0 / (cfg.sweeps - 1));
    else s.beta_initial = bf; // a single sweep runs cold
    return s;
}

} // namespace

SimulatedAnnealer::SimulatedAnnealer(SamplerConfig cfg) : cfg_(std::move(cfg)) {}

SamplePool SimulatedAnnealer::sample(const QuboProblem& problem, std::uint64_t salt) const {
    const int nb = problem.n_bits();
    if (nb < 1) throw DomainError("sampler: problem has no bits");
    if (cfg_.n_reads < 1) throw ConfigError("sampler: n_reads must be >= 1");
    if (cfg_.sweeps < 1) throw ConfigError("sampler: sweeps must be >= 1");
    const Schedule sched = resolve_schedule(cfg_, problem);

    const std::uint64_t base = mix64(cfg_.seed) ^ mix64(salt);
    std::map<BitVector, std::pair<double, int>> merged;

    BitVector x(nb);
    Eigen::VectorXd field(nb);
    for (int read = 0; read < cfg_.n_reads; ++read) {
        std::mt19937_64 rng = make_stream(base, static_cast<std::uint64_t>(read));

        for (int i = 0; i < nb; ++i) x[i] = static_cast<std::uint8_t>(rng() & 1u);

        // field(i) = q_ii + 2 sum_{j != i} q_ij x_j, so a flip of bit i costs
        // (1 - 2 x_i) field(i).
        for (int i = 0; i < nb; ++i) {
            double acc = problem.q(i, i);
            for (int j = 0; j < nb; ++j)
                if (j != i && x[j]) acc += 2.0 * problem.q(i, j);
            field(i) = acc;
        }

        double beta = sched.beta_initial;
        for (int sweep = 0; sweep < cfg_.sweeps; ++sweep) {
            for (int i = 0; i < nb; ++i) {
                const double delta = (x[i] ? -1.0 : 1.0) * field(i);
                bool accept;
                if (delta <= 0.0) {
                    accept = true;
                } else if (beta * delta > 45.0) {
                    accept = false; // below any representable uniform draw
                } else {
                    accept = next_uniform(rng) < std::exp(-beta * delta);
                }
                if (accept) {
                    const double step = x[i] ? -2.0 : 2.0;
                    x[i] ^= 1u;
                    const double* col = problem.q.col(i).data();
                    for (int j = 0; j < nb; ++j)
                        if (j != i) field(j) += step * col[j];
                }
            }
            beta *= sched.ratio;
        }

        auto [it, inserted] = merged.try_emplace(x, 0.0, 0);
        if (inserted) it->second.first = problem.energy(x);
        it->second.second += 1;
    }

    SamplePool pool;
    pool.entries.reserve(merged.size());
    for (const auto& [state, rec] : merged)
        pool.entries.push_back({state, rec.first, rec.second});
    std::sort(pool.entries.begin(), pool.entries.end(),
              [](const PoolEntry& a, const PoolEntry& b) {
                  if (a.energy != b.energy) return a.energy < b.energy;
                  return bit_vector_less(a.state, b.state);
              });
    return pool;
}

std::vector<RankedCandidate> pool_top_by(const SamplePool& pool, const Encoding& enc,
                                         const std::function<double(const Holdings&)>& score,
                                         std::size_t limit) {
    if (limit < 1) throw DomainError("pool_top_by: limit must be >= 1");
    if (pool.entries.empty()) throw EmptyPoolError("pool_top_by: empty sample pool");

    std::vector<RankedCandidate> out;
    out.reserve(pool.entries.size());
    for (const PoolEntry& e : pool.entries) {
        RankedCandidate c;
        c.state = e.state;
        c.holdings = decode(e.state, enc);
        c.score = score(c.holdings);
        c.energy = e.energy;
        if (std::isnan(c.score)) throw DomainError("pool_top_by: score produced NaN");
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.energy != b.energy) return a.energy < b.energy;
        return bit_vector_less(a.state, b.state);
    });
    if (out.size() > limit) out.resize(limit);
    return out;
}

void write_pool(const SamplePool& pool, std::ostream& os) {
    std::string bits;
    for (const PoolEntry& e : pool.entries) {
        bits.assign(e.state.size(), '0');
        for (std::size_t i = 0; i < e.state.size(); ++i)
            if (e.state[i]) bits[i] = '1';
        os << fmt_double(e.energy) << " " << e.multiplicity << " " << bits << "\n";
    }
}

} // namespace portopt
