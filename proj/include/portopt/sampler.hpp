#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "portopt/qubo.hpp"

namespace portopt {

/// Annealing schedule and restart budget. Unset betas are chosen per problem
/// as 0.1/max|q| and 50/max|q|, which makes acceptance decisions invariant
/// under uniform rescaling of the coefficient matrix.
struct SamplerConfig {
    int n_reads = 512;
    int sweeps = 1000;
    std::optional<double> beta_initial;
    std::optional<double> beta_final;
    std::uint64_t seed = 0;
};

struct PoolEntry {
    BitVector state;
    double energy = 0.0;
    int multiplicity = 0;
};

/// Deduplicated states in ascending energy; equal energies fall back to
/// bit_vector_less. Multiplicities count how many reads ended in each state.
struct SamplePool {
    std::vector<PoolEntry> entries;
};

/// Anything that turns a QUBO into a pool of low-energy states. The annealer
/// below is the bundled implementation; a hardware-backed sampler slots in by
/// implementing the same interface.
class Sampler {
public:
    virtual ~Sampler() = default;

    /// salt shifts the deterministic stream without touching the seed; the
    /// same (problem, salt) pair always yields the same pool.
    virtual SamplePool sample(const QuboProblem& problem, std::uint64_t salt = 0) const = 0;
};

/// Classical single-bit-flip Metropolis annealer on a geometric inverse
/// temperature ladder. One sweep proposes one flip per bit in index order;
/// each read anneals independently from a random state and records its final
/// state. Read r draws from a substream of (seed, salt, r), so pools are
/// reproducible and extending n_reads only appends reads.
class SimulatedAnnealer final : public Sampler {
public:
    explicit SimulatedAnnealer(SamplerConfig cfg);

    SamplePool sample(const QuboProblem& problem, std::uint64_t salt = 0) const override;

    const SamplerConfig& config() const { return cfg_; }

private:
    SamplerConfig cfg_;
};

struct RankedCandidate {
    BitVector state;
    Holdings holdings;
    double score = 0.0;
    double energy = 0.0;
};

/// Decodes every pool entry, scores it, and returns up to limit candidates in
/// descending score; ties fall back to ascending energy, then bit-vector
/// order. The score must be finite. Throws EmptyPoolError on an empty pool.
std::vector<RankedCandidate> pool_top_by(const SamplePool& pool, const Encoding& enc,
                                         const std::function<double(const Holdings&)>& score,
                                         std::size_t limit);

/// One line per entry: "<energy> <multiplicity> <bitstring>".
void write_pool(const SamplePool& pool, std::ostream& os);

} // namespace portopt
