#include "portopt/qubo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "portopt/errors.hpp"
#include "portopt/text.hpp"

namespace portopt {

bool bit_vector_less(const BitVector& a, const BitVector& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Encoding make_encoding(int n_assets, int bundles, int bit_depth) {
    if (n_assets < 1) throw DomainError("encoding: n_assets must be >= 1");
    if (bundles < 1) throw DomainError("encoding: bundles must be >= 1");
    if (bit_depth < 1 || bit_depth > 20) throw DomainError("encoding: bit_depth must be in [1, 20]");
    if ((1 << bit_depth) - 1 > bundles)
        throw DomainError("encoding: per-asset capacity (2^bit_depth - 1)/bundles exceeds the budget");
    return Encoding{n_assets, bit_depth, bundles};
}

Encoding make_encoding_capped(int n_assets, int bundles, double cap) {
    if (!(cap > 0.0)) throw DomainError("encoding: diversification cap must be positive");
    if (bundles < 1) throw DomainError("encoding: bundles must be >= 1");
    const double slices = cap * bundles;
    int depth = 0;
    while (depth < 20 && ((1 << (depth + 1)) - 1) <= slices) ++depth;
    if (depth == 0)
        throw DomainError("encoding: cap " + fmt_double(cap) + " with " + std::to_string(bundles) +
                          " bundles admits no bit depth (2^d - 1 <= cap * bundles unsatisfiable)");
    return make_encoding(n_assets, bundles, depth);
}

std::vector<int> decode_units(const BitVector& x, const Encoding& enc) {
    if (static_cast<int>(x.size()) != enc.n_bits())
        throw AlignmentError("decode: bit vector has " + std::to_string(x.size()) +
                             " bits, encoding expects " + std::to_string(enc.n_bits()));
    std::vector<int> units(enc.n_assets, 0);
    for (int n = 0; n < enc.n_assets; ++n)
        for (int q = 0; q < enc.bit_depth; ++q)
            if (x[n * enc.bit_depth + q]) units[n] += 1 << q;
    return units;
}

Holdings decode(const BitVector& x, const Encoding& enc) {
    const auto units = decode_units(x, enc);
    Holdings h;
    h.weights.resize(enc.n_assets);
    for (int n = 0; n < enc.n_assets; ++n)
        h.weights(n) = static_cast<double>(units[n]) / enc.bundles;
    return h;
}

namespace {

void check_params(const StepCostParams& p, int n_assets) {
    if (p.mu.size() != n_assets || p.sigma.rows() != n_assets || p.sigma.cols() != n_assets)
        throw AlignmentError("step cost: mu is " + std::to_string(p.mu.size()) + ", sigma is " +
                             std::to_string(p.sigma.rows()) + "x" + std::to_string(p.sigma.cols()) +
                             ", expected " + std::to_string(n_assets) + " assets");
    if (p.gamma < 0.0) throw DomainError("step cost: gamma must be >= 0");
    if (p.rho < 0.0) throw DomainError("step cost: rho must be >= 0");
}

} // namespace

double step_cost(const Holdings& h, const StepCostParams& p) {
    check_params(p, static_cast<int>(h.weights.size()));
    const double ret = p.mu.dot(h.weights);
    const double risk = h.weights.dot(p.sigma * h.weights);
    const double slack = h.weights.sum() - 1.0;
    return -ret + 0.5 * p.gamma * risk + p.rho * slack * slack;
}

QuboProblem build_step_qubo(const StepCostParams& p, const Encoding& enc) {
    check_params(p, enc.n_assets);
    const int nb = enc.n_bits();

    // Weight of bit i inside its asset's holding: w_n = sum_q (2^q / bundles) x_{n,q}.
    Eigen::VectorXd a(nb);
    for (int n = 0; n < enc.n_assets; ++n)
        for (int q = 0; q < enc.bit_depth; ++q)
            a(n * enc.bit_depth + q) = static_cast<double>(1 << q) / enc.bundles;

    QuboProblem out;
    out.q.setZero(nb, nb);
    out.offset = p.rho;

    // Quadratic part (gamma/2) w'Sw + rho (sum w)^2 lands symmetrically; the
    // remaining -mu.w - 2 rho sum(w) is linear and folds onto the diagonal.
    for (int i = 0; i < nb; ++i) {
        const int ni = i / enc.bit_depth;
        for (int j = i; j < nb; ++j) {
            const int nj = j / enc.bit_depth;
            const double sym = 0.5 * (p.sigma(ni, nj) + p.sigma(nj, ni));
            const double v = a(i) * a(j) * (0.5 * p.gamma * sym + p.rho);
            out.q(i, j) = v;
            out.q(j, i) = v;
        }
        out.q(i, i) += -p.mu(ni) * a(i) - 2.0 * p.rho * a(i);
    }
    return out;
}

double auto_rho(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double gamma,
                int bundles) {
    if (bundles < 1) throw DomainError("auto_rho: bundles must be >= 1");
    if (gamma < 0.0) throw DomainError("auto_rho: gamma must be >= 0");
    const double mu_max = mu.size() > 0 ? mu.cwiseAbs().maxCoeff() : 0.0;
    const double sig_max = sigma.size() > 0 ? sigma.cwiseAbs().maxCoeff() : 0.0;
    const double rho = 2.0 * bundles * (mu_max + gamma * bundles * sig_max);
    return rho > 0.0 ? rho : 1.0;
}

double QuboProblem::energy(const BitVector& x) const {
    if (static_cast<int>(x.size()) != n_bits())
        throw AlignmentError("energy: bit vector has " + std::to_string(x.size()) +
                             " bits, problem has " + std::to_string(n_bits()));
    double e = offset;
    const int nb = n_bits();
    for (int i = 0; i < nb; ++i) {
        if (!x[i]) continue;
        e += q(i, i);
        for (int j = i + 1; j < nb; ++j)
            if (x[j]) e += 2.0 * q(i, j);
    }
    return e;
}

BitVector brute_force_min(const QuboProblem& problem) {
    const int nb = problem.n_bits();
    if (nb < 1 || nb > 24)
        throw DomainError("brute force: " + std::to_string(nb) + " bits outside [1, 24]");

    // States are visited in increasing integer value (earlier bit index more
    // significant), so keeping only strict improvements realizes the tie rule.
    BitVector x(nb, 0), best(nb, 0);
    double best_e = std::numeric_limits<double>::infinity();
    const std::uint32_t count = 1u << nb;
    for (std::uint32_t m = 0; m < count; ++m) {
        for (int k = 0; k < nb; ++k)
            x[k] = static_cast<std::uint8_t>((m >> (nb - 1 - k)) & 1u);
        const double e = problem.energy(x);
        if (e < best_e) {
            best_e = e;
            best = x;
        }
    }
    return best;
}

void write_qubo(const QuboProblem& problem, std::ostream& os) {
    const int nb = problem.n_bits();
    os << "# bits=" << nb << " offset=" << fmt_double(problem.offset) << "\n";
    for (int i = 0; i < nb; ++i)
        for (int j = i; j < nb; ++j) {
            const double c = (i == j) ? problem.q(i, i) : 2.0 * problem.q(i, j);
            if (c != 0.0) os << i << " " << j << " " << fmt_double(c) << "\n";
        }
}

} // namespace portopt
