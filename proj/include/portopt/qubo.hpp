#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace portopt {

/// One 0/1 variable per entry, asset-major layout: bits [n*bit_depth, (n+1)*bit_depth)
/// belong to asset n, least significant first.
using BitVector = std::vector<std::uint8_t>;

/// Ordering used for every tie-break on bit vectors: the string is read as an
/// integer with the earlier index more significant, so comparison is plain
/// lexicographic order.
bool bit_vector_less(const BitVector& a, const BitVector& b);

/// Fixed-point weight encoding. Asset n holds u_n of `bundles` equal capital
/// slices, where u_n is the integer spelled by its bit group, so
/// w_n = u_n / bundles with u_n in [0, 2^bit_depth - 1].
struct Encoding {
    int n_assets = 0;
    int bit_depth = 0;
    int bundles = 0;

    int n_bits() const { return n_assets * bit_depth; }
    int max_units() const { return (1 << bit_depth) - 1; }
};

/// Validates and builds an encoding. Requires n_assets >= 1, bit_depth >= 1,
/// bundles >= 1, and per-asset capacity (2^bit_depth - 1)/bundles <= 1 so that
/// no single asset can exceed the whole budget.
Encoding make_encoding(int n_assets, int bundles, int bit_depth);

/// Diversification variant: picks the largest bit_depth whose per-asset
/// capacity stays within cap * bundles slices, i.e. 2^bit_depth - 1 <= cap * bundles.
/// Throws DomainError when cap * bundles < 1 leaves no admissible depth.
Encoding make_encoding_capped(int n_assets, int bundles, double cap);

/// Portfolio weights; every entry is a multiple of 1/bundles in [0, 1].
struct Holdings {
    Eigen::VectorXd weights;
};

/// Inputs of the one-step cost
///   cost(w) = -mu.w + (gamma/2) w'.sigma.w + rho (sum(w) - 1)^2.
/// gamma >= 0 trades return against risk, rho >= 0 scales the budget penalty
/// (rho = 0 disables the budget term; production configs require rho > 0).
struct StepCostParams {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    double gamma = 0.0;
    double rho = 0.0;
};

/// Quadratic binary model: energy(x) = x' q x + offset with q exactly symmetric.
/// Linear coefficients live on the diagonal since x_i^2 = x_i.
struct QuboProblem {
    Eigen::MatrixXd q;
    double offset = 0.0;

    int n_bits() const { return static_cast<int>(q.rows()); }
    double energy(const BitVector& x) const;
};

/// Integer bundle counts per asset, u_n = sum_q 2^q x_{n,q}. Exact arithmetic
/// twin of decode(); use it wherever the budget must be checked exactly.
std::vector<int> decode_units(const BitVector& x, const Encoding& enc);

/// Weights w_n = u_n / bundles.
Holdings decode(const BitVector& x, const Encoding& enc);

/// Direct evaluation of the one-step cost at given holdings. Reference path,
/// kept independent of the QUBO expansion so the two can be cross-checked.
double step_cost(const Holdings& h, const StepCostParams& p);

/// Expands the one-step cost over the encoding into a QUBO. For every bit
/// vector x, energy(x) equals step_cost(decode(x), p); the constant rho lands
/// in the offset.
QuboProblem build_step_qubo(const StepCostParams& p, const Encoding& enc);

/// Penalty weight that provably dominates the data terms: twice the bound
/// K (max|mu| + gamma K max|sigma|) under which the exact minimizer keeps
/// sum(w) = 1 whenever the encoding admits it. Falls back to 1.0 when the
/// data terms vanish.
double auto_rho(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double gamma,
                int bundles);

/// Exhaustive exact minimizer, guarded to at most 24 bits. Energy ties are
/// resolved toward the lowest bit-vector integer value (bit_vector_less).
BitVector brute_force_min(const QuboProblem& problem);

/// Text export, one coefficient per line:
///   # bits=<n> offset=<v>
///   <i> <j> <value>        with i <= j
/// Diagonal entries are q_ii, off-diagonal ones 2 q_ij (the i <= j convention
/// folds the symmetric pair into one line). Zero coefficients are skipped.
void write_qubo(const QuboProblem& problem, std::ostream& os);

} // namespace portopt
