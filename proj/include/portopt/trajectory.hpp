#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "portopt/market_data.hpp"
#include "portopt/qubo.hpp"
#include "portopt/sampler.hpp"

namespace portopt {

/// Minimal holding period in trading steps. A sale of an asset is legal only
/// when its most recent purchase is at least min_hold_days steps old.
struct HoldingRule {
    int min_hold_days = 1;
};

struct Trajectory {
    std::vector<Holdings> steps;    // steps[t] are the holdings chosen at step t
    std::vector<int> last_increase; // per asset, step of the latest purchase; -1 = never
    int fallback_count = 0;         // steps resolved by keeping the previous holdings
};

struct TrajectoryMetrics {
    double total_return = 0.0; // sum over steps of mu_t . w_t
    double volatility = 0.0;   // sqrt of the summed quadratic risk
    double sharpe = 0.0;       // meaningless unless sharpe_defined
    bool sharpe_defined = false;
    double annualized_return = 0.0;
    double annualized_volatility = 0.0;
};

struct BuildOptions {
    std::size_t pool_limit = 32;       // ranked candidates examined per step
    bool resample_on_exhaustion = false; // one extra sampling round before falling back
};

/// Decodes and orders pool states for one step. Candidates with positive
/// return and zero volatility come first (ordered by return), then finite
/// instantaneous Sharpe mu.w / sqrt(w'.sigma.w) descending, then zero-
/// volatility candidates with non-positive return (again by return). Ties
/// fall back to ascending energy, then bit-vector order. score holds the
/// Sharpe ratio, or the raw return for zero-volatility candidates.
std::vector<RankedCandidate> rank_step_candidates(const SamplePool& pool, const Encoding& enc,
                                                  const Eigen::VectorXd& mu,
                                                  const Eigen::MatrixXd& sigma,
                                                  std::size_t pool_limit);

/// True iff the candidate makes no sale the holding rule forbids at step t,
/// where prefix covers steps [0, t). Any weight decrease is a sale; the sale
/// is legal when the asset's most recent increase is at least min_hold_days
/// steps old. Always true at t = 0.
bool check_holding(const Trajectory& prefix, const Holdings& candidate, int t,
                   const HoldingRule& rule);

/// Runs the per-step optimization loop: build the step QUBO from params[t],
/// sample it (step t uses salt 2t, the optional second round 2t + 1), rank
/// the pool, and accept the first candidate passing the holding rule. When
/// every candidate fails, the step keeps the previous holdings, which are
/// feasible by construction; fallback_count records how often.
Trajectory build_trajectory(const std::vector<StepCostParams>& params, const Encoding& enc,
                            const Sampler& sampler, const HoldingRule& rule,
                            const BuildOptions& opts = {});

struct HoldingViolation {
    int step = 0;
    int asset = 0;
};

/// Recomputes every purchase and sale from the raw weights and returns the
/// first sale made before its asset's holding period elapsed. Keeps no
/// incremental state, so it checks the builder rather than mirroring it.
std::optional<HoldingViolation> find_holding_violation(const Trajectory& traj,
                                                       const HoldingRule& rule);

bool verify_trajectory(const Trajectory& traj, const HoldingRule& rule);

/// total_return = sum_t mu_t . w_t, volatility = sqrt(sum_t w_t' sigma_t w_t),
/// sharpe = ratio (undefined at zero volatility). Annualized figures scale by
/// periods_per_year / N_t, with the square root of that factor on volatility.
TrajectoryMetrics trajectory_metrics(const Trajectory& traj,
                                     const std::vector<MarketSnapshot>& snapshots,
                                     double periods_per_year);

/// Feasible random trajectories: at each step one candidate is drawn
/// uniformly from the normalized portfolios (bit vectors accepted when the
/// units sum to the bundle count), and the previous holdings are kept when
/// the draw is infeasible or rejection sampling exhausts its attempts.
/// Trajectory j draws from a substream of (seed, first_stream + j), so
/// results do not depend on evaluation order and a run may be split into
/// consecutive chunks without changing any trajectory.
std::vector<std::pair<Trajectory, TrajectoryMetrics>> random_baseline(
    const std::vector<MarketSnapshot>& snapshots, const Encoding& enc,
    const HoldingRule& rule, int n_trajectories, std::uint64_t seed,
    double periods_per_year, int first_stream = 0);

/// Long-format CSV: header "date,asset_id,weight", one row per (step, asset)
/// in step-major order.
void write_trajectory_csv(const Trajectory& traj, const std::vector<std::string>& dates,
                          const std::vector<std::string>& asset_ids, std::ostream& os);

/// Inverse of write_trajectory_csv. Every date block must list the same
/// assets in the same order. Optionally returns the date and asset labels.
Trajectory read_trajectory_csv(std::istream& is, std::vector<std::string>* dates = nullptr,
                               std::vector<std::string>* asset_ids = nullptr);

/// JSON object with total_return, volatility, sharpe (null when undefined),
/// annualized_return, annualized_volatility, and fallback_count.
void write_metrics_json(const TrajectoryMetrics& metrics, int fallback_count,
                        std::ostream& os);

} // namespace portopt
