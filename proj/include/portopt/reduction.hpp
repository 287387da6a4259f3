#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "portopt/market_data.hpp"

namespace portopt {

struct TrendSeries {
    std::string asset_id;
    Eigen::VectorXd trend; // same length and units as the source series
};

struct ClusterAssignment {
    int n_clusters = 0;
    std::vector<int> labels;              // per asset, in [0, n_clusters)
    std::vector<double> within_variance;  // per cluster, medoid-based
    double mean_within_variance = 0.0;
};

struct ReducedUniverse {
    std::vector<std::string> selected; // best survivor per cluster, cluster order
    std::vector<int> empty_clusters;   // clusters the risk filter emptied
    double risk_cap = 0.0;
};

/// Trend component of y: the minimizer of
///   sum_t (y_t - tau_t)^2 + lambda sum_t (tau_{t+1} - 2 tau_t + tau_{t-1})^2,
/// obtained exactly from the pentadiagonal system (I + lambda D'D) tau = y
/// with D the second-difference operator. Requires length >= 3, lambda >= 0;
/// lambda = 0 returns the input unchanged.
Eigen::VectorXd hp_filter(const Eigen::VectorXd& y, double lambda);

/// Euclidean distances between z-scored trends. Standardization uses the
/// population stdev; an exactly constant trend maps to the zero vector.
Eigen::MatrixXd trend_distance_matrix(const std::vector<TrendSeries>& trends);

/// Bottom-up average-linkage clustering over a precomputed distance matrix,
/// cut at n_clusters. Deterministic: tied merges pick the pair with the
/// lowest smallest-member indices, and cluster ids are ordered by smallest
/// member. Per-cluster variance is the mean squared distance of members to
/// the cluster medoid (the member minimizing that mean, lowest index on
/// ties). The seed is reserved for randomized tie-breaking and is unused.
ClusterAssignment cluster_assets(const Eigen::MatrixXd& distances, int n_clusters,
                                 std::uint64_t seed = 0);

/// Elbow rule: the smallest k whose mean within-cluster variance decrease
/// from k to k+1, measured relative to the single-cluster variance, falls
/// below plateau_tol; max_clusters when the curve never flattens. A variance
/// that is already zero counts as flat.
int select_n_clusters(const Eigen::MatrixXd& distances, int max_clusters, double plateau_tol);

/// Drops assets with volatility above risk_cap, then keeps the best-Sharpe
/// survivor of each cluster. Undefined Sharpe ranks below any defined value;
/// exact ties pick the lexicographically smaller asset id. stats[i] must
/// describe the asset behind labels[i]. Clusters left without survivors are
/// reported in empty_clusters; an entirely emptied universe throws
/// EmptyUniverseError.
ReducedUniverse reduce_universe(const std::vector<AssetStats>& stats,
                                const ClusterAssignment& assignment, double risk_cap);

} // namespace portopt
