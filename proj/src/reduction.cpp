#include "portopt/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Sparse>

#include "portopt/errors.hpp"

namespace portopt {

namespace {

void check_distances(const Eigen::MatrixXd& d) {
    if (d.rows() != d.cols())
        throw AlignmentError("distance matrix must be square");
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (d(i, i) != 0.0)
            throw DomainError("distance matrix must have a zero diagonal");
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            if (!std::isfinite(d(i, j)) || d(i, j) < 0.0)
                throw DomainError("distances must be finite and non-negative");
            if (d(i, j) != d(j, i))
                throw AlignmentError("distance matrix must be symmetric");
        }
    }
}

// Average-linkage merge order. Each entry names the two merged clusters by
// their smallest members, smaller first; entry s is the s-th merge.
std::vector<std::pair<int, int>> merge_sequence(const Eigen::MatrixXd& d) {
    const int n = static_cast<int>(d.rows());
    std::vector<std::vector<int>> members(n);
    std::vector<std::vector<double>> link(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        members[i] = {i};
        for (int j = 0; j < n; ++j) link[i][j] = d(i, j);
    }

    std::vector<std::pair<int, int>> merges;
    merges.reserve(n > 0 ? n - 1 : 0);
    while (members.size() > 1) {
        const int m = static_cast<int>(members.size());
        int bi = 0, bj = 1;
        double best = link[0][1];
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                if (link[i][j] < best) {
                    best = link[i][j];
                    bi = i;
                    bj = j;
                }
        // Cluster positions stay ordered by smallest member, so a strict
        // minimum scan already resolves ties toward the lowest indices.
        merges.emplace_back(members[bi][0], members[bj][0]);

        const double ni = static_cast<double>(members[bi].size());
        const double nj = static_cast<double>(members[bj].size());
        for (int k = 0; k < m; ++k) {
            if (k == bi || k == bj) continue;
            const double merged = (ni * link[bi][k] + nj * link[bj][k]) / (ni + nj);
            link[bi][k] = merged;
            link[k][bi] = merged;
        }
        std::vector<int> joined;
        std::merge(members[bi].begin(), members[bi].end(), members[bj].begin(),
                   members[bj].end(), std::back_inserter(joined));
        members[bi] = std::move(joined);
        members.erase(members.begin() + bj);
        for (auto& row : link) row.erase(row.begin() + bj);
        link.erase(link.begin() + bj);
    }
    return merges;
}

// Replays the first n - k merges, leaving k clusters ordered by smallest
// member.
std::vector<std::vector<int>> partition_at(const std::vector<std::pair<int, int>>& merges,
                                           int n, int k) {
    std::vector<std::vector<int>> clusters(n);
    for (int i = 0; i < n; ++i) clusters[i] = {i};
    for (int s = 0; s < n - k; ++s) {
        const auto [a, b] = merges[s];
        auto head_is = [&clusters](int head) {
            return std::find_if(clusters.begin(), clusters.end(),
                                [head](const std::vector<int>& c) { return c[0] == head; });
        };
        auto ca = head_is(a);
        auto cb = head_is(b);
        std::vector<int> joined;
        std::merge(ca->begin(), ca->end(), cb->begin(), cb->end(),
                   std::back_inserter(joined));
        *ca = std::move(joined);
        clusters.erase(cb);
    }
    return clusters;
}

double medoid_variance(const Eigen::MatrixXd& d, const std::vector<int>& cluster) {
    double best = std::numeric_limits<double>::infinity();
    for (const int candidate : cluster) {
        double sum = 0.0;
        for (const int other : cluster) sum += d(candidate, other) * d(candidate, other);
        const double mean = sum / static_cast<double>(cluster.size());
        if (mean < best) best = mean;
    }
    return best;
}

ClusterAssignment assignment_for(const Eigen::MatrixXd& d,
                                 const std::vector<std::vector<int>>& clusters) {
    ClusterAssignment out;
    out.n_clusters = static_cast<int>(clusters.size());
    out.labels.assign(d.rows(), 0);
    out.within_variance.reserve(clusters.size());
    double total = 0.0;
    for (int c = 0; c < out.n_clusters; ++c) {
        for (const int member : clusters[c]) out.labels[member] = c;
        const double v = medoid_variance(d, clusters[c]);
        out.within_variance.push_back(v);
        total += v;
    }
    out.mean_within_variance = total / static_cast<double>(out.n_clusters);
    return out;
}

} // namespace

Eigen::VectorXd hp_filter(const Eigen::VectorXd& y, double lambda) {
    const int n = static_cast<int>(y.size());
    if (n < 3)
        throw DomainError("trend filter needs at least 3 points, got " + std::to_string(n));
    if (!(lambda >= 0.0))
        throw DomainError("smoothing weight must be non-negative");
    for (int t = 0; t < n; ++t)
        if (!std::isfinite(y(t)))
            throw DataError("trend filter input has a non-finite value at position " +
                            std::to_string(t));
    if (lambda == 0.0) return y;

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(n) * 9);
    for (int i = 0; i < n; ++i) entries.emplace_back(i, i, 1.0);
    const double stencil[3] = {1.0, -2.0, 1.0};
    for (int r = 0; r + 2 < n; ++r)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                entries.emplace_back(r + i, r + j, lambda * stencil[i] * stencil[j]);

    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw DataError("trend filter system could not be factorized");
    Eigen::VectorXd tau = solver.solve(y);
    if (solver.info() != Eigen::Success)
        throw DataError("trend filter solve failed");
    return tau;
}

Eigen::MatrixXd trend_distance_matrix(const std::vector<TrendSeries>& trends) {
    const int n = static_cast<int>(trends.size());
    if (n == 0) throw DataError("no trends to compare");
    const Eigen::Index len = trends[0].trend.size();
    if (len < 1) throw DataError("trends must be non-empty");
    for (const auto& t : trends)
        if (t.trend.size() != len)
            throw AlignmentError("trend " + t.asset_id + " has length " +
                                 std::to_string(t.trend.size()) + ", expected " +
                                 std::to_string(len));

    std::vector<Eigen::VectorXd> z;
    z.reserve(trends.size());
    for (const auto& t : trends) {
        double sum = 0.0;
        bool constant = true;
        for (Eigen::Index i = 0; i < len; ++i) {
            if (!std::isfinite(t.trend(i)))
                throw DataError("trend " + t.asset_id + " has a non-finite value");
            sum += t.trend(i);
            if (t.trend(i) != t.trend(0)) constant = false;
        }
        if (constant) {
            z.push_back(Eigen::VectorXd::Zero(len));
            continue;
        }
        const double mean = sum / static_cast<double>(len);
        double sq = 0.0;
        for (Eigen::Index i = 0; i < len; ++i)
            sq += (t.trend(i) - mean) * (t.trend(i) - mean);
        const double sd = std::sqrt(sq / static_cast<double>(len));
        Eigen::VectorXd scored(len);
        if (sd == 0.0) {
            scored.setZero();
        } else {
            for (Eigen::Index i = 0; i < len; ++i) scored(i) = (t.trend(i) - mean) / sd;
        }
        z.push_back(std::move(scored));
    }

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double sq = 0.0;
            for (Eigen::Index t = 0; t < len; ++t)
                sq += (z[i](t) - z[j](t)) * (z[i](t) - z[j](t));
            const double dist = std::sqrt(sq);
            d(i, j) = dist;
            d(j, i) = dist;
        }
    return d;
}

ClusterAssignment cluster_assets(const Eigen::MatrixXd& distances, int n_clusters,
                                 std::uint64_t) {
    check_distances(distances);
    const int n = static_cast<int>(distances.rows());
    if (n_clusters < 1 || n_clusters > n)
        throw DomainError("cluster count must lie in [1, " + std::to_string(n) + "], got " +
                          std::to_string(n_clusters));
    const auto merges = merge_sequence(distances);
    return assignment_for(distances, partition_at(merges, n, n_clusters));
}

int select_n_clusters(const Eigen::MatrixXd& distances, int max_clusters,
                      double plateau_tol) {
    check_distances(distances);
    const int n = static_cast<int>(distances.rows());
    if (max_clusters < 1 || max_clusters > n)
        throw DomainError("cluster cap must lie in [1, " + std::to_string(n) + "], got " +
                          std::to_string(max_clusters));
    if (!(plateau_tol > 0.0)) throw DomainError("plateau tolerance must be positive");

    const auto merges = merge_sequence(distances);
    auto variance_at = [&](int k) {
        return assignment_for(distances, partition_at(merges, n, k)).mean_within_variance;
    };

    const double v1 = variance_at(1);
    if (v1 == 0.0) return 1;
    double vk = v1;
    for (int k = 1; k < max_clusters; ++k) {
        const double vnext = variance_at(k + 1);
        if ((vk - vnext) / v1 < plateau_tol) return k;
        if (vnext == 0.0) return k + 1;
        vk = vnext;
    }
    return max_clusters;
}

ReducedUniverse reduce_universe(const std::vector<AssetStats>& stats,
                                const ClusterAssignment& assignment, double risk_cap) {
    if (stats.size() != assignment.labels.size())
        throw AlignmentError("got " + std::to_string(stats.size()) + " asset stats for " +
                             std::to_string(assignment.labels.size()) + " labels");
    if (assignment.n_clusters < 1) throw DomainError("assignment has no clusters");
    for (const int label : assignment.labels)
        if (label < 0 || label >= assignment.n_clusters)
            throw DomainError("cluster label " + std::to_string(label) + " out of range");
    if (!(risk_cap >= 0.0)) throw DomainError("risk cap must be non-negative");

    // preferred(a, b): should a displace b as the cluster champion?
    auto preferred = [](const AssetStats& a, const AssetStats& b) {
        if (a.sharpe_defined != b.sharpe_defined) return a.sharpe_defined;
        if (a.sharpe_defined && a.sharpe != b.sharpe) return a.sharpe > b.sharpe;
        return a.asset_id < b.asset_id;
    };

    std::vector<int> champion(assignment.n_clusters, -1);
    for (int i = 0; i < static_cast<int>(stats.size()); ++i) {
        if (stats[i].volatility > risk_cap) continue;
        int& best = champion[assignment.labels[i]];
        if (best < 0 || preferred(stats[i], stats[best])) best = i;
    }

    ReducedUniverse out;
    out.risk_cap = risk_cap;
    for (int c = 0; c < assignment.n_clusters; ++c) {
        if (champion[c] < 0)
            out.empty_clusters.push_back(c);
        else
            out.selected.push_back(stats[champion[c]].asset_id);
    }
    if (out.selected.empty())
        throw EmptyUniverseError("risk cap " + std::to_string(risk_cap) +
                                 " removed every asset");
    return out;
}

} // namespace portopt
