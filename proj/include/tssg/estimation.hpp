#pragma once

// From a TSSG estimate to per-target strengths and positions: threshold the
// support, cluster it (weighted k-means, optionally with silhouette-based
// selection of the cluster count) and take strength-weighted means.

#include "tssg/errors.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/linalg.hpp"
#include "tssg/seeds.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace tssg {

struct WeightedPointSet {
    std::vector<Vec2> points;
    std::vector<double> weights;
    std::vector<int> indices;  // originating grid indices

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] bool empty() const { return points.empty(); }
};

struct Clustering {
    int k = 0;
    /// Cluster label of each point of the clustered WeightedPointSet.
    std::vector<int> labels;
    /// Grid indices per cluster.
    std::vector<std::vector<int>> masks;
    std::vector<Vec2> centroids;
    /// Weighted within-cluster sum of squares.
    double wcss = 0.0;
};

inline WeightedPointSet support_points(const VectorXd& x_hat, const Grid& grid,
                                       double eps_frac = 1e-3) {
    if (!(eps_frac > 0.0) || !(eps_frac < 1.0)) {
        throw InvalidArgument("eps_frac must lie in (0, 1)");
    }
    if (static_cast<std::size_t>(x_hat.size()) != grid.size()) {
        throw InvalidArgument("support_points: state does not match the grid");
    }
    WeightedPointSet out;
    if (x_hat.size() == 0) {
        return out;
    }
    const double peak = x_hat.maxCoeff();
    if (!(peak > 0.0)) {
        return out;
    }
    const double threshold = eps_frac * peak;
    for (Eigen::Index j = 0; j < x_hat.size(); ++j) {
        if (x_hat(j) > threshold) {
            out.points.push_back(grid.points[static_cast<std::size_t>(j)]);
            out.weights.push_back(x_hat(j));
            out.indices.push_back(static_cast<int>(j));
        }
    }
    return out;
}

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Index drawn with probability proportional to mass; falls back to the
// largest mass if rounding leaves nothing.
inline std::size_t sample_proportional(const std::vector<double>& mass, std::mt19937_64& rng) {
    double total = 0.0;
    for (double m : mass) {
        total += m;
    }
    if (!(total > 0.0)) {
        return 0;
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        acc += mass[i];
        if (target < acc && mass[i] > 0.0) {
            return i;
        }
    }
    return static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
}

inline int nearest_center(const Vec2& p, const std::vector<Vec2>& centers) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = (p - centers[c]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

inline Clustering lloyd(const WeightedPointSet& pts, std::vector<Vec2> centers) {
    const std::size_t n = pts.size();
    const std::size_t k = centers.size();
    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int l = nearest_center(pts.points[i], centers);
            if (l != labels[i]) {
                labels[i] = l;
                changed = true;
            }
        }
        std::vector<Vec2> sums(k, Vec2::Zero());
        std::vector<double> mass(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[labels[i]] += pts.weights[i] * pts.points[i];
            mass[labels[i]] += pts.weights[i];
        }
        bool reseeded = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (mass[c] > 0.0) {
                centers[c] = sums[c] / mass[c];
                continue;
            }
            // Empty cluster: move it to the point that is worst explained.
            std::size_t worst = 0;
            double worst_cost = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double cost =
                    pts.weights[i] * (pts.points[i] - centers[labels[i]]).squaredNorm();
                if (cost > worst_cost) {
                    worst_cost = cost;
                    worst = i;
                }
            }
            centers[c] = pts.points[worst];
            reseeded = true;
        }
        if (!changed && !reseeded) {
            break;
        }
    }
    Clustering out;
    out.k = static_cast<int>(k);
    out.labels = std::move(labels);
    out.centroids = std::move(centers);
    out.masks.assign(k, {});
    for (std::size_t i = 0; i < n; ++i) {
        out.masks[out.labels[i]].push_back(pts.indices[i]);
        out.wcss += pts.weights[i] * (pts.points[i] - out.centroids[out.labels[i]]).squaredNorm();
    }
    return out;
}

inline std::size_t distinct_points(const WeightedPointSet& pts) {
    std::vector<std::pair<double, double>> xy;
    xy.reserve(pts.size());
    for (const auto& p : pts.points) {
        xy.emplace_back(p.x(), p.y());
    }
    std::sort(xy.begin(), xy.end());
    return static_cast<std::size_t>(std::unique(xy.begin(), xy.end()) - xy.begin());
}

}  // namespace detail

/// Weighted Lloyd iterations from D^2-weighted seeding; best of `restarts`
/// runs by weighted within-cluster sum of squares (ties to the lowest
/// restart index).
inline Clustering weighted_kmeans(const WeightedPointSet& pts, int k, int restarts,
                                  std::uint64_t seed) {
    const auto n = static_cast<int>(pts.size());
    if (k < 1 || k > n) {
        throw InvalidArgument("weighted_kmeans: k must lie in [1, number of points]");
    }
    if (pts.weights.size() != pts.size() || pts.indices.size() != pts.size()) {
        throw InvalidArgument("weighted_kmeans: point set fields have different lengths");
    }
    restarts = std::max(restarts, 1);
    Clustering best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(derive_seed(seed, "kmeans-restart", static_cast<std::uint64_t>(r)));
        std::vector<Vec2> centers;
        centers.push_back(pts.points[detail::sample_proportional(pts.weights, rng)]);
        std::vector<double> mass(pts.size());
        while (static_cast<int>(centers.size()) < k) {
            for (std::size_t i = 0; i < pts.size(); ++i) {
                double d2 = std::numeric_limits<double>::infinity();
                for (const auto& c : centers) {
                    d2 = std::min(d2, (pts.points[i] - c).squaredNorm());
                }
                mass[i] = pts.weights[i] * d2;
            }
            centers.push_back(pts.points[detail::sample_proportional(mass, rng)]);
        }
        Clustering c = detail::lloyd(pts, std::move(centers));
        if (c.wcss < best.wcss) {
            best = std::move(c);
        }
    }
    return best;
}

/// Mean silhouette value (unweighted, Euclidean). Points in singleton
/// clusters score 0.
inline double mean_silhouette(const WeightedPointSet& pts, const std::vector<int>& labels, int k) {
    const std::size_t n = pts.size();
    if (n < 2) {
        return 0.0;
    }
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) {
        ++counts[static_cast<std::size_t>(l)];
    }
    double total = 0.0;
    std::vector<double> sum_d(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sum_d.begin(), sum_d.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                sum_d[static_cast<std::size_t>(labels[j])] += (pts.points[i] - pts.points[j]).norm();
            }
        }
        const auto own = static_cast<std::size_t>(labels[i]);
        if (counts[own] <= 1) {
            continue;
        }
        const double a = sum_d[own] / (counts[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sum_d.size(); ++c) {
            if (c != own && counts[c] > 0) {
                b = std::min(b, sum_d[c] / counts[c]);
            }
        }
        if (!std::isfinite(b)) {
            continue;
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

struct ClusterCountSelection {
    int k = 1;
    double score = 0.0;
    Clustering clustering;
};

inline Clustering trivial_clustering(const WeightedPointSet& pts) {
    Clustering c;
    c.k = 1;
    c.labels.assign(pts.size(), 0);
    c.masks.assign(1, pts.indices);
    Vec2 sum = Vec2::Zero();
    double mass = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        sum += pts.weights[i] * pts.points[i];
        mass += pts.weights[i];
    }
    c.centroids.push_back(mass > 0.0 ? Vec2(sum / mass) : Vec2::Zero());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        c.wcss += pts.weights[i] * (pts.points[i] - c.centroids[0]).squaredNorm();
    }
    return c;
}

/// Picks the cluster count in [2, k_max] with the largest mean silhouette
/// (ties to the smaller count). Fewer than two distinct points yields the
/// single trivial cluster.
inline ClusterCountSelection silhouette_select(const WeightedPointSet& pts, int k_max,
                                               int restarts, std::uint64_t seed) {
    ClusterCountSelection best;
    const int upper = std::min(k_max, static_cast<int>(detail::distinct_points(pts)));
    if (pts.size() < 2 || upper < 2) {
        best.clustering = trivial_clustering(pts);
        return best;
    }
    best.score = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= upper; ++k) {
        Clustering c = weighted_kmeans(pts, k, restarts,
                                       derive_seed(seed, "silhouette", static_cast<std::uint64_t>(k)));
        const double s = mean_silhouette(pts, c.labels, c.k);
        if (s > best.score) {
            best.k = k;
            best.score = s;
            best.clustering = std::move(c);
        }
    }
    return best;
}

/// s_m = sum of x_hat over cluster m's grid points.
inline std::vector<double> estimate_strengths(const Clustering& c, const VectorXd& x_hat) {
    std::vector<double> out;
    out.reserve(c.masks.size());
    for (const auto& mask : c.masks) {
        double s = 0.0;
        for (int j : mask) {
            s += x_hat(j);
        }
        out.push_back(s);
    }
    return out;
}

/// p_m = sum_i g_i x_i / sum_i x_i over cluster m's grid points.
inline std::vector<Vec2> estimate_positions(const Clustering& c, const VectorXd& x_hat,
                                            const Grid& grid) {
    std::vector<Vec2> out;
    out.reserve(c.masks.size());
    for (const auto& mask : c.masks) {
        Vec2 sum = Vec2::Zero();
        double mass = 0.0;
        for (int j : mask) {
            sum += x_hat(j) * grid.points[static_cast<std::size_t>(j)];
            mass += x_hat(j);
        }
        if (!(mass > 0.0)) {
            throw InvalidState("estimate_positions: cluster has no positive weight");
        }
        out.emplace_back(sum / mass);
    }
    return out;
}

}  // namespace tssg
