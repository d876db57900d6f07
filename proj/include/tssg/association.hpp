#pragma once

// Position-to-track association. Tracks are predicted from the TSSG estimate
// restricted to their last cluster mask, scored against new position
// estimates by Mahalanobis distance and assigned by the Hungarian method.
// Births and deaths are handled by augmenting the cost matrix with dummy
// rows and columns.

#include "tssg/errors.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace tssg {

inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

enum class TrackStatus { Active, Dead };

struct Track {
    int id = 0;
    std::vector<int> times;
    std::vector<Vec2> positions;
    /// Grid indices of the cluster most recently associated with the track.
    std::vector<int> mask;
    TrackStatus status = TrackStatus::Active;
    int born_at = 0;
    int died_at = -1;
};

struct TrackPrediction {
    Vec2 position = Vec2::Zero();
    Mat2 covariance = Mat2::Zero();
};

/// Propagates the part of x_prev inside `mask` through F and returns the
/// weighted mean and weighted sample covariance of the grid positions.
/// Empty when no mass survives (the track is lost).
inline std::optional<TrackPrediction> predict_track(const VectorXd& x_prev,
                                                    const std::vector<int>& mask,
                                                    const MatrixXd& F, const Grid& grid) {
    const Eigen::Index g = x_prev.size();
    if (static_cast<std::size_t>(g) != grid.size() || F.rows() != g || F.cols() != g) {
        throw InvalidArgument("predict_track: dimension mismatch");
    }
    VectorXd masked = VectorXd::Zero(g);
    for (int j : mask) {
        if (j < 0 || j >= g) {
            throw InvalidArgument("predict_track: mask index out of range");
        }
        masked(j) = x_prev(j);
    }
    const VectorXd propagated = F * masked;
    const double mass = propagated.sum();
    if (!(mass > 0.0)) {
        return std::nullopt;
    }
    TrackPrediction out;
    for (Eigen::Index j = 0; j < g; ++j) {
        out.position += propagated(j) * grid.points[static_cast<std::size_t>(j)];
    }
    out.position /= mass;
    for (Eigen::Index j = 0; j < g; ++j) {
        if (propagated(j) != 0.0) {
            const Vec2 d = grid.points[static_cast<std::size_t>(j)] - out.position;
            out.covariance += propagated(j) * (d * d.transpose());
        }
    }
    out.covariance /= mass;
    return out;
}

/// (p_pred - p)' (P + jitter I)^-1 (p_pred - p).
inline double mahalanobis(const TrackPrediction& pred, const Vec2& p, double jitter = 0.0) {
    const Mat2 cov = pred.covariance + jitter * Mat2::Identity();
    const double det = cov.determinant();
    if (!(det > 0.0)) {
        throw InvalidArgument("mahalanobis: covariance is singular; use a positive jitter");
    }
    const Vec2 d = pred.position - p;
    return d.dot(cov.inverse() * d);
}

struct Assignment {
    /// Column assigned to each row.
    std::vector<int> row_to_col;
    double total = 0.0;
};

namespace detail {

// O(n^3) Hungarian method with row/column potentials on a square matrix.
// Forbidden (infinite) entries are never selected; returns nullopt when no
// finite assignment exists.
inline std::optional<Assignment> hungarian(const MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    Assignment out;
    if (n == 0) {
        return out;
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);  // match[col] = row, 1-based
    std::vector<int> way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double c = cost(i0 - 1, j - 1);
                if (std::isfinite(c)) {
                    const double cur = c - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if (j1 < 0 || !std::isfinite(delta)) {
                return std::nullopt;
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    out.row_to_col.assign(n, -1);
    for (int j = 1; j <= n; ++j) {
        out.row_to_col[match[j] - 1] = j - 1;
    }
    for (int i = 0; i < n; ++i) {
        out.total += cost(i, out.row_to_col[i]);
    }
    return out;
}

inline MatrixXd without(const MatrixXd& m, int row_from, const std::vector<int>& cols) {
    MatrixXd out(m.rows() - row_from, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index r = row_from; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(r - row_from, static_cast<Eigen::Index>(c)) = m(r, cols[c]);
        }
    }
    return out;
}

}  // namespace detail

/// Minimum-cost one-to-one assignment of a square cost matrix. Among optimal
/// assignments the lexicographically smallest row -> column map is returned.
inline Assignment assign(const MatrixXd& costs) {
    if (costs.rows() != costs.cols()) {
        throw InvalidArgument("assign: cost matrix must be square");
    }
    for (Eigen::Index i = 0; i < costs.size(); ++i) {
        const double c = costs.data()[i];
        if (std::isnan(c) || c == -std::numeric_limits<double>::infinity()) {
            throw InvalidArgument("assign: costs must not be NaN or -inf");
        }
    }
    const auto best = detail::hungarian(costs);
    if (!best) {
        throw InvalidArgument("assign: no finite-cost assignment exists");
    }
    const int n = static_cast<int>(costs.rows());
    const double tol = 1e-12 * std::max(1.0, std::abs(best->total)) * std::max(1, n);

    // Fix rows in order to the smallest column that still admits an optimum.
    Assignment out;
    out.row_to_col.assign(n, -1);
    std::vector<int> free_cols(n);
    for (int j = 0; j < n; ++j) {
        free_cols[j] = j;
    }
    double fixed = 0.0;
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (std::size_t idx = 0; idx < free_cols.size() && !placed; ++idx) {
            const int j = free_cols[idx];
            const double c = costs(i, j);
            if (!std::isfinite(c)) {
                continue;
            }
            std::vector<int> rest = free_cols;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(idx));
            const auto sub = detail::hungarian(detail::without(costs, i + 1, rest));
            if (sub && fixed + c + sub->total <= best->total + tol) {
                out.row_to_col[i] = j;
                fixed += c;
                free_cols = std::move(rest);
                placed = true;
            }
        }
        if (!placed) {
            // Rounding pushed every candidate over the bound; keep the Hungarian optimum.
            return *best;
        }
    }
    for (int i = 0; i < n; ++i) {
        out.total += costs(i, out.row_to_col[i]);
    }
    return out;
}

struct BirthDeath {
    std::vector<std::pair<int, int>> matches;  // (track, measurement)
    std::vector<int> births;                   // unmatched measurements
    std::vector<int> deaths;                   // unmatched tracks
};

/// Assignment with a dummy target per track and a dummy track per
/// measurement, each at cost `gate`. Dummy/dummy filler cells cost zero and
/// carry no association. A track left on its dummy target dies; a
/// measurement left on its dummy track starts a new track.
inline BirthDeath assign_with_birth_death(const MatrixXd& costs, double gate) {
    if (!(gate > 0.0)) {
        throw InvalidArgument("assign_with_birth_death: gate must be positive");
    }
    const auto tracks = static_cast<int>(costs.rows());
    const auto meas = static_cast<int>(costs.cols());
    const int n = tracks + meas;
    MatrixXd aug = MatrixXd::Constant(n, n, kForbidden);
    aug.topLeftCorner(tracks, meas) = costs;
    for (int t = 0; t < tracks; ++t) {
        aug(t, meas + t) = gate;
    }
    for (int m = 0; m < meas; ++m) {
        aug(tracks + m, m) = gate;
    }
    aug.bottomRightCorner(meas, tracks).setZero();

    BirthDeath out;
    if (n == 0) {
        return out;
    }
    const Assignment a = assign(aug);
    for (int t = 0; t < tracks; ++t) {
        const int col = a.row_to_col[t];
        if (col < meas) {
            out.matches.emplace_back(t, col);
        } else {
            out.deaths.push_back(t);
        }
    }
    for (int m = 0; m < meas; ++m) {
        if (a.row_to_col[tracks + m] < meas) {
            out.births.push_back(a.row_to_col[tracks + m]);
        }
    }
    std::sort(out.births.begin(), out.births.end());
    return out;
}

/// (p_k - p_{k-1}) / Ts from the two most recent positions.
inline Vec2 velocity(const Track& track, double Ts) {
    if (track.positions.size() < 2) {
        throw InvalidState("velocity needs at least two positions");
    }
    if (!(Ts > 0.0)) {
        throw InvalidArgument("sampling period must be positive");
    }
    const std::size_t n = track.positions.size();
    return (track.positions[n - 1] - track.positions[n - 2]) / Ts;
}

}  // namespace tssg
