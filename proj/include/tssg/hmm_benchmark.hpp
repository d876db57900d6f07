#pragma once

// Clairvoyant single-target HMM filter over grid occupancy. The target
// strength s and the measurement noise covariance R are known; the
// likelihood of grid point j is the Gaussian density of y with mean s * H e_j.

#include "tssg/errors.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/linalg.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace tssg {

struct HmmBelief {
    int k = 0;
    VectorXd p;

    static HmmBelief uniform(Eigen::Index g) {
        return HmmBelief{0, VectorXd::Constant(g, 1.0 / static_cast<double>(g))};
    }
};

/// F * p before renormalization (mass leaving the grid is lost).
inline VectorXd hmm_propagate(const HmmBelief& b, const MatrixXd& F) {
    if (F.rows() != b.p.size() || F.cols() != b.p.size()) {
        throw InvalidArgument("hmm_predict: dimension mismatch");
    }
    return F * b.p;
}

/// Prediction conditioned on the target staying inside the region.
inline HmmBelief hmm_predict(const HmmBelief& b, const MatrixXd& F) {
    VectorXd p = hmm_propagate(b, F);
    const double total = p.sum();
    if (!(total > 0.0)) {
        throw InvalidState("hmm_predict: belief has no mass left on the grid");
    }
    return HmmBelief{b.k + 1, p / total};
}

/// Posterior from per-point log-likelihoods, computed in the log domain.
/// Points with zero prior stay at zero.
inline HmmBelief hmm_update(const HmmBelief& b, const VectorXd& log_likelihood) {
    const Eigen::Index g = b.p.size();
    if (log_likelihood.size() != g) {
        throw InvalidArgument("hmm_update: likelihood size mismatch");
    }
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    VectorXd log_post(g);
    double peak = neg_inf;
    for (Eigen::Index j = 0; j < g; ++j) {
        log_post(j) = b.p(j) > 0.0 ? std::log(b.p(j)) + log_likelihood(j) : neg_inf;
        peak = std::max(peak, log_post(j));
    }
    if (!std::isfinite(peak)) {
        throw NumericalFailure("hmm_correct: every likelihood vanished");
    }
    VectorXd post(g);
    for (Eigen::Index j = 0; j < g; ++j) {
        post(j) = std::isfinite(log_post(j)) ? std::exp(log_post(j) - peak) : 0.0;
    }
    post /= post.sum();
    return HmmBelief{b.k, std::move(post)};
}

/// log N(y; s H e_j, R) up to a constant shared by all j.
inline VectorXd hmm_log_likelihood(const VectorXd& y, const MatrixXd& H, double s,
                                   const MatrixXd& R) {
    if (!(s > 0.0)) {
        throw InvalidArgument("hmm_correct: signal strength must be positive");
    }
    if (H.rows() != y.size() || R.rows() != y.size() || R.cols() != y.size()) {
        throw InvalidArgument("hmm_correct: dimension mismatch");
    }
    const auto llt = linalg::factor_spd(R, "R");
    const MatrixXd w = llt.matrixL().solve(s * H);  // whitened columns
    const VectorXd wy = llt.matrixL().solve(y);
    VectorXd ll(H.cols());
    for (Eigen::Index j = 0; j < H.cols(); ++j) {
        ll(j) = -0.5 * (wy - w.col(j)).squaredNorm();
    }
    return ll;
}

inline HmmBelief hmm_correct(const HmmBelief& b, const VectorXd& y, const MatrixXd& H, double s,
                             const MatrixXd& R) {
    return hmm_update(b, hmm_log_likelihood(y, H, s, R));
}

struct HmmPosition {
    Vec2 mmse;
    Vec2 map;
};

inline HmmPosition hmm_position(const HmmBelief& b, const Grid& grid) {
    if (static_cast<std::size_t>(b.p.size()) != grid.size() || grid.size() == 0) {
        throw InvalidArgument("hmm_position: belief does not match the grid");
    }
    HmmPosition out{Vec2::Zero(), grid.points[0]};
    double best = -1.0;
    double total = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double pj = b.p(static_cast<Eigen::Index>(j));
        out.mmse += pj * grid.points[j];
        total += pj;
        if (pj > best) {
            best = pj;
            out.map = grid.points[j];
        }
    }
    if (total > 0.0) {
        out.mmse /= total;
    }
    return out;
}

}  // namespace tssg
