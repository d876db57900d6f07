#pragma once

// Uniform step-by-step driver over the four TSSG trackers: the
// sparsity-agnostic KF, the l1-regularized KF, the sparsity-aware IEKF and
// the clairvoyant HMM benchmark.

#include "tssg/errors.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/hmm_benchmark.hpp"
#include "tssg/iekf_tracker.hpp"
#include "tssg/kf_trackers.hpp"
#include "tssg/linalg.hpp"
#include "tssg/nnls_solver.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace tssg {

enum class TrackerKind { Agnostic, SparseKF, IEKF, HMM };

inline std::string_view to_string(TrackerKind k) {
    switch (k) {
        case TrackerKind::Agnostic: return "agnostic";
        case TrackerKind::SparseKF: return "sparse_kf";
        case TrackerKind::IEKF: return "iekf";
        case TrackerKind::HMM: return "hmm";
    }
    return "unknown";
}

inline TrackerKind tracker_kind_from(std::string_view s) {
    if (s == "agnostic") return TrackerKind::Agnostic;
    if (s == "sparse_kf") return TrackerKind::SparseKF;
    if (s == "iekf") return TrackerKind::IEKF;
    if (s == "hmm") return TrackerKind::HMM;
    throw InvalidArgument("unknown tracker kind '" + std::string(s) +
                          "' (expected agnostic, sparse_kf, iekf or hmm)");
}

struct TrackerSpec {
    TrackerKind kind = TrackerKind::SparseKF;
    /// SparseKF: lambda_k = alpha * lambda_bar_k. Ignored by Agnostic.
    double alpha = 0.1;
    CovarianceMode covariance = CovarianceMode::Standard;
    /// IEKF pseudo-measurement (kind, mu, sigma and shape parameters).
    SparsityMeasurement sparsity;
    int iekf_iterations = 10;
    bool projected = true;
    IekfOptions iekf;
    /// HMM: known target strength; report the MAP point instead of the MMSE mean.
    double hmm_strength = 10.0;
    bool hmm_map = false;
    SolverOptions solver;
    double init_beta = 100.0;

    void validate() const {
        if (kind == TrackerKind::SparseKF && !(alpha >= 0.0 && alpha < 1.0)) {
            throw InvalidArgument("tracker: alpha must lie in [0, 1)");
        }
        if (kind == TrackerKind::IEKF) {
            sparsity.validate();
            if (iekf_iterations < 1) {
                throw InvalidArgument("tracker: IEKF iterations must be at least 1");
            }
        }
        if (kind == TrackerKind::HMM && !(hmm_strength > 0.0)) {
            throw InvalidArgument("tracker: HMM strength must be positive");
        }
        if (!(init_beta > 0.0)) {
            throw InvalidArgument("tracker: init_beta must be positive");
        }
        solver.validate();
    }
};

struct TrackerStep {
    int k = 0;
    /// TSSG estimate (for the HMM: strength times the posterior).
    VectorXd x;
    /// Position reported directly by the tracker (HMM only).
    std::optional<Vec2> position;
    int solver_iters = 0;
    bool converged = true;
};

class Tracker {
public:
    virtual ~Tracker() = default;
    /// Consumes the measurement of the next step. The first call
    /// initializes the tracker from that measurement.
    virtual TrackerStep step(const VectorXd& y) = 0;
};

namespace detail {

class KalmanTracker final : public Tracker {
public:
    KalmanTracker(const GridModel& model, KfConfig cfg, double beta)
        : model_(model), cfg_(std::move(cfg)), beta_(beta) {}

    TrackerStep step(const VectorXd& y) override {
        TrackerStep out;
        if (!state_) {
            state_ = initialize(y, model_.H, cfg_.R, cfg_.alpha, cfg_.solver, beta_);
            state_->k = 1;
        } else {
            const TssgEstimate pred = predict(*state_, model_.F, cfg_.Q);
            Correction c = correct(pred, y, model_.H, cfg_);
            out.solver_iters = c.info.solver_iters;
            out.converged = c.info.converged;
            state_ = std::move(c.estimate);
        }
        out.k = state_->k;
        out.x = state_->x;
        return out;
    }

private:
    const GridModel& model_;
    KfConfig cfg_;
    double beta_;
    std::optional<TssgEstimate> state_;
};

class IekfTracker final : public Tracker {
public:
    IekfTracker(const GridModel& model, const TrackerSpec& spec, MatrixXd Q, MatrixXd R)
        : model_(model), spec_(spec), Q_(std::move(Q)), R_(std::move(R)) {}

    TrackerStep step(const VectorXd& y) override {
        TrackerStep out;
        if (!state_) {
            state_ = initialize(y, model_.H, R_, 0.0, spec_.solver, spec_.init_beta);
            state_->k = 1;
        } else {
            const TssgEstimate pred = predict(*state_, model_.F, Q_);
            const AugmentedMeasurement aug = augment(y, R_, spec_.sparsity);
            IekfResult r = spec_.projected
                               ? gauss_newton_correct(pred, aug, model_.H, spec_.sparsity,
                                                      spec_.iekf_iterations, true, spec_.iekf)
                               : iekf_correct(pred, aug, model_.H, spec_.sparsity,
                                              spec_.iekf_iterations, spec_.iekf);
            out.solver_iters = r.iterations;
            state_ = std::move(r.estimate);
        }
        out.k = state_->k;
        out.x = state_->x;
        return out;
    }

private:
    const GridModel& model_;
    TrackerSpec spec_;
    MatrixXd Q_;
    MatrixXd R_;
    std::optional<TssgEstimate> state_;
};

class HmmTracker final : public Tracker {
public:
    HmmTracker(const GridModel& model, const TrackerSpec& spec, MatrixXd R)
        : model_(model), spec_(spec), R_(std::move(R)) {}

    TrackerStep step(const VectorXd& y) override {
        if (!belief_) {
            belief_ = hmm_correct(HmmBelief::uniform(model_.H.cols()), y, model_.H,
                                  spec_.hmm_strength, R_);
            belief_->k = 1;
        } else {
            belief_ = hmm_correct(hmm_predict(*belief_, model_.F), y, model_.H, spec_.hmm_strength,
                                  R_);
        }
        const HmmPosition pos = hmm_position(*belief_, model_.grid);
        TrackerStep out;
        out.k = belief_->k;
        out.x = spec_.hmm_strength * belief_->p;
        out.position = spec_.hmm_map ? pos.map : pos.mmse;
        return out;
    }

private:
    const GridModel& model_;
    TrackerSpec spec_;
    MatrixXd R_;
    std::optional<HmmBelief> belief_;
};

}  // namespace detail

/// Tracker over `model` with process noise Q = q I and measurement noise
/// R = r I. The model must outlive the tracker.
inline std::unique_ptr<Tracker> make_tracker(const TrackerSpec& spec, const GridModel& model,
                                             double q, double r) {
    spec.validate();
    if (!(q > 0.0) || !(r > 0.0)) {
        throw InvalidArgument("tracker: noise variances must be positive");
    }
    const Eigen::Index g = model.H.cols();
    const Eigen::Index n = model.H.rows();
    MatrixXd Q = q * MatrixXd::Identity(g, g);
    MatrixXd R = r * MatrixXd::Identity(n, n);
    switch (spec.kind) {
        case TrackerKind::Agnostic:
        case TrackerKind::SparseKF: {
            KfConfig cfg;
            cfg.alpha = spec.kind == TrackerKind::Agnostic ? 0.0 : spec.alpha;
            cfg.Q = std::move(Q);
            cfg.R = std::move(R);
            cfg.covariance_mode = spec.covariance;
            cfg.solver = spec.solver;
            return std::make_unique<detail::KalmanTracker>(model, std::move(cfg), spec.init_beta);
        }
        case TrackerKind::IEKF:
            return std::make_unique<detail::IekfTracker>(model, spec, std::move(Q), std::move(R));
        case TrackerKind::HMM:
            return std::make_unique<detail::HmmTracker>(model, spec, std::move(R));
    }
    throw InvalidArgument("tracker: unsupported kind");
}

}  // namespace tssg
