#pragma once

#include "tssg/errors.hpp"
#include "tssg/linalg.hpp"
#include "tssg/nnls_solver.hpp"

namespace tssg {

/// TSSG state estimate x (non-negative signal strength per grid point)
/// with its error covariance P at time index k.
struct TssgEstimate {
    int k = 0;
    VectorXd x;
    MatrixXd P;
};

enum class CovarianceMode { Standard, Enhanced };

struct KfConfig {
    /// lambda_k = alpha * lambda_bar_k; 0 gives the sparsity-agnostic corrector.
    double alpha = 0.1;
    MatrixXd Q;
    MatrixXd R;
    CovarianceMode covariance_mode = CovarianceMode::Standard;
    SolverOptions solver;

    void validate() const {
        if (!(alpha >= 0.0) || !(alpha < 1.0)) {
            throw InvalidArgument("alpha must lie in [0, 1)");
        }
        solver.validate();
    }
};

struct CorrectionInfo {
    double lambda = 0.0;
    double lambda_bar = 0.0;
    int solver_iters = 0;
    bool converged = true;
    /// Enhanced covariance requested but 1'x = 0; Standard was used instead.
    bool enhanced_fallback = false;
};

struct Correction {
    TssgEstimate estimate;
    CorrectionInfo info;
};

inline TssgEstimate predict(const TssgEstimate& prev, const MatrixXd& F, const MatrixXd& Q) {
    const Eigen::Index g = prev.x.size();
    if (F.rows() != g || F.cols() != g || prev.P.rows() != g || prev.P.cols() != g ||
        Q.rows() != g || Q.cols() != g) {
        throw InvalidArgument("predict: dimension mismatch");
    }
    TssgEstimate out;
    out.k = prev.k + 1;
    out.x = F * prev.x;
    out.P = F * prev.P * F.transpose() + Q;
    linalg::symmetrize(out.P);
    return out;
}

/// P - P H'(H P H' + R)^-1 H P.
inline MatrixXd covariance_standard(const MatrixXd& P, const MatrixXd& H, const MatrixXd& R) {
    if (H.rows() == 0) {
        return P;
    }
    const MatrixXd ph_t = P * H.transpose();
    const MatrixXd s = H * ph_t + R;
    const auto s_llt = linalg::factor_spd(s, "innovation covariance");
    MatrixXd out = P - ph_t * s_llt.solve(ph_t.transpose());
    linalg::symmetrize(out);
    return out;
}

/// (P^-1 + H'R^-1 H + (lambda / (2 * 1'x)) 1 1')^-1, evaluated as a rank-one
/// Sherman-Morrison downdate of the standard covariance.
inline MatrixXd covariance_enhanced(const MatrixXd& P, const MatrixXd& H, const MatrixXd& R,
                                   double lambda, const VectorXd& x_hat) {
    if (!(lambda >= 0.0)) {
        throw InvalidArgument("lambda must be non-negative");
    }
    const double mass = x_hat.sum();
    if (!(mass > 0.0)) {
        throw InvalidArgument("enhanced covariance requires 1'x > 0");
    }
    MatrixXd base = covariance_standard(P, H, R);
    const double weight = lambda / (2.0 * mass);
    if (weight == 0.0) {
        return base;
    }
    const VectorXd u = base.rowwise().sum();
    base -= (weight / (1.0 + weight * u.sum())) * (u * u.transpose());
    linalg::symmetrize(base);
    return base;
}

inline Correction correct(const TssgEstimate& pred, const VectorXd& y, const MatrixXd& H,
                          const KfConfig& config) {
    config.validate();
    RegularizedWlsProblem problem{pred.x, pred.P, y, H, config.R, 0.0};
    if (y.size() == 0) {
        problem.H = MatrixXd(0, pred.x.size());
        problem.R = MatrixXd(0, 0);
    }
    auto q = WlsQuadratic::from_problem(problem);
    Correction out;
    out.info.lambda_bar = q.lambda_bar();
    out.info.lambda = config.alpha * out.info.lambda_bar;
    q.set_lambda(out.info.lambda);

    const GpResult sol = solve_gp(q, config.solver);
    out.info.solver_iters = sol.iters;
    out.info.converged = sol.converged;

    out.estimate.k = pred.k;
    out.estimate.x = sol.x;
    if (config.covariance_mode == CovarianceMode::Enhanced && sol.x.sum() > 0.0) {
        out.estimate.P = covariance_enhanced(pred.P, problem.H, problem.R, out.info.lambda, sol.x);
    } else {
        out.info.enhanced_fallback = config.covariance_mode == CovarianceMode::Enhanced;
        out.estimate.P = covariance_standard(pred.P, problem.H, problem.R);
    }
    return out;
}

/// Flat starting estimate: every grid point carries sum(y) / sum(H), the
/// prior covariance is beta * I, and one corrector pass with the first
/// measurement yields x_{0|0}. P_{0|0} = beta * I.
inline TssgEstimate initialize(const VectorXd& y, const MatrixXd& H, const MatrixXd& R,
                               double alpha, const SolverOptions& solver, double beta = 100.0) {
    const Eigen::Index g = H.cols();
    const double h_mass = H.sum();
    const double level = h_mass > 0.0 ? std::max(0.0, y.sum()) / h_mass : 0.0;
    TssgEstimate prior;
    prior.k = 0;
    prior.x = VectorXd::Constant(g, level);
    prior.P = beta * MatrixXd::Identity(g, g);
    KfConfig cfg;
    cfg.alpha = alpha;
    cfg.R = R;
    cfg.solver = solver;
    auto c = correct(prior, y, H, cfg);
    c.estimate.k = 0;
    c.estimate.P = prior.P;
    return c.estimate;
}

}  // namespace tssg
