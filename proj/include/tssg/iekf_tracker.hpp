#pragma once

// Sparsity as an extra measurement. The measurement vector is augmented with
// a pseudo-measurement mu = rho(x) + u, u ~ N(0, sigma^2), where rho is a
// smooth surrogate of the l0 count. The corrector is either the iterated EKF
// (gain form) or Gauss-Newton on the equivalent nonlinear least-squares cost
// (information form); both produce the same iterates when started from the
// predictor. The Gauss-Newton path optionally projects each iterate onto the
// non-negative orthant in a scaled metric.

#include "tssg/errors.hpp"
#include "tssg/kf_trackers.hpp"
#include "tssg/linalg.hpp"
#include "tssg/nnls_solver.hpp"

#include <cmath>
#include <vector>

namespace tssg {

enum class RhoKind { L1, Logarithm, InverseGaussian };

struct SparsityMeasurement {
    RhoKind kind = RhoKind::L1;
    double delta = 0.1;    // logarithm offset
    double sigma_p = 1.0;  // inverse-Gaussian width
    double mu = 1.0;       // pseudo-measurement value
    double sigma = 2.0;    // pseudo-measurement noise std

    void validate() const {
        if (!(delta > 0.0) || !(sigma_p > 0.0) || !(sigma > 0.0) || !(mu >= 0.0)) {
            throw InvalidArgument("sparsity measurement needs delta, sigma_p, sigma > 0 and mu >= 0");
        }
    }
};

/// y_bar = [y; mu], R_bar = diag(R, sigma^2).
struct AugmentedMeasurement {
    VectorXd y_bar;
    MatrixXd R_bar;
};

inline AugmentedMeasurement augment(const VectorXd& y, const MatrixXd& R,
                                    const SparsityMeasurement& m) {
    m.validate();
    const Eigen::Index n = y.size();
    if (R.rows() != n || R.cols() != n) {
        throw InvalidArgument("augment: R does not match y");
    }
    AugmentedMeasurement a;
    a.y_bar.resize(n + 1);
    a.y_bar.head(n) = y;
    a.y_bar(n) = m.mu;
    a.R_bar = MatrixXd::Zero(n + 1, n + 1);
    a.R_bar.topLeftCorner(n, n) = R;
    a.R_bar(n, n) = m.sigma * m.sigma;
    return a;
}

namespace detail {

// The logarithm and inverse-Gaussian surrogates are only defined on x >= 0.
inline VectorXd rho_argument(const VectorXd& x, const SparsityMeasurement& m) {
    return m.kind == RhoKind::L1 ? x : x.cwiseMax(0.0);
}

}  // namespace detail

inline double rho(const VectorXd& x, const SparsityMeasurement& m) {
    const VectorXd v = detail::rho_argument(x, m);
    switch (m.kind) {
        case RhoKind::L1:
            return v.sum();
        case RhoKind::Logarithm:
            return (v.array() + m.delta).log().sum();
        case RhoKind::InverseGaussian:
            return (1.0 - (-v.array().square() / (2.0 * m.sigma_p * m.sigma_p)).exp()).sum();
    }
    return 0.0;
}

inline VectorXd rho_grad(const VectorXd& x, const SparsityMeasurement& m) {
    const VectorXd v = detail::rho_argument(x, m);
    switch (m.kind) {
        case RhoKind::L1:
            return VectorXd::Ones(x.size());
        case RhoKind::Logarithm:
            return (v.array() + m.delta).inverse().matrix();
        case RhoKind::InverseGaussian: {
            const double s2 = m.sigma_p * m.sigma_p;
            return (v.array() / s2 * (-v.array().square() / (2.0 * s2)).exp()).matrix();
        }
    }
    return VectorXd::Zero(x.size());
}

/// Which matrix defines the distance of the orthant projection in the
/// projected Gauss-Newton step. Hessian uses Psi Psi' (the scaled-projection
/// metric under which projected Newton converges); Covariance uses its
/// inverse.
enum class ProjectionMetric { Hessian, Covariance };

struct IekfOptions {
    /// Stop early once successive iterates differ by less than this
    /// (infinity norm); 0 disables early exit.
    double early_exit = 1e-10;
    bool keep_iterates = false;
    ProjectionMetric metric = ProjectionMetric::Hessian;
    SolverOptions projection_solver{GpMode::GaussSeidel, std::nullopt, 2000, 1e-10, true};
};

struct IekfResult {
    TssgEstimate estimate;
    int iterations = 0;
    /// Unprojected result has negative entries.
    bool has_negative = false;
    /// Projected path: the nonlinear least-squares cost went up at some iteration.
    bool objective_increased = false;
    /// x(0) = predictor, x(1), ..., when keep_iterates is set.
    std::vector<VectorXd> iterates;
};

namespace detail {

inline VectorXd h_bar(const VectorXd& x, const MatrixXd& H, const SparsityMeasurement& m) {
    VectorXd out(H.rows() + 1);
    out.head(H.rows()) = H * x;
    out(H.rows()) = rho(x, m);
    return out;
}

inline MatrixXd jacobian(const VectorXd& x, const MatrixXd& H, const SparsityMeasurement& m) {
    MatrixXd phi(H.rows() + 1, x.size());
    phi.topRows(H.rows()) = H;
    phi.row(H.rows()) = rho_grad(x, m).transpose();
    return phi;
}

inline void check_inputs(const TssgEstimate& pred, const AugmentedMeasurement& aug,
                         const MatrixXd& H, const SparsityMeasurement& m, int L) {
    m.validate();
    if (L < 1) {
        throw InvalidArgument("iteration count L must be at least 1");
    }
    const Eigen::Index g = pred.x.size();
    if (pred.P.rows() != g || pred.P.cols() != g || H.cols() != g ||
        aug.y_bar.size() != H.rows() + 1 || aug.R_bar.rows() != aug.y_bar.size() ||
        aug.R_bar.cols() != aug.y_bar.size()) {
        throw InvalidArgument("IEKF: dimension mismatch");
    }
}

}  // namespace detail

/// Iterated EKF corrector in gain form:
///   x(l+1) = x_pred + K(l) (y_bar - h_bar(x(l)) - Phi(l) (x_pred - x(l)))
///   K(l)   = P Phi(l)' (Phi(l) P Phi(l)' + R_bar)^-1
/// and P+ = P - K(L) Phi(L) P at the final iterate. The state is not
/// projected; has_negative reports whether it left the orthant.
inline IekfResult iekf_correct(const TssgEstimate& pred, const AugmentedMeasurement& aug,
                               const MatrixXd& H, const SparsityMeasurement& m, int L,
                               const IekfOptions& opts = {}) {
    detail::check_inputs(pred, aug, H, m, L);
    const MatrixXd& P = pred.P;
    const VectorXd& xp = pred.x;

    auto gain = [&](const MatrixXd& phi) {
        const MatrixXd p_phi_t = P * phi.transpose();
        const MatrixXd s = phi * p_phi_t + aug.R_bar;
        const auto llt = linalg::factor_spd(s, "IEKF innovation covariance");
        return MatrixXd(llt.solve(p_phi_t.transpose()).transpose());
    };

    IekfResult res;
    VectorXd x = xp;
    if (opts.keep_iterates) {
        res.iterates.push_back(x);
    }
    for (int l = 0; l < L; ++l) {
        const MatrixXd phi = detail::jacobian(x, H, m);
        const MatrixXd k_gain = gain(phi);
        VectorXd next = xp + k_gain * (aug.y_bar - detail::h_bar(x, H, m) - phi * (xp - x));
        if (!next.allFinite()) {
            throw NumericalFailure("IEKF produced a non-finite iterate");
        }
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = std::move(next);
        res.iterations = l + 1;
        if (opts.keep_iterates) {
            res.iterates.push_back(x);
        }
        if (opts.early_exit > 0.0 && change < opts.early_exit) {
            break;
        }
    }
    const MatrixXd phi = detail::jacobian(x, H, m);
    MatrixXd p_post = P - gain(phi) * phi * P;
    linalg::symmetrize(p_post);
    res.estimate.k = pred.k;
    res.estimate.x = x;
    res.estimate.P = std::move(p_post);
    res.has_negative = x.size() > 0 && x.minCoeff() < 0.0;
    return res;
}

/// Residual vector g(x) and its transposed Jacobian Psi for the
/// nonlinear least-squares form of the augmented corrector:
///   g(x) = [P^-1/2 (x_pred - x); R_bar^-1/2 (y_bar - h_bar(x))]
class AugmentedNls {
public:
    AugmentedNls(const TssgEstimate& pred, const AugmentedMeasurement& aug, const MatrixXd& H,
                 const SparsityMeasurement& m)
        : xp_(pred.x), y_bar_(aug.y_bar), h_(H), m_(m) {
        // With P = L L', P^-1 = L^-T L^-1, so L^-1 serves as P^-1/2.
        const auto p_llt = linalg::factor_spd(pred.P, "P_pred");
        const MatrixXd lp = p_llt.matrixL();
        p_inv_half_ = lp.triangularView<Eigen::Lower>().solve(
            MatrixXd::Identity(xp_.size(), xp_.size()));
        const auto r_llt = linalg::factor_spd(aug.R_bar, "R_bar");
        const MatrixXd lr = r_llt.matrixL();
        r_inv_half_ = lr.triangularView<Eigen::Lower>().solve(
            MatrixXd::Identity(y_bar_.size(), y_bar_.size()));
    }

    [[nodiscard]] VectorXd residual(const VectorXd& x) const {
        const Eigen::Index g = xp_.size();
        VectorXd out(g + y_bar_.size());
        out.head(g) = p_inv_half_ * (xp_ - x);
        out.tail(y_bar_.size()) = r_inv_half_ * (y_bar_ - detail::h_bar(x, h_, m_));
        return out;
    }

    /// Psi = (d g / d x)', a G x (G + N + 1) matrix.
    [[nodiscard]] MatrixXd psi(const VectorXd& x) const {
        const Eigen::Index g = xp_.size();
        MatrixXd jac(g + y_bar_.size(), g);
        jac.topRows(g) = -p_inv_half_;
        jac.bottomRows(y_bar_.size()) = -r_inv_half_ * detail::jacobian(x, h_, m_);
        return jac.transpose();
    }

    [[nodiscard]] double cost(const VectorXd& x) const { return residual(x).squaredNorm(); }

private:
    VectorXd xp_;
    VectorXd y_bar_;
    MatrixXd h_;
    SparsityMeasurement m_;
    MatrixXd p_inv_half_;
    MatrixXd r_inv_half_;
};

/// Gauss-Newton on ||g(x)||^2 started at the predictor:
///   x(l+1) = x(l) - (Psi Psi')^-1 Psi g(x(l)),
/// optionally projected onto x >= 0 in the metric selected by opts.metric.
/// Covariance (Psi(L) Psi(L)')^-1 at the final iterate.
inline IekfResult gauss_newton_correct(const TssgEstimate& pred, const AugmentedMeasurement& aug,
                                       const MatrixXd& H, const SparsityMeasurement& m, int L,
                                       bool projected, const IekfOptions& opts = {}) {
    detail::check_inputs(pred, aug, H, m, L);
    const AugmentedNls nls(pred, aug, H, m);

    IekfResult res;
    VectorXd x = pred.x;
    if (projected) {
        x = x.cwiseMax(0.0);
    }
    if (opts.keep_iterates) {
        res.iterates.push_back(x);
    }
    double prev_cost = nls.cost(x);
    for (int l = 0; l < L; ++l) {
        const MatrixXd psi = nls.psi(x);
        MatrixXd hess = psi * psi.transpose();
        linalg::symmetrize(hess);
        const auto llt = linalg::factor_spd(hess, "Gauss-Newton normal matrix");
        VectorXd next = x - llt.solve(psi * nls.residual(x));
        if (projected && next.minCoeff() < 0.0) {
            if (opts.metric == ProjectionMetric::Hessian) {
                next = project_nonneg_bmetric(next, hess, opts.projection_solver, x);
            } else {
                MatrixXd cov = llt.solve(MatrixXd::Identity(hess.rows(), hess.cols()));
                linalg::symmetrize(cov);
                next = project_nonneg_bmetric(next, cov, opts.projection_solver, x);
            }
        }
        if (!next.allFinite()) {
            throw NumericalFailure("Gauss-Newton produced a non-finite iterate");
        }
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = std::move(next);
        res.iterations = l + 1;
        if (opts.keep_iterates) {
            res.iterates.push_back(x);
        }
        if (projected) {
            const double c = nls.cost(x);
            if (c > prev_cost * (1.0 + 1e-12) + 1e-12) {
                res.objective_increased = true;
            }
            prev_cost = c;
        }
        if (opts.early_exit > 0.0 && change < opts.early_exit) {
            break;
        }
    }
    const MatrixXd psi = nls.psi(x);
    MatrixXd hess = psi * psi.transpose();
    linalg::symmetrize(hess);
    res.estimate.k = pred.k;
    res.estimate.x = x;
    res.estimate.P = linalg::spd_inverse(hess, "Gauss-Newton normal matrix");
    linalg::symmetrize(res.estimate.P);
    res.has_negative = x.size() > 0 && x.minCoeff() < 0.0;
    return res;
}

/// Information-form covariance of the augmented corrector:
/// (P^-1 + H'R^-1 H + sigma^-2 grad_rho grad_rho')^-1 at x.
inline MatrixXd covariance_sparsity_aware(const MatrixXd& P, const MatrixXd& H,
                                          const MatrixXd& R, const SparsityMeasurement& m,
                                          const VectorXd& x) {
    MatrixXd info = linalg::spd_inverse(P, "P_pred");
    if (H.rows() > 0) {
        const auto r_llt = linalg::factor_spd(R, "R");
        info += H.transpose() * r_llt.solve(H);
    }
    const VectorXd d = rho_grad(x, m);
    info += (d * d.transpose()) / (m.sigma * m.sigma);
    linalg::symmetrize(info);
    MatrixXd out = linalg::spd_inverse(info, "sparsity-aware information");
    linalg::symmetrize(out);
    return out;
}

}  // namespace tssg
