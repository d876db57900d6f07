#pragma once

// Non-negative, l1-regularized weighted least squares by gradient projection.
//
//   J(x) = ||x_pred - x||^2_{P^-1} + ||y - H x||^2_{R^-1} + 2 lambda 1'x,  x >= 0
//
// The solver works on the information form J(x) = x'Ax - 2b'x + 2 lambda 1'x
// + const with A = P^-1 + H'R^-1 H and b = P^-1 x_pred + H'R^-1 y.

#include "tssg/errors.hpp"
#include "tssg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace tssg {

enum class GpMode { Jacobi, GaussSeidel };

struct SolverOptions {
    GpMode mode = GpMode::GaussSeidel;
    /// Explicit step size gamma; empty selects gamma = 0.95 / L with
    /// L = 2 lambda_max(A) from 50 power iterations.
    std::optional<double> step;
    int max_iters = 500;
    double tolerance = 1e-8;
    /// Gauss-Seidel only: coordinate j uses gamma_j = 1 / (2 A_jj), i.e. an
    /// exact minimization along that coordinate, instead of a common step.
    bool diagonal_step = false;

    void validate() const {
        if (diagonal_step && mode != GpMode::GaussSeidel) {
            throw InvalidArgument("diagonal step sizes need Gauss-Seidel sweeps");
        }
        if (step && !(*step > 0.0)) {
            throw InvalidArgument("solver step size must be positive");
        }
        if (max_iters < 1) {
            throw InvalidArgument("solver max_iters must be at least 1");
        }
        if (!(tolerance > 0.0)) {
            throw InvalidArgument("solver tolerance must be positive");
        }
    }
};

/// One corrector-step instance.
struct RegularizedWlsProblem {
    VectorXd x_pred;
    MatrixXd P_pred;
    VectorXd y;
    MatrixXd H;
    MatrixXd R;
    double lambda = 0.0;
};

struct GpResult {
    VectorXd x;
    int iters = 0;
    bool converged = false;
    /// Projected-gradient residual ||x - [x - gamma grad J(x)]^+||_inf at exit.
    double residual = 0.0;
    double step = 0.0;
};

/// Factorized, ready-to-iterate form of a RegularizedWlsProblem.
class WlsQuadratic {
public:
    static WlsQuadratic from_problem(const RegularizedWlsProblem& p) {
        const Eigen::Index g = p.x_pred.size();
        if (p.P_pred.rows() != g || p.P_pred.cols() != g) {
            throw InvalidArgument("P_pred dimensions do not match x_pred");
        }
        const Eigen::Index n = p.y.size();
        if (p.H.rows() != n || (n > 0 && p.H.cols() != g) || p.R.rows() != n || p.R.cols() != n) {
            throw InvalidArgument("measurement dimensions are inconsistent");
        }
        if (!(p.lambda >= 0.0)) {
            throw InvalidArgument("lambda must be non-negative");
        }
        WlsQuadratic q;
        q.x_pred_ = p.x_pred;
        q.lambda_ = p.lambda;
        q.p_inv_ = linalg::spd_inverse(p.P_pred, "P_pred");
        linalg::symmetrize(q.p_inv_);
        q.a_ = q.p_inv_;
        q.b_ = q.p_inv_ * p.x_pred;
        if (n > 0) {
            const auto r_llt = linalg::factor_spd(p.R, "R");
            q.y_ = p.y;
            q.h_ = p.H;
            q.r_inv_h_ = r_llt.solve(p.H);
            q.r_inv_y_ = r_llt.solve(p.y);
            q.a_.noalias() += p.H.transpose() * q.r_inv_h_;
            q.b_.noalias() += p.H.transpose() * q.r_inv_y_;
            linalg::symmetrize(q.a_);
        }
        return q;
    }

    /// Prior-only problem given directly in information form:
    /// J(x) = (x - x0)' P_inv (x - x0) + 2 lambda 1'x.
    static WlsQuadratic from_information(const VectorXd& x0, const MatrixXd& p_inv,
                                         double lambda) {
        if (p_inv.rows() != x0.size() || p_inv.cols() != x0.size()) {
            throw InvalidArgument("information matrix dimensions do not match");
        }
        if (!(lambda >= 0.0)) {
            throw InvalidArgument("lambda must be non-negative");
        }
        // Validates positive-definiteness.
        (void)linalg::factor_spd(p_inv, "information matrix");
        WlsQuadratic q;
        q.x_pred_ = x0;
        q.lambda_ = lambda;
        q.p_inv_ = p_inv;
        linalg::symmetrize(q.p_inv_);
        q.a_ = q.p_inv_;
        q.b_ = q.p_inv_ * x0;
        return q;
    }

    [[nodiscard]] Eigen::Index dim() const { return x_pred_.size(); }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] const VectorXd& x_pred() const { return x_pred_; }
    [[nodiscard]] const MatrixXd& p_inv() const { return p_inv_; }
    /// A = P^-1 + H'R^-1 H.
    [[nodiscard]] const MatrixXd& curvature() const { return a_; }
    /// b = P^-1 x_pred + H'R^-1 y.
    [[nodiscard]] const VectorXd& linear_term() const { return b_; }

    void set_lambda(double lambda) {
        if (!(lambda >= 0.0)) {
            throw InvalidArgument("lambda must be non-negative");
        }
        lambda_ = lambda;
    }

    [[nodiscard]] double objective(const VectorXd& x) const {
        check_feasible(x);
        const VectorXd dx = x_pred_ - x;
        double j = dx.dot(p_inv_ * dx);
        if (h_.size() > 0) {
            const VectorXd r = y_ - h_ * x;
            // r' R^-1 r = y'R^-1 y - 2 x'H'R^-1 y + x'H'R^-1 H x
            j += r.dot(r_inv_y_ - r_inv_h_ * x);
        }
        return j + 2.0 * lambda_ * x.sum();
    }

    [[nodiscard]] VectorXd gradient(const VectorXd& x) const {
        check_feasible(x);
        return unchecked_gradient(x);
    }

    [[nodiscard]] VectorXd unchecked_gradient(const VectorXd& x) const {
        VectorXd g = a_ * x - b_;
        g.array() += lambda_;
        return 2.0 * g;
    }

    /// Smallest lambda for which x = 0 is the minimizer: ||b||_inf.
    [[nodiscard]] double lambda_bar() const {
        return b_.size() == 0 ? 0.0 : b_.cwiseAbs().maxCoeff();
    }

    /// gamma = 0.95 / L, L = 2 lambda_max(A).
    [[nodiscard]] double auto_step() const {
        const double lmax = linalg::power_iteration_max_eig(a_, 50);
        if (!(lmax > 0.0) || !std::isfinite(lmax)) {
            throw NumericalFailure("could not estimate the gradient Lipschitz constant");
        }
        return 0.95 / (2.0 * lmax);
    }

    [[nodiscard]] double projected_residual(const VectorXd& x, double gamma) const {
        const VectorXd g = unchecked_gradient(x);
        return (x - (x - gamma * g).cwiseMax(0.0)).cwiseAbs().maxCoeff();
    }

    /// Same residual with per-coordinate steps gamma_j = 1 / (2 A_jj).
    [[nodiscard]] double projected_residual_diagonal(const VectorXd& x) const {
        const VectorXd g = unchecked_gradient(x);
        const VectorXd steps = (2.0 * a_.diagonal()).cwiseInverse();
        return (x - (x - steps.cwiseProduct(g)).cwiseMax(0.0)).cwiseAbs().maxCoeff();
    }

private:
    static void check_feasible(const VectorXd& x) {
        if (x.size() > 0 && x.minCoeff() < 0.0) {
            throw InvalidArgument("point must be entrywise non-negative");
        }
    }

    VectorXd x_pred_;
    double lambda_ = 0.0;
    MatrixXd p_inv_;
    MatrixXd a_;
    VectorXd b_;
    VectorXd y_;
    MatrixXd h_;
    MatrixXd r_inv_h_;
    VectorXd r_inv_y_;
};

inline double objective(const RegularizedWlsProblem& p, const VectorXd& x) {
    return WlsQuadratic::from_problem(p).objective(x);
}

inline VectorXd gradient(const RegularizedWlsProblem& p, const VectorXd& x) {
    return WlsQuadratic::from_problem(p).gradient(x);
}

inline double lambda_bar(const RegularizedWlsProblem& p) {
    return WlsQuadratic::from_problem(p).lambda_bar();
}

/// Gradient projection (Jacobi: all coordinates at once; Gauss-Seidel:
/// ascending coordinate sweep using fresh values). Starts from `start`
/// projected onto the orthant, or from x_pred when no start is given.
inline GpResult solve_gp(const WlsQuadratic& q, const SolverOptions& opts,
                         const std::optional<VectorXd>& start = std::nullopt) {
    opts.validate();
    const Eigen::Index g = q.dim();
    GpResult res;
    res.x = (start ? *start : q.x_pred()).cwiseMax(0.0);
    if (res.x.size() != g) {
        throw InvalidArgument("initial iterate has the wrong dimension");
    }
    if (g == 0) {
        res.converged = true;
        return res;
    }
    const MatrixXd& a = q.curvature();
    const VectorXd& b = q.linear_term();
    const double lam = q.lambda();
    const bool diagonal = opts.diagonal_step;
    const double gamma = diagonal ? 0.0 : (opts.step ? *opts.step : q.auto_step());
    res.step = gamma;
    const auto residual = [&]() {
        return diagonal ? q.projected_residual_diagonal(res.x) : q.projected_residual(res.x, gamma);
    };

    for (int it = 1; it <= opts.max_iters; ++it) {
        res.iters = it;
        double change = 0.0;
        if (opts.mode == GpMode::Jacobi) {
            VectorXd grad = a * res.x - b;
            grad.array() += lam;
            const VectorXd next = (res.x - (2.0 * gamma) * grad).cwiseMax(0.0);
            change = (next - res.x).cwiseAbs().maxCoeff();
            res.x = next;
        } else {
            for (Eigen::Index j = 0; j < g; ++j) {
                const double grad_j = 2.0 * (a.col(j).dot(res.x) - b(j) + lam);
                const double gamma_j = diagonal ? 0.5 / a(j, j) : gamma;
                const double updated = std::max(0.0, res.x(j) - gamma_j * grad_j);
                change = std::max(change, std::abs(updated - res.x(j)));
                res.x(j) = updated;
            }
        }
        if (!std::isfinite(change) || !res.x.allFinite()) {
            throw NumericalFailure("gradient projection produced a non-finite iterate");
        }
        if (change <= opts.tolerance) {
            res.residual = residual();
            if (res.residual <= opts.tolerance) {
                res.converged = true;
                return res;
            }
        }
    }
    res.residual = residual();
    res.converged = res.residual <= opts.tolerance;
    return res;
}

inline GpResult solve_gp(const RegularizedWlsProblem& p, const SolverOptions& opts) {
    return solve_gp(WlsQuadratic::from_problem(p), opts);
}

/// argmin_{x >= 0} (x - z)' B (x - z) for symmetric positive-definite B.
inline VectorXd project_nonneg_bmetric(const VectorXd& z, const MatrixXd& b,
                                       const SolverOptions& opts = {},
                                       const std::optional<VectorXd>& start = std::nullopt) {
    const auto q = WlsQuadratic::from_information(z, b, 0.0);
    if (z.size() == 0 || z.minCoeff() >= 0.0) {
        return z;
    }
    return solve_gp(q, opts, start).x;
}

}  // namespace tssg
