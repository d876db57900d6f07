#pragma once

#include "tssg/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace tssg {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

namespace linalg {

/// Cholesky factorization of a symmetric positive-definite matrix. If the
/// plain factorization fails, a jitter of 1e-10 * trace / n is added to the
/// diagonal once; a second failure throws FactorizationError.
inline Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& a, const std::string& what) {
    if (a.rows() != a.cols()) {
        throw InvalidArgument(what + ": matrix is not square");
    }
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    const auto n = static_cast<double>(a.rows());
    const double jitter = 1e-10 * std::abs(a.trace()) / (n > 0 ? n : 1.0);
    MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() != Eigen::Success || jitter == 0.0) {
        throw FactorizationError(what + ": matrix is not positive-definite");
    }
    return llt;
}

inline MatrixXd spd_inverse(const MatrixXd& a, const std::string& what) {
    const auto llt = factor_spd(a, what);
    return llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
}

inline void symmetrize(MatrixXd& a) {
    a = 0.5 * (a + a.transpose()).eval();
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration started
/// from the normalized all-ones vector. Returns the final Rayleigh quotient.
inline double power_iteration_max_eig(const MatrixXd& a, int iterations = 50) {
    const Eigen::Index n = a.rows();
    if (n == 0) {
        return 0.0;
    }
    VectorXd v = VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    double estimate = v.dot(a * v);
    for (int it = 0; it < iterations; ++it) {
        VectorXd w = a * v;
        const double norm = w.norm();
        if (norm == 0.0 || !std::isfinite(norm)) {
            break;
        }
        v = w / norm;
        estimate = v.dot(a * v);
    }
    return estimate;
}

inline bool all_finite(const VectorXd& v) {
    return v.allFinite();
}

}  // namespace linalg
}  // namespace tssg
