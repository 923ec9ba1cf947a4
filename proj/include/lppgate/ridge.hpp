#pragma once

// Column standardization and class-weighted ridge regression on 0/1 targets.
//
// Objective (sum convention, intercept unpenalized):
//   sum_i w(z_i) (z_i - (x_i.w + b))^2 + alpha ||w||^2

#include "lppgate/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace lppgate {

struct Scaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // population stddev, 1 for constant columns

    Eigen::Index dims() const { return mean.size(); }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
        if (X.cols() != dims()) throw Error(ErrorCode::FeatureMismatch, "scaler width mismatch");
        return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
};

inline Scaler standardize_fit(const Eigen::MatrixXd& X) {
    if (X.rows() == 0) throw Error(ErrorCode::InvalidArgument, "cannot fit a scaler on zero rows");
    Scaler s;
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - s.mean(j)).square().mean();
        const double sd = std::sqrt(var);
        s.scale(j) = sd > 1e-12 * (1.0 + std::abs(s.mean(j))) ? sd : 1.0;
    }
    return s;
}

inline Eigen::MatrixXd standardize_apply(const Scaler& s, const Eigen::MatrixXd& X) { return s.apply(X); }

struct ClassWeights {
    double w0 = 1.0;  // weight of z = 0 rows
    double w1 = 1.0;

    double of(int z) const { return z == 0 ? w0 : w1; }
};

enum class RidgeSolver : std::uint8_t { ClosedForm, Iterative };

struct RidgeModel {
    Eigen::VectorXd w;
    double b = 0.0;
    int iterations = 0;
    bool converged = true;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return x.dot(w) + b; }

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
        return (X * w).array() + b;
    }
};

inline double ridge_objective(const Eigen::MatrixXd& X, std::span<const int> z, ClassWeights cw, double alpha,
                              const Eigen::VectorXd& w, double b) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double r = z[static_cast<std::size_t>(i)] - (X.row(i).dot(w) + b);
        loss += cw.of(z[static_cast<std::size_t>(i)]) * r * r;
    }
    return loss + alpha * w.squaredNorm();
}

namespace detail {

// CGLS on the damped system  min ||A w - y||^2 + alpha ||w||^2.
inline Eigen::VectorXd cgls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double alpha, double tol,
                            int max_iter, int& iterations, bool& converged) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
    Eigen::VectorXd r = y;
    Eigen::VectorXd s = A.transpose() * r;
    const double s0 = s.norm();
    Eigen::VectorXd p = s;
    double gamma = s.squaredNorm();
    iterations = 0;
    converged = s0 == 0.0;
    while (!converged && iterations < max_iter) {
        const Eigen::VectorXd q = A * p;
        const double delta = q.squaredNorm() + alpha * p.squaredNorm();
        if (!(delta > 0.0)) break;
        const double step = gamma / delta;
        x += step * p;
        r -= step * q;
        s = A.transpose() * r - alpha * x;
        const double gamma_next = s.squaredNorm();
        ++iterations;
        if (std::sqrt(gamma_next) <= tol * s0) {
            converged = true;
            break;
        }
        p = s + (gamma_next / gamma) * p;
        gamma = gamma_next;
    }
    return x;
}

}  // namespace detail

inline RidgeModel fit_ridge_weighted(const Eigen::MatrixXd& X, std::span<const int> z, ClassWeights cw, double alpha,
                                     RidgeSolver solver = RidgeSolver::ClosedForm, double tol = 1e-6,
                                     int max_iter = 1000) {
    const auto n = X.rows();
    if (static_cast<std::size_t>(n) != z.size()) throw Error(ErrorCode::LengthMismatch, "X rows != z length");
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "ridge needs at least two rows");
    if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be non-negative");
    if (!(cw.w0 > 0.0 && cw.w1 > 0.0)) throw Error(ErrorCode::InvalidArgument, "class weights must be positive");

    Eigen::VectorXd omega(n), target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int zi = z[static_cast<std::size_t>(i)];
        omega(i) = cw.of(zi);
        target(i) = zi;
    }
    const double wsum = omega.sum();
    const Eigen::RowVectorXd xbar = (omega.transpose() * X) / wsum;
    const double zbar = omega.dot(target) / wsum;

    // Weighted centering removes the intercept from the penalized system.
    const Eigen::ArrayXd sqrt_w = omega.array().sqrt();
    const Eigen::MatrixXd A = (X.rowwise() - xbar).array().colwise() * sqrt_w;
    const Eigen::VectorXd y = (target.array() - zbar) * sqrt_w;

    RidgeModel m;
    if (solver == RidgeSolver::ClosedForm) {
        Eigen::MatrixXd gram = A.transpose() * A;
        gram.diagonal().array() += alpha;
        const Eigen::VectorXd rhs = A.transpose() * y;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            (ldlt.vectorD().array().abs() < 1e-300).any())
            throw Error(ErrorCode::SingularSystem, "normal equations are singular");
        m.w = ldlt.solve(rhs);
    } else {
        m.w = detail::cgls(A, y, alpha, tol, max_iter, m.iterations, m.converged);
    }
    if (!m.w.allFinite()) throw Error(ErrorCode::SingularSystem, "ridge solution is not finite");
    m.b = zbar - xbar.dot(m.w);
    return m;
}

}  // namespace lppgate
