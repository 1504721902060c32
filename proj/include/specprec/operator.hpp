#pragma once

#include "specprec/core.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace specprec {

/// A square linear map applied matrix-free. `apply` assigns op * x into y.
template <class Op>
concept LinearOperator = requires(const Op& op, const Vector& x, Vector& y) {
    { op.dim() } -> std::convertible_to<Index>;
    op.apply(x, y);
};

/// An SPD operator whose eigendecomposition A = S diag(lambda) S^T is known,
/// with eigenvalues stored non-increasing.
template <class Op>
concept SpectralOperator = LinearOperator<Op> && requires(const Op& op, const Vector& x, Index i) {
    { op.eigenvalues() } -> std::convertible_to<const Vector&>;
    { op.to_eigenbasis(x) } -> std::convertible_to<Vector>;
    { op.solve_exact(x) } -> std::convertible_to<Vector>;
    { op.eigenvector(i) } -> std::convertible_to<Vector>;
    { Op::canonical_eigenbasis } -> std::convertible_to<bool>;
};

namespace detail {

inline void check_spectrum(const Vector& eigenvalues, const char* who) {
    if (eigenvalues.size() == 0) {
        throw std::invalid_argument(std::string(who) + ": empty spectrum");
    }
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        if (!(eigenvalues[i] > 0.0) || !std::isfinite(eigenvalues[i])) {
            throw std::invalid_argument(std::string(who) + ": eigenvalues must be finite and positive");
        }
    }
}

}  // namespace detail

/// A = diag(lambda_1, ..., lambda_n) with lambda_1 >= ... >= lambda_n > 0.
/// Eigenvectors are the canonical basis.
class DiagonalOperator {
public:
    static constexpr bool canonical_eigenbasis = true;

    explicit DiagonalOperator(Vector eigenvalues) : lambda_(std::move(eigenvalues)) {
        detail::check_spectrum(lambda_, "DiagonalOperator");
        for (Index i = 1; i < lambda_.size(); ++i) {
            if (lambda_[i] > lambda_[i - 1]) {
                throw std::invalid_argument("DiagonalOperator: eigenvalues must be non-increasing");
            }
        }
    }

    Index dim() const { return lambda_.size(); }

    void apply(const Vector& x, Vector& y) const {
        require_dim(x.size(), dim(), "DiagonalOperator::apply");
        y = lambda_.cwiseProduct(x);
    }

    const Vector& eigenvalues() const { return lambda_; }
    Vector to_eigenbasis(const Vector& v) const {
        require_dim(v.size(), dim(), "DiagonalOperator::to_eigenbasis");
        return v;
    }
    Vector solve_exact(const Vector& b) const {
        require_dim(b.size(), dim(), "DiagonalOperator::solve_exact");
        return b.cwiseQuotient(lambda_);
    }
    Vector eigenvector(Index i) const { return Vector::Unit(dim(), i); }

private:
    Vector lambda_;
};

/// A = S diag(lambda) S^T stored in factored form. The constructor sorts the
/// eigenvalues into non-increasing order and permutes the columns of S to match.
class DenseSpdOperator {
public:
    static constexpr bool canonical_eigenbasis = false;

    DenseSpdOperator(Matrix factor, Vector eigenvalues) {
        const Index n = eigenvalues.size();
        if (factor.rows() != n || factor.cols() != n) {
            throw DimensionError("DenseSpdOperator: factor must be n x n with n = len(eigenvalues)");
        }
        detail::check_spectrum(eigenvalues, "DenseSpdOperator");
        const Matrix gram = factor.transpose() * factor;
        if ((gram - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12) {
            throw std::invalid_argument("DenseSpdOperator: factor is not orthogonal to 1e-12");
        }

        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return eigenvalues[a] > eigenvalues[b]; });
        factor_.resize(n, n);
        lambda_.resize(n);
        for (Index j = 0; j < n; ++j) {
            factor_.col(j) = factor.col(order[static_cast<std::size_t>(j)]);
            lambda_[j] = eigenvalues[order[static_cast<std::size_t>(j)]];
        }
    }

    /// Random orthogonal eigenbasis (Q factor of a Gaussian matrix) with the given spectrum.
    template <class Rng>
    static DenseSpdOperator random(const Vector& eigenvalues, Rng& rng) {
        const Index n = eigenvalues.size();
        std::normal_distribution<double> normal;
        Matrix g(n, n);
        for (Index j = 0; j < n; ++j) {
            for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
        }
        Eigen::HouseholderQR<Matrix> qr(g);
        Matrix q = qr.householderQ() * Matrix::Identity(n, n);
        return DenseSpdOperator(std::move(q), eigenvalues);
    }

    Index dim() const { return lambda_.size(); }

    void apply(const Vector& x, Vector& y) const {
        require_dim(x.size(), dim(), "DenseSpdOperator::apply");
        Vector coeffs = factor_.transpose() * x;
        coeffs.array() *= lambda_.array();
        y = factor_ * coeffs;
    }

    const Vector& eigenvalues() const { return lambda_; }
    const Matrix& factor() const { return factor_; }

    Vector to_eigenbasis(const Vector& v) const {
        require_dim(v.size(), dim(), "DenseSpdOperator::to_eigenbasis");
        return factor_.transpose() * v;
    }
    Vector solve_exact(const Vector& b) const {
        Vector coeffs = to_eigenbasis(b);
        coeffs.array() /= lambda_.array();
        return factor_ * coeffs;
    }
    Vector eigenvector(Index i) const { return factor_.col(i); }

    Matrix to_dense() const { return factor_ * lambda_.asDiagonal() * factor_.transpose(); }

private:
    Matrix factor_;
    Vector lambda_;
};

/// Wraps an explicit symmetric matrix. Used for composed systems in tests
/// (split-preconditioned U^T A U) where no eigendecomposition is carried.
class DenseMatrixOperator {
public:
    explicit DenseMatrixOperator(Matrix a) : a_(std::move(a)) {
        if (a_.rows() != a_.cols()) throw DimensionError("DenseMatrixOperator: matrix must be square");
    }
    Index dim() const { return a_.rows(); }
    void apply(const Vector& x, Vector& y) const {
        require_dim(x.size(), dim(), "DenseMatrixOperator::apply");
        y.noalias() = a_ * x;
    }
    const Matrix& matrix() const { return a_; }

private:
    Matrix a_;
};

template <LinearOperator Op>
Vector apply(const Op& op, const Vector& x) {
    require_dim(x.size(), op.dim(), "apply");
    Vector y(op.dim());
    op.apply(x, y);
    return y;
}

/// sqrt((x* - x)^T A (x* - x)); one operator application.
template <LinearOperator Op>
double energy_norm_error(const Op& op, const Vector& x, const Vector& x_star) {
    require_dim(x.size(), op.dim(), "energy_norm_error(x)");
    require_dim(x_star.size(), op.dim(), "energy_norm_error(x_star)");
    const Vector e = x_star - x;
    Vector ae(op.dim());
    op.apply(e, ae);
    return std::sqrt(std::max(0.0, e.dot(ae)));
}

/// eta = S^T r0, the components of r0 in the eigenbasis.
template <SpectralOperator Op>
Vector residual_components(const Op& op, const Vector& r0) {
    return op.to_eigenbasis(r0);
}

/// b, x0 and optionally the exact solution x* for A x = b.
template <LinearOperator Op>
struct ProblemInstance {
    std::shared_ptr<const Op> op;
    Vector rhs;
    Vector initial_guess;
    std::optional<Vector> reference_solution;

    Index dim() const { return op->dim(); }

    Vector initial_residual() const { return rhs - apply(*op, initial_guess); }
};

/// Builds a problem with x0 = 0 unless given. For spectral backends the
/// reference solution is computed from the eigendecomposition, never by a solver.
template <LinearOperator Op>
ProblemInstance<Op> make_problem(std::shared_ptr<const Op> op, Vector rhs,
                                 std::optional<Vector> initial_guess = std::nullopt,
                                 std::optional<Vector> reference_solution = std::nullopt) {
    if (!op) throw std::invalid_argument("make_problem: null operator");
    const Index n = op->dim();
    require_dim(rhs.size(), n, "make_problem(rhs)");
    Vector x0 = initial_guess ? std::move(*initial_guess) : Vector::Zero(n);
    require_dim(x0.size(), n, "make_problem(initial_guess)");

    if (reference_solution) {
        require_dim(reference_solution->size(), n, "make_problem(reference_solution)");
        const double defect = (apply(*op, *reference_solution) - rhs).norm();
        if (defect > 1e-10 * rhs.norm()) {
            throw std::invalid_argument("make_problem: reference solution does not satisfy A x* = b");
        }
    } else if constexpr (SpectralOperator<Op>) {
        reference_solution = op->solve_exact(rhs);
    }
    return ProblemInstance<Op>{std::move(op), std::move(rhs), std::move(x0), std::move(reference_solution)};
}

}  // namespace specprec
