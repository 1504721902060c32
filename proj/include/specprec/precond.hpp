#pragma once

#include "specprec/core.hpp"
#include "specprec/operator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace specprec {

/// Operation tally for preconditioner applications.
struct ApplyCounts {
    std::size_t inner_products = 0;
    std::size_t axpys = 0;
};

/// k orthonormal eigenvectors s_i, i in an index set. For diagonal operators
/// the vectors are canonical unit vectors and only the indices are stored.
class SpectralBasis {
public:
    static SpectralBasis canonical(Index n, std::vector<Index> indices) {
        SpectralBasis b;
        b.n_ = n;
        b.indices_ = std::move(indices);
        for (Index i : b.indices_) {
            if (i < 0 || i >= n) throw std::out_of_range("SpectralBasis: index out of range");
        }
        return b;
    }

    static SpectralBasis explicit_columns(std::vector<Index> indices, Matrix columns) {
        if (static_cast<Index>(indices.size()) != columns.cols()) {
            throw DimensionError("SpectralBasis: one column per index required");
        }
        const Index k = columns.cols();
        const Matrix gram = columns.transpose() * columns;
        if (k > 0 && (gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-12) {
            throw std::invalid_argument("SpectralBasis: eigenvectors not orthonormal to 1e-12");
        }
        SpectralBasis b;
        b.n_ = columns.rows();
        b.indices_ = std::move(indices);
        b.columns_ = std::move(columns);
        return b;
    }

    Index dim() const { return n_; }
    Index rank() const { return static_cast<Index>(indices_.size()); }
    bool is_canonical() const { return !columns_.has_value(); }
    const std::vector<Index>& indices() const { return indices_; }

    /// s_j^T y
    double dot(Index j, const Vector& y) const {
        if (columns_) return columns_->col(j).dot(y);
        return y[indices_[static_cast<std::size_t>(j)]];
    }

    /// out += c * s_j
    void axpy(Index j, double c, Vector& out) const {
        if (columns_) {
            out += c * columns_->col(j);
        } else {
            out[indices_[static_cast<std::size_t>(j)]] += c;
        }
    }

    Vector column(Index j) const {
        if (columns_) return columns_->col(j);
        return Vector::Unit(n_, indices_[static_cast<std::size_t>(j)]);
    }

private:
    Index n_ = 0;
    std::vector<Index> indices_;
    std::optional<Matrix> columns_;
};

/// k selected eigenpairs (indices 0-based, ascending) and the extremes of the
/// spectrum needed by the theta strategies.
struct SpectralData {
    Index n = 0;
    std::vector<Index> indices;
    Vector eigenvalues;  // lambda_i for i in indices, same order
    SpectralBasis basis;
    /// 0-based start of the contiguous complement window {j0, ..., j0+n-k-1};
    /// set by select_index_set, absent for arbitrary index sets.
    std::optional<Index> complement_begin;
    double complement_largest = 0.0;   // max lambda over the complement
    double complement_smallest = 0.0;  // min lambda over the complement
    double lambda_max = 0.0;           // lambda_1
    double lambda_min = 0.0;           // lambda_n

    Index k() const { return static_cast<Index>(indices.size()); }

    std::vector<Index> complement() const {
        std::vector<Index> out;
        out.reserve(static_cast<std::size_t>(n - k()));
        std::size_t j = 0;
        for (Index i = 0; i < n; ++i) {
            if (j < indices.size() && indices[j] == i) {
                ++j;
            } else {
                out.push_back(i);
            }
        }
        return out;
    }

    /// Which part of the spectrum was taken: 1 = largest k, 2 = smallest k, 3 = mixture.
    int selection_case() const {
        if (!complement_begin) throw std::logic_error("SpectralData: no contiguous complement window");
        if (*complement_begin == k()) return 1;
        if (*complement_begin == 0) return 2;
        return 3;
    }
};

namespace detail {

inline void check_decreasing(const Vector& lambda) {
    detail::check_spectrum(lambda, "spectral data");
    for (Index i = 1; i < lambda.size(); ++i) {
        if (lambda[i] > lambda[i - 1]) throw std::invalid_argument("eigenvalues must be non-increasing");
    }
}

}  // namespace detail

/// Spectral data for an arbitrary index set (0-based). The basis defaults to
/// the canonical one; pass explicit eigenvector columns for dense operators.
inline SpectralData make_spectral_data(const Vector& all_eigenvalues, std::vector<Index> indices,
                                       std::optional<Matrix> eigenvectors = std::nullopt) {
    detail::check_decreasing(all_eigenvalues);
    const Index n = all_eigenvalues.size();
    std::sort(indices.begin(), indices.end());
    if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
        throw std::invalid_argument("make_spectral_data: duplicate indices");
    }
    const auto k = static_cast<Index>(indices.size());
    if (k < 1 || k >= n) throw std::out_of_range("make_spectral_data: need 1 <= k < n");

    SpectralData d;
    d.n = n;
    d.eigenvalues.resize(k);
    for (Index j = 0; j < k; ++j) {
        const Index i = indices[static_cast<std::size_t>(j)];
        if (i < 0 || i >= n) throw std::out_of_range("make_spectral_data: index out of range");
        d.eigenvalues[j] = all_eigenvalues[i];
    }
    d.basis = eigenvectors ? SpectralBasis::explicit_columns(indices, std::move(*eigenvectors))
                           : SpectralBasis::canonical(n, indices);
    require_dim(d.basis.dim(), n, "make_spectral_data(eigenvectors)");
    d.indices = std::move(indices);
    d.lambda_max = all_eigenvalues[0];
    d.lambda_min = all_eigenvalues[n - 1];

    const auto comp = d.complement();
    d.complement_largest = all_eigenvalues[comp.front()];
    d.complement_smallest = all_eigenvalues[comp.back()];
    return d;
}

/// Index set minimising the condition number of the remaining spectrum:
/// j0 = argmin_{1<=j<=k+1} lambda_j / lambda_{n-k+j-1} (smallest j0 on ties),
/// pi_k = {1..j0-1} U {n-k+j0..n}. Returned with a canonical (index-only) basis.
inline SpectralData select_index_set(const Vector& eigenvalues, Index k) {
    detail::check_decreasing(eigenvalues);
    const Index n = eigenvalues.size();
    if (k < 1 || k >= n) throw std::out_of_range("select_index_set: need 1 <= k < n");

    // 0-based: window [j, j + n - k - 1] for j = 0..k
    Index best = 0;
    double best_ratio = eigenvalues[0] / eigenvalues[n - k - 1];
    for (Index j = 1; j <= k; ++j) {
        const double ratio = eigenvalues[j] / eigenvalues[j + n - k - 1];
        if (ratio < best_ratio) {
            best_ratio = ratio;
            best = j;
        }
    }
    std::vector<Index> indices;
    indices.reserve(static_cast<std::size_t>(k));
    for (Index i = 0; i < best; ++i) indices.push_back(i);
    for (Index i = best + n - k; i < n; ++i) indices.push_back(i);

    SpectralData d = make_spectral_data(eigenvalues, std::move(indices));
    d.complement_begin = best;
    return d;
}

/// select_index_set on the operator's spectrum, carrying its eigenvectors.
template <SpectralOperator Op>
SpectralData select_index_set(const Op& op, Index k) {
    SpectralData d = select_index_set(op.eigenvalues(), k);
    if constexpr (!Op::canonical_eigenbasis) {
        Matrix cols(op.dim(), d.k());
        for (Index j = 0; j < d.k(); ++j) cols.col(j) = op.eigenvector(d.indices[static_cast<std::size_t>(j)]);
        d.basis = SpectralBasis::explicit_columns(d.indices, std::move(cols));
    }
    return d;
}

/// Eigenvector columns of `op` for the given indices (nullopt for canonical bases).
template <SpectralOperator Op>
std::optional<Matrix> eigenvectors_for(const Op& op, const std::vector<Index>& indices) {
    if constexpr (Op::canonical_eigenbasis) {
        return std::nullopt;
    } else {
        Matrix cols(op.dim(), static_cast<Index>(indices.size()));
        for (std::size_t j = 0; j < indices.size(); ++j) cols.col(static_cast<Index>(j)) = op.eigenvector(indices[j]);
        return cols;
    }
}

/// F = I + sum_j d_j s_j s_j^T with 1 + d_j > 0; a rank-k update of the identity.
class SpectralPreconditioner {
public:
    SpectralPreconditioner(SpectralBasis basis, Vector coefficients)
        : basis_(std::move(basis)), d_(std::move(coefficients)) {
        require_dim(d_.size(), basis_.rank(), "SpectralPreconditioner(coefficients)");
        for (Index j = 0; j < d_.size(); ++j) {
            if (!(1.0 + d_[j] > 0.0)) throw std::invalid_argument("SpectralPreconditioner: 1 + d_i must be positive");
        }
    }

    Index dim() const { return basis_.dim(); }
    const SpectralBasis& basis() const { return basis_; }
    const Vector& coefficients() const { return d_; }

    /// z = F y: k inner products and k scaled additions.
    void apply(const Vector& y, Vector& z, ApplyCounts* counts = nullptr) const {
        require_dim(y.size(), dim(), "SpectralPreconditioner::apply");
        z = y;
        for (Index j = 0; j < d_.size(); ++j) {
            const double c = basis_.dot(j, y);
            basis_.axpy(j, d_[j] * c, z);
        }
        if (counts) {
            counts->inner_products += static_cast<std::size_t>(d_.size());
            counts->axpys += static_cast<std::size_t>(d_.size());
        }
    }

    /// z = U y with U = I + sum_j (sqrt(1 + d_j) - 1) s_j s_j^T, U = U^T, U U = F.
    void apply_square_root(const Vector& y, Vector& z) const {
        require_dim(y.size(), dim(), "SpectralPreconditioner::apply_square_root");
        z = y;
        for (Index j = 0; j < d_.size(); ++j) {
            const double c = basis_.dot(j, y);
            basis_.axpy(j, (std::sqrt(1.0 + d_[j]) - 1.0) * c, z);
        }
    }

    Matrix to_dense() const {
        Matrix f = Matrix::Identity(dim(), dim());
        for (Index j = 0; j < d_.size(); ++j) {
            const Vector s = basis_.column(j);
            f += d_[j] * s * s.transpose();
        }
        return f;
    }

private:
    SpectralBasis basis_;
    Vector d_;
};

/// F(theta, pi_k) = I + sum_{i in pi_k} (theta / lambda_i - 1) s_i s_i^T.
/// F A has spectrum {theta (x k)} U {lambda_i : i not in pi_k}.
class ScaledSpectralPreconditioner {
public:
    ScaledSpectralPreconditioner(SpectralData spectral, double theta)
        : spectral_(std::move(spectral)), theta_(theta), update_(make_update(spectral_, theta)) {}

    Index dim() const { return update_.dim(); }
    double theta() const { return theta_; }
    const SpectralData& spectral() const { return spectral_; }
    const SpectralPreconditioner& update() const { return update_; }

    void apply(const Vector& y, Vector& z, ApplyCounts* counts = nullptr) const { update_.apply(y, z, counts); }
    void apply_square_root(const Vector& y, Vector& z) const { update_.apply_square_root(y, z); }

private:
    static SpectralPreconditioner make_update(const SpectralData& s, double theta) {
        if (!(theta > 0.0) || !std::isfinite(theta)) {
            throw std::invalid_argument("ScaledSpectralPreconditioner: theta must be positive");
        }
        Vector d(s.k());
        for (Index j = 0; j < s.k(); ++j) d[j] = theta / s.eigenvalues[j] - 1.0;
        return SpectralPreconditioner(s.basis, std::move(d));
    }

    SpectralData spectral_;
    double theta_;
    SpectralPreconditioner update_;
};

inline ScaledSpectralPreconditioner build_preconditioner(SpectralData spectral, double theta) {
    return ScaledSpectralPreconditioner(std::move(spectral), theta);
}

inline Vector apply_preconditioner(const ScaledSpectralPreconditioner& f, const Vector& y,
                                   ApplyCounts* counts = nullptr) {
    Vector z(f.dim());
    f.apply(y, z, counts);
    return z;
}

inline Vector apply_square_root(const ScaledSpectralPreconditioner& f, const Vector& y) {
    Vector z(f.dim());
    f.apply_square_root(y, z);
    return z;
}

/// alpha(theta) / theta with alpha(theta) = max(|lambda_j0 - theta|, |theta - lambda_{n-k+j0-1}|),
/// the contraction factor bounding PCG(F_theta) against the previous deflated CG step.
inline double contraction_ratio(double theta, const SpectralData& spectral) {
    if (!(theta > 0.0)) throw std::invalid_argument("contraction_ratio: theta must be positive");
    const double alpha = std::max(std::abs(spectral.complement_largest - theta),
                                  std::abs(theta - spectral.complement_smallest));
    return alpha / theta;
}

/// Minimiser of contraction_ratio: the midpoint of the complement's spectral interval.
inline double window_midpoint(const SpectralData& spectral) {
    return 0.5 * (spectral.complement_largest + spectral.complement_smallest);
}

/// True when alpha(theta)/theta >= 1, i.e. the deflation bound is no longer contractive.
inline bool has_pessimistic_bound(double theta, const SpectralData& spectral) {
    return contraction_ratio(theta, spectral) >= 1.0;
}

struct ThetaStrategy {
    enum class Kind { MidRange, FirstIterationOptimal, RangeEndpoint, SmallestEigenvalue, Fixed };

    Kind kind = Kind::MidRange;
    double value = 0.0;  // Fixed only

    static ThetaStrategy mid_range() { return {Kind::MidRange, 0.0}; }
    static ThetaStrategy first_iteration_optimal() { return {Kind::FirstIterationOptimal, 0.0}; }
    static ThetaStrategy range_endpoint() { return {Kind::RangeEndpoint, 0.0}; }
    static ThetaStrategy smallest_eigenvalue() { return {Kind::SmallestEigenvalue, 0.0}; }
    static ThetaStrategy fixed(double v) {
        if (!(v > 0.0)) throw std::invalid_argument("ThetaStrategy::fixed: value must be positive");
        return {Kind::Fixed, v};
    }
};

namespace detail {

/// Known eigenvalues bracketing the complement window from the selected side,
/// plus the spectrum extreme on the far side:
///   case 1: (lambda_k, lambda_n), case 2: (lambda_1, lambda_{n-k+1}),
///   case 3: (lambda_{j0-1}, lambda_{n-k+j0}).
inline std::pair<double, double> practical_bracket(const SpectralData& s) {
    switch (s.selection_case()) {
        case 1: return {s.eigenvalues[s.k() - 1], s.lambda_min};
        case 2: return {s.lambda_max, s.eigenvalues[0]};
        default: {
            // selected eigenvalues are stored in index order, top block first
            const Index top = *s.complement_begin;
            return {s.eigenvalues[top - 1], s.eigenvalues[top]};
        }
    }
}

}  // namespace detail

/// theta_1 = (r0^T A r0 - sum_pi lambda_i (s_i^T r0)^2) / (r0^T r0 - sum_pi (s_i^T r0)^2),
/// evaluated as w^T A w / w^T w with w = r0 - sum_pi (s_i^T r0) s_i. Same value;
/// the subtracted form cancels away the digits of the complement whenever
/// the deflated eigenvalues dominate. Costs one operator application.
template <LinearOperator Op>
double first_iteration_theta(const SpectralData& spectral, const Op& op, const Vector& r0) {
    require_dim(r0.size(), op.dim(), "first_iteration_theta");
    Vector w = r0;
    for (Index j = 0; j < spectral.k(); ++j) spectral.basis.axpy(j, -spectral.basis.dot(j, r0), w);
    const double den = w.dot(w);
    // Relative floor: an r0 inside span{s_i} leaves only rounding behind.
    if (!(den > 1e-14 * r0.dot(r0))) {
        throw DegenerateResidualError("first_iteration_theta: r0 has no component outside the selected eigenspace");
    }
    return w.dot(apply(op, w)) / den;
}

template <LinearOperator Op>
double compute_theta(const ThetaStrategy& strategy, const SpectralData& spectral, const ProblemInstance<Op>& problem) {
    switch (strategy.kind) {
        case ThetaStrategy::Kind::MidRange: {
            const auto [a, b] = detail::practical_bracket(spectral);
            return 0.5 * (a + b);
        }
        case ThetaStrategy::Kind::RangeEndpoint: return detail::practical_bracket(spectral).first;
        case ThetaStrategy::Kind::SmallestEigenvalue: return spectral.lambda_min;
        case ThetaStrategy::Kind::FirstIterationOptimal:
            return first_iteration_theta(spectral, *problem.op, problem.initial_residual());
        case ThetaStrategy::Kind::Fixed: return strategy.value;
    }
    throw std::logic_error("compute_theta: unknown strategy");
}

}  // namespace specprec
