#pragma once

#include "specprec/core.hpp"
#include "specprec/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace specprec {

/// Diagonal system diag(lambdas) y = etas on a subset of the spectrum.
/// min over p in P_l(0) of sum_i (eta_i^2 / lambda_i) p(lambda_i)^2 is the
/// squared energy error of l CG steps on it from y0 = 0.
struct ReducedSystem {
    Vector lambdas;
    Vector etas;

    ReducedSystem(Vector l, Vector e) : lambdas(std::move(l)), etas(std::move(e)) {
        if (lambdas.size() != etas.size()) throw DimensionError("ReducedSystem: lambdas and etas differ in length");
        for (Index i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] > 0.0)) throw std::invalid_argument("ReducedSystem: lambdas must be positive");
        }
    }

    /// Restriction to the given (0-based) indices of a full spectrum.
    static ReducedSystem restrict_to(const Vector& lambdas, const Vector& etas, const std::vector<Index>& indices) {
        if (lambdas.size() != etas.size()) throw DimensionError("ReducedSystem: lambdas and etas differ in length");
        Vector l(static_cast<Index>(indices.size()));
        Vector e(static_cast<Index>(indices.size()));
        for (std::size_t j = 0; j < indices.size(); ++j) {
            l[static_cast<Index>(j)] = lambdas[indices[j]];
            e[static_cast<Index>(j)] = etas[indices[j]];
        }
        return ReducedSystem(std::move(l), std::move(e));
    }

    Index size() const { return lambdas.size(); }

    /// sum_i eta_i^2 / lambda_i, the squared initial energy error.
    double initial_error() const {
        double s = 0.0;
        for (Index i = 0; i < size(); ++i) s += etas[i] * etas[i] / lambdas[i];
        return s;
    }
};

namespace detail {

// The oracle runs in quad precision where the compiler offers it. Plain CG
// in double loses orthogonality on widely spread spectra and then departs
// from the exact Krylov minimum; 113 mantissa bits push that far past any
// step count used here.
#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
using oracle_real = __float128;
#else
using oracle_real = long double;
#endif

/// Newton square root, good to the last bit of oracle_real.
inline oracle_real sqrt_extended(oracle_real x) {
    if (!(x > 0)) return 0;
    oracle_real r = std::sqrt(static_cast<long double>(x));
    for (int i = 0; i < 3; ++i) r = (r + x / r) / 2;
    return r;
}

}  // namespace detail

/// CG history on a reduced system: squared energy errors for l = 0..steps and
/// the coefficients alpha_l, beta_{l+1} of each completed step.
struct DiagonalCgHistory {
    std::vector<double> squared_errors;
    std::vector<double> alphas;
    std::vector<double> betas;
    bool converged = false;  // reached the grade (residual vanished) within the budget
    // the same coefficients unrounded, for root refinement
    std::vector<detail::oracle_real> exact_alphas;
    std::vector<detail::oracle_real> exact_betas;

    int steps() const { return static_cast<int>(alphas.size()); }
};

/// CG on diag(lambdas) y = etas from y0 = 0, carried out through its Lanczos
/// form in extended precision with full reorthogonalization. In exact
/// arithmetic this is plain CG step for step: alpha_j = 1/d_j and
/// beta_j = (t_{j,j+1}/d_j)^2 from the pivots d_j of T_l = L D L^T, and the
/// iterate is V_l T_l^{-1} ||eta|| e_1. Without reorthogonalization, Ritz
/// values that converge below the working precision make even a quad
/// precision recurrence drift from the exact Krylov minimum.
inline DiagonalCgHistory diagonal_cg_history(const ReducedSystem& sys, int max_steps) {
    using R = detail::oracle_real;
    if (max_steps < 0) throw std::invalid_argument("diagonal_cg_history: negative step count");
    // Equal eigenvalues are merged into one with the combined weight. The
    // minimum only sees distinct eigenvalues, and rounding inside an unmerged
    // cluster seeds directions orthogonal to the Krylov space that no
    // reorthogonalization removes and that grow until they enter the basis.
    std::vector<std::pair<double, R>> merged;  // (lambda, eta^2)
    for (Index i = 0; i < sys.size(); ++i) {
        if (sys.etas[i] == 0.0) continue;
        const R e = sys.etas[i];
        merged.emplace_back(sys.lambdas[i], e * e);
    }
    std::sort(merged.begin(), merged.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<R> lam, x_star, eta;
    R norm2 = 0;
    for (std::size_t i = 0; i < merged.size();) {
        R w2 = 0;
        std::size_t j = i;
        for (; j < merged.size() && merged[j].first == merged[i].first; ++j) w2 += merged[j].second;
        lam.push_back(merged[i].first);
        eta.push_back(detail::sqrt_extended(w2));
        x_star.push_back(eta.back() / lam.back());
        norm2 += w2;
        i = j;
    }
    const std::size_t m = lam.size();
    const auto grade = static_cast<int>(m);

    DiagonalCgHistory h;
    R e0 = 0;
    for (std::size_t i = 0; i < m; ++i) e0 += lam[i] * x_star[i] * x_star[i];
    h.squared_errors.push_back(static_cast<double>(e0));
    if (grade == 0) {
        h.converged = true;
        return h;
    }

    const R beta0 = detail::sqrt_extended(norm2);
    std::vector<std::vector<R>> basis;
    std::vector<R> q(m), a, b;  // T_l diagonal and off-diagonal
    for (std::size_t i = 0; i < m; ++i) q[i] = eta[i] / beta0;
    std::vector<R> pivots;
    const int limit = std::min(max_steps, grade);
    for (int j = 0; j < limit; ++j) {
        basis.push_back(q);
        std::vector<R> w(m);
        for (std::size_t i = 0; i < m; ++i) w[i] = lam[i] * q[i];
        R aj = 0;
        for (std::size_t i = 0; i < m; ++i) aj += q[i] * w[i];
        a.push_back(aj);
        // twice is enough
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& v : basis) {
                R c = 0;
                for (std::size_t i = 0; i < m; ++i) c += v[i] * w[i];
                for (std::size_t i = 0; i < m; ++i) w[i] -= c * v[i];
            }
        }
        R bj2 = 0;
        for (std::size_t i = 0; i < m; ++i) bj2 += w[i] * w[i];
        const R bj = detail::sqrt_extended(bj2);

        const R d = pivots.empty() ? aj : aj - b.back() * b.back() / pivots.back();
        pivots.push_back(d);
        h.exact_alphas.push_back(1 / d);
        h.alphas.push_back(static_cast<double>(1 / d));

        const int taken = j + 1;
        if (taken >= grade) {
            // at the grade the minimum is exactly zero; rounding would leave a residue
            h.squared_errors.push_back(0.0);
            h.converged = true;
            break;
        }
        const R beta = (bj / d) * (bj / d);
        h.exact_betas.push_back(beta);
        h.betas.push_back(static_cast<double>(beta));
        b.push_back(bj);

        // iterate V_l y with T_l y = ||eta|| e_1 (Thomas algorithm; T_l is SPD)
        const auto l = static_cast<std::size_t>(taken);
        std::vector<R> rhs(l, R(0)), diag(a.begin(), a.end()), y(l);
        rhs[0] = beta0;
        for (std::size_t k = 1; k < l; ++k) {
            const R f = b[k - 1] / diag[k - 1];
            diag[k] -= f * b[k - 1];
            rhs[k] -= f * rhs[k - 1];
        }
        y[l - 1] = rhs[l - 1] / diag[l - 1];
        for (std::size_t k = l - 1; k-- > 0;) y[k] = (rhs[k] - b[k] * y[k + 1]) / diag[k];
        R err = 0;
        for (std::size_t i = 0; i < m; ++i) {
            R xi = 0;
            for (std::size_t k = 0; k < l; ++k) xi += basis[k][i] * y[k];
            const R e = x_star[i] - xi;
            err += lam[i] * e * e;
        }
        h.squared_errors.push_back(static_cast<double>(err));

        if (!(bj > R(1e-32) * aj)) {
            // Krylov space exhausted numerically before the nominal grade
            h.exact_betas.pop_back();
            h.betas.pop_back();
            h.converged = true;
            break;
        }
        for (std::size_t i = 0; i < m; ++i) q[i] = w[i] / bj;
    }
    return h;
}

struct PolynomialError {
    double value = 0.0;      // squared energy error
    bool converged = false;  // l is at or beyond the grade
};

/// min_{p in P_l(0)} sum_i eta_i^2/lambda_i p(lambda_i)^2. Beyond the grade the
/// minimum is 0 and the result is flagged converged.
inline PolynomialError min_polynomial_error(const ReducedSystem& sys, int ell) {
    if (ell < 0) throw std::invalid_argument("min_polynomial_error: ell must be >= 0");
    const DiagonalCgHistory h = diagonal_cg_history(sys, ell);
    if (h.steps() < ell) return {0.0, true};
    return {h.squared_errors[static_cast<std::size_t>(ell)], h.converged && h.steps() <= ell};
}

/// Squared minimal-polynomial errors for l = 0..ell_max (zeros past the grade).
inline std::vector<double> min_polynomial_errors(const ReducedSystem& sys, int ell_max) {
    DiagonalCgHistory h = diagonal_cg_history(sys, ell_max);
    std::vector<double> out = std::move(h.squared_errors);
    out.resize(static_cast<std::size_t>(ell_max) + 1, 0.0);
    return out;
}

/// values[l-1] holds the l Ritz values at step l, non-increasing.
struct RitzSpectrum {
    std::vector<std::vector<double>> values;

    const std::vector<double>& at(int ell) const { return values.at(static_cast<std::size_t>(ell - 1)); }
    double smallest(int ell) const { return at(ell).back(); }
    double largest(int ell) const { return at(ell).front(); }
};

/// Ritz values at step l from CG coefficients via the Lanczos tridiagonal
/// T_l: T_jj = 1/alpha_j + beta_j/alpha_{j-1}, T_{j,j+1} = sqrt(beta_{j+1})/alpha_j.
inline std::vector<double> ritz_values_from_coefficients(const std::vector<double>& alphas,
                                                         const std::vector<double>& betas, int ell) {
    if (ell < 1 || static_cast<std::size_t>(ell) > alphas.size() || betas.size() + 1 < static_cast<std::size_t>(ell)) {
        throw std::invalid_argument("ritz_values_from_coefficients: not enough coefficients");
    }
    const auto l = static_cast<std::size_t>(ell);
    std::vector<double> diag(l);
    std::vector<double> off(l - 1);
    for (std::size_t j = 0; j < l; ++j) {
        diag[j] = 1.0 / alphas[j] + (j > 0 ? betas[j - 1] / alphas[j - 1] : 0.0);
        if (j + 1 < l) off[j] = std::sqrt(betas[j]) / alphas[j];
    }
    return tridiagonal_eigenvalues(std::move(diag), off);
}

namespace detail {

/// Eigenvalues of T_l below x (Sturm count on the LDL^T pivots).
inline int sturm_count(const std::vector<oracle_real>& diag, const std::vector<oracle_real>& off2, oracle_real x) {
    int count = 0;
    oracle_real q = 1;
    for (std::size_t j = 0; j < diag.size(); ++j) {
        q = diag[j] - x - (j > 0 ? off2[j - 1] / q : oracle_real(0));
        if (q == oracle_real(0)) q = oracle_real(1e-300) * oracle_real(1e-300);
        if (q < 0) ++count;
    }
    return count;
}

/// Ritz values at step l, located in double and then bisected to full
/// oracle precision. A root of the optimal polynomial sitting next to an
/// eigenvalue makes the product form sensitive far below double rounding
/// of T_l's eigensolver.
inline std::vector<double> refined_ritz_values(const DiagonalCgHistory& h, int ell) {
    const auto l = static_cast<std::size_t>(ell);
    std::vector<oracle_real> diag(l), off2(l > 0 ? l - 1 : 0);
    for (std::size_t j = 0; j < l; ++j) {
        diag[j] = 1 / h.exact_alphas[j] + (j > 0 ? h.exact_betas[j - 1] / h.exact_alphas[j - 1] : oracle_real(0));
        if (j + 1 < l) off2[j] = h.exact_betas[j] / (h.exact_alphas[j] * h.exact_alphas[j]);
    }
    std::vector<double> approx = ritz_values_from_coefficients(h.alphas, h.betas, ell);  // non-increasing
    const double scale = std::abs(approx.front());
    for (std::size_t r = 0; r < l; ++r) {
        const int below = static_cast<int>(l - 1 - r);  // eigenvalues strictly smaller than this one
        double width = 1e-12 * scale + 1e-300;
        oracle_real lo = approx[r] - width, hi = approx[r] + width;
        while (sturm_count(diag, off2, lo) > below) lo -= (width *= 2.0);
        width = 1e-12 * scale + 1e-300;
        while (sturm_count(diag, off2, hi) <= below) hi += (width *= 2.0);
        for (int it = 0; it < 200; ++it) {
            const oracle_real mid = (lo + hi) / 2;
            if (!(mid > lo && mid < hi)) break;
            if (sturm_count(diag, off2, mid) > below) hi = mid;
            else lo = mid;
        }
        approx[r] = static_cast<double>((lo + hi) / 2);
    }
    return approx;
}

}  // namespace detail

/// Ritz values for every step 1..ell. Throws std::domain_error if CG reaches
/// the grade before ell steps.
inline RitzSpectrum ritz_values(const ReducedSystem& sys, int ell) {
    if (ell < 1) throw std::invalid_argument("ritz_values: ell must be >= 1");
    const DiagonalCgHistory h = diagonal_cg_history(sys, ell);
    if (h.steps() < ell) throw std::domain_error("ritz_values: CG terminated before the requested step");
    RitzSpectrum out;
    out.values.reserve(static_cast<std::size_t>(ell));
    for (int l = 1; l <= ell; ++l) out.values.push_back(detail::refined_ritz_values(h, l));
    return out;
}

/// sum_i eta_i^2/lambda_i prod_j (1 - lambda_i/z_j)^2 for given polynomial roots z_j.
inline double polynomial_error_from_roots(const ReducedSystem& sys, const std::vector<double>& roots) {
    using R = detail::oracle_real;
    R s = 0;
    for (Index i = 0; i < sys.size(); ++i) {
        const R lambda = sys.lambdas[i];
        const R eta = sys.etas[i];
        R prod = 1;
        for (double z : roots) {
            const R f = 1 - lambda / R(z);
            prod *= f * f;
        }
        s += eta * eta / lambda * prod;
    }
    return static_cast<double>(s);
}

struct PhaseLength {
    int ell0 = 0;
    bool found = false;  // false: ell0 is the grade, an upper bound
};

/// Smallest l with |lambda_n - v_l^(l)| <= eps, v_l^(l) the smallest Ritz value at step l.
inline PhaseLength first_phase_length(const ReducedSystem& sys, double lambda_n, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("first_phase_length: eps must be >= 0");
    bool has_component = false;
    for (Index i = 0; i < sys.size(); ++i) {
        if (sys.lambdas[i] == lambda_n && sys.etas[i] != 0.0) has_component = true;
    }
    if (!has_component) throw std::invalid_argument("first_phase_length: eta has no component on lambda_n");

    const DiagonalCgHistory h = diagonal_cg_history(sys, static_cast<int>(sys.size()));
    for (int l = 1; l <= h.steps(); ++l) {
        const std::vector<double> ritz = detail::refined_ritz_values(h, l);
        if (std::abs(lambda_n - ritz.back()) <= eps) return {l, true};
    }
    return {h.steps(), false};
}

struct OptimalPreconditioner {
    std::vector<Index> indices;  // pi_k*, 0-based ascending
    double theta = 0.0;          // a positive root of the optimal polynomial on the complement
    double squared_error = 0.0;  // ||x* - x_l(F*)||_A^2
};

inline constexpr double kExhaustiveSubsetLimit = 1e6;

namespace detail {

inline double binomial(Index n, Index k) {
    double c = 1.0;
    for (Index i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

/// Advances a sorted k-combination of {0..n-1}; false after the last one.
inline bool next_combination(std::vector<Index>& comb, Index n) {
    const auto k = static_cast<Index>(comb.size());
    for (Index i = k - 1; i >= 0; --i) {
        auto& c = comb[static_cast<std::size_t>(i)];
        if (c < n - k + i) {
            ++c;
            for (Index j = i + 1; j < k; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
            return true;
        }
    }
    return false;
}

inline std::vector<Index> complement_of(const std::vector<Index>& subset, Index n) {
    std::vector<Index> out;
    std::size_t j = 0;
    for (Index i = 0; i < n; ++i) {
        if (j < subset.size() && subset[j] == i) {
            ++j;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

}  // namespace detail

/// Brute-force optimal scaled spectral preconditioner at iteration ell: tries every
/// k-subset pi_k, scores it by the minimal polynomial error on its complement and
/// keeps the first minimiser. theta* is the largest Ritz value when the subset
/// contains the largest eigenvalue, else the smallest.
inline OptimalPreconditioner exhaustive_optimal_preconditioner(const Vector& lambdas, const Vector& etas, Index k,
                                                               int ell) {
    const Index n = lambdas.size();
    if (etas.size() != n) throw DimensionError("exhaustive_optimal_preconditioner: lambdas and etas differ");
    if (k < 1 || k >= n) throw std::out_of_range("exhaustive_optimal_preconditioner: need 1 <= k < n");
    if (ell < 1) throw std::invalid_argument("exhaustive_optimal_preconditioner: ell must be >= 1");
    if (detail::binomial(n, k) > kExhaustiveSubsetLimit) {
        throw CombinatorialLimitError("exhaustive_optimal_preconditioner: C(n, k) exceeds 1e6");
    }

    std::vector<Index> comb(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;

    OptimalPreconditioner best;
    bool have_best = false;
    do {
        const ReducedSystem sys = ReducedSystem::restrict_to(lambdas, etas, detail::complement_of(comb, n));
        const double err = min_polynomial_error(sys, ell).value;
        if (!have_best || err < best.squared_error) {
            best.indices = comb;
            best.squared_error = err;
            have_best = true;
            if (err == 0.0) break;
        }
    } while (detail::next_combination(comb, n));

    const bool takes_top = best.indices.front() == 0;
    const ReducedSystem sys = ReducedSystem::restrict_to(lambdas, etas, detail::complement_of(best.indices, n));
    const DiagonalCgHistory h = diagonal_cg_history(sys, ell);
    if (h.steps() >= 1) {
        const std::vector<double> roots = detail::refined_ritz_values(h, h.steps());
        best.theta = takes_top ? roots.front() : roots.back();
    } else {
        // no residual on the complement: every theta > 0 is optimal
        best.theta = takes_top ? lambdas[best.indices.back()] : lambdas[best.indices.front()];
    }
    return best;
}

}  // namespace specprec
