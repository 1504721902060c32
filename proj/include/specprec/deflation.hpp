#pragma once

#include "specprec/core.hpp"
#include "specprec/operator.hpp"
#include "specprec/precond.hpp"
#include "specprec/solvers.hpp"

#include <optional>
#include <utility>

namespace specprec {

/// P = I - sum_{i in pi_k} s_i s_i^T, the orthogonal projector onto the
/// complement eigenspace.
class DeflationProjector {
public:
    explicit DeflationProjector(SpectralData spectral) : spectral_(std::move(spectral)) {}

    Index dim() const { return spectral_.n; }
    const SpectralData& spectral() const { return spectral_; }

    void apply(const Vector& y, Vector& out) const {
        require_dim(y.size(), dim(), "DeflationProjector::apply");
        out = y;
        for (Index j = 0; j < spectral_.k(); ++j) {
            spectral_.basis.axpy(j, -spectral_.basis.dot(j, y), out);
        }
    }

    Vector project(const Vector& y) const {
        Vector out(dim());
        apply(y, out);
        return out;
    }

    /// sum_{i in pi_k} (s_i^T b / lambda_i) s_i, the exact solution on the deflated subspace.
    Vector deflated_part(const Vector& b) const {
        require_dim(b.size(), dim(), "DeflationProjector::deflated_part");
        Vector out = Vector::Zero(dim());
        for (Index j = 0; j < spectral_.k(); ++j) {
            spectral_.basis.axpy(j, spectral_.basis.dot(j, b) / spectral_.eigenvalues[j], out);
        }
        return out;
    }

    Matrix to_dense() const {
        Matrix p = Matrix::Identity(dim(), dim());
        for (Index j = 0; j < spectral_.k(); ++j) {
            const Vector s = spectral_.basis.column(j);
            p -= s * s.transpose();
        }
        return p;
    }

private:
    SpectralData spectral_;
};

/// x -> P A P x. Equal to P A in exact arithmetic; the trailing projection keeps
/// rounding from drifting out of range(P).
template <LinearOperator Op>
class ProjectedOperator {
public:
    ProjectedOperator(const Op& op, const DeflationProjector& projector) : op_(op), projector_(projector) {
        require_dim(projector.dim(), op.dim(), "ProjectedOperator");
    }

    Index dim() const { return op_.dim(); }

    void apply(const Vector& x, Vector& y) const {
        Vector px(dim());
        projector_.apply(x, px);
        Vector apx(dim());
        op_.apply(px, apx);
        projector_.apply(apx, y);
    }

private:
    const Op& op_;
    const DeflationProjector& projector_;
};

/// x^D = sum_{i in pi_k} (s_i^T b / lambda_i) s_i + P z.
inline Vector reconstruct_deflated_iterate(const DeflationProjector& projector, const Vector& b, const Vector& z) {
    require_dim(z.size(), projector.dim(), "reconstruct_deflated_iterate(z)");
    return projector.deflated_part(b) + projector.project(z);
}

/// Deflated CG: CG on P A z = P b from z0 = x0. The trace records the energy
/// error of the reconstructed x^D_l; final_solution is x^D at the last step.
/// `inner_observer` sees the inner iterates z_l.
template <LinearOperator Op>
SolveTrace deflated_cg_solve(const ProblemInstance<Op>& problem, const DeflationProjector& projector,
                             const StoppingRule& stop, const IterateObserver& inner_observer = {}) {
    const Op& op = *problem.op;
    require_dim(projector.dim(), op.dim(), "deflated_cg_solve");
    const Vector known = projector.deflated_part(problem.rhs);
    const auto reconstruct = [&](const Vector& z) -> Vector { return known + projector.project(z); };

    EnergyErrorFn error_fn;
    if (problem.reference_solution) {
        error_fn = [&](const Vector& z) -> std::optional<double> {
            return energy_norm_error(op, reconstruct(z), *problem.reference_solution);
        };
    }
    const ProjectedOperator<Op> projected(op, projector);
    SolveTrace trace =
        cg_run(projected, projector.project(problem.rhs), problem.initial_guess, stop, error_fn, inner_observer);
    trace.final_solution = reconstruct(trace.final_solution);
    return trace;
}

}  // namespace specprec
