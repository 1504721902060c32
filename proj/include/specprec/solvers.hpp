#pragma once

#include "specprec/core.hpp"
#include "specprec/operator.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace specprec {

/// z = F r for an SPD preconditioner F.
template <class P>
concept Preconditioner = requires(const P& f, const Vector& r, Vector& z) {
    { f.dim() } -> std::convertible_to<Index>;
    f.apply(r, z);
};

class IdentityPreconditioner {
public:
    explicit IdentityPreconditioner(Index n) : n_(n) {}
    Index dim() const { return n_; }
    void apply(const Vector& r, Vector& z) const {
        require_dim(r.size(), n_, "IdentityPreconditioner::apply");
        z = r;
    }

private:
    Index n_;
};

enum class Termination { BudgetExhausted, ResidualConverged, EnergyConverged, Breakdown };

inline std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::BudgetExhausted: return "budget_exhausted";
        case Termination::ResidualConverged: return "residual_converged";
        case Termination::EnergyConverged: return "energy_converged";
        case Termination::Breakdown: return "breakdown";
    }
    return "unknown";
}

/// State after iteration `iter`. `alpha` and `beta` are the coefficients of the
/// step that leaves this iterate (alpha_l, beta_{l+1}); absent on the last record.
struct IterationRecord {
    int iter = 0;
    double residual_norm = 0.0;
    std::optional<double> rel_energy_error;
    std::optional<double> energy_error;  // ||x* - x_l||_A, for comparing methods with different starts
    std::optional<double> alpha;
    std::optional<double> beta;
};

struct SolveTrace {
    std::vector<IterationRecord> iterations;
    Vector final_solution;
    Termination termination = Termination::BudgetExhausted;

    /// Number of completed steps (the last recorded iterate index).
    int steps() const { return iterations.empty() ? 0 : iterations.back().iter; }

    std::vector<double> rel_energy_errors() const {
        std::vector<double> out;
        out.reserve(iterations.size());
        for (const auto& rec : iterations) {
            if (!rec.rel_energy_error) throw std::logic_error("trace has no energy errors recorded");
            out.push_back(*rec.rel_energy_error);
        }
        return out;
    }
    std::vector<double> energy_errors() const {
        std::vector<double> out;
        out.reserve(iterations.size());
        for (const auto& rec : iterations) {
            if (!rec.energy_error) throw std::logic_error("trace has no energy errors recorded");
            out.push_back(*rec.energy_error);
        }
        return out;
    }
    std::vector<double> alphas() const {
        std::vector<double> out;
        for (const auto& rec : iterations)
            if (rec.alpha) out.push_back(*rec.alpha);
        return out;
    }
    std::vector<double> betas() const {
        std::vector<double> out;
        for (const auto& rec : iterations)
            if (rec.beta) out.push_back(*rec.beta);
        return out;
    }
};

struct StoppingRule {
    int max_iterations = 40;
    std::optional<double> residual_rtol;  // on ||r_l|| / ||r_0||
    std::optional<double> energy_rtol;    // on the relative energy error

    void validate() const {
        if (max_iterations < 1) throw std::invalid_argument("StoppingRule: max_iterations must be >= 1");
        if (residual_rtol && !(*residual_rtol >= 0.0)) throw std::invalid_argument("StoppingRule: residual_rtol < 0");
        if (energy_rtol && !(*energy_rtol >= 0.0)) throw std::invalid_argument("StoppingRule: energy_rtol < 0");
    }
};

/// ||r_l|| / ||r_0|| below this is treated as exact convergence.
inline constexpr double kExactResidualRtol = 1e-15;

/// Absolute energy error of an iterate, or nullopt when no reference is known.
using EnergyErrorFn = std::function<std::optional<double>(const Vector& x)>;
/// Called with (l, x_l) for every recorded iterate, l = 0 included.
using IterateObserver = std::function<void(int, const Vector&)>;

namespace detail {

class TraceRecorder {
public:
    TraceRecorder(const EnergyErrorFn& error_fn, const IterateObserver& observer)
        : error_fn_(error_fn), observer_(observer) {}

    void record(int iter, const Vector& x, double residual_norm) {
        IterationRecord rec;
        rec.iter = iter;
        rec.residual_norm = residual_norm;
        if (error_fn_) {
            if (auto err = error_fn_(x)) {
                if (iter == 0) initial_error_ = *err;
                rec.energy_error = *err;
                rec.rel_energy_error = initial_error_ > 0.0 ? *err / initial_error_ : 0.0;
            }
        }
        if (observer_) observer_(iter, x);
        trace_.iterations.push_back(rec);
    }

    void set_step_coefficients(double alpha, double beta) {
        trace_.iterations.back().alpha = alpha;
        trace_.iterations.back().beta = beta;
    }

    std::optional<double> last_rel_energy_error() const { return trace_.iterations.back().rel_energy_error; }

    SolveTrace finish(Vector x, Termination t) {
        trace_.final_solution = std::move(x);
        trace_.termination = t;
        return std::move(trace_);
    }

private:
    const EnergyErrorFn& error_fn_;
    const IterateObserver& observer_;
    double initial_error_ = 0.0;
    SolveTrace trace_;
};

/// Shared stopping logic, evaluated before each step: budget first, then the
/// optional thresholds, then numerically exact convergence.
inline std::optional<Termination> check_stop(int iter, double rel_residual, std::optional<double> rel_energy,
                                             const StoppingRule& stop) {
    if (iter >= stop.max_iterations) return Termination::BudgetExhausted;
    if (stop.residual_rtol && rel_residual <= *stop.residual_rtol) return Termination::ResidualConverged;
    if (stop.energy_rtol && rel_energy && *rel_energy <= *stop.energy_rtol) return Termination::EnergyConverged;
    if (rel_residual < kExactResidualRtol) return Termination::ResidualConverged;
    return std::nullopt;
}

}  // namespace detail

/// Hestenes-Stiefel CG on A x = b from x0 with coupled two-term recurrences.
template <LinearOperator Op>
SolveTrace cg_run(const Op& op, const Vector& b, const Vector& x0, const StoppingRule& stop,
                  const EnergyErrorFn& error_fn = {}, const IterateObserver& observer = {}) {
    stop.validate();
    const Index n = op.dim();
    require_dim(b.size(), n, "cg(rhs)");
    require_dim(x0.size(), n, "cg(x0)");

    detail::TraceRecorder rec(error_fn, observer);
    Vector x = x0;
    Vector r(n);
    op.apply(x, r);
    r = b - r;
    Vector p = r;
    Vector q(n);
    double rho = r.dot(r);
    const double r0_norm = std::sqrt(rho);

    rec.record(0, x, r0_norm);
    if (r0_norm == 0.0) return rec.finish(std::move(x), Termination::ResidualConverged);

    for (int iter = 0;; ++iter) {
        const double rel_res = std::sqrt(rho) / r0_norm;
        if (auto t = detail::check_stop(iter, rel_res, rec.last_rel_energy_error(), stop)) {
            return rec.finish(std::move(x), *t);
        }
        op.apply(p, q);
        const double curvature = q.dot(p);
        if (!(rho > 0.0) || !(curvature > 0.0)) return rec.finish(std::move(x), Termination::Breakdown);

        const double alpha = rho / curvature;
        x += alpha * p;
        r -= alpha * q;
        const double rho_next = r.dot(r);
        const double beta = rho_next / rho;
        p = r + beta * p;
        rho = rho_next;

        rec.set_step_coefficients(alpha, beta);
        rec.record(iter + 1, x, std::sqrt(rho));
    }
}

/// PCG with preconditioner F; only products with F are used.
template <LinearOperator Op, Preconditioner P>
SolveTrace pcg_run(const Op& op, const P& precond, const Vector& b, const Vector& x0, const StoppingRule& stop,
                   const EnergyErrorFn& error_fn = {}, const IterateObserver& observer = {}) {
    stop.validate();
    const Index n = op.dim();
    require_dim(b.size(), n, "pcg(rhs)");
    require_dim(x0.size(), n, "pcg(x0)");
    require_dim(precond.dim(), n, "pcg(preconditioner)");

    detail::TraceRecorder rec(error_fn, observer);
    Vector x = x0;
    Vector r(n);
    op.apply(x, r);
    r = b - r;
    Vector z(n);
    precond.apply(r, z);
    double rho = r.dot(z);
    Vector p = z;
    Vector q(n);
    const double r0_norm = std::sqrt(r.dot(r));

    rec.record(0, x, r0_norm);
    if (r0_norm == 0.0) return rec.finish(std::move(x), Termination::ResidualConverged);

    for (int iter = 0;; ++iter) {
        const double r_norm = std::sqrt(r.dot(r));
        if (auto t = detail::check_stop(iter, r_norm / r0_norm, rec.last_rel_energy_error(), stop)) {
            return rec.finish(std::move(x), *t);
        }
        op.apply(p, q);
        const double curvature = q.dot(p);
        if (!(rho > 0.0) || !(curvature > 0.0)) return rec.finish(std::move(x), Termination::Breakdown);

        const double alpha = rho / curvature;
        x += alpha * p;
        r -= alpha * q;
        precond.apply(r, z);
        const double rho_next = r.dot(z);
        const double beta = rho_next / rho;
        p = z + beta * p;
        rho = rho_next;

        rec.set_step_coefficients(alpha, beta);
        const double r_next_norm = std::sqrt(r.dot(r));
        rec.record(iter + 1, x, r_next_norm);
        // rho <= 0 with a nonzero residual means F is not SPD; true
        // convergence is left to the next check_stop.
        if (!(rho > 0.0) && r_next_norm / r0_norm >= kExactResidualRtol) {
            return rec.finish(std::move(x), Termination::Breakdown);
        }
    }
}

template <LinearOperator Op>
EnergyErrorFn reference_error_fn(const ProblemInstance<Op>& problem) {
    if (!problem.reference_solution) return {};
    return [&problem](const Vector& x) -> std::optional<double> {
        return energy_norm_error(*problem.op, x, *problem.reference_solution);
    };
}

template <LinearOperator Op>
SolveTrace cg_solve(const ProblemInstance<Op>& problem, const StoppingRule& stop,
                    const IterateObserver& observer = {}) {
    return cg_run(*problem.op, problem.rhs, problem.initial_guess, stop, reference_error_fn(problem), observer);
}

template <LinearOperator Op, Preconditioner P>
SolveTrace pcg_solve(const ProblemInstance<Op>& problem, const P& precond, const StoppingRule& stop,
                     const IterateObserver& observer = {}) {
    return pcg_run(*problem.op, precond, problem.rhs, problem.initial_guess, stop, reference_error_fn(problem),
                   observer);
}

}  // namespace specprec
