#pragma once

// Small-n self checks behind the `verify` subcommand. Each check pits a solver
// path against the oracle (or a closed form) and reports one line.

#include "specprec/deflation.hpp"
#include "specprec/operator.hpp"
#include "specprec/oracle.hpp"
#include "specprec/precond.hpp"
#include "specprec/solvers.hpp"
#include "specprec/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace specprec {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace verify {

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

/// Random strictly decreasing spectrum in [1, 10^decades].
inline Vector random_spectrum(Index n, double decades, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, decades);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = std::pow(10.0, u(rng));
    std::sort(v.begin(), v.end(), std::greater<>());
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] >= v[i - 1]) v[i] = v[i - 1] * (1.0 - 1e-6);
    }
    return Eigen::Map<Vector>(v.data(), n);
}

inline Vector random_normal(Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

/// Squared A-norm error of PCG(F) after ell steps on diag(lambdas) x = b, x0 = 0.
template <Preconditioner P>
double pcg_squared_error(const ProblemInstance<DiagonalOperator>& problem, const P& f, int ell) {
    StoppingRule stop;
    stop.max_iterations = ell;
    const SolveTrace t = pcg_solve(problem, f, stop);
    const double e = energy_norm_error(*problem.op, t.final_solution, *problem.reference_solution);
    return e * e;
}

/// Minimal polynomial error equals a diagonal CG run through the solvers module.
inline CheckResult cg_matches_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 20;
        const Vector lambdas = random_spectrum(n, 3.0, rng);
        const Vector b = random_normal(n, rng);
        const auto problem = make_problem(std::make_shared<const DiagonalOperator>(lambdas), b);
        const ReducedSystem sys(lambdas, b);
        for (int ell = 1; ell <= 8; ++ell) {
            const double cg = pcg_squared_error(problem, IdentityPreconditioner(n), ell);
            worst = std::max(worst, rel_diff(cg, min_polynomial_error(sys, ell).value));
        }
    }
    return {"cg_matches_min_polynomial", worst <= 1e-8, "max rel diff " + fmt(worst)};
}

/// The product over Ritz roots reproduces the minimal polynomial error.
inline CheckResult ritz_product_form(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 30;
        const ReducedSystem sys(random_spectrum(n, 2.0, rng), random_normal(n, rng));
        const RitzSpectrum ritz = ritz_values(sys, 12);
        for (int ell = 1; ell <= 12; ++ell) {
            worst = std::max(worst, rel_diff(polynomial_error_from_roots(sys, ritz.at(ell)),
                                             min_polynomial_error(sys, ell).value));
        }
    }
    return {"ritz_product_form", worst <= 1e-8, "max rel diff " + fmt(worst)};
}

/// theta_1 equals PCG(F_theta1) = DefCG at the first step and equals the first Ritz value.
inline CheckResult theta1_first_step(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Index n = 200, k = 10;
    const Vector lambdas = generate_spectrum({SpectrumSpec::Kind::Strakos, n, 1e6, 1.0, 0.75});
    const auto problem = make_problem(std::make_shared<const DiagonalOperator>(lambdas), random_normal(n, rng));
    const SpectralData spectral = select_index_set(*problem.op, k);
    const double theta1 = compute_theta(ThetaStrategy::first_iteration_optimal(), spectral, problem);
    const double ritz1 =
        ritz_values(ReducedSystem::restrict_to(lambdas, problem.rhs, spectral.complement()), 1).largest(1);

    StoppingRule one;
    one.max_iterations = 1;
    const SolveTrace pcg = pcg_solve(problem, build_preconditioner(spectral, theta1), one);
    const SolveTrace def = deflated_cg_solve(problem, DeflationProjector(spectral), one);
    // absolute errors: DefCG is normalised by its own starting iterate
    const double d1 = rel_diff(*pcg.iterations.back().energy_error, *def.iterations.back().energy_error);
    const double d2 = rel_diff(theta1, ritz1);
    return {"theta1_first_step", d1 <= 1e-8 && d2 <= 1e-12,
            "error rel diff " + fmt(d1) + ", ritz rel diff " + fmt(d2)};
}

/// select_index_set attains the minimal condition number over all k-subsets.
inline CheckResult index_set_optimality(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int failures = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 9;
        const Vector lambdas = random_spectrum(n, 4.0, rng);
        for (Index k = 1; k <= 3; ++k) {
            const SpectralData s = select_index_set(lambdas, k);
            const double chosen = s.complement_largest / s.complement_smallest;
            std::vector<Index> comb(static_cast<std::size_t>(k));
            for (Index i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;
            double best = std::numeric_limits<double>::infinity();
            do {
                const auto rest = detail::complement_of(comb, n);
                best = std::min(best, lambdas[rest.front()] / lambdas[rest.back()]);
            } while (detail::next_combination(comb, n));
            if (chosen > best * (1.0 + 1e-14)) ++failures;
        }
    }
    return {"index_set_optimality", failures == 0, std::to_string(failures) + " suboptimal selections"};
}

/// PCG with the exhaustive optimum beats random rank-k updates and matches the oracle error.
inline CheckResult optimal_preconditioner(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Index n = 7;
    int beaten = 0;
    double worst_match = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const Vector lambdas = random_spectrum(n, 3.0, rng);
        const Vector b = random_normal(n, rng);
        const auto problem = make_problem(std::make_shared<const DiagonalOperator>(lambdas), b);
        for (Index k = 1; k <= 2; ++k) {
            for (int ell = 1; ell <= 2; ++ell) {
                const auto opt = exhaustive_optimal_preconditioner(lambdas, b, k, ell);
                const double achieved =
                    pcg_squared_error(problem, build_preconditioner(make_spectral_data(lambdas, opt.indices),
                                                                    opt.theta), ell);
                worst_match = std::max(worst_match, rel_diff(achieved, opt.squared_error));
                std::uniform_real_distribution<double> d(-0.99, 20.0);
                for (int c = 0; c < 30; ++c) {
                    std::vector<Index> all(static_cast<std::size_t>(n));
                    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
                    std::shuffle(all.begin(), all.end(), rng);
                    all.resize(static_cast<std::size_t>(k));
                    std::sort(all.begin(), all.end());
                    Vector dv(k);
                    for (Index j = 0; j < k; ++j) dv[j] = d(rng);
                    const SpectralPreconditioner f(SpectralBasis::canonical(n, all), dv);
                    if (pcg_squared_error(problem, f, ell) + 1e-9 < achieved) ++beaten;
                }
            }
        }
    }
    return {"optimal_preconditioner", beaten == 0 && worst_match <= 1e-8,
            std::to_string(beaten) + " competitors better, oracle rel diff " + fmt(worst_match)};
}

/// P A = A P, and deflated CG equals CG on the complement block.
inline CheckResult projector_identities(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Index n = 20, k = 4;
    const auto op = std::make_shared<const DenseSpdOperator>(DenseSpdOperator::random(random_spectrum(n, 3.0, rng), rng));
    const SpectralData spectral = select_index_set(*op, k);
    const DeflationProjector p(spectral);
    const Vector u = random_normal(n, rng);
    const double comm = (p.project(apply(*op, u)) - apply(*op, p.project(u))).norm() /
                        (op->eigenvalues()[0] * u.norm());

    const auto problem = make_problem(op, random_normal(n, rng));
    StoppingRule stop;
    stop.max_iterations = 6;
    const SolveTrace def = deflated_cg_solve(problem, p, stop);
    const Vector eta = op->to_eigenbasis(problem.rhs);
    const ReducedSystem sys = ReducedSystem::restrict_to(op->eigenvalues(), eta, spectral.complement());
    const double full = std::sqrt(sys.initial_error());
    double worst = 0.0;
    for (const auto& rec : def.iterations) {
        const double oracle = std::sqrt(min_polynomial_error(sys, rec.iter).value) / full;
        worst = std::max(worst, rel_diff(*rec.rel_energy_error, oracle));
    }
    return {"projector_identities", comm <= 1e-10 && worst <= 1e-8,
            "commutator " + fmt(comm) + ", reduced-system rel diff " + fmt(worst)};
}

/// PCG(F) with theta inside [lambda_{k+1}, lambda_k] never trails CG.
inline CheckResult interval_theta_ordering(std::uint64_t) {
    const Index n = 2000, k = 20;
    const Vector lambdas = generate_spectrum({SpectrumSpec::Kind::Strakos, n, 1e6, 1.0, 0.75});
    const auto problem = make_problem(std::make_shared<const DiagonalOperator>(lambdas),
                                      generate_rhs({}, lambdas));
    const SpectralData spectral = select_index_set(*problem.op, k);
    StoppingRule stop;
    stop.max_iterations = 40;
    const auto cg = cg_solve(problem, stop).rel_energy_errors();
    int violations = 0;
    for (double theta : {lambdas[k - 1], lambdas[k], 0.5 * (lambdas[k - 1] + lambdas[k])}) {
        const auto pcg = pcg_solve(problem, build_preconditioner(spectral, theta), stop).rel_energy_errors();
        for (std::size_t l = 0; l < std::min(cg.size(), pcg.size()); ++l) {
            if (pcg[l] > cg[l] * (1.0 + 1e-8)) ++violations;
        }
    }
    return {"interval_theta_ordering", violations == 0, std::to_string(violations) + " iterations above CG"};
}

inline std::vector<CheckResult> run_all(std::uint64_t seed = 20240601) {
    using Fn = CheckResult (*)(std::uint64_t);
    const Fn checks[] = {cg_matches_oracle,    ritz_product_form,      theta1_first_step,      index_set_optimality,
                         optimal_preconditioner, projector_identities, interval_theta_ordering};
    std::vector<CheckResult> out;
    for (std::size_t i = 0; i < std::size(checks); ++i) {
        try {
            out.push_back(checks[i](seed + i));
        } catch (const std::exception& e) {
            out.push_back({"check " + std::to_string(i), false, std::string("exception: ") + e.what()});
        }
    }
    return out;
}

}  // namespace verify
}  // namespace specprec
