#pragma once

#include "specprec/core.hpp"
#include "specprec/deflation.hpp"
#include "specprec/operator.hpp"
#include "specprec/precond.hpp"
#include "specprec/solvers.hpp"
#include "specprec/spectra.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace specprec {

enum class Method { CG, PCG_ThetaR, PCG_Theta1, PCG_ThetaM, PCG_LambdaN, DefCG };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::CG: return "CG";
        case Method::PCG_ThetaR: return "PCG_ThetaR";
        case Method::PCG_Theta1: return "PCG_Theta1";
        case Method::PCG_ThetaM: return "PCG_ThetaM";
        case Method::PCG_LambdaN: return "PCG_LambdaN";
        case Method::DefCG: return "DefCG";
    }
    return "unknown";
}

inline Method parse_method(std::string_view s) {
    for (Method m : {Method::CG, Method::PCG_ThetaR, Method::PCG_Theta1, Method::PCG_ThetaM, Method::PCG_LambdaN,
                     Method::DefCG}) {
        if (s == to_string(m)) return m;
    }
    throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

/// Theta rule behind each PCG method; nullopt for CG and DefCG.
inline std::optional<ThetaStrategy> theta_strategy_for(Method m) {
    switch (m) {
        case Method::PCG_ThetaR: return ThetaStrategy::range_endpoint();
        case Method::PCG_Theta1: return ThetaStrategy::first_iteration_optimal();
        case Method::PCG_ThetaM: return ThetaStrategy::mid_range();
        case Method::PCG_LambdaN: return ThetaStrategy::smallest_eigenvalue();
        default: return std::nullopt;
    }
}

struct ExperimentConfig {
    SpectrumSpec spectrum;
    RhsSpec rhs;
    Index k = 0;
    std::vector<Method> methods;
    int max_iter = 40;
    std::string output_path;  // empty: standard output
    bool record_energy_error = true;

    void validate() const {
        spectrum.validate();
        rhs.validate();
        if (methods.empty()) throw std::invalid_argument("config: methods must be non-empty");
        if (k < 1 || k >= spectrum.n) throw std::invalid_argument("config: k must satisfy 1 <= k < n");
        if (max_iter < 1) throw std::invalid_argument("config: max_iter must be >= 1");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::string_view key) {
    T value{};
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw std::invalid_argument("config: bad value '" + std::string(s) + "' for " + std::string(key));
    }
    return value;
}

inline bool parse_flag(std::string_view s, std::string_view key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("config: bad flag '" + std::string(s) + "' for " + std::string(key));
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Unknown and repeated keys
/// are errors. Optional keys beyond the core set: rhs.decay_base, record_energy_error.
inline ExperimentConfig parse_config(std::istream& in) {
    std::map<std::string, std::string, std::less<>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v(line);
        if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = detail::trim(v);
        if (v.empty()) continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key(detail::trim(v.substr(0, eq)));
        const std::string value(detail::trim(v.substr(eq + 1)));
        if (key.empty() || value.empty()) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");
        }
        if (!kv.emplace(key, value).second) throw std::invalid_argument("config: duplicate key " + key);
    }

    ExperimentConfig cfg;
    bool have_n = false, have_l1 = false, have_ln = false, have_k = false, have_methods = false;
    bool have_z1 = false, have_zn = false;
    for (const auto& [key, value] : kv) {
        if (key == "spectrum.kind") {
            cfg.spectrum.kind = parse_spectrum_kind(value);
        } else if (key == "spectrum.n") {
            cfg.spectrum.n = detail::parse_number<Index>(value, key);
            have_n = true;
        } else if (key == "spectrum.lambda1") {
            cfg.spectrum.lambda1 = detail::parse_number<double>(value, key);
            have_l1 = true;
        } else if (key == "spectrum.lambdan") {
            cfg.spectrum.lambdan = detail::parse_number<double>(value, key);
            have_ln = true;
        } else if (key == "spectrum.rho") {
            cfg.spectrum.rho = detail::parse_number<double>(value, key);
        } else if (key == "rhs.kind") {
            cfg.rhs.kind = parse_rhs_kind(value);
        } else if (key == "rhs.zeta1") {
            cfg.rhs.zeta1 = detail::parse_number<double>(value, key);
            have_z1 = true;
        } else if (key == "rhs.zetan") {
            cfg.rhs.zetan = detail::parse_number<double>(value, key);
            have_zn = true;
        } else if (key == "rhs.decay_base") {
            cfg.rhs.decay_base = detail::parse_number<double>(value, key);
        } else if (key == "k") {
            cfg.k = detail::parse_number<Index>(value, key);
            have_k = true;
        } else if (key == "methods") {
            for (auto m : detail::split(value, ',')) cfg.methods.push_back(parse_method(m));
            have_methods = true;
        } else if (key == "max_iter") {
            cfg.max_iter = detail::parse_number<int>(value, key);
        } else if (key == "output") {
            cfg.output_path = value;
        } else if (key == "record_energy_error") {
            cfg.record_energy_error = detail::parse_flag(value, key);
        } else {
            throw std::invalid_argument("config: unknown key " + key);
        }
    }
    if (!have_n || !have_l1 || !have_ln) {
        throw std::invalid_argument("config: spectrum.n, spectrum.lambda1 and spectrum.lambdan are required");
    }
    if (!have_k) throw std::invalid_argument("config: k is required");
    if (!have_methods) throw std::invalid_argument("config: methods is required");
    if (cfg.rhs.kind != RhsSpec::Kind::UniformNormalized && (!have_z1 || !have_zn)) {
        throw std::invalid_argument("config: zeta right-hand sides need rhs.zeta1 and rhs.zetan");
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_config(in);
}

struct TraceRow {
    std::string method;
    Index k = 0;
    int iter = 0;
    double rel_energy_error = 0.0;  // NaN when not recorded
    double rel_residual = 0.0;
    double theta = 0.0;  // 0 for CG and DefCG

    bool operator==(const TraceRow&) const = default;
};

struct MethodOutcome {
    Method method = Method::CG;
    std::optional<Termination> termination;  // nullopt: setup failed before iterating
    double theta = 0.0;
    std::string diagnostic;
};

struct ExperimentResult {
    std::vector<TraceRow> rows;
    std::vector<MethodOutcome> outcomes;
};

namespace detail {

inline void append_rows(std::vector<TraceRow>& rows, Method m, Index k, double theta, const SolveTrace& trace,
                        bool record_energy) {
    const double r0 = trace.iterations.front().residual_norm;
    for (const auto& rec : trace.iterations) {
        TraceRow row;
        row.method = std::string(to_string(m));
        row.k = k;
        row.iter = rec.iter;
        row.rel_energy_error = record_energy && rec.rel_energy_error ? *rec.rel_energy_error
                                                                      : std::numeric_limits<double>::quiet_NaN();
        row.rel_residual = r0 > 0.0 ? rec.residual_norm / r0 : 0.0;
        row.theta = theta;
        rows.push_back(std::move(row));
    }
}

}  // namespace detail

/// Runs each method on one problem. A method that breaks down or fails to set
/// up keeps whatever rows it produced and the sweep moves on.
template <SpectralOperator Op>
ExperimentResult run_methods(const ProblemInstance<Op>& problem, const SpectralData& spectral,
                             const std::vector<Method>& methods, const StoppingRule& stop,
                             bool record_energy = true) {
    ExperimentResult result;
    for (Method m : methods) {
        MethodOutcome outcome;
        outcome.method = m;
        try {
            SolveTrace trace;
            if (m == Method::CG) {
                trace = cg_solve(problem, stop);
            } else if (m == Method::DefCG) {
                trace = deflated_cg_solve(problem, DeflationProjector(spectral), stop);
            } else {
                outcome.theta = compute_theta(*theta_strategy_for(m), spectral, problem);
                trace = pcg_solve(problem, build_preconditioner(spectral, outcome.theta), stop);
            }
            outcome.termination = trace.termination;
            detail::append_rows(result.rows, m, spectral.k(), outcome.theta, trace, record_energy);
            if (trace.termination == Termination::Breakdown) {
                outcome.diagnostic = "breakdown after " + std::to_string(trace.steps()) + " iterations";
            }
        } catch (const std::exception& e) {
            outcome.diagnostic = e.what();
        }
        result.outcomes.push_back(std::move(outcome));
    }
    return result;
}

/// The configured sweep on the diagonal Strakos problem from x0 = 0.
inline ExperimentResult run_experiment_detailed(const ExperimentConfig& config) {
    config.validate();
    const Vector lambdas = generate_spectrum(config.spectrum);
    Vector rhs = generate_rhs(config.rhs, lambdas);
    auto op = std::make_shared<const DiagonalOperator>(lambdas);
    ProblemInstance<DiagonalOperator> problem = make_problem(op, std::move(rhs));
    if (!config.record_energy_error) problem.reference_solution.reset();

    StoppingRule stop;
    stop.max_iterations = config.max_iter;
    return run_methods(problem, select_index_set(*op, config.k), config.methods, stop, config.record_energy_error);
}

inline std::vector<TraceRow> run_experiment(const ExperimentConfig& config) {
    return run_experiment_detailed(config).rows;
}

inline constexpr std::string_view kCsvHeader = "method,k,iter,rel_energy_error,rel_residual,theta";

/// Shortest form that still has 17 significant digits of precision.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_real(std::string_view s) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    return detail::parse_number<double>(s, "csv field");
}

inline void write_csv(const std::vector<TraceRow>& rows, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.method << ',' << r.k << ',' << r.iter << ',' << format_real(r.rel_energy_error) << ','
            << format_real(r.rel_residual) << ',' << format_real(r.theta) << '\n';
    }
}

inline void emit_csv(const std::vector<TraceRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_csv(rows, out);
    out.flush();
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline std::vector<TraceRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("read_csv: missing header");
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split(line, ',');
        if (f.size() != 6) throw std::invalid_argument("read_csv: expected 6 fields");
        TraceRow r;
        r.method = std::string(f[0]);
        r.k = detail::parse_number<Index>(f[1], "k");
        r.iter = detail::parse_number<int>(f[2], "iter");
        r.rel_energy_error = parse_real(f[3]);
        r.rel_residual = parse_real(f[4]);
        r.theta = parse_real(f[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

/// log(u / (1 - u)) with u = (i - 1/2)/n, the abscissa for spectrum plots.
inline double logit_index(Index i, Index n) {
    if (n < 1 || i < 1 || i > n) throw std::out_of_range("logit_index: need 1 <= i <= n");
    const double u = (static_cast<double>(i) - 0.5) / static_cast<double>(n);
    return std::log(u / (1.0 - u));
}

/// Per-index plotting data: i, u, logit(u), lambda_i, zeta_i = b_i^2/lambda_i and
/// the eigenvalue of F A at index i for each PCG method in the config.
inline void write_spectrum_csv(const ExperimentConfig& config, std::ostream& out) {
    config.validate();
    const Vector lambdas = generate_spectrum(config.spectrum);
    const Vector rhs = generate_rhs(config.rhs, lambdas);
    auto op = std::make_shared<const DiagonalOperator>(lambdas);
    const auto problem = make_problem(op, rhs);
    const SpectralData spectral = select_index_set(*op, config.k);

    std::vector<std::pair<Method, Vector>> preconditioned;
    for (Method m : config.methods) {
        const auto strategy = theta_strategy_for(m);
        if (!strategy) continue;
        const double theta = compute_theta(*strategy, spectral, problem);
        Vector fa = lambdas;
        for (Index i : spectral.indices) fa[i] = theta;
        preconditioned.emplace_back(m, std::move(fa));
    }

    out << "i,u,logit,lambda,zeta";
    for (const auto& [m, fa] : preconditioned) out << ",FA_" << to_string(m);
    out << '\n';
    const Index n = lambdas.size();
    for (Index i = 1; i <= n; ++i) {
        const double u = (static_cast<double>(i) - 0.5) / static_cast<double>(n);
        out << i << ',' << format_real(u) << ',' << format_real(logit_index(i, n)) << ','
            << format_real(lambdas[i - 1]) << ',' << format_real(rhs[i - 1] * rhs[i - 1] / lambdas[i - 1]);
        for (const auto& [m, fa] : preconditioned) out << ',' << format_real(fa[i - 1]);
        out << '\n';
    }
}

}  // namespace specprec
