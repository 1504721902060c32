#pragma once

#include "specprec/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace specprec {

struct SpectrumSpec {
    enum class Kind { Strakos };

    Kind kind = Kind::Strakos;
    Index n = 0;
    double lambda1 = 0.0;
    double lambdan = 0.0;
    double rho = 0.75;

    void validate() const {
        if (n < 2) throw std::invalid_argument("SpectrumSpec: n must be >= 2");
        if (!(lambdan > 0.0)) throw std::invalid_argument("SpectrumSpec: lambdan must be positive");
        if (!(lambda1 >= lambdan)) throw std::invalid_argument("SpectrumSpec: lambda1 must be >= lambdan");
        if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("SpectrumSpec: rho must lie in (0, 1]");
    }
};

/// lambda_i = lambda_n + ((n - i)/(n - 1)) (lambda_1 - lambda_n) rho^(i-1), i = 1..n.
inline Vector generate_spectrum(const SpectrumSpec& spec) {
    spec.validate();
    const Index n = spec.n;
    const double span = spec.lambda1 - spec.lambdan;
    Vector lambda(n);
    double power = 1.0;  // rho^(i-1)
    for (Index i = 1; i <= n; ++i) {
        lambda[i - 1] = spec.lambdan + (static_cast<double>(n - i) / static_cast<double>(n - 1)) * span * power;
        power *= spec.rho;
    }
    for (Index i = 1; i < n; ++i) {
        if (lambda[i] > lambda[i - 1]) throw std::logic_error("generate_spectrum: result not decreasing");
    }
    return lambda;
}

struct RhsSpec {
    enum class Kind { UniformNormalized, ZetaFastDecay, ZetaFastGrowth };

    Kind kind = Kind::UniformNormalized;
    double zeta1 = 1.0;
    double zetan = 1.0;
    double decay_base = 0.9;

    void validate() const {
        if (kind == Kind::UniformNormalized) return;
        if (!(zeta1 > 0.0) || !(zetan > 0.0)) throw std::invalid_argument("RhsSpec: zeta parameters must be positive");
        if (!(decay_base > 0.0 && decay_base <= 1.0)) {
            throw std::invalid_argument("RhsSpec: decay_base must lie in (0, 1]");
        }
    }
};

/// zeta_i = eta_i^2 / lambda_i for the zeta right-hand sides.
/// Fast decay starts at zeta_1 on the largest eigenvalue and drops geometrically
/// towards zeta_n; fast growth is the same sequence read backwards.
inline Vector zeta_profile(const RhsSpec& spec, Index n) {
    spec.validate();
    if (n < 2) throw std::invalid_argument("zeta_profile: n must be >= 2");
    Vector decay(n);
    double power = 1.0;  // decay_base^(i-1)
    for (Index i = 1; i <= n; ++i) {
        decay[i - 1] = spec.zetan +
                       (static_cast<double>(n - i) / static_cast<double>(n - 1)) * (spec.zeta1 - spec.zetan) * power;
        power *= spec.decay_base;
    }
    if (spec.kind == RhsSpec::Kind::ZetaFastGrowth) return decay.reverse();
    return decay;
}

inline Vector generate_rhs(const RhsSpec& spec, const Vector& lambdas) {
    spec.validate();
    const Index n = lambdas.size();
    if (n < 1) throw DimensionError("generate_rhs: empty spectrum");
    if (spec.kind == RhsSpec::Kind::UniformNormalized) {
        return Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    }
    const Vector zeta = zeta_profile(spec, n);
    Vector b(n);
    for (Index i = 0; i < n; ++i) b[i] = std::sqrt(zeta[i] * lambdas[i]);
    return b;
}

inline std::string_view to_string(SpectrumSpec::Kind) { return "strakos"; }

inline std::string_view to_string(RhsSpec::Kind k) {
    switch (k) {
        case RhsSpec::Kind::UniformNormalized: return "uniform";
        case RhsSpec::Kind::ZetaFastDecay: return "zeta_fast_decay";
        case RhsSpec::Kind::ZetaFastGrowth: return "zeta_fast_growth";
    }
    return "unknown";
}

inline SpectrumSpec::Kind parse_spectrum_kind(std::string_view s) {
    if (s == "strakos") return SpectrumSpec::Kind::Strakos;
    throw std::invalid_argument("unknown spectrum.kind '" + std::string(s) + "'");
}

inline RhsSpec::Kind parse_rhs_kind(std::string_view s) {
    if (s == "uniform") return RhsSpec::Kind::UniformNormalized;
    if (s == "zeta_fast_decay") return RhsSpec::Kind::ZetaFastDecay;
    if (s == "zeta_fast_growth") return RhsSpec::Kind::ZetaFastGrowth;
    throw std::invalid_argument("unknown rhs.kind '" + std::string(s) + "'");
}

}  // namespace specprec
