#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specprec {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when vector or operator sizes disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by theta selection when the initial residual has no component
/// outside the deflated eigenspace (the first-iteration Ritz value is undefined).
class DegenerateResidualError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised by the exhaustive oracle when C(n, k) exceeds its enumeration guard.
class CombinatorialLimitError : public std::length_error {
public:
    using std::length_error::length_error;
};

inline void require_dim(Index got, Index expected, const char* what) {
    if (got != expected) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                             ", got " + std::to_string(got));
    }
}

}  // namespace specprec
