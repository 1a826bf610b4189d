#pragma once

#include <stdexcept>
#include <string>

namespace qlsacd {

// Parameter or argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed user input (files, flags, configuration).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure: diverging recursion, non-convergence, singular matrices.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The conditional-quantile recursion left the representable range.
class DivergenceError : public NumericalError {
public:
    DivergenceError(std::size_t t, double eta)
        : NumericalError("diverging quantile recursion at t=" + std::to_string(t) +
                         " (eta=" + std::to_string(eta) + ")"),
          index(t),
          eta(eta) {}

    std::size_t index;
    double eta;
};

}  // namespace qlsacd
