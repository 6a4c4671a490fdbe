#pragma once

#include <stdexcept>
#include <string>

namespace trajdiff {

/// Integrator failure: step-size underflow, step budget exhausted, or a non-finite state.
class PropagationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lambert solver failure: degenerate geometry or no convergence.
class LambertError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A tensor or state that must stay finite did not.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent on-disk artifact.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace trajdiff
