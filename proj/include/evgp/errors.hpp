#pragma once

#include <stdexcept>
#include <string>

namespace evgp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input/config that violates a precondition (bad widths, mismatched spec, ...).
struct ConfigError : Error {
    using Error::Error;
};

// An enumeration or path-sum whose estimated cost exceeds the configured guard.
struct GuardExceededError : Error {
    GuardExceededError(const std::string& msg, double estimate)
        : Error(msg), cost_estimate(estimate) {}
    double cost_estimate;
};

// Some preactivation is exactly 0: the input sits on a ReLU kink and the
// Jacobian is not defined there.
struct ZeroPreactivationError : Error {
    using Error::Error;
};

// Zero input combined with an all-zero bias: every gradient vanishes identically.
struct DegenerateInputError : Error {
    using Error::Error;
};

// A bound was requested outside the hypothesis it was proved under.
struct HypothesisViolatedError : Error {
    using Error::Error;
};

}  // namespace evgp
