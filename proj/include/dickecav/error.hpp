// error.hpp: exception hierarchy shared by every solver and the CLI

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dickecav {

// Base class; `kind()` is a stable machine-readable tag used for CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

// Invalid physical parameters, malformed configs, violated preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_argument"; }
};

// Problem size above a configured cap (Dicke N, oracle Hilbert dimension).
class DimensionLimit : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "dimension_limit"; }
};

// Iterative or ODE solver did not converge. Carries an optional numeric
// history (residual norms, iterate magnitudes) and the failure time for ODEs.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history = {}, double at_time = -1.0)
        : Error(what), history_(std::move(history)), at_time_(at_time) {}
    const char* kind() const noexcept override { return "convergence"; }
    const std::vector<double>& history() const noexcept { return history_; }
    double at_time() const noexcept { return at_time_; }

private:
    std::vector<double> history_;
    double at_time_;
};

// Steady state is not unique (null space dimension > 1).
class NonUniqueSteadyState : public Error {
public:
    NonUniqueSteadyState(const std::string& what, long null_dimension)
        : Error(what), null_dimension_(null_dimension) {}
    const char* kind() const noexcept override { return "non_unique_steady_state"; }
    long null_dimension() const noexcept { return null_dimension_; }

private:
    long null_dimension_;
};

// Observable needed as a normalization is zero (e.g. g2 of a dark state).
class ZeroRate : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "zero_rate"; }
};

// File parse/IO failures.
class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

} // namespace dickecav
