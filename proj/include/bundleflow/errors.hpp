#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bundleflow {

/// Invalid parameters or configuration (maps to CLI exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Root bracketing, eigen-solver convergence and similar numerical failures
/// (CLI exit code 2).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a formula (e.g. a negative discriminant).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Step-size underflow or a failing right-hand side during integration
/// (CLI exit code 3). Carries the last accepted state.
class IntegratorError : public std::runtime_error {
public:
    IntegratorError(const std::string& what, double u, std::vector<double> state)
        : std::runtime_error(what), last_u(u), last_state(std::move(state)) {}

    double last_u;
    std::vector<double> last_state;
};

}  // namespace bundleflow
