#pragma once

#include <stdexcept>
#include <string>

namespace declab {

/// Input outside the domain an operation is defined on.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller broke a documented precondition (wrong counts, non-unit vectors, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quadrature or refinement loop did not settle.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested configuration is valid but not supported by the construction.
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Size guard tripped (brute-force oracle scale, dense array budget).
class GuardError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// A frequency atom does not lie in the neighborhood it was assigned to.
class RejectionError : public std::domain_error {
public:
    RejectionError(const std::string& what, double distance)
        : std::domain_error(what), distance_(distance) {}
    double distance() const noexcept { return distance_; }

private:
    double distance_;
};

/// Hashed sum keys disagreed with the exact sums they were built from.
class CollisionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Experiment configuration rejected before any computation.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace declab
