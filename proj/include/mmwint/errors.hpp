#pragma once

#include <stdexcept>
#include <string>

namespace mmwint {

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Invalid configuration or parameter set. `field` names the offending input.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Base for all numerical failures (quadrature, series, root finding).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

// Requested tolerance not reached. Carries the best estimate obtained.
class QuadratureError : public NumericError {
public:
    QuadratureError(const std::string& what, double best_estimate, double error_bound)
        : NumericError(what), best_estimate_(best_estimate), error_bound_(error_bound) {}

    double best_estimate() const noexcept { return best_estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double best_estimate_;
    double error_bound_;
};

// Transformed semi-infinite integrand does not decay toward the mapped endpoint.
class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

// Too few Monte-Carlo samples for the requested estimator.
class InsufficientSamplesError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace mmwint
