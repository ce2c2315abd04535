#pragma once

#include <array>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgt {

using cd = std::complex<double>;

// Configuration-space point; models are at most two-dimensional, unused
// trailing coordinates are ignored when dim_config == 1.
using Point = std::array<double, 2>;

using Params = std::span<const double>;
using ParamVector = std::vector<double>;

// A parameter point never exceeds this many components in the built-in models.
inline constexpr std::size_t kMaxParams = 4;

// Raised when an evaluator returns a non-finite value or cannot be evaluated.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a mathematical invariant that must hold is violated.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised for inadmissible parameters or points outside a domain.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when user input (CLI requests, settings) is malformed.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when adaptive quadrature cannot reach its tolerance; carries the
// best estimate obtained so that callers may still report it.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<cd> best, std::vector<double> errors)
        : std::runtime_error(what), best_estimate(std::move(best)), error_estimate(std::move(errors)) {}
    std::vector<cd> best_estimate;
    std::vector<double> error_estimate;
};

std::string format_point(Params p);

}  // namespace qgt
