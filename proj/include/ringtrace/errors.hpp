#pragma once

#include <stdexcept>
#include <string>

namespace ringtrace {

// Base of every library error. The CLI maps subclasses onto exit codes:
// input problems (argument, range, schema, validation) exit 2, numerical
// failures exit 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- input errors --------------------------------------------------------

class ArgumentError : public Error {
public:
    using Error::Error;
};

class RangeError : public ArgumentError {
public:
    RangeError(const std::string& what, double lo, double hi)
        : ArgumentError(what), lo_(lo), hi_(hi) {}
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

class SchemaError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

class ValidationError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

// --- numerical errors ----------------------------------------------------

class NumericError : public Error {
public:
    using Error::Error;
};

class NoSolutionError : public NumericError {
public:
    using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, double best_residual)
        : NumericError(what), best_residual_(best_residual) {}
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

// Total internal reflection and similar impossible geometry.
class GeometryError : public NumericError {
public:
    using NumericError::NumericError;
};

// Direction on (or within a finite-difference step of) an optic axis, where
// the two eigenwaves are degenerate.
class DegeneracyError : public NumericError {
public:
    using NumericError::NumericError;
};

class FitError : public NumericError {
public:
    FitError(const std::string& what, double best_cost)
        : NumericError(what), best_cost_(best_cost) {}
    double best_cost() const noexcept { return best_cost_; }

private:
    double best_cost_;
};

// No ring-like feature to start a fit from.
class InitializationError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace ringtrace
