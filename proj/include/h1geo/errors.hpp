#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace h1geo {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Syntax error in an expression string. offset is a byte offset into the source.
struct ParseError : Error {
    ParseError(std::size_t offset_, const std::string& expected_)
        : Error("parse error at offset " + std::to_string(offset_) + ": expected " + expected_),
          offset(offset_),
          expected(expected_) {}
    std::size_t offset;
    std::string expected;
};

// Domain error while evaluating an expression (ln of nonpositive, division by
// zero, ...). subexpression is the offending source fragment.
struct EvalError : Error {
    EvalError(const std::string& what_, const std::string& subexpression_)
        : Error(what_ + " in \"" + subexpression_ + "\""), subexpression(subexpression_) {}
    std::string subexpression;
};

// Malformed job config or CLI usage.
struct ConfigError : Error {
    using Error::Error;
};

// Point outside the domain of a chart, curve, or strip.
struct OutOfDomainError : Error {
    using Error::Error;
};

// A documented precondition does not hold (characteristic point, data not
// strict, surface not minimal, curve not unit speed, ...).
struct PreconditionError : Error {
    using Error::Error;
};

// Numerical process failed: quadrature budget exhausted, root find did not
// converge, search ended without a verdict.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace h1geo
