#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuselab {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or dimensions do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside the domain of a function (log of a non-positive value, division by zero).
class DomainError : public Error {
public:
    using Error::Error;
};

// Caller broke an API precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// A value went NaN or infinite.
class NumericError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Training produced a non-finite loss.
class DivergenceError : public NumericError {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : NumericError("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// A function under gradient check returned a non-finite value.
class EvaluationError : public NumericError {
public:
    EvaluationError(std::size_t coordinate, const std::string& what)
        : NumericError("coordinate " + std::to_string(coordinate) + ": " + what), coordinate_(coordinate) {}
    std::size_t coordinate() const noexcept { return coordinate_; }

private:
    std::size_t coordinate_;
};

}  // namespace fuselab
