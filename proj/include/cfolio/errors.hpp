#pragma once

#include <stdexcept>
#include <string>

namespace cfolio {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input row; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Date alignment across assets produced an unusable panel.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Input has too few rows/columns for the requested operation.
class SizeError : public Error {
public:
    using Error::Error;
};

// Covariance input asymmetric or indefinite beyond tolerance.
class MatrixError : public Error {
public:
    using Error::Error;
};

// Degenerate input (zero variance and similar).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Correlation undefined (zero-variance column).
class UndefinedCorrelationError : public DegenerateError {
public:
    using DegenerateError::DegenerateError;
};

// File or network I/O failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cfolio
