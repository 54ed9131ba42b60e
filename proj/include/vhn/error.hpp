#pragma once

#include <stdexcept>
#include <string>

namespace vhn {

/// Base class of every error raised by the library.
///
/// Each subclass maps onto one CLI exit code: validation failures (1),
/// numerical failures (2) and I/O failures (3).
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid input: malformed files, non-manifold meshes, shape mismatches, bad config.
class ValidationError : public Error
{
public:
    using Error::Error;
};

/// OBJ / field-file parse failure. Carries the 1-based line number.
class ParseError : public ValidationError
{
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError("line " + std::to_string(line) + ": " + what)
        , m_line(line)
    {}
    std::size_t line() const noexcept { return m_line; }

private:
    std::size_t m_line;
};

/// Eigensolver non-convergence, non-finite values, indefinite operators.
class NumericalError : public Error
{
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class IoError : public Error
{
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

} // namespace vhn
