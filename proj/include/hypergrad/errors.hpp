#pragma once

#include <stdexcept>
#include <string>

namespace hypergrad {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Precondition or dimension violation.
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

/// Malformed input file (CSV, config). Carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Experiment-config problem. Carries the offending field path.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& msg)
        : Error(field.empty() ? msg : field + ": " + msg), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Direct linear solve hit a singular system; callers may fall back to
/// a least-squares solve.
class SingularSystemError : public Error {
public:
    explicit SingularSystemError(const std::string& msg) : Error(msg) {}
};

/// Filesystem failure (open/create/write).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace hypergrad
