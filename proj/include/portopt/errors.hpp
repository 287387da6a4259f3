#pragma once

#include <stdexcept>
#include <string>

namespace portopt {

/// Input that could not be tokenized or typed (CSV rows, config lines).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally valid input carrying impossible values.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Not enough history for the requested estimate.
class InsufficientDataError : public std::runtime_error {
public:
    explicit InsufficientDataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Containers that must line up (dates, dimensions) do not.
class AlignmentError : public std::invalid_argument {
public:
    explicit AlignmentError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A numeric argument is outside its documented domain.
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Risk filtering or clustering left nothing to invest in.
class EmptyUniverseError : public std::runtime_error {
public:
    explicit EmptyUniverseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An empty sample pool cannot be ranked.
class EmptyPoolError : public std::runtime_error {
public:
    explicit EmptyPoolError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A run-configuration field failed validation.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace portopt
