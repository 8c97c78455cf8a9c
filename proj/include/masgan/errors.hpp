#pragma once
#include <stdexcept>
#include <string>

namespace masgan {

// Bad user-supplied data or arguments (exit code 2 at the CLI boundary).
struct InvalidInputError : std::runtime_error {
    explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents; carries the offending line where known.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent configuration (shapes, ranges, missing keys).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime failure during compute (exit code 3 at the CLI boundary).
struct RuntimeDataError : std::runtime_error {
    explicit RuntimeDataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace masgan
