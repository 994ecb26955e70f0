#pragma once

#include <stdexcept>
#include <string>

namespace driftbench {

// Inputs that violate an operation's preconditions (bad shapes, non-finite
// values, out-of-range settings).
class InvalidInputError : public std::runtime_error {
public:
    explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

// Operations that require at least one sample / element.
class EmptyInputError : public InvalidInputError {
public:
    explicit EmptyInputError(const std::string& what) : InvalidInputError(what) {}
};

// A parameter update that would write non-finite values; the target state is
// left untouched so the caller can roll back or skip.
class PoisonedUpdateError : public std::runtime_error {
public:
    explicit PoisonedUpdateError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration / file-format problems surfaced by the harness.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

}  // namespace driftbench
