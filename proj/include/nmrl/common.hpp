#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmrl {

// Shape/dimension violations (e.g. matmul with mismatched inner dims).
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violations of an operation's preconditions (stepping a finished episode,
// non-scalar loss, empty task batch, ...).
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Bad or inconsistent run configuration; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where the contract requires finite ones; maps to CLI
// exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace nmrl
