#pragma once

#include <stdexcept>
#include <string>

namespace masklab {

/// Base error for all library failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration and input-validation errors. The CLI maps these to exit
/// code 2; every other failure is a stage failure (exit code 3).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace masklab
