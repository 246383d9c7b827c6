#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace tpmgrit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied argument.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Inconsistent configuration (bad key, illegal hierarchy, singular system).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An application time step failed. The solver attaches the target time
/// index when the application could not.
class StepError : public Error {
public:
    explicit StepError(const std::string& what) : Error(what), message_(what) {}
    StepError(const std::string& what, std::size_t time_index)
        : Error(what + " (time index " + std::to_string(time_index) + ")"),
          message_(what),
          time_index_(time_index) {}

    std::optional<std::size_t> time_index() const noexcept { return time_index_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    std::optional<std::size_t> time_index_;
};

/// Message-passing protocol violation, including watchdog expiry.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A reference computation (fixed-point oracle) could not produce an answer.
class OracleError : public Error {
public:
    using Error::Error;
};

}  // namespace tpmgrit
