#pragma once

#include <stdexcept>
#include <string>

namespace slab {

/// Base of every error the toolkit throws. `exit_code()` is what the CLI
/// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 3; }
};

// Usage and configuration problems (exit 2).
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class ConfigError : public UsageError {
public:
    using UsageError::UsageError;
};

// Numerical contract violations (exit 3).
class DimensionError : public Error {
public:
    using Error::Error;
};

class ParityError : public Error {
public:
    using Error::Error;
};

class SingularModeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class StepSizeError : public Error {
public:
    using Error::Error;
};

class BlowUpError : public Error {
public:
    using Error::Error;
};

// Persistence problems (exit 4).
class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

class CorruptionError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace slab
