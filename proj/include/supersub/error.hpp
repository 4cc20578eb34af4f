#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace supersub {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class OverflowError : public Error {
public:
    using Error::Error;
};

class ModeError : public Error {
public:
    using Error::Error;
};

// Integrity failures: corrupt containers and stale deltas.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class FormatError : public IntegrityError {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : IntegrityError(what + " (at byte " + std::to_string(offset) + ")"), message_(what), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }
    const std::string& message() const noexcept { return message_; }

    // Same error with its offset shifted into an enclosing buffer.
    FormatError shifted(std::uint64_t base, const std::string& prefix) const {
        return FormatError(prefix + message_, base + offset_);
    }

private:
    std::string message_;
    std::uint64_t offset_;
};

class BaseMismatchError : public IntegrityError {
public:
    using IntegrityError::IntegrityError;
};

}  // namespace supersub
