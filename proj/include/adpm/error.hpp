#pragma once

#include <stdexcept>
#include <string>

namespace adpm {

enum class ErrorKind {
    InsufficientData,
    InvalidInput,
    InvalidRange,
    InvalidAction,
    InvalidState,
    InvalidCost,
    Capacity,
    Configuration,
    ArityMismatch,
    Format,
    Provider,
    UndefinedRatio,
    UndefinedAp,
    InsufficientScript,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every recoverable failure in the library is reported through this type.
/// The kind is stable and is what the CLI maps onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace adpm
