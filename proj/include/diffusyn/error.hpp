#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace diffusyn {

/// Failure classes surfaced by the library. The CLI maps every kind except
/// `Usage` to exit code 1.
enum class ErrorKind {
    Io,
    Parse,
    VersionedFormat,
    Validation,
    Media,
    Precondition,
    Config,
    ProviderUnavailable,
    ProviderRejected,
    GenerationRefused,
    QuotaExhausted,
    BudgetExhausted,
    IndeterminateResponse,
    UnscorableResponse,
    UndefinedMetric,
    DegenerateTable,
    InsufficientInput,
    InsufficientStratum,
    Comparison,
    NotFound,
    Conflict,
    Usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorKind::Precondition, message);
}

}  // namespace diffusyn
