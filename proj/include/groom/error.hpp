#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace groom {

enum class ErrorCode {
    InvalidArgument,
    IdenticalKeys,
    InvalidIssue,
    EmptyText,
    DegenerateText,
    ProviderError,
    DimensionMismatch,
    ZeroVector,
    EmptyIndex,
    TooFewIssues,
    UnknownIssueKey,
    DraftingFailed,
    MalformedModelOutput,
    AuthFailed,
    ProjectNotFound,
    RateLimited,
    GatewayError,
    FixtureParseError,
    PartialFailure,
    ParseError,
    SelfPair,
    NonPositiveBaseline,
    SessionNotFound,
    SessionAlreadyApplied,
    UnknownTarget,
    MissingEditedPayload,
    NothingToApply,
    ConfigError,
};

/// Stable snake_case identifier used in JSON error bodies and logs.
std::string_view error_code_name(ErrorCode code);

/// Base exception for every failure raised by the grooming engine.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Remote provider failure after the retry budget is exhausted.
class ProviderError : public Error {
public:
    ProviderError(const std::string& message, int status, int attempts)
        : Error(ErrorCode::ProviderError, message), status_(status), attempts_(attempts) {}

    /// Last HTTP status seen; 0 when the transport never got a response.
    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    int attempts_;
};

class MalformedOutputError : public Error {
public:
    MalformedOutputError(const std::string& reason, std::size_t position)
        : Error(ErrorCode::MalformedModelOutput,
                "malformed model output at " + std::to_string(position) + ": " + reason),
          reason_(reason),
          position_(position) {}

    const std::string& reason() const noexcept { return reason_; }
    std::size_t position() const noexcept { return position_; }

private:
    std::string reason_;
    std::size_t position_;
};

/// Line-oriented parse failure (ground truth CSV, config files).
class ParseError : public Error {
public:
    ParseError(ErrorCode code, const std::string& message, std::size_t line)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace groom
