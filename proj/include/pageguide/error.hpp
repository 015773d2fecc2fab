#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace pageguide {

/// Closed set of failure kinds raised by the engine. The service maps each
/// value to exactly one (HTTP status, code string) pair.
enum class ErrorCode {
    // snapshot_store
    MissingFile,
    MalformedMeta,
    UnparseableHtml,
    IoError,
    EmptySequence,
    // dom_index
    UnknownElementId,
    NoSpanMatch,
    // llm_gateway
    ReplayMiss,
    Transport,
    Upstream,
    MissingCredential,
    // intent_router
    ParseFailure,
    // guide_engine
    InvalidState,
    MalformedStep,
    SequenceExhausted,
    StepLimit,
    // hide_engine
    MalformedHideResponse,
    UnknownCandidate,
    AlreadyApplied,
    StaleIndex,
    UnknownMutation,
    InvalidCount,
    // eval_harness
    EmptyDataset,
    SchemaViolation,
    // service_api
    UnknownSnapshot,
    UnknownSession,
    Busy,
    TooLarge,
    BadRequest,
    Unauthorized,
    NotFound,
    // cli
    Usage,
};

/// Every ErrorCode value, in declaration order.
inline constexpr ErrorCode kAllErrorCodes[] = {
    ErrorCode::MissingFile,       ErrorCode::MalformedMeta,
    ErrorCode::UnparseableHtml,   ErrorCode::IoError,
    ErrorCode::EmptySequence,     ErrorCode::UnknownElementId,
    ErrorCode::NoSpanMatch,       ErrorCode::ReplayMiss,
    ErrorCode::Transport,         ErrorCode::Upstream,
    ErrorCode::MissingCredential, ErrorCode::ParseFailure,
    ErrorCode::InvalidState,      ErrorCode::MalformedStep,
    ErrorCode::SequenceExhausted, ErrorCode::StepLimit,
    ErrorCode::MalformedHideResponse, ErrorCode::UnknownCandidate,
    ErrorCode::AlreadyApplied,    ErrorCode::StaleIndex,
    ErrorCode::UnknownMutation,   ErrorCode::InvalidCount,
    ErrorCode::EmptyDataset,      ErrorCode::SchemaViolation,
    ErrorCode::UnknownSnapshot,   ErrorCode::UnknownSession,
    ErrorCode::Busy,              ErrorCode::TooLarge,
    ErrorCode::BadRequest,        ErrorCode::Unauthorized,
    ErrorCode::NotFound,          ErrorCode::Usage,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), message_(message), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    const nlohmann::json& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string message_;
    nlohmann::json detail_;
};

}  // namespace pageguide
