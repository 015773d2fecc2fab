#include "pageguide/error.hpp"

namespace pageguide {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::MalformedMeta: return "MalformedMeta";
        case ErrorCode::UnparseableHtml: return "UnparseableHtml";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::EmptySequence: return "EmptySequence";
        case ErrorCode::UnknownElementId: return "UnknownElementId";
        case ErrorCode::NoSpanMatch: return "NoSpanMatch";
        case ErrorCode::ReplayMiss: return "ReplayMiss";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::Upstream: return "Upstream";
        case ErrorCode::MissingCredential: return "MissingCredential";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::MalformedStep: return "MalformedStep";
        case ErrorCode::SequenceExhausted: return "SequenceExhausted";
        case ErrorCode::StepLimit: return "StepLimit";
        case ErrorCode::MalformedHideResponse: return "MalformedHideResponse";
        case ErrorCode::UnknownCandidate: return "UnknownCandidate";
        case ErrorCode::AlreadyApplied: return "AlreadyApplied";
        case ErrorCode::StaleIndex: return "StaleIndex";
        case ErrorCode::UnknownMutation: return "UnknownMutation";
        case ErrorCode::InvalidCount: return "InvalidCount";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::UnknownSnapshot: return "UnknownSnapshot";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::Busy: return "Busy";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::BadRequest: return "BadRequest";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

}  // namespace pageguide
