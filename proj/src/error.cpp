#include "groom/error.hpp"

namespace groom {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::IdenticalKeys: return "identical_keys";
    case ErrorCode::InvalidIssue: return "invalid_issue";
    case ErrorCode::EmptyText: return "empty_text";
    case ErrorCode::DegenerateText: return "degenerate_text";
    case ErrorCode::ProviderError: return "provider_error";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::ZeroVector: return "zero_vector";
    case ErrorCode::EmptyIndex: return "empty_index";
    case ErrorCode::TooFewIssues: return "too_few_issues";
    case ErrorCode::UnknownIssueKey: return "unknown_issue_key";
    case ErrorCode::DraftingFailed: return "drafting_failed";
    case ErrorCode::MalformedModelOutput: return "malformed_model_output";
    case ErrorCode::AuthFailed: return "auth_failed";
    case ErrorCode::ProjectNotFound: return "project_not_found";
    case ErrorCode::RateLimited: return "rate_limited";
    case ErrorCode::GatewayError: return "gateway_error";
    case ErrorCode::FixtureParseError: return "fixture_parse_error";
    case ErrorCode::PartialFailure: return "partial_failure";
    case ErrorCode::ParseError: return "parse_error";
    case ErrorCode::SelfPair: return "self_pair";
    case ErrorCode::NonPositiveBaseline: return "non_positive_baseline";
    case ErrorCode::SessionNotFound: return "session_not_found";
    case ErrorCode::SessionAlreadyApplied: return "session_already_applied";
    case ErrorCode::UnknownTarget: return "unknown_target";
    case ErrorCode::MissingEditedPayload: return "missing_edited_payload";
    case ErrorCode::NothingToApply: return "nothing_to_apply";
    case ErrorCode::ConfigError: return "config_error";
    }
    return "unknown";
}

}  // namespace groom
