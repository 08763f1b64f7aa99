#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace groom {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Parses RFC 3339 ("2024-01-08T09:00:00Z", "...+02:00", fractional seconds)
/// and Jira's "2024-01-08T09:00:00.000+0000" variant. Throws Error(ParseError).
Timestamp parse_timestamp(std::string_view text);

/// Formats as RFC 3339 UTC. Milliseconds are emitted only when nonzero.
std::string format_timestamp(Timestamp t);

enum class IssueStatus { Open, InProgress, Done, Closed };

std::string_view to_string(IssueStatus status);
/// Accepts the canonical names above; throws Error(InvalidArgument) otherwise.
IssueStatus parse_issue_status(std::string_view name);

struct Issue {
    std::string key;
    std::string summary;
    std::string description;
    IssueStatus status = IssueStatus::Open;
    std::set<std::string> labels;
    Timestamp created_at{};
    Timestamp updated_at{};

    bool operator==(const Issue&) const = default;
};

/// Throws Error(InvalidIssue) when key or summary is empty or
/// created_at > updated_at.
void validate(const Issue& issue);

/// Text handed to the embedder: summary, then a newline and the description
/// when the description is non-empty.
std::string issue_text(const Issue& issue);
std::string issue_text(std::string_view summary, std::string_view description);

struct BacklogSnapshot {
    std::string project_key;
    std::vector<Issue> issues;
    Timestamp fetched_at{};

    bool operator==(const BacklogSnapshot&) const = default;

    /// nullptr when the key is absent.
    const Issue* find(std::string_view key) const;
};

/// Sorts issues by key and validates every issue plus key uniqueness.
/// Throws Error(InvalidIssue) on the first violation.
BacklogSnapshot normalize(BacklogSnapshot snapshot);

/// Unordered issue pair in canonical form: a < b by code point.
struct IssuePair {
    std::string a;
    std::string b;

    auto operator<=>(const IssuePair&) const = default;
    bool operator==(const IssuePair&) const = default;
};

/// Throws Error(IdenticalKeys) when a == b.
IssuePair canonicalize_pair(std::string_view a, std::string_view b);

/// All n(n-1)/2 canonical pairs over the snapshot, ascending.
std::vector<IssuePair> all_pairs(const BacklogSnapshot& snapshot);

enum class ActionKind { MergeCluster, CreateIssue, UpdateStatus };

std::string_view to_string(ActionKind kind);

struct MergeClusterPayload {
    std::string survivor;
    std::vector<std::string> absorbed;
    std::string summary;
    std::string description;

    bool operator==(const MergeClusterPayload&) const = default;
};

struct CreateIssuePayload {
    std::string summary;
    std::string description;
    std::set<std::string> labels;

    bool operator==(const CreateIssuePayload&) const = default;
};

struct UpdateStatusPayload {
    std::string key;
    IssueStatus target = IssueStatus::Open;

    bool operator==(const UpdateStatusPayload&) const = default;
};

struct GroomingAction {
    std::variant<MergeClusterPayload, CreateIssuePayload, UpdateStatusPayload> payload;

    ActionKind kind() const;
    bool operator==(const GroomingAction&) const = default;
};

/// Throws Error(InvalidArgument) when the payload breaks its invariants:
/// survivor listed among absorbed keys, empty absorbed set, empty summary.
void validate(const GroomingAction& action);

/// Review state shared by duplicate candidates and issue suggestions.
/// Candidates only ever reach Modified through an edited merge decision.
enum class ReviewStatus { Proposed, Accepted, Rejected, Modified };

std::string_view to_string(ReviewStatus status);

}  // namespace groom
