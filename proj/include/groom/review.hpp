#pragma once

#include "groom/dedup.hpp"
#include "groom/embedding.hpp"
#include "groom/evaluation.hpp"
#include "groom/gateway.hpp"
#include "groom/genai.hpp"
#include "groom/model.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace groom {

enum class SessionMode { Interactive, Auto };

std::string_view to_string(SessionMode mode);
SessionMode parse_session_mode(std::string_view name);

enum class Verdict { Accept, Reject, Modify };

std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view name);

struct Decision {
    std::string target;  // candidate id or suggestion id
    Verdict verdict = Verdict::Accept;
    std::optional<MergeText> edited;  // Modify only
    std::string actor = "user";
};

struct DecisionLogEntry {
    Timestamp at{};
    std::string actor;
    std::string target;
    Verdict verdict = Verdict::Accept;
};

struct SuggestionItem {
    std::string id;  // "s-<n>"
    IssueSuggestion suggestion;
    ReviewStatus status = ReviewStatus::Proposed;
    std::optional<MergeText> edited;
};

/// Everything a grooming session knows. Copies are plain values; the live
/// instance is owned by ReviewService and mutated under a per-session lock.
struct ReviewSession {
    std::string id;
    SessionMode mode = SessionMode::Interactive;
    EngineConfig engine_config;
    std::string project_description;
    BacklogSnapshot snapshot;
    std::vector<DuplicateCandidate> candidates;
    std::map<std::string, MergeText> candidate_edits;  // by candidate id
    std::vector<SuggestionItem> suggestions;
    std::vector<DecisionLogEntry> decision_log;
    Timestamp started_at{};
    std::optional<Timestamp> applied_at;
    std::vector<ApplyReceipt> receipts;
    std::set<std::string> created_from;  // suggestion ids already turned into issues

    bool applied() const { return applied_at.has_value(); }
};

/// Candidates whose status is Accepted or Modified.
std::vector<DuplicateCandidate> confirmed_candidates(const ReviewSession& session);

/// C(k,2) expansion of the clusters formed by the confirmed candidates.
std::set<IssuePair> predicted_pairs(const ReviewSession& session);

struct SessionApplyResult {
    std::vector<ApplyReceipt> receipts;
    double time_to_completion_seconds = 0.0;
};

/// Dependencies a service needs to scan, draft, suggest and apply.
struct ReviewServiceDeps {
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<const PromptLibrary> prompts;
    /// Drafts merge text; nullptr means FallbackDrafter.
    std::shared_ptr<MergeDrafter> drafter;
    Clock clock = system_now;
    /// Labeled pairs for the report's metric row, when available.
    std::optional<GroundTruth> truth;
};

/// Owns grooming sessions. Every call on one session is serialized; calls on
/// different sessions run independently.
class ReviewService {
public:
    explicit ReviewService(ReviewServiceDeps deps);

    /// Fetches, scans and stores a new session; Auto mode accepts every
    /// candidate up front without logging decisions. Nothing is stored on error.
    std::string start_session(std::shared_ptr<Gateway> gateway, const EngineConfig& engine_config, SessionMode mode,
                              std::string project_description = {});

    ReviewSession get(const std::string& id) const;
    std::vector<std::string> list() const;

    /// Last decision wins until the session is applied. Returns the new status.
    ReviewStatus record_decision(const std::string& id, const Decision& decision);

    /// Appends filtered suggestions as Proposed items; the session is left
    /// untouched if the provider fails. Returns the newly added items.
    std::vector<SuggestionItem> request_suggestions(const std::string& id, const std::string& user_prompt,
                                                    std::size_t max_suggestions = 5);

    /// Clusters confirmed pairs, drafts merges, creates confirmed suggestions
    /// and pushes everything through the session's gateway.
    SessionApplyResult apply(const std::string& id);

    nlohmann::json report(const std::string& id) const;

private:
    struct Slot {
        mutable std::mutex mutex;
        ReviewSession session;
        std::shared_ptr<Gateway> gateway;
    };

    std::shared_ptr<Slot> slot(const std::string& id) const;
    Timestamp log_time(const ReviewSession& session) const;
    std::vector<GroomingAction> plan_merges(const ReviewSession& session) const;

    ReviewServiceDeps deps_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::size_t next_id_ = 1;
};

nlohmann::json to_json(const ReviewSession& session);
nlohmann::json to_json(const SuggestionItem& item);

/// HTTP status used for an error code in API responses.
int http_status_for(ErrorCode code);

/// JSON API in front of a ReviewService.
class ReviewServer {
public:
    using GatewayFactory = std::function<std::shared_ptr<Gateway>(const nlohmann::json& request)>;

    ReviewServer(std::shared_ptr<ReviewService> service, GatewayFactory gateway_factory, EngineConfig defaults,
                 std::string project_description = {});
    ~ReviewServer();

    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Serves static files (the review UI) from `directory` at "/".
    void mount_static(const std::string& directory);

    /// Binds; returns false when the address is unavailable. Port 0 picks a
    /// free port, readable through port().
    bool bind(const std::string& host, int port);
    int port() const noexcept { return port_; }

    /// Blocks until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace groom
