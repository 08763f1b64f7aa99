#pragma once

#include "groom/dedup.hpp"
#include "groom/embedding.hpp"
#include "groom/http.hpp"
#include "groom/model.hpp"

#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace groom {

enum class ChatProviderKind { RemoteApi, Mock };

struct ChatProviderConfig {
    ChatProviderKind provider = ChatProviderKind::Mock;
    std::string model_name = "mock-chat";
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::chrono::milliseconds request_timeout{60000};
    // Remote only; normally filled from CHAT_API_URL / CHAT_API_KEY.
    std::string api_url;
    std::string api_key;
};

void validate(const ChatProviderConfig& config);

struct SuggestionRequest {
    std::string project_description;
    std::vector<std::pair<std::string, std::string>> issue_digest;  // (key, summary)
    std::string user_prompt;
    std::size_t max_suggestions = 5;
};

/// Digest of the snapshot in key order.
std::vector<std::pair<std::string, std::string>> make_issue_digest(const BacklogSnapshot& snapshot);

struct IssueSuggestion {
    std::string summary;
    std::string description;
    std::string rationale;
    /// Max cosine against existing issues; set by the redundancy filter.
    std::optional<double> redundancy_score;
};

enum class ChatTask { DraftMerge, SuggestIssues };

/// Rendered prompt plus the structured inputs it was rendered from. Remote
/// providers only see the text; the mock answers from the structured side.
struct ChatPrompt {
    ChatTask task = ChatTask::SuggestIssues;
    bool reformat_retry = false;
    std::string system;
    std::string user;
    std::vector<Issue> merge_issues;
    std::optional<SuggestionRequest> suggestion_request;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// Raw text of the model's reply. Throws ProviderError.
    virtual std::string complete(const ChatPrompt& prompt) = 0;
};

/// Deterministic stand-in for a chat model. Scripted replies, when queued,
/// are returned first (one per call); afterwards it answers from rules:
/// merges echo the lowest-key summary and join descriptions with "\n---\n",
/// suggestions come from a fixed catalogue led by the user prompt.
class MockChatProvider final : public ChatProvider {
public:
    MockChatProvider() = default;
    explicit MockChatProvider(std::vector<std::string> scripted);

    std::string complete(const ChatPrompt& prompt) override;

    void push_reply(std::string reply);
    std::size_t calls() const;

    /// Summaries and descriptions the default suggestion rule draws from.
    static const std::vector<IssueSuggestion>& catalogue();

private:
    mutable std::mutex mutex_;
    std::deque<std::string> scripted_;
    std::size_t calls_ = 0;
};

/// OpenAI-compatible chat completions client.
class RemoteChatProvider final : public ChatProvider {
public:
    RemoteChatProvider(ChatProviderConfig config, std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {});

    std::string complete(const ChatPrompt& prompt) override;

private:
    ChatProviderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
};

std::shared_ptr<ChatProvider> make_chat_provider(const ChatProviderConfig& config,
                                                 std::shared_ptr<HttpTransport> transport = nullptr);

/// Prompt templates loaded from a directory of plain-text files with
/// {named} placeholders.
class PromptLibrary {
public:
    /// Directory holding system.txt, merge_issues.txt, suggest_issues.txt and
    /// reformat.txt. Throws Error(ConfigError) if any is missing.
    explicit PromptLibrary(const std::filesystem::path& directory);

    /// Directory compiled in at build time, overridable with GROOM_PROMPT_DIR.
    static std::filesystem::path default_directory();

    /// Substitutes every {name}; throws Error(ConfigError) on an unknown name.
    std::string render(const std::string& template_name, const std::map<std::string, std::string>& values) const;

private:
    std::map<std::string, std::string> templates_;
};

/// Strict parser for suggestion replies: a JSON array of objects, each with
/// string fields summary (non-empty), description and rationale.
/// Throws MalformedOutputError; never anything else.
std::vector<IssueSuggestion> parse_model_output(std::string_view raw);

/// Strict parser for merge replies: {"summary": ..., "description": ...}.
MergeText parse_merge_output(std::string_view raw);

/// Single coherent summary/description for >= 2 issues. One reformat retry
/// is spent on a malformed reply before MalformedOutputError propagates.
MergeText draft_merge_text(const std::vector<Issue>& issues, ChatProvider& provider, const PromptLibrary& prompts);

/// MergeDrafter backed by a chat model.
class ChatMergeDrafter final : public MergeDrafter {
public:
    ChatMergeDrafter(std::shared_ptr<ChatProvider> provider, std::shared_ptr<const PromptLibrary> prompts)
        : provider_(std::move(provider)), prompts_(std::move(prompts)) {}

    MergeText draft(const std::vector<Issue>& issues, const std::string& survivor) override;

private:
    std::shared_ptr<ChatProvider> provider_;
    std::shared_ptr<const PromptLibrary> prompts_;
};

/// Asks the model for new backlog items, keeps at most max_suggestions,
/// embeds each one and drops those whose best cosine against the existing
/// issues reaches engine_config.new_issue_redundancy_threshold.
std::vector<IssueSuggestion> suggest_new_issues(const SuggestionRequest& request, const BacklogSnapshot& snapshot,
                                                ChatProvider& provider, const PromptLibrary& prompts,
                                                Embedder& embedder, const EngineConfig& engine_config);

}  // namespace groom
