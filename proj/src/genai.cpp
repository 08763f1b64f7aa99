#include "groom/genai.hpp"

#include "groom/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef GROOM_PROMPT_DIR
#define GROOM_PROMPT_DIR "prompts"
#endif

namespace groom {

namespace {

using json = nlohmann::json;

const char* const kTemplateNames[] = {"system", "merge_issues", "suggest_issues", "reformat"};

std::string merge_issue_block(const std::vector<Issue>& issues) {
    std::string block;
    for (const auto& issue : issues) {
        if (!block.empty()) {
            block += "\n\n";
        }
        block += "[" + issue.key + "] " + issue.summary;
        if (!issue.description.empty()) {
            block += "\n" + issue.description;
        }
    }
    return block;
}

std::string digest_block(const SuggestionRequest& request) {
    std::string block;
    for (const auto& [key, summary] : request.issue_digest) {
        block += "- " + key + ": " + summary + "\n";
    }
    if (block.empty()) {
        block = "(empty backlog)\n";
    }
    block.pop_back();
    return block;
}

std::string require_string(const json& object, const char* field, std::size_t element) {
    auto it = object.find(field);
    if (it == object.end()) {
        throw MalformedOutputError(std::string("element lacks required field \"") + field + "\"", element);
    }
    if (!it->is_string()) {
        throw MalformedOutputError(std::string("field \"") + field + "\" is not a string", element);
    }
    return it->get<std::string>();
}

json parse_json(std::string_view raw) {
    try {
        return json::parse(raw.begin(), raw.end());
    } catch (const json::parse_error& e) {
        throw MalformedOutputError("not valid JSON", e.byte);
    } catch (const json::exception& e) {
        throw MalformedOutputError(e.what(), 0);
    }
}

/// Calls the provider, parses with `parse`, and on a malformed reply asks
/// once more with the parse error echoed back.
template <typename Parse>
auto complete_and_parse(ChatProvider& provider, const PromptLibrary& prompts, ChatPrompt prompt, Parse parse) {
    const std::string first = provider.complete(prompt);
    try {
        return parse(first);
    } catch (const MalformedOutputError& e) {
        prompt.reformat_retry = true;
        prompt.user = prompts.render(
            "reformat", {{"error", e.what()}, {"previous_output", first}, {"original_request", prompt.user}});
        return parse(provider.complete(prompt));
    }
}

}  // namespace

void validate(const ChatProviderConfig& config) {
    if (config.temperature < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "chat temperature must be >= 0");
    }
    if (config.max_output_tokens <= 0) {
        throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
    }
    if (config.provider == ChatProviderKind::RemoteApi && config.api_url.empty()) {
        throw Error(ErrorCode::InvalidArgument, "remote chat provider needs CHAT_API_URL");
    }
}

std::vector<std::pair<std::string, std::string>> make_issue_digest(const BacklogSnapshot& snapshot) {
    std::vector<std::pair<std::string, std::string>> digest;
    for (const auto& issue : snapshot.issues) {
        digest.emplace_back(issue.key, issue.summary);
    }
    std::sort(digest.begin(), digest.end());
    return digest;
}

MockChatProvider::MockChatProvider(std::vector<std::string> scripted)
    : scripted_(scripted.begin(), scripted.end()) {}

void MockChatProvider::push_reply(std::string reply) {
    std::lock_guard lock(mutex_);
    scripted_.push_back(std::move(reply));
}

std::size_t MockChatProvider::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

const std::vector<IssueSuggestion>& MockChatProvider::catalogue() {
    static const std::vector<IssueSuggestion> items = {
        {"Add end-to-end smoke tests for critical user journeys",
         "Automate a smoke suite that covers sign-in, search, checkout and payment on every deploy.",
         "No backlog item guards the main flows against regressions.", std::nullopt},
        {"Define a latency objective for the public API",
         "Agree on a p95 latency target, measure it continuously and alert when the budget is burnt.",
         "Performance complaints exist but no measurable target is tracked.", std::nullopt},
        {"Write onboarding documentation for new developers",
         "Describe local setup, architecture overview and release steps in the repository wiki.",
         "Knowledge about the system is concentrated in a few people.", std::nullopt},
        {"Set up error monitoring with alerting",
         "Capture unhandled exceptions from web and backend services and page the on-call engineer.",
         "Several bugs were reported by customers before the team noticed them.", std::nullopt},
        {"Review and close stale backlog items",
         "Go through issues untouched for six months and close or re-prioritise them.",
         "A cluttered backlog hides the items that matter.", std::nullopt},
    };
    return items;
}

std::string MockChatProvider::complete(const ChatPrompt& prompt) {
    {
        std::lock_guard lock(mutex_);
        ++calls_;
        if (!scripted_.empty()) {
            auto reply = std::move(scripted_.front());
            scripted_.pop_front();
            return reply;
        }
    }

    if (prompt.task == ChatTask::DraftMerge) {
        auto issues = prompt.merge_issues;
        if (issues.empty()) {
            throw ProviderError("mock merge prompt carries no issues", 400, 1);
        }
        std::sort(issues.begin(), issues.end(), [](const Issue& x, const Issue& y) { return x.key < y.key; });
        std::string description;
        for (std::size_t i = 0; i < issues.size(); ++i) {
            description += (i ? "\n---\n" : "") + issues[i].description;
        }
        return json{{"summary", issues.front().summary}, {"description", description}}.dump();
    }

    const SuggestionRequest request = prompt.suggestion_request.value_or(SuggestionRequest{});
    json reply = json::array();
    if (!request.user_prompt.empty()) {
        reply.push_back({{"summary", "Follow up: " + request.user_prompt},
                         {"description", "Requested during backlog grooming: " + request.user_prompt},
                         {"rationale", "Explicit request from the person grooming the backlog."}});
    }
    for (const auto& item : catalogue()) {
        reply.push_back({{"summary", item.summary}, {"description", item.description}, {"rationale", item.rationale}});
    }
    return reply.dump();
}

RemoteChatProvider::RemoteChatProvider(ChatProviderConfig config, std::shared_ptr<HttpTransport> transport,
                                       RetryPolicy retry)
    : config_(std::move(config)), transport_(std::move(transport)), retry_(std::move(retry)) {
    validate(config_);
}

std::string RemoteChatProvider::complete(const ChatPrompt& prompt) {
    json body = {{"model", config_.model_name},
                 {"temperature", config_.temperature},
                 {"max_tokens", config_.max_output_tokens},
                 {"messages", json::array({{{"role", "system"}, {"content", prompt.system}},
                                           {{"role", "user"}, {"content", prompt.user}}})}};
    HttpRequest request{"POST", config_.api_url, {{"Content-Type", "application/json"}}, body.dump()};
    if (!config_.api_key.empty()) {
        request.headers["Authorization"] = "Bearer " + config_.api_key;
    }
    int attempts = 0;
    auto response = send_with_retry(*transport_, request, retry_, &attempts);
    if (response.status != 200) {
        std::string detail = response.status == 0 ? response.transport_error : response.body.substr(0, 200);
        throw ProviderError("chat request failed with status " + std::to_string(response.status) + ": " + detail,
                            response.status, attempts);
    }
    try {
        auto parsed = json::parse(response.body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unreadable chat response: ") + e.what(), response.status, attempts);
    }
}

std::shared_ptr<ChatProvider> make_chat_provider(const ChatProviderConfig& config,
                                                 std::shared_ptr<HttpTransport> transport) {
    validate(config);
    if (config.provider == ChatProviderKind::Mock) {
        return std::make_shared<MockChatProvider>();
    }
    if (!transport) {
        transport = std::make_shared<HttplibTransport>(config.request_timeout);
    }
    return std::make_shared<RemoteChatProvider>(config, std::move(transport));
}

PromptLibrary::PromptLibrary(const std::filesystem::path& directory) {
    for (const char* name : kTemplateNames) {
        auto path = directory / (std::string(name) + ".txt");
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorCode::ConfigError, "missing prompt template " + path.string());
        }
        std::ostringstream text;
        text << in.rdbuf();
        templates_.emplace(name, text.str());
    }
}

std::filesystem::path PromptLibrary::default_directory() {
    if (const char* env = std::getenv("GROOM_PROMPT_DIR"); env && *env) {
        return env;
    }
    return GROOM_PROMPT_DIR;
}

std::string PromptLibrary::render(const std::string& template_name,
                                  const std::map<std::string, std::string>& values) const {
    auto it = templates_.find(template_name);
    if (it == templates_.end()) {
        throw Error(ErrorCode::ConfigError, "unknown prompt template " + template_name);
    }
    const std::string& tpl = it->second;
    std::string out;
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        auto open = tpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        out.append(tpl, pos, open - pos);
        auto close = open + 1;
        while (close < tpl.size() && (std::islower(static_cast<unsigned char>(tpl[close])) || tpl[close] == '_')) {
            ++close;
        }
        // Only {identifier} is a placeholder; JSON braces pass through.
        if (close == open + 1 || close >= tpl.size() || tpl[close] != '}') {
            out += '{';
            pos = open + 1;
            continue;
        }
        auto name = tpl.substr(open + 1, close - open - 1);
        auto value = values.find(name);
        if (value == values.end()) {
            throw Error(ErrorCode::ConfigError, "no value for placeholder {" + name + "} in " + template_name);
        }
        out += value->second;
        pos = close + 1;
    }
    return out;
}

std::vector<IssueSuggestion> parse_model_output(std::string_view raw) {
    json parsed = parse_json(raw);
    if (!parsed.is_array()) {
        throw MalformedOutputError("expected a JSON array at the top level", 0);
    }
    std::vector<IssueSuggestion> out;
    out.reserve(parsed.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const auto& element = parsed[i];
        if (!element.is_object()) {
            throw MalformedOutputError("array element is not an object", i);
        }
        IssueSuggestion s;
        s.summary = require_string(element, "summary", i);
        s.description = require_string(element, "description", i);
        s.rationale = require_string(element, "rationale", i);
        if (s.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw MalformedOutputError("summary is empty", i);
        }
        out.push_back(std::move(s));
    }
    return out;
}

MergeText parse_merge_output(std::string_view raw) {
    json parsed = parse_json(raw);
    if (!parsed.is_object()) {
        throw MalformedOutputError("expected a JSON object at the top level", 0);
    }
    MergeText text{require_string(parsed, "summary", 0), require_string(parsed, "description", 0)};
    if (text.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw MalformedOutputError("summary is empty", 0);
    }
    return text;
}

MergeText draft_merge_text(const std::vector<Issue>& issues, ChatProvider& provider, const PromptLibrary& prompts) {
    if (issues.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "merge drafting needs at least two issues");
    }
    auto ordered = issues;
    std::sort(ordered.begin(), ordered.end(), [](const Issue& x, const Issue& y) { return x.key < y.key; });
    ChatPrompt prompt;
    prompt.task = ChatTask::DraftMerge;
    prompt.system = prompts.render("system", {});
    prompt.user = prompts.render("merge_issues", {{"issues", merge_issue_block(ordered)}});
    prompt.merge_issues = ordered;
    return complete_and_parse(provider, prompts, std::move(prompt), parse_merge_output);
}

MergeText ChatMergeDrafter::draft(const std::vector<Issue>& issues, const std::string&) {
    return draft_merge_text(issues, *provider_, *prompts_);
}

std::vector<IssueSuggestion> suggest_new_issues(const SuggestionRequest& request, const BacklogSnapshot& snapshot,
                                                ChatProvider& provider, const PromptLibrary& prompts,
                                                Embedder& embedder, const EngineConfig& engine_config) {
    validate(engine_config);
    if (request.max_suggestions == 0) {
        throw Error(ErrorCode::InvalidArgument, "max_suggestions must be positive");
    }
    ChatPrompt prompt;
    prompt.task = ChatTask::SuggestIssues;
    prompt.system = prompts.render("system", {});
    prompt.user = prompts.render("suggest_issues", {{"project_description", request.project_description},
                                                    {"issue_digest", digest_block(request)},
                                                    {"user_prompt", request.user_prompt},
                                                    {"max_suggestions", std::to_string(request.max_suggestions)}});
    prompt.suggestion_request = request;
    auto suggestions = complete_and_parse(provider, prompts, std::move(prompt), parse_model_output);
    if (suggestions.size() > request.max_suggestions) {
        suggestions.resize(request.max_suggestions);
    }
    if (suggestions.empty()) {
        return suggestions;
    }

    std::vector<std::string> existing_texts;
    for (const auto& issue : snapshot.issues) {
        existing_texts.push_back(issue_text(issue));
    }
    std::vector<std::string> suggestion_texts;
    for (const auto& s : suggestions) {
        suggestion_texts.push_back(issue_text(s.summary, s.description));
    }
    auto existing = embedder.embed_batch(existing_texts);
    auto proposed = embedder.embed_batch(suggestion_texts);

    std::vector<IssueSuggestion> kept;
    for (std::size_t i = 0; i < suggestions.size(); ++i) {
        double best = -1.0;
        for (const auto& v : existing) {
            best = std::max(best, cosine(proposed[i], v));
        }
        if (existing.empty()) {
            best = 0.0;
        }
        if (best >= engine_config.new_issue_redundancy_threshold) {
            continue;
        }
        suggestions[i].redundancy_score = best;
        kept.push_back(std::move(suggestions[i]));
    }
    return kept;
}

}  // namespace groom
