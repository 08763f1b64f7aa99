#include "groom/config.hpp"

#include "groom/error.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace groom {

namespace {

std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string unquote(std::string v) {
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double d = std::stod(value, &used);
        if (used == value.size()) {
            return d;
        }
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + value + "'");
}

std::size_t to_size(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        long long n = std::stoll(value, &used);
        if (used == value.size() && n >= 0) {
            return static_cast<std::size_t>(n);
        }
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, key + ": expected a non-negative integer, got '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ParseError(ErrorCode::ConfigError, "malformed section header '" + line + "'", line_no);
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(ErrorCode::ConfigError, "expected key = value", line_no);
        }
        auto key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ParseError(ErrorCode::ConfigError, "empty key", line_no);
        }
        out[section.empty() ? key : section + "." + key] = unquote(trim(line.substr(eq + 1)));
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_config_text(buffer.str());
    } catch (const ParseError& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str()); v && *v) {
        return std::string(v);
    }
    return std::nullopt;
}

void apply_environment(AppConfig& config, const EnvLookup& env) {
    if (auto v = env("EMBED_API_KEY")) {
        config.embedding.api_key = *v;
    }
    if (auto v = env("EMBED_API_URL")) {
        config.embedding.api_url = *v;
    }
    if (auto v = env("CHAT_API_KEY")) {
        config.chat.api_key = *v;
    }
    if (auto v = env("CHAT_API_URL")) {
        config.chat.api_url = *v;
    }
    if (auto v = env("JIRA_TOKEN")) {
        config.gateway.auth.token = *v;
    }
}

EmbeddingProviderKind parse_embedding_provider(std::string_view name) {
    if (name == "local_hash") {
        return EmbeddingProviderKind::LocalHash;
    }
    if (name == "remote" || name == "remote_api") {
        return EmbeddingProviderKind::RemoteApi;
    }
    throw Error(ErrorCode::ConfigError, "unknown embedding provider '" + std::string(name) + "'");
}

ChatProviderKind parse_chat_provider(std::string_view name) {
    if (name == "mock") {
        return ChatProviderKind::Mock;
    }
    if (name == "remote" || name == "remote_api") {
        return ChatProviderKind::RemoteApi;
    }
    throw Error(ErrorCode::ConfigError, "unknown chat provider '" + std::string(name) + "'");
}

SurvivorRule parse_survivor_rule(std::string_view name) {
    if (name == "earliest_created") {
        return SurvivorRule::EarliestCreated;
    }
    if (name == "lowest_key") {
        return SurvivorRule::LowestKey;
    }
    throw Error(ErrorCode::ConfigError, "unknown survivor rule '" + std::string(name) + "'");
}

void apply_config_values(AppConfig& c, const std::map<std::string, std::string>& values) {
    using Setter = std::function<void(const std::string& key, const std::string& value)>;
    auto ms = [](const std::string& k, const std::string& v) {
        return std::chrono::milliseconds(static_cast<long long>(to_size(k, v)));
    };
    const std::map<std::string, Setter> setters{
        {"embedding.provider", [&](auto&, auto& v) { c.embedding.provider = parse_embedding_provider(v); }},
        {"embedding.model", [&](auto&, auto& v) { c.embedding.model_name = v; }},
        {"embedding.dim", [&](auto& k, auto& v) { c.embedding.dim = to_size(k, v); }},
        {"embedding.max_batch", [&](auto& k, auto& v) { c.embedding.max_batch = to_size(k, v); }},
        {"embedding.max_parallel_requests",
         [&](auto& k, auto& v) { c.embedding.max_parallel_requests = to_size(k, v); }},
        {"embedding.timeout_ms", [&](auto& k, auto& v) { c.embedding.request_timeout = ms(k, v); }},
        {"embedding.api_url", [&](auto&, auto& v) { c.embedding.api_url = v; }},
        {"embedding.api_key", [&](auto&, auto& v) { c.embedding.api_key = v; }},
        {"embedding.cache", [&](auto&, auto& v) { c.embedding_cache = v; }},
        {"chat.provider", [&](auto&, auto& v) { c.chat.provider = parse_chat_provider(v); }},
        {"chat.model", [&](auto&, auto& v) { c.chat.model_name = v; }},
        {"chat.temperature", [&](auto& k, auto& v) { c.chat.temperature = to_double(k, v); }},
        {"chat.max_output_tokens",
         [&](auto& k, auto& v) { c.chat.max_output_tokens = static_cast<int>(to_size(k, v)); }},
        {"chat.timeout_ms", [&](auto& k, auto& v) { c.chat.request_timeout = ms(k, v); }},
        {"chat.api_url", [&](auto&, auto& v) { c.chat.api_url = v; }},
        {"chat.api_key", [&](auto&, auto& v) { c.chat.api_key = v; }},
        {"jira.base_url", [&](auto&, auto& v) { c.gateway.base_url = v; }},
        {"jira.project", [&](auto&, auto& v) { c.gateway.project_key = v; }},
        {"jira.user", [&](auto&, auto& v) { c.gateway.auth.user = v; }},
        {"jira.token", [&](auto&, auto& v) { c.gateway.auth.token = v; }},
        {"jira.auth",
         [&](auto& k, auto& v) {
             if (v == "bearer") {
                 c.gateway.auth.scheme = AuthScheme::Bearer;
             } else if (v == "basic") {
                 c.gateway.auth.scheme = AuthScheme::Basic;
             } else {
                 throw Error(ErrorCode::ConfigError, k + ": expected bearer or basic");
             }
         }},
        {"jira.fixture",
         [&](auto&, auto& v) {
             c.gateway.fixture_path = v;
             c.gateway.mode = GatewayMode::Fixture;
         }},
        {"jira.page_size", [&](auto& k, auto& v) { c.gateway.page_size = to_size(k, v); }},
        {"jira.timeout_ms", [&](auto& k, auto& v) { c.gateway.request_timeout = ms(k, v); }},
        {"engine.duplicate_threshold", [&](auto& k, auto& v) { c.engine.duplicate_threshold = to_double(k, v); }},
        {"engine.redundancy_threshold",
         [&](auto& k, auto& v) { c.engine.new_issue_redundancy_threshold = to_double(k, v); }},
        {"engine.survivor_rule", [&](auto&, auto& v) { c.engine.survivor_rule = parse_survivor_rule(v); }},
        {"prompts.dir", [&](auto&, auto& v) { c.prompt_dir = v; }},
        {"project.description", [&](auto&, auto& v) { c.project_description = v; }},
        {"project.truth", [&](auto&, auto& v) { c.truth_path = v; }},
        {"server.host", [&](auto&, auto& v) { c.server_host = v; }},
        {"server.port", [&](auto& k, auto& v) { c.server_port = static_cast<int>(to_size(k, v)); }},
        {"server.static_dir", [&](auto&, auto& v) { c.static_dir = v; }},
    };
    for (const auto& [key, value] : values) {
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
        }
        it->second(key, value);
    }
    // base_url decides the mode only when no fixture is configured.
    if (values.count("jira.base_url") && !values.count("jira.fixture")) {
        c.gateway.mode = GatewayMode::Rest;
    }
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    AppConfig config;
    apply_environment(config, env);
    if (file) {
        apply_config_values(config, read_config_file(*file));
    }
    return config;
}

}  // namespace groom
