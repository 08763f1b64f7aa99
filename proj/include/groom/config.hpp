#pragma once

#include "groom/dedup.hpp"
#include "groom/embedding.hpp"
#include "groom/gateway.hpp"
#include "groom/genai.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace groom {

/// Settings shared by every subcommand.
struct AppConfig {
    EmbeddingProviderConfig embedding;
    std::filesystem::path embedding_cache;  // empty: in-memory only
    ChatProviderConfig chat;
    GatewayConfig gateway;
    EngineConfig engine;
    std::filesystem::path prompt_dir;  // empty: PromptLibrary::default_directory()
    std::string project_description;
    std::filesystem::path truth_path;
    std::string server_host = "127.0.0.1";
    int server_port = 8080;
    std::filesystem::path static_dir;
};

/// Flat "section.key" -> value map read from an INI-like file:
///
///     # comment
///     [embedding]
///     provider = local_hash
///
/// Throws Error(ConfigError) with the line number on malformed input.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Process environment.
std::optional<std::string> process_env(const std::string& name);

/// Fills credentials and endpoints from EMBED_API_KEY, EMBED_API_URL,
/// CHAT_API_KEY, CHAT_API_URL and JIRA_TOKEN.
void apply_environment(AppConfig& config, const EnvLookup& env);

/// Overlays file values. Unknown keys and unparsable values throw Error(ConfigError).
void apply_config_values(AppConfig& config, const std::map<std::string, std::string>& values);

/// Defaults, then environment, then the file (when given). Flags go on top.
AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env);

EmbeddingProviderKind parse_embedding_provider(std::string_view name);
ChatProviderKind parse_chat_provider(std::string_view name);
SurvivorRule parse_survivor_rule(std::string_view name);

}  // namespace groom
