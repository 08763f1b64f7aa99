#pragma once

#include "groom/dedup.hpp"
#include "groom/gateway.hpp"
#include "groom/genai.hpp"
#include "groom/model.hpp"

#include <json.hpp>

namespace groom {

// Wire shapes shared by the fixture file, the CLI outputs and the HTTP API.
// Readers throw nlohmann::json::exception or groom::Error on bad input.

nlohmann::json to_json(const Issue& issue);
Issue issue_from_json(const nlohmann::json& j);

/// {"project_key", "fetched_at", "issues": [...]}
nlohmann::json to_json(const BacklogSnapshot& snapshot);
BacklogSnapshot snapshot_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IssuePair& pair);
nlohmann::json to_json(const GroomingAction& action);
GroomingAction action_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DuplicateCandidate& candidate);
nlohmann::json to_json(const DuplicateCluster& cluster);
nlohmann::json to_json(const IssueSuggestion& suggestion);
nlohmann::json to_json(const ApplyReceipt& receipt);

}  // namespace groom
