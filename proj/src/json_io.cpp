#include "groom/json_io.hpp"

#include "groom/error.hpp"

namespace groom {

using json = nlohmann::json;

json to_json(const Issue& issue) {
    return json{{"key", issue.key},
                {"summary", issue.summary},
                {"description", issue.description},
                {"status", to_string(issue.status)},
                {"labels", issue.labels},
                {"created_at", format_timestamp(issue.created_at)},
                {"updated_at", format_timestamp(issue.updated_at)}};
}

Issue issue_from_json(const json& j) {
    Issue issue;
    issue.key = j.at("key").get<std::string>();
    issue.summary = j.at("summary").get<std::string>();
    issue.description = j.value("description", std::string{});
    issue.status = parse_issue_status(j.value("status", std::string{"Open"}));
    if (auto it = j.find("labels"); it != j.end() && !it->is_null()) {
        issue.labels = it->get<std::set<std::string>>();
    }
    issue.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    issue.updated_at = parse_timestamp(j.at("updated_at").get<std::string>());
    return issue;
}

json to_json(const BacklogSnapshot& snapshot) {
    json issues = json::array();
    for (const auto& issue : snapshot.issues) {
        issues.push_back(to_json(issue));
    }
    return json{{"project_key", snapshot.project_key},
                {"fetched_at", format_timestamp(snapshot.fetched_at)},
                {"issues", std::move(issues)}};
}

BacklogSnapshot snapshot_from_json(const json& j) {
    BacklogSnapshot snapshot;
    snapshot.project_key = j.at("project_key").get<std::string>();
    if (auto it = j.find("fetched_at"); it != j.end()) {
        snapshot.fetched_at = parse_timestamp(it->get<std::string>());
    }
    for (const auto& item : j.at("issues")) {
        snapshot.issues.push_back(issue_from_json(item));
    }
    return normalize(std::move(snapshot));
}

json to_json(const IssuePair& pair) {
    return json{{"a", pair.a}, {"b", pair.b}};
}

json to_json(const GroomingAction& action) {
    json j{{"kind", to_string(action.kind())}};
    if (const auto* merge = std::get_if<MergeClusterPayload>(&action.payload)) {
        j["survivor"] = merge->survivor;
        j["absorbed"] = merge->absorbed;
        j["summary"] = merge->summary;
        j["description"] = merge->description;
    } else if (const auto* create = std::get_if<CreateIssuePayload>(&action.payload)) {
        j["summary"] = create->summary;
        j["description"] = create->description;
        j["labels"] = create->labels;
    } else if (const auto* update = std::get_if<UpdateStatusPayload>(&action.payload)) {
        j["key"] = update->key;
        j["target_status"] = to_string(update->target);
    }
    return j;
}

GroomingAction action_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    GroomingAction action;
    if (kind == "MergeCluster") {
        action.payload = MergeClusterPayload{j.at("survivor").get<std::string>(),
                                             j.at("absorbed").get<std::vector<std::string>>(),
                                             j.at("summary").get<std::string>(),
                                             j.value("description", std::string{})};
    } else if (kind == "CreateIssue") {
        action.payload = CreateIssuePayload{j.at("summary").get<std::string>(), j.value("description", std::string{}),
                                            j.value("labels", std::set<std::string>{})};
    } else if (kind == "UpdateStatus") {
        action.payload =
            UpdateStatusPayload{j.at("key").get<std::string>(), parse_issue_status(j.at("target_status").get<std::string>())};
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown action kind " + kind);
    }
    validate(action);
    return action;
}

json to_json(const DuplicateCandidate& candidate) {
    json j{{"id", candidate.id},
           {"pair", to_json(candidate.pair)},
           {"score", candidate.score},
           {"status", to_string(candidate.status)}};
    j["proposed_action"] = candidate.proposed_action ? to_json(*candidate.proposed_action) : json(nullptr);
    return j;
}

json to_json(const DuplicateCluster& cluster) {
    json pairs = json::array();
    for (const auto& sp : cluster.supporting_pairs) {
        pairs.push_back({{"pair", to_json(sp.pair)}, {"score", sp.score}});
    }
    return json{{"members", cluster.members}, {"survivor", cluster.survivor}, {"supporting_pairs", pairs}};
}

json to_json(const IssueSuggestion& suggestion) {
    json j{{"summary", suggestion.summary},
           {"description", suggestion.description},
           {"rationale", suggestion.rationale}};
    j["redundancy_score"] = suggestion.redundancy_score ? json(*suggestion.redundancy_score) : json(nullptr);
    return j;
}

json to_json(const ApplyReceipt& receipt) {
    json steps = json::array();
    for (const auto& s : receipt.steps) {
        steps.push_back(
            {{"target", s.target}, {"step", s.step}, {"status", to_string(s.status)}, {"detail", s.detail}});
    }
    json j{{"kind", to_string(receipt.kind)}, {"ok", receipt.ok()}, {"steps", steps}};
    j["created_key"] = receipt.created_key ? json(*receipt.created_key) : json(nullptr);
    return j;
}

}  // namespace groom
