#include "groom/review.hpp"

#include "groom/error.hpp"
#include "groom/json_io.hpp"

#include <algorithm>

namespace groom {

using json = nlohmann::json;

std::string_view to_string(SessionMode mode) {
    return mode == SessionMode::Auto ? "Auto" : "Interactive";
}

SessionMode parse_session_mode(std::string_view name) {
    if (name == "Auto" || name == "auto") {
        return SessionMode::Auto;
    }
    if (name == "Interactive" || name == "interactive") {
        return SessionMode::Interactive;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown session mode " + std::string(name));
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::Accept: return "Accept";
    case Verdict::Reject: return "Reject";
    case Verdict::Modify: return "Modify";
    }
    return "Accept";
}

Verdict parse_verdict(std::string_view name) {
    for (auto v : {Verdict::Accept, Verdict::Reject, Verdict::Modify}) {
        if (name == to_string(v)) {
            return v;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown verdict " + std::string(name));
}

std::vector<DuplicateCandidate> confirmed_candidates(const ReviewSession& session) {
    std::vector<DuplicateCandidate> out;
    for (const auto& c : session.candidates) {
        if (c.status == ReviewStatus::Accepted || c.status == ReviewStatus::Modified) {
            out.push_back(c);
        }
    }
    return out;
}

std::set<IssuePair> predicted_pairs(const ReviewSession& session) {
    auto clusters = cluster(confirmed_candidates(session), session.snapshot, session.engine_config);
    auto pairs = expand_cluster_pairs(clusters);
    return {pairs.begin(), pairs.end()};
}

ReviewService::ReviewService(ReviewServiceDeps deps) : deps_(std::move(deps)) {
    if (!deps_.embedder) {
        throw Error(ErrorCode::ConfigError, "review service needs an embedder");
    }
    if (!deps_.drafter) {
        deps_.drafter = std::make_shared<FallbackDrafter>();
    }
    if (!deps_.clock) {
        deps_.clock = system_now;
    }
}

std::string ReviewService::start_session(std::shared_ptr<Gateway> gateway, const EngineConfig& engine_config,
                                         SessionMode mode, std::string project_description) {
    validate(engine_config);
    auto slot = std::make_shared<Slot>();
    slot->gateway = std::move(gateway);
    auto& s = slot->session;
    s.mode = mode;
    s.engine_config = engine_config;
    s.project_description = std::move(project_description);
    s.started_at = deps_.clock();
    s.snapshot = slot->gateway->fetch_backlog();
    s.candidates = detect_duplicates(s.snapshot, *deps_.embedder, engine_config);
    if (mode == SessionMode::Auto) {
        for (auto& c : s.candidates) {
            c.status = ReviewStatus::Accepted;
        }
    }

    std::lock_guard lock(sessions_mutex_);
    s.id = "session-" + std::to_string(next_id_++);
    sessions_.emplace(s.id, slot);
    return s.id;
}

std::shared_ptr<ReviewService::Slot> ReviewService::slot(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw Error(ErrorCode::SessionNotFound, "no session " + id);
    }
    return it->second;
}

ReviewSession ReviewService::get(const std::string& id) const {
    auto s = slot(id);
    std::lock_guard lock(s->mutex);
    return s->session;
}

std::vector<std::string> ReviewService::list() const {
    std::lock_guard lock(sessions_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) {
        ids.push_back(id);
    }
    return ids;
}

Timestamp ReviewService::log_time(const ReviewSession& session) const {
    auto now = deps_.clock();
    if (!session.decision_log.empty()) {
        now = std::max(now, session.decision_log.back().at);
    }
    return now;
}

ReviewStatus ReviewService::record_decision(const std::string& id, const Decision& decision) {
    auto s = slot(id);
    std::lock_guard lock(s->mutex);
    auto& session = s->session;
    if (session.applied()) {
        throw Error(ErrorCode::SessionAlreadyApplied, "session " + id + " was already applied");
    }
    if (decision.verdict == Verdict::Modify &&
        (!decision.edited || decision.edited->summary.find_first_not_of(" \t\r\n") == std::string::npos)) {
        throw Error(ErrorCode::MissingEditedPayload, "Modify needs an edited summary");
    }

    ReviewStatus status = ReviewStatus::Proposed;
    switch (decision.verdict) {
    case Verdict::Accept: status = ReviewStatus::Accepted; break;
    case Verdict::Reject: status = ReviewStatus::Rejected; break;
    case Verdict::Modify: status = ReviewStatus::Modified; break;
    }

    auto candidate = std::find_if(session.candidates.begin(), session.candidates.end(),
                                  [&](const DuplicateCandidate& c) { return c.id == decision.target; });
    auto suggestion = std::find_if(session.suggestions.begin(), session.suggestions.end(),
                                   [&](const SuggestionItem& i) { return i.id == decision.target; });
    if (candidate != session.candidates.end()) {
        candidate->status = status;
        if (decision.verdict == Verdict::Modify) {
            session.candidate_edits[candidate->id] = *decision.edited;
        } else {
            session.candidate_edits.erase(candidate->id);
        }
    } else if (suggestion != session.suggestions.end()) {
        suggestion->status = status;
        suggestion->edited = decision.verdict == Verdict::Modify ? decision.edited : std::nullopt;
    } else {
        throw Error(ErrorCode::UnknownTarget, "session " + id + " has no item " + decision.target);
    }
    session.decision_log.push_back({log_time(session), decision.actor, decision.target, decision.verdict});
    return status;
}

std::vector<SuggestionItem> ReviewService::request_suggestions(const std::string& id, const std::string& user_prompt,
                                                               std::size_t max_suggestions) {
    if (!deps_.chat || !deps_.prompts) {
        throw Error(ErrorCode::ConfigError, "no chat provider configured");
    }
    auto s = slot(id);
    std::lock_guard lock(s->mutex);
    auto& session = s->session;
    if (session.applied()) {
        throw Error(ErrorCode::SessionAlreadyApplied, "session " + id + " was already applied");
    }
    SuggestionRequest request;
    request.project_description = session.project_description;
    request.issue_digest = make_issue_digest(session.snapshot);
    request.user_prompt = user_prompt;
    request.max_suggestions = max_suggestions;
    auto suggestions = suggest_new_issues(request, session.snapshot, *deps_.chat, *deps_.prompts, *deps_.embedder,
                                          session.engine_config);

    std::vector<SuggestionItem> added;
    for (auto& sug : suggestions) {
        SuggestionItem item;
        item.id = "s-" + std::to_string(session.suggestions.size() + added.size() + 1);
        item.suggestion = std::move(sug);
        added.push_back(std::move(item));
    }
    session.suggestions.insert(session.suggestions.end(), added.begin(), added.end());
    return added;
}

std::vector<GroomingAction> ReviewService::plan_merges(const ReviewSession& session) const {
    std::vector<GroomingAction> actions;
    FallbackDrafter fallback;
    for (const auto& cl : cluster(confirmed_candidates(session), session.snapshot, session.engine_config)) {
        // An edited merge text applies to the whole cluster; the most recent
        // edit among the cluster's pairs wins.
        std::optional<MergeText> edited;
        for (auto it = session.decision_log.rbegin(); it != session.decision_log.rend() && !edited; ++it) {
            auto e = session.candidate_edits.find(it->target);
            if (e == session.candidate_edits.end()) {
                continue;
            }
            for (const auto& sp : cl.supporting_pairs) {
                if (candidate_id(sp.pair) == it->target) {
                    edited = e->second;
                    break;
                }
            }
        }
        if (edited) {
            MergeClusterPayload merge{cl.survivor, {}, edited->summary, edited->description};
            for (const auto& key : cl.members) {
                if (key != cl.survivor) {
                    merge.absorbed.push_back(key);
                }
            }
            actions.push_back(GroomingAction{std::move(merge)});
            continue;
        }
        try {
            actions.push_back(propose_resolution(cl, session.snapshot, *deps_.drafter));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DraftingFailed) {
                throw;
            }
            actions.push_back(propose_resolution(cl, session.snapshot, fallback));
        }
    }
    return actions;
}

SessionApplyResult ReviewService::apply(const std::string& id) {
    auto s = slot(id);
    std::lock_guard lock(s->mutex);
    auto& session = s->session;
    if (session.applied()) {
        throw Error(ErrorCode::SessionAlreadyApplied, "session " + id + " was already applied");
    }

    auto merges = plan_merges(session);
    std::vector<std::pair<std::string, GroomingAction>> creates;
    for (const auto& item : session.suggestions) {
        if (item.status != ReviewStatus::Accepted && item.status != ReviewStatus::Modified) {
            continue;
        }
        if (session.created_from.count(item.id)) {
            continue;
        }
        const auto& text = item.edited ? MergeText{item.edited->summary, item.edited->description}
                                       : MergeText{item.suggestion.summary, item.suggestion.description};
        creates.emplace_back(item.id, GroomingAction{CreateIssuePayload{text.summary, text.description, {}}});
    }
    const bool any_created_before = !session.created_from.empty();
    if (merges.empty() && creates.empty() && !any_created_before) {
        throw Error(ErrorCode::NothingToApply, "session " + id + " has no accepted or modified items");
    }

    std::vector<ApplyReceipt> receipts;
    auto record_failure = [&](const PartialFailureError& e) {
        receipts.push_back(e.receipt());
        session.receipts = receipts;
    };
    for (const auto& action : merges) {
        try {
            receipts.push_back(s->gateway->apply(action));
        } catch (const PartialFailureError& e) {
            record_failure(e);
            throw;
        }
    }
    for (const auto& [suggestion_id, action] : creates) {
        try {
            receipts.push_back(s->gateway->apply(action));
            session.created_from.insert(suggestion_id);
        } catch (const PartialFailureError& e) {
            record_failure(e);
            throw;
        }
    }

    session.receipts = receipts;
    session.applied_at = std::max(deps_.clock(), session.started_at);
    SessionApplyResult result;
    result.receipts = std::move(receipts);
    result.time_to_completion_seconds =
        std::chrono::duration<double>(*session.applied_at - session.started_at).count();
    return result;
}

json to_json(const SuggestionItem& item) {
    json j = to_json(item.suggestion);
    j["id"] = item.id;
    j["status"] = to_string(item.status);
    j["edited"] = item.edited ? json{{"summary", item.edited->summary}, {"description", item.edited->description}}
                              : json(nullptr);
    return j;
}

json to_json(const ReviewSession& session) {
    json candidates = json::array();
    for (const auto& c : session.candidates) {
        json cj = to_json(c);
        if (auto e = session.candidate_edits.find(c.id); e != session.candidate_edits.end()) {
            cj["edited"] = {{"summary", e->second.summary}, {"description", e->second.description}};
        }
        if (const auto* a = session.snapshot.find(c.pair.a)) {
            cj["summary_a"] = a->summary;
        }
        if (const auto* b = session.snapshot.find(c.pair.b)) {
            cj["summary_b"] = b->summary;
        }
        candidates.push_back(std::move(cj));
    }
    json suggestions = json::array();
    for (const auto& item : session.suggestions) {
        suggestions.push_back(to_json(item));
    }
    json log = json::array();
    for (const auto& entry : session.decision_log) {
        log.push_back({{"at", format_timestamp(entry.at)},
                       {"actor", entry.actor},
                       {"target", entry.target},
                       {"verdict", to_string(entry.verdict)}});
    }
    json receipts = json::array();
    for (const auto& r : session.receipts) {
        receipts.push_back(to_json(r));
    }
    return json{{"session_id", session.id},
                {"mode", to_string(session.mode)},
                {"threshold", session.engine_config.duplicate_threshold},
                {"project_key", session.snapshot.project_key},
                {"issue_count", session.snapshot.issues.size()},
                {"started_at", format_timestamp(session.started_at)},
                {"applied_at", session.applied_at ? json(format_timestamp(*session.applied_at)) : json(nullptr)},
                {"candidates", std::move(candidates)},
                {"suggestions", std::move(suggestions)},
                {"decision_log", std::move(log)},
                {"receipts", std::move(receipts)}};
}

json ReviewService::report(const std::string& id) const {
    auto session = get(id);
    const auto pairs = predicted_pairs(session);
    json pair_list = json::array();
    for (const auto& p : pairs) {
        pair_list.push_back(to_json(p));
    }
    std::optional<double> elapsed;
    if (session.applied_at) {
        elapsed = std::chrono::duration<double>(*session.applied_at - session.started_at).count();
    }
    json receipts = json::array();
    for (const auto& r : session.receipts) {
        receipts.push_back(to_json(r));
    }
    json j{{"session_id", session.id},
           {"mode", to_string(session.mode)},
           {"applied", session.applied()},
           {"started_at", format_timestamp(session.started_at)},
           {"applied_at", session.applied_at ? json(format_timestamp(*session.applied_at)) : json(nullptr)},
           {"time_seconds", elapsed ? json(*elapsed) : json(nullptr)},
           {"predicted_pairs", std::move(pair_list)},
           {"receipts", std::move(receipts)}};
    j["metrics"] = nullptr;
    j["confusion_matrix"] = nullptr;
    if (deps_.truth) {
        auto cm = score(pairs, *deps_.truth);
        ResultRow row{session.id, cm, metrics(cm, elapsed.value_or(0.0))};
        j["metrics"] = json::parse(to_json(row).dump());
        j["confusion_matrix"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
    }
    return j;
}

int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::SessionNotFound:
    case ErrorCode::UnknownTarget:
    case ErrorCode::ProjectNotFound:
        return 404;
    case ErrorCode::SessionAlreadyApplied:
        return 409;
    case ErrorCode::NothingToApply:
    case ErrorCode::TooFewIssues:
        return 422;
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingEditedPayload:
    case ErrorCode::ParseError:
    case ErrorCode::ConfigError:
    case ErrorCode::EmptyText:
    case ErrorCode::DegenerateText:
        return 400;
    case ErrorCode::ProviderError:
    case ErrorCode::MalformedModelOutput:
    case ErrorCode::AuthFailed:
    case ErrorCode::RateLimited:
    case ErrorCode::GatewayError:
    case ErrorCode::PartialFailure:
    case ErrorCode::DraftingFailed:
        return 502;
    default:
        return 500;
    }
}

}  // namespace groom
