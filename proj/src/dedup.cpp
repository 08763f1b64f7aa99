#include "groom/dedup.hpp"

#include "groom/error.hpp"
#include "groom/union_find.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace groom {

void validate(const EngineConfig& config) {
    auto in_range = [](double t) { return t > 0.0 && t <= 1.0; };
    if (!in_range(config.duplicate_threshold)) {
        throw Error(ErrorCode::InvalidArgument, "duplicate_threshold must lie in (0, 1]");
    }
    if (!in_range(config.new_issue_redundancy_threshold)) {
        throw Error(ErrorCode::InvalidArgument, "new_issue_redundancy_threshold must lie in (0, 1]");
    }
}

std::string candidate_id(const IssuePair& pair) {
    return pair.a + "~" + pair.b;
}

std::vector<DuplicateCandidate> detect_duplicates(const BacklogSnapshot& snapshot, Embedder& embedder,
                                                  const EngineConfig& config) {
    validate(config);
    if (snapshot.issues.size() < 2) {
        throw Error(ErrorCode::TooFewIssues, "duplicate detection needs at least two issues, got " +
                                                 std::to_string(snapshot.issues.size()));
    }
    std::vector<std::string> texts;
    texts.reserve(snapshot.issues.size());
    for (const auto& issue : snapshot.issues) {
        texts.push_back(issue_text(issue));
    }
    auto vectors = embedder.embed_batch(texts);

    VectorIndex index;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        index.upsert({snapshot.issues[i].key, std::move(vectors[i])});
    }

    std::vector<DuplicateCandidate> candidates;
    for (auto& hit : index.pairwise_scan(config.duplicate_threshold)) {
        DuplicateCandidate c;
        c.id = candidate_id(hit.pair);
        c.pair = std::move(hit.pair);
        c.score = hit.score;
        candidates.push_back(std::move(c));
    }
    return candidates;
}

std::string choose_survivor(const std::vector<std::string>& members, const BacklogSnapshot& snapshot,
                            SurvivorRule rule) {
    if (members.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot choose a survivor from an empty cluster");
    }
    auto sorted = members;
    std::sort(sorted.begin(), sorted.end());
    if (rule == SurvivorRule::LowestKey) {
        return sorted.front();
    }
    const Issue* best = nullptr;
    for (const auto& key : sorted) {
        const Issue* issue = snapshot.find(key);
        if (!issue) {
            throw Error(ErrorCode::UnknownIssueKey, "unknown issue key " + key);
        }
        // Strict comparison keeps the smallest key on created_at ties.
        if (!best || issue->created_at < best->created_at) {
            best = issue;
        }
    }
    return best->key;
}

std::vector<DuplicateCluster> cluster(const std::vector<DuplicateCandidate>& accepted,
                                      const BacklogSnapshot& snapshot, const EngineConfig& config) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::string> keys;
    auto slot_of = [&](const std::string& key) {
        if (!snapshot.find(key)) {
            throw Error(ErrorCode::UnknownIssueKey, "candidate refers to unknown issue " + key);
        }
        auto [it, inserted] = slot.emplace(key, keys.size());
        if (inserted) {
            keys.push_back(key);
        }
        return it->second;
    };
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& c : accepted) {
        edges.emplace_back(slot_of(c.pair.a), slot_of(c.pair.b));
    }

    UnionFind sets(keys.size());
    for (auto [x, y] : edges) {
        sets.unite(x, y);
    }

    std::map<std::size_t, DuplicateCluster> by_root;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        by_root[sets.find(i)].members.push_back(keys[i]);
    }
    for (const auto& c : accepted) {
        by_root[sets.find(slot.at(c.pair.a))].supporting_pairs.push_back({c.pair, c.score});
    }

    std::vector<DuplicateCluster> clusters;
    for (auto& [root, cl] : by_root) {
        if (cl.members.size() < 2) {
            continue;
        }
        std::sort(cl.members.begin(), cl.members.end());
        std::sort(cl.supporting_pairs.begin(), cl.supporting_pairs.end(),
                  [](const ScoredPair& x, const ScoredPair& y) { return x.pair < y.pair; });
        cl.survivor = choose_survivor(cl.members, snapshot, config.survivor_rule);
        clusters.push_back(std::move(cl));
    }
    std::sort(clusters.begin(), clusters.end(), [](const DuplicateCluster& x, const DuplicateCluster& y) {
        return x.members.front() < y.members.front();
    });
    return clusters;
}

MergeText FallbackDrafter::draft(const std::vector<Issue>& issues, const std::string& survivor) {
    auto it = std::find_if(issues.begin(), issues.end(), [&](const Issue& i) { return i.key == survivor; });
    if (it == issues.end()) {
        throw Error(ErrorCode::InvalidArgument, "survivor " + survivor + " is not among the merged issues");
    }
    MergeText text{it->summary, it->description};
    std::vector<const Issue*> absorbed;
    for (const auto& issue : issues) {
        if (issue.key != survivor) {
            absorbed.push_back(&issue);
        }
    }
    std::sort(absorbed.begin(), absorbed.end(), [](const Issue* x, const Issue* y) { return x->key < y->key; });

    std::string trailer = "Merged from: ";
    for (std::size_t i = 0; i < absorbed.size(); ++i) {
        trailer += (i ? ", " : "") + absorbed[i]->key;
    }
    if (!text.description.empty()) {
        text.description += "\n\n";
    }
    text.description += trailer;
    for (const auto* issue : absorbed) {
        if (!issue->description.empty()) {
            text.description += "\n\n[" + issue->key + "] " + issue->description;
        }
    }
    return text;
}

GroomingAction propose_resolution(const DuplicateCluster& cluster, const BacklogSnapshot& snapshot,
                                  MergeDrafter& drafter) {
    if (cluster.members.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "a duplicate cluster needs at least two members");
    }
    if (std::find(cluster.members.begin(), cluster.members.end(), cluster.survivor) == cluster.members.end()) {
        throw Error(ErrorCode::InvalidArgument, "survivor " + cluster.survivor + " is not a cluster member");
    }
    std::vector<Issue> issues;
    for (const auto& key : cluster.members) {
        const Issue* issue = snapshot.find(key);
        if (!issue) {
            throw Error(ErrorCode::UnknownIssueKey, "cluster refers to unknown issue " + key);
        }
        issues.push_back(*issue);
    }
    std::sort(issues.begin(), issues.end(), [](const Issue& x, const Issue& y) { return x.key < y.key; });

    MergeText text;
    try {
        text = drafter.draft(issues, cluster.survivor);
    } catch (const Error& e) {
        throw Error(ErrorCode::DraftingFailed, std::string("merge drafting failed: ") + e.what());
    }
    if (text.summary.empty()) {
        throw Error(ErrorCode::DraftingFailed, "merge drafter returned an empty summary");
    }

    MergeClusterPayload merge;
    merge.survivor = cluster.survivor;
    for (const auto& key : cluster.members) {
        if (key != cluster.survivor) {
            merge.absorbed.push_back(key);
        }
    }
    merge.summary = std::move(text.summary);
    merge.description = std::move(text.description);
    GroomingAction action{std::move(merge)};
    validate(action);
    return action;
}

std::vector<IssuePair> expand_cluster_pairs(const std::vector<DuplicateCluster>& clusters) {
    std::vector<IssuePair> pairs;
    for (const auto& cl : clusters) {
        for (std::size_t i = 0; i < cl.members.size(); ++i) {
            for (std::size_t j = i + 1; j < cl.members.size(); ++j) {
                pairs.push_back(canonicalize_pair(cl.members[i], cl.members[j]));
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

}  // namespace groom
