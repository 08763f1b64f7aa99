#pragma once

#include "groom/embedding.hpp"
#include "groom/model.hpp"
#include "groom/vector_index.hpp"

#include <optional>
#include <string>
#include <vector>

namespace groom {

enum class SurvivorRule { EarliestCreated, LowestKey };

struct EngineConfig {
    double duplicate_threshold = 0.80;
    double new_issue_redundancy_threshold = 0.80;
    SurvivorRule survivor_rule = SurvivorRule::EarliestCreated;
};

/// Throws Error(InvalidArgument) unless both thresholds lie in (0, 1].
void validate(const EngineConfig& config);

struct DuplicateCandidate {
    /// Stable identifier "<a>~<b>" derived from the canonical pair.
    std::string id;
    IssuePair pair;
    double score = 0.0;
    ReviewStatus status = ReviewStatus::Proposed;
    std::optional<GroomingAction> proposed_action;
};

std::string candidate_id(const IssuePair& pair);

struct DuplicateCluster {
    std::vector<std::string> members;  // ascending
    std::string survivor;
    std::vector<ScoredPair> supporting_pairs;
};

/// Embeds every issue, indexes them and wraps each pair at or above the
/// duplicate threshold as a Proposed candidate (scan order).
std::vector<DuplicateCandidate> detect_duplicates(const BacklogSnapshot& snapshot, Embedder& embedder,
                                                  const EngineConfig& config);

/// Connected components (size >= 2) of the given pairs. Clusters are ordered
/// by their smallest member key. Throws UnknownIssueKey for foreign keys.
std::vector<DuplicateCluster> cluster(const std::vector<DuplicateCandidate>& accepted,
                                      const BacklogSnapshot& snapshot, const EngineConfig& config);

/// Survivor under `rule`; ties fall to the lexicographically smallest key.
std::string choose_survivor(const std::vector<std::string>& members, const BacklogSnapshot& snapshot,
                            SurvivorRule rule);

struct MergeText {
    std::string summary;
    std::string description;
};

/// Produces the final text of a merged issue from the cluster's issues
/// (ordered by ascending key, survivor included).
class MergeDrafter {
public:
    virtual ~MergeDrafter() = default;
    virtual MergeText draft(const std::vector<Issue>& issues, const std::string& survivor) = 0;
};

/// Deterministic drafting without a model: survivor summary, survivor
/// description followed by a "Merged from:" trailer and each absorbed
/// description in key order.
class FallbackDrafter final : public MergeDrafter {
public:
    MergeText draft(const std::vector<Issue>& issues, const std::string& survivor) override;
};

/// MergeCluster action for `cluster`. Drafting errors surface as
/// Error(DraftingFailed) so callers can retry with FallbackDrafter.
GroomingAction propose_resolution(const DuplicateCluster& cluster, const BacklogSnapshot& snapshot,
                                  MergeDrafter& drafter);

/// Every C(k,2) pair inside each cluster, ascending.
std::vector<IssuePair> expand_cluster_pairs(const std::vector<DuplicateCluster>& clusters);

}  // namespace groom
