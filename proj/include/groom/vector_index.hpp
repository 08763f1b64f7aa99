#pragma once

#include "groom/embedding.hpp"
#include "groom/model.hpp"

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace groom {

struct IndexedItem {
    std::string key;
    EmbeddingVector vector;
};

struct ScoredNeighbor {
    std::string key;
    double score = 0.0;
};

struct ScoredPair {
    IssuePair pair;
    double score = 0.0;
};

/// dot(u,v) / (|u| |v|). Throws DimensionMismatch or ZeroVector.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Exact in-memory cosine index. Readers share a lock; upserts are exclusive,
/// so every query sees a consistent snapshot of the items.
class VectorIndex {
public:
    VectorIndex() = default;

    /// The first insert fixes the index dimension.
    void upsert(IndexedItem item);

    std::size_t size() const;
    /// 0 until the first insert.
    std::size_t dim() const;
    std::optional<EmbeddingVector> get(const std::string& key) const;

    /// min(k, available) best neighbors, score descending then key ascending.
    std::vector<ScoredNeighbor> top_k(const EmbeddingVector& query, std::size_t k,
                                      const std::optional<std::string>& exclude = std::nullopt) const;

    /// Every canonical pair with cosine >= threshold, score descending then
    /// pair ascending. threshold must lie in (0, 1].
    std::vector<ScoredPair> pairwise_scan(double threshold) const;

    /// Writes {"dim": n, "items": {key: [values...]}} for debugging.
    void dump_json(const std::filesystem::path& path) const;

private:
    struct Entry {
        std::string key;
        EmbeddingVector vector;
        double norm = 0.0;
    };

    mutable std::shared_mutex mutex_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> slot_;
    std::size_t dim_ = 0;
};

}  // namespace groom
