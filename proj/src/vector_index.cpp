#include "groom/vector_index.hpp"

#include "groom/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>

namespace groom {

namespace {

double l2_norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (double x : v.values) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
    double sum = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        sum += u.values[i] * v.values[i];
    }
    return sum;
}

// Identical vectors score exactly 1 so that a threshold of 1.0 keeps them;
// otherwise rounding could land a hair below.
double cosine_with_norms(const EmbeddingVector& u, double nu, const EmbeddingVector& v, double nv) {
    if (u.values == v.values) {
        return 1.0;
    }
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

bool neighbor_order(const ScoredNeighbor& x, const ScoredNeighbor& y) {
    if (x.score != y.score) {
        return x.score > y.score;
    }
    return x.key < y.key;
}

}  // namespace

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of vectors with dims " + std::to_string(u.dim()) + " and " + std::to_string(v.dim()));
    }
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) {
        throw Error(ErrorCode::ZeroVector, "cosine is undefined for a zero vector");
    }
    return cosine_with_norms(u, nu, v, nv);
}

void VectorIndex::upsert(IndexedItem item) {
    std::unique_lock lock(mutex_);
    if (item.vector.dim() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "cannot index an empty vector for " + item.key);
    }
    if (dim_ != 0 && item.vector.dim() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "index has dim " + std::to_string(dim_) + " but " + item.key +
                                                      " has dim " + std::to_string(item.vector.dim()));
    }
    dim_ = item.vector.dim();
    const double norm = l2_norm(item.vector);
    if (auto it = slot_.find(item.key); it != slot_.end()) {
        entries_[it->second].vector = std::move(item.vector);
        entries_[it->second].norm = norm;
        return;
    }
    slot_.emplace(item.key, entries_.size());
    entries_.push_back(Entry{std::move(item.key), std::move(item.vector), norm});
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::size_t VectorIndex::dim() const {
    std::shared_lock lock(mutex_);
    return dim_;
}

std::optional<EmbeddingVector> VectorIndex::get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = slot_.find(key);
    if (it == slot_.end()) {
        return std::nullopt;
    }
    return entries_[it->second].vector;
}

std::vector<ScoredNeighbor> VectorIndex::top_k(const EmbeddingVector& query, std::size_t k,
                                               const std::optional<std::string>& exclude) const {
    std::shared_lock lock(mutex_);
    if (entries_.empty()) {
        throw Error(ErrorCode::EmptyIndex, "top_k on an empty index");
    }
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "top_k needs k >= 1");
    }
    if (query.dim() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query.dim()) +
                                                      " does not match index dim " + std::to_string(dim_));
    }
    const double nq = l2_norm(query);
    if (nq == 0.0) {
        throw Error(ErrorCode::ZeroVector, "top_k query is a zero vector");
    }

    std::vector<ScoredNeighbor> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (exclude && e.key == *exclude) {
            continue;
        }
        if (e.norm == 0.0) {
            continue;
        }
        scored.push_back({e.key, cosine_with_norms(query, nq, e.vector, e.norm)});
    }
    const auto keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      neighbor_order);
    scored.resize(keep);
    return scored;
}

std::vector<ScoredPair> VectorIndex::pairwise_scan(double threshold) const {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "similarity threshold must lie in (0, 1]");
    }
    std::shared_lock lock(mutex_);
    if (entries_.size() < 2) {
        throw Error(ErrorCode::EmptyIndex, "pairwise scan needs at least two indexed items");
    }
    std::vector<ScoredPair> hits;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        if (a.norm == 0.0) {
            continue;
        }
        for (std::size_t j = i + 1; j < entries_.size(); ++j) {
            const auto& b = entries_[j];
            if (b.norm == 0.0) {
                continue;
            }
            const double score = cosine_with_norms(a.vector, a.norm, b.vector, b.norm);
            if (score >= threshold) {
                hits.push_back({canonicalize_pair(a.key, b.key), score});
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const ScoredPair& x, const ScoredPair& y) {
        if (x.score != y.score) {
            return x.score > y.score;
        }
        return x.pair < y.pair;
    });
    return hits;
}

void VectorIndex::dump_json(const std::filesystem::path& path) const {
    std::shared_lock lock(mutex_);
    nlohmann::json items = nlohmann::json::object();
    for (const auto& e : entries_) {
        items[e.key] = e.vector.values;
    }
    std::ofstream out(path);
    out << nlohmann::json{{"dim", dim_}, {"items", items}}.dump(2) << '\n';
}

}  // namespace groom
