#pragma once

#include "groom/http.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace groom {

/// Fixed-dimension real vector for one piece of text.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

enum class EmbeddingProviderKind { RemoteApi, LocalHash };

struct EmbeddingProviderConfig {
    EmbeddingProviderKind provider = EmbeddingProviderKind::LocalHash;
    std::string model_name = "local-hash-trigram";
    std::size_t dim = 256;
    std::size_t max_batch = 32;
    std::chrono::milliseconds request_timeout{30000};
    std::size_t max_parallel_requests = 4;
    // Remote only; normally filled from EMBED_API_URL / EMBED_API_KEY.
    std::string api_url;
    std::string api_key;
};

/// Throws Error(InvalidArgument) when dim, max_batch or
/// max_parallel_requests is zero, or a remote config has no URL.
void validate(const EmbeddingProviderConfig& config);

/// 64-bit FNV-1a over raw bytes.
constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = kFnvOffsetBasis) {
    for (char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= kFnvPrime;
    }
    return hash;
}

/// Lowercases, maps every non-alphanumeric code point to a space, collapses
/// space runs and trims. Operates on UTF-8 code points.
std::string normalize_for_hashing(std::string_view text);

/// Trigram feature-hashing embedder; output depends only on (text, dim) and
/// is L2-normalized. Throws EmptyText or DegenerateText.
EmbeddingVector local_hash_embed(std::string_view text, std::size_t dim = 256);

/// One provider round trip embeds a whole chunk of texts.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string_view id() const = 0;
    virtual const std::string& model_name() const = 0;
    virtual std::size_t dim() const = 0;

    /// Output order matches input order. Texts are already validated.
    virtual std::vector<EmbeddingVector> embed_chunk(std::span<const std::string> texts) = 0;
};

class LocalHashProvider final : public EmbeddingProvider {
public:
    explicit LocalHashProvider(std::size_t dim = 256, std::string model_name = "local-hash-trigram")
        : dim_(dim), model_name_(std::move(model_name)) {}

    std::string_view id() const override { return "local_hash"; }
    const std::string& model_name() const override { return model_name_; }
    std::size_t dim() const override { return dim_; }
    std::vector<EmbeddingVector> embed_chunk(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
    std::string model_name_;
};

/// Client for an OpenAI-compatible embeddings endpoint:
/// POST {"model", "input": [...], "dimensions"} -> {"data": [{"index", "embedding"}]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(EmbeddingProviderConfig config, std::shared_ptr<HttpTransport> transport,
                            RetryPolicy retry = {});

    std::string_view id() const override { return "remote_api"; }
    const std::string& model_name() const override { return config_.model_name; }
    std::size_t dim() const override { return config_.dim; }
    std::vector<EmbeddingVector> embed_chunk(std::span<const std::string> texts) override;

private:
    EmbeddingProviderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
};

/// Content-addressed vector cache, optionally persisted as an append-only
/// text file with one `<16 hex key> <dim> <v1,v2,...>` record per line.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    /// Loads existing records from `path` (if present) and appends new ones to it.
    explicit EmbeddingCache(std::filesystem::path path);

    static std::uint64_t key_for(std::string_view provider_id, std::string_view model_name,
                                 std::size_t dim, std::string_view text);

    std::optional<EmbeddingVector> get(std::uint64_t key) const;
    void put(std::uint64_t key, const EmbeddingVector& vector);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, EmbeddingVector> entries_;
    std::optional<std::filesystem::path> path_;
};

/// Provider plus cache, batching and bounded fan-out.
class Embedder {
public:
    Embedder(std::shared_ptr<EmbeddingProvider> provider, EmbeddingProviderConfig config,
             std::shared_ptr<EmbeddingCache> cache = nullptr);

    EmbeddingVector embed_text(std::string_view text);

    /// Element-wise equivalent of embed_text. On failure rethrows the first
    /// failing item's error with its index prefixed to the message.
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

    const EmbeddingProviderConfig& config() const noexcept { return config_; }
    std::size_t dim() const { return provider_->dim(); }

private:
    std::shared_ptr<EmbeddingProvider> provider_;
    EmbeddingProviderConfig config_;
    std::shared_ptr<EmbeddingCache> cache_;
};

/// Builds the provider selected by `config`. Remote providers use
/// `transport` when given, otherwise a real HTTP client.
std::shared_ptr<EmbeddingProvider> make_embedding_provider(
    const EmbeddingProviderConfig& config, std::shared_ptr<HttpTransport> transport = nullptr);

}  // namespace groom
