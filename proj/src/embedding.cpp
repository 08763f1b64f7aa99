#include "groom/embedding.hpp"

#include "groom/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <sstream>

namespace groom {

namespace {

using json = nlohmann::json;

constexpr char32_t kReplacement = 0xFFFD;

/// Decodes UTF-8; malformed sequences become U+FFFD one byte at a time.
std::u32string decode_utf8(std::string_view in) {
    std::u32string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        auto b0 = static_cast<unsigned char>(in[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= in.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            auto bk = static_cast<unsigned char>(in[i + k]);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (bk & 0x3F);
            }
        }
        if (ok && ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
                   cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) {
            ok = false;
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
        } else {
            out.push_back(cp);
            i += len;
        }
    }
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

char32_t lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') {
        return cp + 0x20;
    }
    // Latin-1 uppercase letters, skipping the multiplication sign.
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {
        return cp + 0x20;
    }
    return cp;
}

// ASCII: letters and digits only. Beyond ASCII every code point counts as a
// word character except the Unicode space separators.
bool is_word(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || (cp >= U'0' && cp <= U'9');
    }
    switch (cp) {
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
        return false;
    default:
        return !(cp >= 0x2000 && cp <= 0x200A);
    }
}

std::u32string normalize_code_points(std::string_view text) {
    std::u32string out;
    bool pending_space = false;
    for (char32_t cp : decode_utf8(text)) {
        cp = lower(cp);
        if (!is_word(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(U' ');
            pending_space = false;
        }
        out.push_back(cp);
    }
    return out;
}

bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string format_cache_line(std::uint64_t key, const EmbeddingVector& v) {
    std::string line;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64 " %zu ", key, v.dim());
    line += buf;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        if (i) {
            line += ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", v.values[i]);
        line += buf;
    }
    line += '\n';
    return line;
}

std::optional<std::pair<std::uint64_t, EmbeddingVector>> parse_cache_line(const std::string& line) {
    std::istringstream in(line);
    std::string key_hex, values;
    std::size_t dim = 0;
    if (!(in >> key_hex >> dim >> values) || key_hex.size() != 16 || dim == 0) {
        return std::nullopt;
    }
    std::uint64_t key = 0;
    try {
        std::size_t used = 0;
        key = std::stoull(key_hex, &used, 16);
        if (used != 16) {
            return std::nullopt;
        }
        EmbeddingVector v;
        v.values.reserve(dim);
        std::size_t start = 0;
        while (start <= values.size()) {
            auto comma = values.find(',', start);
            auto token = values.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            v.values.push_back(std::stod(token));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (v.dim() != dim) {
            return std::nullopt;
        }
        return std::make_pair(key, std::move(v));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

[[noreturn]] void rethrow_with_index(std::exception_ptr error, std::size_t index) {
    const std::string prefix = "item " + std::to_string(index) + ": ";
    try {
        std::rethrow_exception(error);
    } catch (const ProviderError& e) {
        throw ProviderError(prefix + e.what(), e.status(), e.attempts());
    } catch (const Error& e) {
        throw Error(e.code(), prefix + e.what());
    }
}

}  // namespace

void validate(const EmbeddingProviderConfig& config) {
    if (config.dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
    }
    if (config.max_batch == 0) {
        throw Error(ErrorCode::InvalidArgument, "max_batch must be at least 1");
    }
    if (config.max_parallel_requests == 0) {
        throw Error(ErrorCode::InvalidArgument, "max_parallel_requests must be at least 1");
    }
    if (config.provider == EmbeddingProviderKind::RemoteApi && config.api_url.empty()) {
        throw Error(ErrorCode::InvalidArgument, "remote embedding provider needs EMBED_API_URL");
    }
}

std::string normalize_for_hashing(std::string_view text) {
    std::string out;
    for (char32_t cp : normalize_code_points(text)) {
        append_utf8(out, cp);
    }
    return out;
}

EmbeddingVector local_hash_embed(std::string_view text, std::size_t dim) {
    if (dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
    }
    if (is_blank(text)) {
        throw Error(ErrorCode::EmptyText, "cannot embed blank text");
    }
    auto cps = normalize_code_points(text);
    if (cps.size() < 3) {
        throw Error(ErrorCode::DegenerateText, "text has no trigrams after normalization");
    }
    EmbeddingVector v;
    v.values.assign(dim, 0.0);
    std::string trigram;
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
        trigram.clear();
        append_utf8(trigram, cps[i]);
        append_utf8(trigram, cps[i + 1]);
        append_utf8(trigram, cps[i + 2]);
        v.values[fnv1a64(trigram) % dim] += 1.0;
    }
    double norm = 0.0;
    for (double x : v.values) {
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v.values) {
        x /= norm;
    }
    return v;
}

std::vector<EmbeddingVector> LocalHashProvider::embed_chunk(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(local_hash_embed(t, dim_));
    }
    return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(EmbeddingProviderConfig config,
                                                 std::shared_ptr<HttpTransport> transport, RetryPolicy retry)
    : config_(std::move(config)), transport_(std::move(transport)), retry_(std::move(retry)) {
    validate(config_);
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_chunk(std::span<const std::string> texts) {
    json body = {{"model", config_.model_name},
                 {"input", std::vector<std::string>(texts.begin(), texts.end())},
                 {"dimensions", config_.dim}};
    HttpRequest request{"POST", config_.api_url, {{"Content-Type", "application/json"}}, body.dump()};
    if (!config_.api_key.empty()) {
        request.headers["Authorization"] = "Bearer " + config_.api_key;
    }

    int attempts = 0;
    auto response = send_with_retry(*transport_, request, retry_, &attempts);
    if (response.status != 200) {
        std::string detail = response.status == 0 ? response.transport_error : response.body.substr(0, 200);
        throw ProviderError("embedding request failed with status " + std::to_string(response.status) + ": " +
                                detail,
                            response.status, attempts);
    }

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    try {
        auto parsed = json::parse(response.body);
        for (const auto& item : parsed.at("data")) {
            auto index = item.at("index").get<std::size_t>();
            if (index >= out.size() || filled[index]) {
                throw ProviderError("embedding response has a bad index", response.status, attempts);
            }
            out[index].values = item.at("embedding").get<std::vector<double>>();
            filled[index] = true;
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unreadable embedding response: ") + e.what(), response.status, attempts);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!filled[i]) {
            throw ProviderError("embedding response is missing item " + std::to_string(i), response.status,
                                attempts);
        }
        if (out[i].dim() != config_.dim) {
            throw ProviderError("embedding response has dim " + std::to_string(out[i].dim()) + ", expected " +
                                    std::to_string(config_.dim),
                                response.status, attempts);
        }
        if (!std::all_of(out[i].values.begin(), out[i].values.end(), [](double x) { return std::isfinite(x); })) {
            throw ProviderError("embedding response has non-finite values", response.status, attempts);
        }
    }
    return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    std::string line;
    while (std::getline(in, line)) {
        // A torn final line from an interrupted append is skipped.
        if (auto record = parse_cache_line(line)) {
            entries_.insert_or_assign(record->first, std::move(record->second));
        }
    }
}

std::uint64_t EmbeddingCache::key_for(std::string_view provider_id, std::string_view model_name, std::size_t dim,
                                      std::string_view text) {
    // Unit separators keep ("ab","c") and ("a","bc") apart.
    auto h = fnv1a64(provider_id);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(model_name, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(std::to_string(dim), h);
    h = fnv1a64("\x1f", h);
    return fnv1a64(text, h);
}

std::optional<EmbeddingVector> EmbeddingCache::get(std::uint64_t key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void EmbeddingCache::put(std::uint64_t key, const EmbeddingVector& vector) {
    std::lock_guard lock(mutex_);
    if (!entries_.insert_or_assign(key, vector).second) {
        return;
    }
    if (path_) {
        std::ofstream out(*path_, std::ios::app);
        out << format_cache_line(key, vector);
    }
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider, EmbeddingProviderConfig config,
                   std::shared_ptr<EmbeddingCache> cache)
    : provider_(std::move(provider)), config_(std::move(config)), cache_(std::move(cache)) {
    validate(config_);
}

EmbeddingVector Embedder::embed_text(std::string_view text) {
    std::string owned(text);
    try {
        return embed_batch(std::span<const std::string>(&owned, 1)).front();
    } catch (const ProviderError&) {
        throw;
    } catch (const Error& e) {
        // Drop the "item 0: " prefix for single-text calls.
        std::string message = e.what();
        if (message.rfind("item 0: ", 0) == 0) {
            message.erase(0, 8);
        }
        throw Error(e.code(), message);
    }
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out(texts.size());
    if (texts.empty()) {
        return out;
    }
    const bool local = provider_->id() == "local_hash";
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (is_blank(texts[i])) {
            rethrow_with_index(std::make_exception_ptr(Error(ErrorCode::EmptyText, "cannot embed blank text")), i);
        }
        if (local && normalize_code_points(texts[i]).size() < 3) {
            rethrow_with_index(std::make_exception_ptr(Error(ErrorCode::DegenerateText,
                                                             "text has no trigrams after normalization")),
                               i);
        }
    }

    // Resolve cache hits; identical texts within the batch share one request.
    std::vector<std::uint64_t> keys(texts.size());
    std::vector<std::size_t> misses;
    std::unordered_map<std::uint64_t, std::size_t> first_miss;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = EmbeddingCache::key_for(provider_->id(), provider_->model_name(), provider_->dim(), texts[i]);
        if (cache_) {
            if (auto hit = cache_->get(keys[i])) {
                out[i] = std::move(*hit);
                continue;
            }
        }
        if (first_miss.emplace(keys[i], i).second) {
            misses.push_back(i);
        }
    }

    const std::size_t chunk_count = (misses.size() + config_.max_batch - 1) / config_.max_batch;
    std::vector<std::exception_ptr> errors(chunk_count);
    std::atomic<std::size_t> next_chunk{0};
    auto worker = [&] {
        for (auto c = next_chunk++; c < chunk_count; c = next_chunk++) {
            const auto begin = c * config_.max_batch;
            const auto end = std::min(misses.size(), begin + config_.max_batch);
            std::vector<std::string> chunk;
            for (auto k = begin; k < end; ++k) {
                chunk.push_back(texts[misses[k]]);
            }
            try {
                auto vectors = provider_->embed_chunk(chunk);
                for (auto k = begin; k < end; ++k) {
                    out[misses[k]] = std::move(vectors[k - begin]);
                }
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    const auto workers = std::min(chunk_count, config_.max_parallel_requests);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::future<void>> running;
        for (std::size_t w = 0; w < workers; ++w) {
            running.push_back(std::async(std::launch::async, worker));
        }
        for (auto& f : running) {
            f.get();
        }
    }
    for (std::size_t c = 0; c < chunk_count; ++c) {
        if (errors[c]) {
            rethrow_with_index(errors[c], misses[c * config_.max_batch]);
        }
    }

    for (auto i : misses) {
        if (out[i].dim() != provider_->dim()) {
            throw Error(ErrorCode::DimensionMismatch, "provider returned a vector of the wrong dimension");
        }
        if (cache_) {
            cache_->put(keys[i], out[i]);
        }
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (out[i].values.empty()) {
            out[i] = out[first_miss.at(keys[i])];
        }
    }
    return out;
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config,
                                                           std::shared_ptr<HttpTransport> transport) {
    validate(config);
    if (config.provider == EmbeddingProviderKind::LocalHash) {
        return std::make_shared<LocalHashProvider>(config.dim, config.model_name);
    }
    if (!transport) {
        transport = std::make_shared<HttplibTransport>(config.request_timeout);
    }
    return std::make_shared<RemoteEmbeddingProvider>(config, std::move(transport));
}

}  // namespace groom
