#pragma once
// The generating/judging model behind a small interface: text completion and
// first-token probabilities for two candidate answers. CachedBackend adds a
// content-addressed disk cache in front of any implementation.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "fcg/core.hpp"

namespace fcg {

struct GenerationParams {
    int max_tokens = 512;
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;

    void validate() const {
        if (max_tokens < 1) throw ValidationError("GenerationParams.max_tokens must be >= 1");
        if (!(temperature >= 0.0)) throw ValidationError("GenerationParams.temperature must be >= 0");
    }
};

// Probability mass on two candidate first tokens. Need not sum to 1.
struct TokenProbPair {
    double p_true = 0.0;
    double p_false = 0.0;

    void validate() const {
        if (!(p_true >= 0.0 && p_true <= 1.0) || !(p_false >= 0.0 && p_false <= 1.0)) {
            throw ValidationError("token probabilities must lie in [0, 1]");
        }
    }
};

class BackendError : public Error {
public:
    using Error::Error;
};

class TransportError : public BackendError {
public:
    TransportError(const std::string& what, int attempts)
        : BackendError(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

class HttpStatusError : public BackendError {
public:
    HttpStatusError(int status, std::string body_excerpt)
        : BackendError("HTTP " + std::to_string(status) + ": " + body_excerpt),
          status_(status), body_excerpt_(std::move(body_excerpt)) {}
    int status() const { return status_; }
    const std::string& body_excerpt() const { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

class CapabilityUnsupported : public BackendError {
public:
    using BackendError::BackendError;
};

class Backend {
public:
    virtual ~Backend() = default;

    // Stable identifier; part of every cache key.
    virtual std::string id() const = 0;

    virtual std::string complete(const std::string& prompt, const GenerationParams& params) = 0;

    virtual TokenProbPair first_token_probs(const std::string& prompt, const std::string& token_a,
                                            const std::string& token_b) = 0;
};

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

// Files live at <root>/<first two hex chars>/<digest>.json. Commits write a
// temporary sibling and rename it into place, so concurrent writers of the
// same key leave one complete entry.
class DiskCache {
public:
    explicit DiskCache(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_);
    }

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path path_for(const std::string& digest) const {
        return root_ / digest.substr(0, 2) / (digest + ".json");
    }

    std::optional<std::string> get(const std::string& digest) const {
        const auto path = path_for(digest);
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        std::error_code ec;
        // Touch for LRU ordering; a failure here only affects eviction order.
        std::filesystem::last_write_time(path, std::filesystem::file_time_type::clock::now(), ec);
        return buf.str();
    }

    void put(const std::string& digest, const std::string& payload) const {
        const auto path = path_for(digest);
        std::filesystem::create_directories(path.parent_path());
        static std::atomic<unsigned long> counter{0};
        auto tmp = path;
        tmp += ".tmp." + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "." +
               std::to_string(counter.fetch_add(1));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write cache entry " + tmp.string());
            out << payload;
            if (!out) throw Error("cache write failed for " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

private:
    std::filesystem::path root_;
};

// Removes least-recently-used entries until the cache holds at most max_bytes.
// Returns the number of bytes freed.
inline std::uintmax_t cache_gc(const std::filesystem::path& cache_dir, std::uintmax_t max_bytes) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(cache_dir)) throw Error("cache directory does not exist: " + cache_dir.string());

    struct Entry {
        fs::path path;
        fs::file_time_type mtime;
        std::uintmax_t size;
    };
    std::vector<Entry> entries;
    std::uintmax_t total = 0;
    for (const auto& item : fs::recursive_directory_iterator(cache_dir)) {
        if (!item.is_regular_file() || item.path().extension() != ".json") continue;
        entries.push_back({item.path(), item.last_write_time(), item.file_size()});
        total += entries.back().size;
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.mtime != b.mtime ? a.mtime < b.mtime : a.path < b.path;
    });

    std::uintmax_t freed = 0;
    for (const auto& e : entries) {
        if (total - freed <= max_bytes) break;
        std::error_code ec;
        if (!fs::remove(e.path, ec) || ec) {
            throw Error("cannot remove cache entry " + e.path.string() + ": " + ec.message());
        }
        freed += e.size;
    }
    return freed;
}

class CachedBackend : public Backend {
public:
    CachedBackend(std::shared_ptr<Backend> inner, DiskCache cache) : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string id() const override { return inner_->id(); }

    std::string complete(const std::string& prompt, const GenerationParams& params) override {
        nlohmann::ordered_json key{{"backend", inner_->id()},
                                   {"op", "complete"},
                                   {"prompt", prompt},
                                   {"max_tokens", params.max_tokens},
                                   {"temperature", params.temperature},
                                   {"seed", params.seed ? nlohmann::ordered_json(*params.seed) : nullptr}};
        const auto digest = sha256_hex(key.dump());
        if (auto hit = lookup(digest)) return nlohmann::json::parse(*hit).at("text").get<std::string>();
        std::string text = inner_->complete(prompt, params);
        store(digest, nlohmann::ordered_json{{"request", key}, {"text", text}}.dump());
        return text;
    }

    TokenProbPair first_token_probs(const std::string& prompt, const std::string& token_a,
                                    const std::string& token_b) override {
        nlohmann::ordered_json key{{"backend", inner_->id()},
                                   {"op", "first_token_probs"},
                                   {"prompt", prompt},
                                   {"token_a", token_a},
                                   {"token_b", token_b}};
        const auto digest = sha256_hex(key.dump());
        if (auto hit = lookup(digest)) {
            const auto j = nlohmann::json::parse(*hit);
            return {j.at("p_a").get<double>(), j.at("p_b").get<double>()};
        }
        const auto probs = inner_->first_token_probs(prompt, token_a, token_b);
        store(digest, nlohmann::ordered_json{{"request", key}, {"p_a", probs.p_true}, {"p_b", probs.p_false}}.dump());
        return probs;
    }

    std::size_t hits() const { return hits_.load(); }
    std::size_t misses() const { return misses_.load(); }

private:
    std::optional<std::string> lookup(const std::string& digest) {
        auto hit = cache_.get(digest);
        (hit ? hits_ : misses_).fetch_add(1);
        return hit;
    }

    void store(const std::string& digest, const std::string& payload) { cache_.put(digest, payload); }

    std::shared_ptr<Backend> inner_;
    DiskCache cache_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

}  // namespace fcg
