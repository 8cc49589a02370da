#pragma once
// Helpers shared by the unit and acceptance suites.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fcg/backend.hpp"
#include "fcg/core.hpp"

namespace fcg::testing {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("fcg-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(FCG_FIXTURE_DIR) / name; }

// Canned replies keyed by exact prompt (or by a prompt prefix), canned
// probabilities keyed by probe prompt. Records every call.
class ScriptedBackend : public Backend {
public:
    std::string id() const override { return "scripted"; }

    void reply(const std::string& prompt, std::string text) { replies_[prompt] = std::move(text); }
    void reply_prefix(const std::string& prefix, std::string text) { prefix_replies_.emplace_back(prefix, std::move(text)); }
    void probe(const std::string& prompt, TokenProbPair pair) { probes_[prompt] = pair; }
    void fail_probe(const std::string& prompt) { failing_probes_.push_back(prompt); }

    std::string complete(const std::string& prompt, const GenerationParams&) override {
        std::lock_guard lock(mu_);
        completions_.push_back(prompt);
        if (auto it = replies_.find(prompt); it != replies_.end()) return it->second;
        for (const auto& [prefix, text] : prefix_replies_) {
            if (prompt.rfind(prefix, 0) == 0) return text;
        }
        throw BackendError("no scripted reply for prompt: " + prompt.substr(0, 80));
    }

    TokenProbPair first_token_probs(const std::string& prompt, const std::string&, const std::string&) override {
        std::lock_guard lock(mu_);
        probe_calls_.push_back(prompt);
        for (const auto& f : failing_probes_) {
            if (f == prompt) throw TransportError("scripted failure", 3);
        }
        if (auto it = probes_.find(prompt); it != probes_.end()) return it->second;
        throw BackendError("no scripted probe for prompt: " + prompt.substr(0, 80));
    }

    std::vector<std::string> completions() const {
        std::lock_guard lock(mu_);
        return completions_;
    }
    std::vector<std::string> probe_calls() const {
        std::lock_guard lock(mu_);
        return probe_calls_;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> replies_;
    std::vector<std::pair<std::string, std::string>> prefix_replies_;
    std::map<std::string, TokenProbPair> probes_;
    std::vector<std::string> failing_probes_;
    std::vector<std::string> completions_;
    std::vector<std::string> probe_calls_;
};

// Reference for minimal removal: evaluate every suffix ranked[j..n) for
// j = 0..n independently, count its labels from scratch, and keep the smallest
// qualifying non-empty one.
struct BruteForceRemoval {
    std::size_t j;
    std::vector<std::size_t> retained_positions;
};

inline std::optional<BruteForceRemoval> brute_force_removal(const std::vector<AtomicFact>& ranked, double level) {
    std::vector<std::size_t> qualifying;
    for (std::size_t j = 0; j <= ranked.size(); ++j) {
        std::size_t supported = 0, total = 0;
        for (std::size_t i = j; i < ranked.size(); ++i) {
            ++total;
            if (ranked[i].label == Label::Supported) ++supported;
        }
        if (total == 0) continue;
        if (static_cast<double>(supported) / static_cast<double>(total) >= level) qualifying.push_back(j);
    }
    if (qualifying.empty()) return std::nullopt;
    const std::size_t j = *std::min_element(qualifying.begin(), qualifying.end());
    BruteForceRemoval out{j, {}};
    for (std::size_t i = j; i < ranked.size(); ++i) out.retained_positions.push_back(ranked[i].source_position);
    return out;
}

inline AtomicFact fact(std::string text, std::size_t pos, std::optional<double> confidence = std::nullopt,
                       Label label = Label::Unlabeled) {
    AtomicFact f;
    f.text = std::move(text);
    f.source_position = pos;
    f.confidence = confidence;
    f.label = label;
    return f;
}

}  // namespace fcg::testing
