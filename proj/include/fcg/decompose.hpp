#pragma once
// Segmenter (response -> atomic facts) and merger (fact subset + original ->
// response). Llm mode drives a backend with the shipped prompts; rule mode is
// deterministic: one fact per sentence, merge by joining sentences.

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fcg/backend.hpp"
#include "fcg/core.hpp"
#include "fcg/prompts.hpp"

namespace fcg {

enum class Mode { Rule, Llm };

inline std::string_view to_string(Mode mode) { return mode == Mode::Rule ? "rule" : "llm"; }

inline Mode parse_mode(std::string_view text) {
    if (text == "rule") return Mode::Rule;
    if (text == "llm") return Mode::Llm;
    throw ValidationError("mode must be 'rule' or 'llm', got '" + std::string(text) + "'");
}

class SegmentationFailed : public Error {
public:
    explicit SegmentationFailed(std::string raw_reply)
        : Error("no list items found in segmenter reply"), raw_reply_(std::move(raw_reply)) {}
    const std::string& raw_reply() const { return raw_reply_; }

private:
    std::string raw_reply_;
};

class EmptyMerge : public Error {
public:
    EmptyMerge() : Error("cannot merge an empty fact set") {}
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

inline std::vector<AtomicFact> number_facts(const std::vector<std::string>& texts) {
    std::vector<AtomicFact> facts;
    facts.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) facts.push_back(AtomicFact{texts[i], i, std::nullopt});
    return facts;
}

}  // namespace detail

// Sentences end at '.', '!' or '?' followed by whitespace or end of text.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!detail::is_terminator(text[i])) continue;
        const bool at_end = i + 1 == text.size();
        if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            auto piece = detail::trim(text.substr(start, i + 1 - start));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = i + 1;
        }
    }
    auto tail = detail::trim(text.substr(std::min(start, text.size())));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

inline std::vector<AtomicFact> segment_rule(std::string_view text) {
    return detail::number_facts(split_sentences(text));
}

// One fact per list item. Accepts "-", "*", "•" and "1." / "1)" markers.
inline std::vector<std::string> parse_fact_list(std::string_view reply) {
    std::vector<std::string> items;
    std::size_t pos = 0;
    while (pos <= reply.size()) {
        auto nl = reply.find('\n', pos);
        if (nl == std::string_view::npos) nl = reply.size();
        std::string line = detail::trim(reply.substr(pos, nl - pos));
        pos = nl + 1;

        std::size_t body = std::string::npos;
        if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
            body = 2;
        } else if (line.rfind("\xE2\x80\xA2 ", 0) == 0) {
            body = 4;
        } else {
            std::size_t d = 0;
            while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
            if (d > 0 && d + 1 < line.size() && (line[d] == '.' || line[d] == ')') &&
                std::isspace(static_cast<unsigned char>(line[d + 1]))) {
                body = d + 2;
            }
        }
        if (body == std::string::npos) continue;
        auto text = detail::trim(std::string_view(line).substr(body));
        if (!text.empty()) items.push_back(std::move(text));
    }
    return items;
}

inline std::string merge_rule_text(const std::vector<AtomicFact>& ordered) {
    std::string out;
    for (const auto& f : ordered) {
        if (!out.empty()) out += ' ';
        out += f.text;
    }
    return out;
}

class Decomposer {
public:
    // `backend` may be null in rule mode.
    Decomposer(Mode mode, Backend* backend, PromptSet prompts = {}, GenerationParams params = {})
        : mode_(mode), backend_(backend), prompts_(std::move(prompts)), params_(params) {
        if (mode_ == Mode::Llm && backend_ == nullptr) throw ValidationError("llm mode requires a backend");
    }

    Mode mode() const { return mode_; }

    std::vector<AtomicFact> segment(const ResponseRecord& response) const {
        if (mode_ == Mode::Rule) return segment_rule(response.text);
        if (detail::trim(response.text).empty()) throw ValidationError("llm segmentation requires non-empty text");
        const auto reply = backend_->complete(fill_template(prompts_.segment, {{"text", response.text}}), params_);
        auto items = parse_fact_list(reply);
        if (items.empty()) throw SegmentationFailed(reply);
        return detail::number_facts(items);
    }

    // Result facts keep their original source positions, ascending.
    ResponseRecord merge(std::vector<AtomicFact> retained, const ResponseRecord& original) const {
        if (retained.empty()) throw EmptyMerge();
        std::sort(retained.begin(), retained.end(),
                  [](const AtomicFact& a, const AtomicFact& b) { return a.source_position < b.source_position; });
        std::set<std::size_t> known;
        for (const auto& f : original.facts) known.insert(f.source_position);
        for (std::size_t i = 0; i < retained.size(); ++i) {
            if (i > 0 && retained[i].source_position == retained[i - 1].source_position) {
                throw ValidationError("retained facts repeat source position " +
                                      std::to_string(retained[i].source_position));
            }
            if (!known.count(retained[i].source_position)) {
                throw ValidationError("retained fact at position " + std::to_string(retained[i].source_position) +
                                      " is not a fact of the original response");
            }
        }

        ResponseRecord out;
        out.question_id = original.question_id;
        out.origin = Origin::Filtered;
        if (mode_ == Mode::Rule) {
            out.text = merge_rule_text(retained);
        } else {
            std::string list;
            for (const auto& f : retained) list += "- " + f.text + "\n";
            if (!list.empty()) list.pop_back();
            out.text = backend_->complete(fill_template(prompts_.merge, {{"facts", list}, {"sample", original.text}}),
                                          params_);
        }
        out.facts = std::move(retained);
        return out;
    }

private:
    Mode mode_;
    Backend* backend_;
    PromptSet prompts_;
    GenerationParams params_;
};

}  // namespace fcg
