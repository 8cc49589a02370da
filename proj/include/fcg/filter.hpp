#pragma once
// Builds factuality-controlled training triples. For each question the model's
// unconditioned answer r0 is segmented and verified once. For each level c:
// if f(r0) >= c the answer is used directly; otherwise facts are ranked by
// ascending confidence and the shortest prefix of low-confidence facts is
// dropped so the remaining suffix meets c, and that suffix is merged back into
// a response. When no non-empty suffix qualifies the (question, level) pair is
// skipped.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcg/backend.hpp"
#include "fcg/confidence.hpp"
#include "fcg/core.hpp"
#include "fcg/decompose.hpp"
#include "fcg/format.hpp"
#include "fcg/parallel.hpp"
#include "fcg/verify.hpp"

namespace fcg {

namespace detail {
inline bool ranks_before(const AtomicFact& a, const AtomicFact& b) {
    if (*a.confidence != *b.confidence) return *a.confidence < *b.confidence;
    return a.source_position < b.source_position;
}
}  // namespace detail

// Ascending confidence; equal confidences keep source order.
inline std::vector<AtomicFact> rank_ascending(std::vector<AtomicFact> facts) {
    for (const auto& f : facts) {
        if (!f.confidence) {
            throw ValidationError("fact at position " + std::to_string(f.source_position) + " has no confidence");
        }
    }
    std::stable_sort(facts.begin(), facts.end(), detail::ranks_before);
    return facts;
}

struct RemovalResult {
    // Number of lowest-confidence facts dropped.
    std::size_t j = 0;
    // The kept suffix, still in ascending-confidence order.
    std::vector<AtomicFact> retained;
    FactualityScore achieved;
};

// Smallest j in [0, n) whose suffix ranked[j..n) has factuality >= level. The
// empty suffix never qualifies, so nullopt means no example can be made.
inline std::optional<RemovalResult> minimal_removal(const std::vector<AtomicFact>& ranked, FactualityLevel level) {
    const std::size_t n = ranked.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (ranked[i].label == Label::Unlabeled) throw ValidationError("minimal_removal requires labeled facts");
        if (!ranked[i].confidence) throw ValidationError("minimal_removal requires scored facts");
        if (i > 0 && detail::ranks_before(ranked[i], ranked[i - 1])) {
            throw ValidationError("minimal_removal requires facts ranked by ascending confidence");
        }
    }
    // supported_from[j] = supported facts in ranked[j..n).
    std::vector<std::size_t> supported_from(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
        supported_from[i] = supported_from[i + 1] + (ranked[i].label == Label::Supported ? 1 : 0);
    }
    for (std::size_t j = 0; j < n; ++j) {
        auto score = factuality_of_counts(supported_from[j], n - j);
        if (*score.value >= level.value()) {
            return RemovalResult{j, std::vector<AtomicFact>(ranked.begin() + static_cast<std::ptrdiff_t>(j), ranked.end()),
                                 score};
        }
    }
    return std::nullopt;
}

struct BuildOptions {
    GenerationParams generation;
    PromptSet prompts;
    // Re-segment and re-verify merged responses; drop the triple if it no
    // longer meets its level.
    bool revalidate = false;
    // In-flight backend calls per question (probes, verification).
    std::size_t concurrency = 1;
};

// A question after r0 has been generated, segmented and labeled.
struct PreparedQuestion {
    Question question;
    ResponseRecord initial;
    FactualityScore initial_factuality;
    // Filled on first use; scoring is skipped when every level passes directly.
    std::optional<std::vector<AtomicFact>> ranked;
};

enum class BuildStatus { Direct, Filtered, Skipped, Demoted };

inline std::string_view to_string(BuildStatus s) {
    switch (s) {
        case BuildStatus::Direct: return "direct";
        case BuildStatus::Filtered: return "filtered";
        case BuildStatus::Skipped: return "skipped";
        case BuildStatus::Demoted: return "demoted";
    }
    return "?";
}

struct BuildOutcome {
    FactualityLevel level;
    BuildStatus status = BuildStatus::Skipped;
    std::optional<TrainingTriple> triple;
    // Source positions of the facts the emitted response keeps, ascending.
    std::vector<std::size_t> retained_positions;
};

class QuestionFailed : public Error {
public:
    QuestionFailed(const std::string& question_id, const std::string& cause)
        : Error("question " + question_id + ": " + cause), question_id_(question_id) {}
    const std::string& question_id() const { return question_id_; }

private:
    std::string question_id_;
};

class TripleBuilder {
public:
    TripleBuilder(Backend& backend, Verifier& verifier, Mode mode, BuildOptions options = {})
        : backend_(backend), verifier_(verifier), options_(std::move(options)),
          decomposer_(mode, &backend_, options_.prompts, options_.generation) {}

    // Generates r0 without any control directive, segments and labels it.
    PreparedQuestion prepare(const Question& question) const {
        try {
            PreparedQuestion p;
            p.question = question;
            p.initial.question_id = question.id;
            p.initial.origin = Origin::ModelInitial;
            p.initial.text = backend_.complete(render_control_prompt(question, std::nullopt), options_.generation);
            if (decomposer_.mode() == Mode::Rule || !detail::trim(p.initial.text).empty()) {
                p.initial.facts = decomposer_.segment(p.initial);
            }
            p.initial.facts = label_facts(std::move(p.initial.facts), context(question), verifier_, options_.concurrency);
            p.initial_factuality = factuality(p.initial.facts);
            return p;
        } catch (const Error& e) {
            throw QuestionFailed(question.id, e.what());
        }
    }

    BuildOutcome build(PreparedQuestion& p, FactualityLevel level) const {
        try {
            return build_impl(p, level);
        } catch (const QuestionFailed&) {
            throw;
        } catch (const Error& e) {
            throw QuestionFailed(p.question.id, e.what());
        }
    }

    const BuildOptions& options() const { return options_; }

private:
    static FactContext context(const Question& q) { return {q.id, q.entity_name}; }

    BuildOutcome build_impl(PreparedQuestion& p, FactualityLevel level) const {
        BuildOutcome out;
        out.level = level;
        const auto& f0 = p.initial_factuality;
        const std::size_t n = p.initial.facts.size();

        if (f0.defined() && *f0.value >= level.value()) {
            out.status = BuildStatus::Direct;
            for (const auto& f : p.initial.facts) out.retained_positions.push_back(f.source_position);
            out.triple = TrainingTriple{p.question, level, p.initial, Provenance::direct(), *f0.value, n};
            out.triple->validate();
            return out;
        }
        if (n == 0) return out;

        if (!p.ranked) {
            p.ranked = rank_ascending(score_all(p.initial.facts, backend_, options_.prompts, options_.concurrency));
        }
        auto removal = minimal_removal(*p.ranked, level);
        if (!removal) return out;

        auto merged = decomposer_.merge(removal->retained, p.initial);
        for (const auto& f : merged.facts) out.retained_positions.push_back(f.source_position);

        if (options_.revalidate && !revalidate(merged, p.question, level)) {
            out.status = BuildStatus::Demoted;
            return out;
        }
        out.status = BuildStatus::Filtered;
        out.triple = TrainingTriple{p.question, level, std::move(merged), Provenance::filtered_at(removal->j),
                                    *removal->achieved.value, n};
        out.triple->validate();
        return out;
    }

    // Re-segments the merged text and re-labels it. Facts whose text matches a
    // retained fact reuse that label; new text goes to the verifier.
    bool revalidate(const ResponseRecord& merged, const Question& q, FactualityLevel level) const {
        std::vector<AtomicFact> facts;
        try {
            facts = decomposer_.segment(merged);
        } catch (const SegmentationFailed&) {
            return false;
        }
        std::map<std::string, Label> known;
        for (const auto& f : merged.facts) known[f.text] = f.label;
        std::size_t supported = 0;
        for (const auto& f : facts) {
            Label label;
            if (auto it = known.find(f.text); it != known.end()) {
                label = it->second;
            } else {
                try {
                    label = verifier_.verify(f, context(q));
                } catch (const Error&) {
                    return false;
                }
            }
            supported += label == Label::Supported ? 1 : 0;
        }
        const auto score = factuality_of_counts(supported, facts.size());
        return score.defined() && *score.value >= level.value();
    }

    Backend& backend_;
    Verifier& verifier_;
    BuildOptions options_;
    Decomposer decomposer_;
};

inline std::optional<TrainingTriple> build_triple(const Question& question, FactualityLevel level, Backend& backend,
                                                  Verifier& verifier, Mode mode, BuildOptions options = {}) {
    TripleBuilder builder(backend, verifier, mode, std::move(options));
    auto prepared = builder.prepare(question);
    return builder.build(prepared, level).triple;
}

struct LevelCounts {
    std::size_t direct = 0;
    std::size_t filtered = 0;
    std::size_t skipped = 0;
    std::size_t demoted = 0;
};

struct QuestionResult {
    Question question;
    // Empty when the question failed.
    std::vector<BuildOutcome> outcomes;
    std::optional<std::string> error;
};

struct Dataset {
    std::vector<FactualityLevel> levels;
    std::vector<QuestionResult> questions;
    std::vector<TrainingTriple> triples;
    std::map<FactualityLevel, LevelCounts> per_level;

    std::size_t failed_questions() const {
        return static_cast<std::size_t>(std::count_if(questions.begin(), questions.end(),
                                                      [](const QuestionResult& q) { return q.error.has_value(); }));
    }
};

// Questions run independently on up to `concurrency` threads; results are
// assembled in input order, so output does not depend on scheduling.
inline Dataset build_dataset(const std::vector<Question>& questions, std::vector<FactualityLevel> levels,
                             const TripleBuilder& builder, std::size_t concurrency = 1) {
    if (levels.empty()) throw ValidationError("build_dataset requires at least one level");
    Dataset ds;
    ds.levels = std::move(levels);
    ds.questions.resize(questions.size());

    parallel_for_index(questions.size(), concurrency, [&](std::size_t i) {
        auto& result = ds.questions[i];
        result.question = questions[i];
        try {
            auto prepared = builder.prepare(questions[i]);
            for (const auto& level : ds.levels) result.outcomes.push_back(builder.build(prepared, level));
        } catch (const std::exception& e) {
            result.outcomes.clear();
            result.error = e.what();
        }
    });

    for (const auto& level : ds.levels) ds.per_level[level];
    for (const auto& q : ds.questions) {
        for (const auto& o : q.outcomes) {
            auto& counts = ds.per_level[o.level];
            switch (o.status) {
                case BuildStatus::Direct: ++counts.direct; break;
                case BuildStatus::Filtered: ++counts.filtered; break;
                case BuildStatus::Skipped: ++counts.skipped; break;
                case BuildStatus::Demoted: ++counts.skipped, ++counts.demoted; break;
            }
            if (o.triple) ds.triples.push_back(*o.triple);
        }
    }
    return ds;
}

inline nlohmann::ordered_json provenance_report(const Dataset& ds) {
    nlohmann::ordered_json per_level = nlohmann::ordered_json::object();
    for (const auto& [level, c] : ds.per_level) {
        per_level[format_number(level.value())] = {
            {"direct", c.direct}, {"filtered", c.filtered}, {"skipped", c.skipped}, {"demoted", c.demoted}};
    }
    nlohmann::ordered_json failed = nlohmann::ordered_json::array();
    for (const auto& q : ds.questions) {
        if (q.error) failed.push_back({{"question_id", q.question.id}, {"error", *q.error}});
    }
    return {{"per_level", per_level}, {"triples", ds.triples.size()}, {"failed_questions", failed}};
}

}  // namespace fcg
