#pragma once
// Domain records shared by every stage of the pipeline: questions, factuality
// levels, atomic facts, responses, training triples and evaluation records.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fcg {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// A control value c in [0, 1].
class FactualityLevel {
public:
    constexpr FactualityLevel() = default;

    explicit FactualityLevel(double value) : value_(value) {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw ValidationError("FactualityLevel must lie in [0, 1], got " + std::to_string(value));
        }
    }

    constexpr double value() const { return value_; }

    // Integer percentage, rounded half-up (0.125 -> 13). The epsilon absorbs
    // binary representation error so 0.285 rounds to 29, not 28.
    int percent() const { return static_cast<int>(std::floor(value_ * 100.0 + 0.5 + 1e-9)); }

    std::string percent_text() const { return std::to_string(percent()) + "%"; }

    friend constexpr bool operator==(FactualityLevel, FactualityLevel) = default;
    friend constexpr auto operator<=>(FactualityLevel a, FactualityLevel b) { return a.value_ <=> b.value_; }

private:
    double value_ = 0.0;
};

// {0.1, 0.2, ..., 1.0}. Built from k/10 so every value equals its decimal literal.
inline std::vector<FactualityLevel> default_level_grid() {
    std::vector<FactualityLevel> grid;
    for (int k = 1; k <= 10; ++k) grid.emplace_back(k / 10.0);
    return grid;
}

enum class Label { Unlabeled, Supported, Unsupported };

inline std::string_view to_string(Label label) {
    switch (label) {
        case Label::Supported: return "Supported";
        case Label::Unsupported: return "Unsupported";
        case Label::Unlabeled: break;
    }
    return "Unlabeled";
}

inline Label parse_label(std::string_view text) {
    if (text == "Supported") return Label::Supported;
    if (text == "Unsupported") return Label::Unsupported;
    if (text == "Unlabeled") return Label::Unlabeled;
    throw ValidationError("unknown label '" + std::string(text) + "'");
}

struct Question {
    std::string id;
    std::string entity_name;
    std::string prompt_text;

    void validate() const {
        if (id.empty()) throw ValidationError("Question.id must be non-empty");
        if (entity_name.empty()) throw ValidationError("Question.entity_name must be non-empty");
        if (prompt_text.empty()) throw ValidationError("Question.prompt_text must be non-empty");
    }
};

inline std::string render_task_prompt(std::string_view entity_name) {
    return "Tell me a bio of " + std::string(entity_name) + ".";
}

inline Question make_question(std::string id, std::string entity_name) {
    Question q{std::move(id), std::move(entity_name), {}};
    q.prompt_text = render_task_prompt(q.entity_name);
    q.validate();
    return q;
}

inline std::string render_control_directive(FactualityLevel level) {
    return "Output information that you deem " + level.percent_text() + " confident.";
}

// Task prompt plus the control directive; an unset level means no control.
inline std::string render_control_prompt(std::string_view task_prompt, std::optional<FactualityLevel> level) {
    std::string out(task_prompt);
    if (level) {
        out += ' ';
        out += render_control_directive(*level);
    }
    return out;
}

inline std::string render_control_prompt(const Question& question, std::optional<FactualityLevel> level) {
    return render_control_prompt(question.prompt_text, level);
}

struct AtomicFact {
    std::string text;
    std::size_t source_position = 0;
    std::optional<double> confidence;
    Label label = Label::Unlabeled;
    // Set when the confidence probe carried no mass on either answer token.
    bool low_signal = false;

    void validate() const {
        if (text.empty()) throw ValidationError("AtomicFact.text must be non-empty");
        if (confidence && !(*confidence >= 0.0 && *confidence <= 1.0)) {
            throw ValidationError("AtomicFact.confidence must lie in [0, 1]");
        }
    }

    friend bool operator==(const AtomicFact&, const AtomicFact&) = default;
};

enum class Origin { ModelInitial, Filtered, External };

struct ResponseRecord {
    std::string question_id;
    std::string text;
    std::vector<AtomicFact> facts;
    Origin origin = Origin::External;

    void validate() const {
        for (const auto& fact : facts) fact.validate();
        if (origin == Origin::Filtered) {
            for (const auto& fact : facts) {
                if (!fact.confidence || fact.label == Label::Unlabeled) {
                    throw ValidationError("filtered response facts must carry confidence and label");
                }
            }
        }
    }
};

// How a triple's response was obtained.
struct Provenance {
    enum class Kind { DirectPass, Filtered };
    Kind kind = Kind::DirectPass;
    // Number of lowest-confidence facts removed; meaningful for Filtered only.
    std::size_t removed = 0;

    static Provenance direct() { return {}; }
    static Provenance filtered_at(std::size_t j) { return {Kind::Filtered, j}; }

    bool is_direct() const { return kind == Kind::DirectPass; }

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct TrainingTriple {
    Question question;
    FactualityLevel level;
    ResponseRecord response;
    Provenance provenance;
    // Factuality of the emitted response as measured from fact labels.
    double achieved_factuality = 0.0;
    // Fact count of the unfiltered initial response.
    std::size_t original_fact_count = 0;

    void validate() const {
        question.validate();
        response.validate();
        if (!provenance.is_direct()) {
            if (provenance.removed < 1 || provenance.removed > original_fact_count) {
                throw ValidationError("FilteredAtIndex(j) requires 1 <= j <= original fact count");
            }
        }
    }
};

struct EvaluationRecord {
    std::string question_id;
    std::string method = "default";
    std::optional<FactualityLevel> level_requested;
    std::size_t fact_count = 0;
    std::size_t supported_count = 0;
    // nullopt when the response has no facts.
    std::optional<double> factuality;
    std::size_t word_count = 0;
    bool failed = false;

    void validate() const {
        if (supported_count > fact_count) throw ValidationError("supported_count exceeds fact_count");
        if (fact_count > 0 && !failed) {
            if (!factuality || *factuality != static_cast<double>(supported_count) / static_cast<double>(fact_count)) {
                throw ValidationError("factuality must equal supported_count / fact_count");
            }
        }
        if (fact_count == 0 && factuality) throw ValidationError("factuality is undefined for empty responses");
    }
};

inline std::size_t count_words(std::string_view text) {
    std::size_t words = 0;
    bool in_word = false;
    for (unsigned char ch : text) {
        const bool space = std::isspace(ch) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

}  // namespace fcg
