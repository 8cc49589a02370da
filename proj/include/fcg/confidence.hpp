#pragma once
// Model confidence in an atomic fact: the probability mass on "True" as the
// first answer token, normalized against the mass on "False".

#include <optional>
#include <string>
#include <vector>

#include "fcg/backend.hpp"
#include "fcg/core.hpp"
#include "fcg/parallel.hpp"
#include "fcg/prompts.hpp"

namespace fcg {

inline constexpr double kMinProbeMass = 1e-6;

// p_true / (p_true + p_false), or nullopt when the pair carries no usable mass.
inline std::optional<double> normalized_confidence(double p_true, double p_false) {
    const double total = p_true + p_false;
    if (!(total >= kMinProbeMass)) return std::nullopt;
    return std::clamp(p_true / total, 0.0, 1.0);
}

inline std::string probe_prompt(const std::string& fact_text, const PromptSet& prompts = {}) {
    return fill_template(prompts.probe, {{"fact", fact_text}});
}

// Degenerate probes score 0.5 and set low_signal.
inline AtomicFact score_fact(AtomicFact fact, Backend& backend, const PromptSet& prompts = {}) {
    if (fact.text.empty()) throw ValidationError("cannot score an empty fact");
    const auto probs = backend.first_token_probs(probe_prompt(fact.text, prompts), "True", "False");
    if (auto c = normalized_confidence(probs.p_true, probs.p_false)) {
        fact.confidence = *c;
        fact.low_signal = false;
    } else {
        fact.confidence = 0.5;
        fact.low_signal = true;
    }
    return fact;
}

class ScoringAborted : public Error {
public:
    ScoringAborted(std::size_t completed, std::size_t total, std::size_t failed_index, const std::string& cause)
        : Error("confidence scoring aborted at fact " + std::to_string(failed_index) + " (" +
                std::to_string(completed) + "/" + std::to_string(total) + " scored): " + cause),
          completed_(completed), failed_index_(failed_index) {}
    std::size_t completed() const { return completed_; }
    std::size_t failed_index() const { return failed_index_; }

private:
    std::size_t completed_;
    std::size_t failed_index_;
};

inline std::vector<AtomicFact> score_all(const std::vector<AtomicFact>& facts, Backend& backend,
                                         const PromptSet& prompts = {}, std::size_t concurrency = 1) {
    if (facts.empty()) throw ValidationError("score_all requires at least one fact");
    std::vector<AtomicFact> out(facts.size());
    const auto errors = parallel_for_index(facts.size(), concurrency,
                                           [&](std::size_t i) { out[i] = score_fact(facts[i], backend, prompts); });
    std::size_t completed = 0;
    for (const auto& e : errors) completed += e ? 0 : 1;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw ScoringAborted(completed, facts.size(), i, e.what());
        }
    }
    return out;
}

}  // namespace fcg
