#pragma once
// A synthetic universe for closed-loop runs without an external model. Each
// entity owns a list of single-sentence facts, some true and some false, and
// each fact carries a latent model confidence h. With u ~ U(0,1):
//
//   true fact:   h = u^(1/(1+beta))        (density proportional to h^beta)
//   false fact:  h = 1 - u^(1/(1+beta))    (mirror image)
//
// beta = 0 makes both uniform, so confidence says nothing about truth. As beta
// grows the two distributions separate; since u >= 2^-54, beta >= 54 already
// puts every true fact above 0.5 and every false fact below it.
//
// All randomness comes from SplitMix64 with hand-written transforms, so worlds
// are identical across standard libraries and platforms.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcg/backend.hpp"
#include "fcg/core.hpp"
#include "fcg/decompose.hpp"
#include "fcg/prompts.hpp"
#include "fcg/records_io.hpp"
#include "fcg/verify.hpp"

namespace fcg {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

private:
    std::uint64_t state_;
};

struct SimWorldParams {
    std::uint64_t seed = 0;
    std::size_t n_entities = 50;
    std::size_t facts_per_entity = 8;
    double false_fraction = 0.3;
    double beta = 100.0;

    void validate() const {
        if (n_entities < 1) throw ValidationError("n_entities must be >= 1");
        if (facts_per_entity < 1) throw ValidationError("facts_per_entity must be >= 1");
        if (!(false_fraction >= 0.0 && false_fraction <= 1.0)) throw ValidationError("false_fraction must lie in [0, 1]");
        if (!(beta >= 0.0) || std::isinf(beta)) throw ValidationError("beta must be a finite value >= 0");
    }
};

struct SimFact {
    std::string text;
    bool supported = true;
    double confidence = 0.5;
};

struct SimEntity {
    std::string id;
    std::string name;
    // In response order.
    std::vector<SimFact> facts;

    std::vector<std::string> true_facts() const { return select(true); }
    std::vector<std::string> false_facts() const { return select(false); }

private:
    std::vector<std::string> select(bool supported) const {
        std::vector<std::string> out;
        for (const auto& f : facts)
            if (f.supported == supported) out.push_back(f.text);
        return out;
    }
};

class SimWorld {
public:
    SimWorld() = default;

    SimWorld(SimWorldParams params, std::vector<SimEntity> entities) : params_(params), entities_(std::move(entities)) {
        for (std::size_t e = 0; e < entities_.size(); ++e) {
            const auto& ent = entities_[e];
            if (!by_name_.emplace(ent.name, e).second) throw ValidationError("duplicate entity name " + ent.name);
            for (const auto& f : ent.facts) {
                if (f.text.empty()) throw ValidationError("empty fact for entity " + ent.id);
                if (!(f.confidence >= 0.0 && f.confidence <= 1.0)) throw ValidationError("fact confidence out of range");
                if (!by_fact_.emplace(f.text, &f).second) throw ValidationError("duplicate fact: " + f.text);
            }
        }
    }

    // Copies would leave the lookup tables pointing into the source.
    SimWorld(const SimWorld&) = delete;
    SimWorld& operator=(const SimWorld&) = delete;
    SimWorld(SimWorld&&) = default;
    SimWorld& operator=(SimWorld&&) = default;

    const SimWorldParams& params() const { return params_; }
    const std::vector<SimEntity>& entities() const { return entities_; }

    const SimEntity* find_entity(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : &entities_[it->second];
    }

    const SimFact* find_fact(const std::string& text) const {
        auto it = by_fact_.find(text);
        return it == by_fact_.end() ? nullptr : it->second;
    }

private:
    SimWorldParams params_;
    std::vector<SimEntity> entities_;
    std::map<std::string, std::size_t> by_name_;
    std::map<std::string, const SimFact*> by_fact_;
};

namespace detail {

inline const std::vector<std::string>& sim_syllables() {
    static const std::vector<std::string> v{"ka", "ren", "mo", "li", "sa", "dor", "vi", "ta", "nel", "ro",
                                            "bi", "an", "cor", "el", "fi", "ga", "hu", "jo", "ma", "ny",
                                            "pe", "qui", "ra", "su", "tor", "ul", "ve", "wen", "xa", "zo"};
    return v;
}

inline const std::vector<std::string>& sim_cities() {
    static const std::vector<std::string> v{"Arvona", "Belmira", "Calder", "Dunmore", "Eskel", "Farrow", "Galen",
                                            "Halvik", "Istra", "Jorvik", "Kelso", "Lunden", "Marrow", "Norwell",
                                            "Ostrava", "Pellin", "Quarry", "Rostam", "Sorrel", "Tarvin"};
    return v;
}

inline const std::vector<std::string>& sim_subjects() {
    static const std::vector<std::string> v{"chemistry", "history", "law", "medicine", "physics", "music",
                                            "economics", "architecture", "philosophy", "botany"};
    return v;
}

inline const std::vector<std::string>& sim_occupations() {
    static const std::vector<std::string> v{"journalist", "engineer", "painter", "diplomat", "surgeon",
                                            "teacher", "composer", "architect", "novelist", "actor"};
    return v;
}

inline const std::vector<std::string>& sim_awards() {
    static const std::vector<std::string> v{"Golden Quill Award", "Harwood Prize", "Silver Lantern Medal",
                                            "Meridian Fellowship", "Ashcombe Honor", "Northstar Award"};
    return v;
}

template <class T>
const T& pick(SplitMix64& rng, const std::vector<T>& v) {
    return v[rng.below(v.size())];
}

inline std::string capitalized(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

// Every draw is its own statement: operands of + are unsequenced, and the
// world must not depend on the compiler's evaluation order.
inline std::string sim_name(SplitMix64& rng) {
    const auto& syl = sim_syllables();
    std::string first = pick(rng, syl);
    first += pick(rng, syl);
    std::string last = pick(rng, syl);
    last += pick(rng, syl);
    last += pick(rng, syl);
    return capitalized(first) + " " + capitalized(last);
}

inline std::string sim_sentence(SplitMix64& rng, const std::string& name) {
    const auto kind = rng.below(8);
    const std::string year = std::to_string(1900 + rng.below(120));
    const std::string city = pick(rng, sim_cities());
    const std::string subject = pick(rng, sim_subjects());
    switch (kind) {
        case 0: return name + " was born in " + city + " in " + year + ".";
        case 1: return name + " studied " + subject + " at the University of " + city + ".";
        case 2: return name + " worked as a " + pick(rng, sim_occupations()) + " in " + city + ".";
        case 3: return name + " received the " + pick(rng, sim_awards()) + " in " + year + ".";
        case 4: return name + " moved to " + city + " in " + year + ".";
        case 5: return name + " married " + sim_name(rng) + " in " + year + ".";
        case 6: return name + " founded a " + subject + " society in " + city + ".";
        default: return name + " published a memoir about " + subject + " in " + year + ".";
    }
}

}  // namespace detail

// Deterministic in its parameters.
inline SimWorld generate_world(const SimWorldParams& params) {
    params.validate();
    SplitMix64 rng(params.seed);
    std::set<std::string> names, sentences;
    std::vector<SimEntity> entities;
    const int width = std::max<int>(3, static_cast<int>(std::to_string(params.n_entities - 1).size()));
    const double exponent = 1.0 / (1.0 + params.beta);

    for (std::size_t e = 0; e < params.n_entities; ++e) {
        SimEntity ent;
        std::string idx = std::to_string(e);
        ent.id = "e" + std::string(static_cast<std::size_t>(width) - std::min(idx.size(), static_cast<std::size_t>(width)), '0') + idx;
        do {
            ent.name = detail::sim_name(rng);
        } while (!names.insert(ent.name).second);

        for (std::size_t k = 0; k < params.facts_per_entity; ++k) {
            std::string text;
            std::size_t attempts = 0;
            do {
                if (++attempts > 10000) throw Error("cannot generate enough distinct facts for " + ent.name);
                text = detail::sim_sentence(rng, ent.name);
            } while (!sentences.insert(text).second);
            SimFact f;
            f.text = std::move(text);
            f.supported = !(rng.uniform() < params.false_fraction);
            const double s = std::pow(rng.uniform(), exponent);
            f.confidence = f.supported ? s : 1.0 - s;
            ent.facts.push_back(std::move(f));
        }
        for (std::size_t i = ent.facts.size(); i > 1; --i) std::swap(ent.facts[i - 1], ent.facts[rng.below(i)]);
        entities.push_back(std::move(ent));
    }
    return SimWorld(params, std::move(entities));
}

inline std::string entity_response(const SimEntity& entity) {
    std::string out;
    for (const auto& f : entity.facts) {
        if (!out.empty()) out += ' ';
        out += f.text;
    }
    return out;
}

// Plays the base model answering "Tell me a bio of <name>." Any control
// directive after the task prompt is ignored.
inline std::string sim_complete(const SimWorld& world, const std::string& prompt) {
    static const std::string prefix = "Tell me a bio of ";
    if (prompt.rfind(prefix, 0) != 0) throw Error("simulated model only answers bio prompts");
    const auto end = prompt.find('.', prefix.size());
    const auto name = prompt.substr(prefix.size(), end == std::string::npos ? std::string::npos : end - prefix.size());
    const auto* entity = world.find_entity(name);
    if (!entity) throw Error("unknown entity '" + name + "'");
    return entity_response(*entity);
}

// (h, 1 - h) for the fact's latent confidence h.
inline TokenProbPair sim_probe(const SimWorld& world, const std::string& fact_text) {
    const auto* fact = world.find_fact(fact_text);
    if (!fact) throw Error("fact not in simulated world: " + fact_text);
    return {fact->confidence, 1.0 - fact->confidence};
}

inline std::vector<Question> world_questions(const SimWorld& world) {
    std::vector<Question> out;
    for (const auto& e : world.entities()) out.push_back(make_question(e.id, e.name));
    return out;
}

// Ground truth as an oracle label table keyed by fact text (and by position in
// the initial response).
inline std::vector<LabelEntry> world_labels(const SimWorld& world) {
    std::vector<LabelEntry> out;
    for (const auto& e : world.entities()) {
        for (std::size_t i = 0; i < e.facts.size(); ++i) {
            out.push_back({e.id, i, e.facts[i].supported ? Label::Supported : Label::Unsupported, e.facts[i].text});
        }
    }
    return out;
}

// Serves every prompt the pipeline issues: bios, segmentation, merging, the
// True/False probe and judge prompts, all from world state. Individual probes
// can be overridden for tests.
class SimBackend : public Backend {
public:
    explicit SimBackend(std::shared_ptr<const SimWorld> world, PromptSet prompts = {})
        : world_(std::move(world)), prompts_(std::move(prompts)) {}

    std::string id() const override { return "sim:" + std::to_string(world_->params().seed); }

    void set_probe(const std::string& fact_text, TokenProbPair probs) { overrides_[fact_text] = probs; }

    std::string complete(const std::string& prompt, const GenerationParams&) override {
        if (prompt.empty()) throw ValidationError("prompt must be non-empty");
        if (auto text = after_template(prompt, prompts_.segment, "{text}")) {
            std::string reply;
            for (const auto& s : split_sentences(*text)) reply += "- " + s + "\n";
            return reply;
        }
        if (auto rest = after_template(prompt, prompts_.merge, "{facts}")) {
            const auto end = rest->find("\n\n");
            std::vector<AtomicFact> facts;
            for (auto& item : parse_fact_list(rest->substr(0, end))) facts.push_back({std::move(item), facts.size(), std::nullopt});
            return merge_rule_text(facts);
        }
        if (auto rest = after_template(prompt, prompts_.judge, "{fact}")) {
            const auto end = rest->rfind(" True or False?");
            const auto* fact = world_->find_fact(rest->substr(0, end));
            return fact && fact->supported ? "True" : "False";
        }
        return sim_complete(*world_, prompt);
    }

    TokenProbPair first_token_probs(const std::string& prompt, const std::string& token_a,
                                    const std::string& token_b) override {
        if (token_a == token_b) throw ValidationError("candidate tokens must differ");
        const auto marker = prompts_.probe.find("{fact}");
        const std::string suffix = prompts_.probe.substr(marker + 6);
        if (prompt.size() < suffix.size() || prompt.compare(prompt.size() - suffix.size(), suffix.size(), suffix) != 0) {
            throw CapabilityUnsupported("simulated model only scores True/False probes");
        }
        const std::string fact = prompt.substr(marker, prompt.size() - suffix.size() - marker);
        TokenProbPair pair;
        if (auto it = overrides_.find(fact); it != overrides_.end()) {
            pair = it->second;
        } else {
            pair = sim_probe(*world_, fact);
        }
        if (token_a == "True" && token_b == "False") return pair;
        if (token_a == "False" && token_b == "True") return {pair.p_false, pair.p_true};
        return {0.0, 0.0};
    }

private:
    // If prompt was produced from tmpl, returns the text starting where
    // `placeholder` was substituted.
    static std::optional<std::string> after_template(const std::string& prompt, const std::string& tmpl,
                                                     const std::string& placeholder) {
        const auto first = tmpl.find('{');
        const auto lead = tmpl.substr(0, first);
        if (lead.empty() || prompt.rfind(lead, 0) != 0) return std::nullopt;
        const auto at = tmpl.find(placeholder);
        if (at == std::string::npos) return std::nullopt;
        // Fixed text between the first placeholder and ours is skipped by
        // locating the literal just before `placeholder`.
        const auto before_start = tmpl.rfind('}', at);
        const std::string before = tmpl.substr(before_start == std::string::npos ? 0 : before_start + 1,
                                               at - (before_start == std::string::npos ? 0 : before_start + 1));
        const auto pos = prompt.find(before, before_start == std::string::npos ? 0 : lead.size());
        if (pos == std::string::npos) return std::nullopt;
        return prompt.substr(pos + before.size());
    }

    std::shared_ptr<const SimWorld> world_;
    PromptSet prompts_;
    std::map<std::string, TokenProbPair> overrides_;
};

// --- world.json ---------------------------------------------------------------

inline nlohmann::ordered_json world_to_json(const SimWorld& world) {
    const auto& p = world.params();
    nlohmann::ordered_json entities = nlohmann::ordered_json::array();
    for (const auto& e : world.entities()) {
        nlohmann::ordered_json facts = nlohmann::ordered_json::array();
        for (const auto& f : e.facts) facts.push_back({{"text", f.text}, {"supported", f.supported}, {"confidence", f.confidence}});
        entities.push_back({{"id", e.id}, {"name", e.name}, {"facts", facts}});
    }
    return {{"seed", p.seed},
            {"n_entities", p.n_entities},
            {"facts_per_entity", p.facts_per_entity},
            {"false_fraction", p.false_fraction},
            {"beta", p.beta},
            {"entities", entities}};
}

inline SimWorld world_from_json(const nlohmann::json& j) {
    try {
        SimWorldParams p;
        p.seed = j.at("seed").get<std::uint64_t>();
        p.n_entities = j.at("n_entities").get<std::size_t>();
        p.facts_per_entity = j.at("facts_per_entity").get<std::size_t>();
        p.false_fraction = j.at("false_fraction").get<double>();
        p.beta = j.at("beta").get<double>();
        std::vector<SimEntity> entities;
        for (const auto& je : j.at("entities")) {
            SimEntity e;
            e.id = je.at("id").get<std::string>();
            e.name = je.at("name").get<std::string>();
            for (const auto& jf : je.at("facts")) {
                e.facts.push_back({jf.at("text").get<std::string>(), jf.at("supported").get<bool>(),
                                   jf.at("confidence").get<double>()});
            }
            entities.push_back(std::move(e));
        }
        return SimWorld(p, std::move(entities));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed world: ") + e.what());
    }
}

inline void save_world(const std::filesystem::path& path, const SimWorld& world) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << world_to_json(world).dump(1) << '\n';
}

inline SimWorld load_world(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return world_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace fcg
