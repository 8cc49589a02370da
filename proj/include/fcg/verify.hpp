#pragma once
// Fact verification: a lexical reference corpus, three verifiers (oracle label
// table, LLM judge over retrieved passages, exact substring match) and the
// factuality score f = supported / total.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fcg/backend.hpp"
#include "fcg/core.hpp"
#include "fcg/parallel.hpp"
#include "fcg/prompts.hpp"
#include "fcg/records_io.hpp"

namespace fcg {

// Lowercased runs of letters/digits. Bytes >= 0x80 count as letters so UTF-8
// words stay whole.
inline std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch) || ch >= 0x80) {
            cur += static_cast<char>(std::tolower(ch));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;
};

struct Passage {
    const Document* document = nullptr;
    std::size_t score = 0;
};

class ReferenceCorpus {
public:
    ReferenceCorpus() = default;

    explicit ReferenceCorpus(std::vector<Document> documents) : documents_(std::move(documents)) {
        std::sort(documents_.begin(), documents_.end(),
                  [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
        for (std::size_t i = 0; i < documents_.size(); ++i) {
            if (i > 0 && documents_[i].doc_id == documents_[i - 1].doc_id) {
                throw ValidationError("duplicate doc_id '" + documents_[i].doc_id + "'");
            }
            std::set<std::string> seen;
            for (auto& tok : word_tokens(documents_[i].title + " " + documents_[i].text)) {
                if (seen.insert(tok).second) index_[tok].push_back(i);
            }
        }
    }

    // A directory of *.txt files (doc_id and title = file stem) or a JSONL file
    // of {doc_id, title, text}.
    static ReferenceCorpus load(const std::filesystem::path& path) {
        namespace fs = std::filesystem;
        std::vector<Document> docs;
        if (fs::is_directory(path)) {
            for (const auto& item : fs::directory_iterator(path)) {
                if (!item.is_regular_file() || item.path().extension() != ".txt") continue;
                std::ifstream in(item.path(), std::ios::binary);
                std::ostringstream buf;
                buf << in.rdbuf();
                const auto stem = item.path().stem().string();
                docs.push_back({stem, stem, buf.str()});
            }
        } else {
            auto rows = detail::read_jsonl<Document>(path, [](const detail::FieldReader& r, std::size_t) {
                Document d{r.string("doc_id"), r.has("title") ? r.string("title") : std::string(), r.string("text")};
                if (d.doc_id.empty()) r.fail("doc_id", "must be non-empty");
                return d;
            });
            for (auto& row : rows) docs.push_back(std::move(row.record));
        }
        return ReferenceCorpus(std::move(docs));
    }

    const std::vector<Document>& documents() const { return documents_; }
    bool empty() const { return documents_.empty(); }

    // Documents ranked by the number of distinct query tokens they contain,
    // ties in doc_id order.
    std::vector<Passage> retrieve(std::string_view query, std::size_t k) const {
        if (k < 1) throw ValidationError("retrieve requires k >= 1");
        if (documents_.empty()) throw Error("cannot retrieve from an empty corpus");
        std::vector<std::size_t> scores(documents_.size(), 0);
        std::set<std::string> distinct;
        for (auto& tok : word_tokens(query)) distinct.insert(std::move(tok));
        for (const auto& tok : distinct) {
            if (auto it = index_.find(tok); it != index_.end()) {
                for (auto d : it->second) ++scores[d];
            }
        }
        std::vector<std::size_t> order(documents_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        order.resize(std::min(k, order.size()));
        std::vector<Passage> out;
        for (auto i : order) out.push_back({&documents_[i], scores[i]});
        return out;
    }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::vector<std::size_t>> index_;
};

struct FactualityScore {
    std::optional<double> value;
    std::size_t supported = 0;
    std::size_t total = 0;

    bool defined() const { return value.has_value(); }
};

inline FactualityScore factuality_of_counts(std::size_t supported, std::size_t total) {
    if (supported > total) throw ValidationError("supported count exceeds total");
    if (total == 0) return {std::nullopt, 0, 0};
    return {static_cast<double>(supported) / static_cast<double>(total), supported, total};
}

inline FactualityScore factuality(const std::vector<AtomicFact>& facts) {
    std::size_t supported = 0;
    for (const auto& f : facts) {
        if (f.label == Label::Unlabeled) {
            throw ValidationError("fact at position " + std::to_string(f.source_position) + " is unlabeled");
        }
        supported += f.label == Label::Supported ? 1 : 0;
    }
    return factuality_of_counts(supported, facts.size());
}

// What a verifier knows about the response a fact came from.
struct FactContext {
    std::string question_id;
    std::string entity_name;
};

class MissingLabel : public Error {
public:
    using Error::Error;
};

class VerdictUnparseable : public Error {
public:
    explicit VerdictUnparseable(std::string reply)
        : Error("cannot parse True/False verdict from: " + reply.substr(0, 200)), reply_(std::move(reply)) {}
    const std::string& reply() const { return reply_; }

private:
    std::string reply_;
};

class Verifier {
public:
    virtual ~Verifier() = default;
    virtual Label verify(const AtomicFact& fact, const FactContext& context) = 0;
};

// Labels keyed by (question_id, fact text) when the entry names its fact,
// otherwise by (question_id, fact_index). Text keys win.
class LabelTable {
public:
    LabelTable() = default;

    explicit LabelTable(const std::vector<LabelEntry>& entries) {
        for (const auto& e : entries) add(e);
    }

    void add(const LabelEntry& e) {
        if (e.fact) by_text_[{e.question_id, *e.fact}] = e.label;
        by_index_[{e.question_id, e.fact_index}] = e.label;
    }

    std::optional<Label> find(const std::string& question_id, const AtomicFact& fact) const {
        if (auto it = by_text_.find({question_id, fact.text}); it != by_text_.end()) return it->second;
        if (auto it = by_index_.find({question_id, fact.source_position}); it != by_index_.end()) return it->second;
        return std::nullopt;
    }

    bool has_text_keys() const { return !by_text_.empty(); }

private:
    std::map<std::pair<std::string, std::string>, Label> by_text_;
    std::map<std::pair<std::string, std::size_t>, Label> by_index_;
};

class OracleVerifier : public Verifier {
public:
    explicit OracleVerifier(LabelTable table) : table_(std::move(table)) {}

    Label verify(const AtomicFact& fact, const FactContext& context) override {
        if (auto label = table_.find(context.question_id, fact)) return *label;
        throw MissingLabel("no oracle label for (" + context.question_id + ", " +
                           std::to_string(fact.source_position) + ")");
    }

private:
    LabelTable table_;
};

class ExactVerifier : public Verifier {
public:
    explicit ExactVerifier(std::shared_ptr<const ReferenceCorpus> corpus) : corpus_(std::move(corpus)) {}

    Label verify(const AtomicFact& fact, const FactContext&) override {
        for (const auto& d : corpus_->documents()) {
            if (d.text.find(fact.text) != std::string::npos) return Label::Supported;
        }
        return Label::Unsupported;
    }

private:
    std::shared_ptr<const ReferenceCorpus> corpus_;
};

// The first True/False word in the reply decides.
inline Label parse_verdict(const std::string& reply) {
    for (const auto& tok : word_tokens(reply)) {
        if (tok == "true") return Label::Supported;
        if (tok == "false") return Label::Unsupported;
    }
    throw VerdictUnparseable(reply);
}

class JudgeVerifier : public Verifier {
public:
    JudgeVerifier(std::shared_ptr<const ReferenceCorpus> corpus, Backend& backend, PromptSet prompts = {},
                  std::size_t passages = 3)
        : corpus_(std::move(corpus)), backend_(backend), prompts_(std::move(prompts)), passages_(passages) {}

    std::string prompt_for(const AtomicFact& fact, const FactContext& context) const {
        std::string context_text;
        for (const auto& p : corpus_->retrieve(context.entity_name + " " + fact.text, passages_)) {
            if (!context_text.empty()) context_text += "\n\n";
            context_text += "Title: " + p.document->title + "\nText: " + p.document->text;
        }
        return fill_template(prompts_.judge,
                             {{"entity", context.entity_name}, {"passages", context_text}, {"fact", fact.text}});
    }

    Label verify(const AtomicFact& fact, const FactContext& context) override {
        GenerationParams params;
        params.max_tokens = 8;
        return parse_verdict(backend_.complete(prompt_for(fact, context), params));
    }

private:
    std::shared_ptr<const ReferenceCorpus> corpus_;
    Backend& backend_;
    PromptSet prompts_;
    std::size_t passages_;
};

// Labels every fact in place order; the first failure propagates.
inline std::vector<AtomicFact> label_facts(std::vector<AtomicFact> facts, const FactContext& context,
                                           Verifier& verifier, std::size_t concurrency = 1) {
    const auto errors = parallel_for_index(facts.size(), concurrency,
                                           [&](std::size_t i) { facts[i].label = verifier.verify(facts[i], context); });
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return facts;
}

}  // namespace fcg
