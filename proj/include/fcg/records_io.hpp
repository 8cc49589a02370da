#pragma once
// JSONL readers and writers for the flat-file schemas:
//   entities.jsonl   {id, entity}
//   responses.jsonl  {question_id, method?, level?, text}
//   labels.jsonl     {question_id, fact_index, label, fact?}
//   triples.jsonl    {question_id, level, prompt, completion, provenance, j?, f_achieved}
//   records.jsonl    {question_id, method, level, fact_count, supported_count, factuality, word_count, failed}
// One record per line, UTF-8, LF endings. Writers emit a canonical key order.

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcg/core.hpp"

namespace fcg {

using json = nlohmann::ordered_json;

class ParseError : public Error {
public:
    ParseError(std::filesystem::path file, std::size_t line, std::string field, const std::string& what)
        : Error(file.string() + ":" + std::to_string(line) + ": field '" + field + "': " + what),
          file_(std::move(file)), line_(line), field_(std::move(field)) {}

    const std::filesystem::path& file() const { return file_; }
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::filesystem::path file_;
    std::size_t line_;
    std::string field_;
};

enum class SchemaKind { Entities, Responses, Labels, Triples, Records };

// A parsed record with the 1-based line it came from.
template <class T>
struct Numbered {
    std::size_t line = 0;
    T record;
};

struct ResponseInput {
    std::string question_id;
    std::string method = "default";
    std::optional<FactualityLevel> level;
    std::string text;
};

struct LabelEntry {
    std::string question_id;
    std::size_t fact_index = 0;
    Label label = Label::Unlabeled;
    std::optional<std::string> fact;
};

// The serialized shape of a training triple.
struct TripleRow {
    std::string question_id;
    FactualityLevel level;
    std::string prompt;
    std::string completion;
    Provenance provenance;
    double f_achieved = 0.0;
};

namespace detail {

// Field access that turns json type errors into messages naming the field.
class FieldReader {
public:
    FieldReader(const json& obj, const std::filesystem::path& file, std::size_t line)
        : obj_(obj), file_(file), line_(line) {}

    bool has(const char* key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

    std::string string(const char* key) const {
        const auto& v = require(key);
        if (!v.is_string()) fail(key, "expected string");
        return v.get<std::string>();
    }

    double number(const char* key) const {
        const auto& v = require(key);
        if (!v.is_number()) fail(key, "expected number");
        return v.get<double>();
    }

    std::size_t index(const char* key) const {
        const auto& v = require(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected non-negative integer");
        return v.get<std::size_t>();
    }

    bool boolean(const char* key) const {
        const auto& v = require(key);
        if (!v.is_boolean()) fail(key, "expected boolean");
        return v.get<bool>();
    }

    FactualityLevel level(const char* key) const {
        try {
            return FactualityLevel(number(key));
        } catch (const ValidationError& e) {
            fail(key, e.what());
        }
    }

    template <class F>
    auto validated(const char* key, F&& make) const {
        try {
            return make();
        } catch (const ValidationError& e) {
            fail(key, e.what());
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ParseError(file_, line_, key, what);
    }

private:
    const json& require(const char* key) const {
        if (!obj_.contains(key)) fail(key, "missing");
        return obj_.at(key);
    }

    const json& obj_;
    const std::filesystem::path& file_;
    std::size_t line_;
};

inline bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

template <class T, class Decode>
std::vector<Numbered<T>> read_jsonl(const std::filesystem::path& path, Decode&& decode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<Numbered<T>> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (blank(line)) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path, number, "<line>", std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(path, number, "<line>", "expected a JSON object");
        FieldReader reader(obj, path, number);
        out.push_back({number, decode(reader, number)});
    }
    return out;
}

inline void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& line : lines) out << line << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

template <class T, class Encode>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows, Encode&& encode) {
    std::vector<std::string> lines;
    lines.reserve(rows.size());
    for (const auto& row : rows) lines.push_back(encode(row).dump());
    write_lines(path, lines);
}

}  // namespace detail

// --- entities ---------------------------------------------------------------

inline std::vector<Numbered<Question>> read_entities(const std::filesystem::path& path) {
    return detail::read_jsonl<Question>(path, [](const detail::FieldReader& r, std::size_t line) {
        std::string entity = r.string("entity");
        std::string id = r.has("id") ? r.string("id") : "q" + std::to_string(line);
        return r.validated("entity", [&] { return make_question(std::move(id), std::move(entity)); });
    });
}

inline json to_json(const Question& q) { return json{{"id", q.id}, {"entity", q.entity_name}}; }

inline void write_entities(const std::filesystem::path& path, const std::vector<Question>& questions) {
    detail::write_jsonl(path, questions, [](const Question& q) { return to_json(q); });
}

// --- responses --------------------------------------------------------------

inline std::vector<Numbered<ResponseInput>> read_responses(const std::filesystem::path& path) {
    return detail::read_jsonl<ResponseInput>(path, [](const detail::FieldReader& r, std::size_t) {
        ResponseInput in;
        in.question_id = r.string("question_id");
        if (in.question_id.empty()) r.fail("question_id", "must be non-empty");
        if (r.has("method")) in.method = r.string("method");
        if (r.has("level")) in.level = r.level("level");
        in.text = r.string("text");
        return in;
    });
}

inline json to_json(const ResponseInput& in) {
    json j{{"question_id", in.question_id}, {"method", in.method}};
    if (in.level) j["level"] = in.level->value();
    j["text"] = in.text;
    return j;
}

inline void write_responses(const std::filesystem::path& path, const std::vector<ResponseInput>& rows) {
    detail::write_jsonl(path, rows, [](const ResponseInput& in) { return to_json(in); });
}

// --- labels -----------------------------------------------------------------

inline std::vector<Numbered<LabelEntry>> read_labels(const std::filesystem::path& path) {
    return detail::read_jsonl<LabelEntry>(path, [](const detail::FieldReader& r, std::size_t) {
        LabelEntry e;
        e.question_id = r.string("question_id");
        e.fact_index = r.index("fact_index");
        e.label = r.validated("label", [&] { return parse_label(r.string("label")); });
        if (e.label == Label::Unlabeled) r.fail("label", "must be Supported or Unsupported");
        if (r.has("fact")) e.fact = r.string("fact");
        return e;
    });
}

inline json to_json(const LabelEntry& e) {
    json j{{"question_id", e.question_id}, {"fact_index", e.fact_index}, {"label", std::string(to_string(e.label))}};
    if (e.fact) j["fact"] = *e.fact;
    return j;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<LabelEntry>& rows) {
    detail::write_jsonl(path, rows, [](const LabelEntry& e) { return to_json(e); });
}

// --- triples ----------------------------------------------------------------

inline TripleRow to_row(const TrainingTriple& t) {
    return {t.question.id, t.level, render_control_prompt(t.question, t.level), t.response.text, t.provenance,
            t.achieved_factuality};
}

inline json to_json(const TripleRow& t) {
    json j{{"question_id", t.question_id},
           {"level", t.level.value()},
           {"prompt", t.prompt},
           {"completion", t.completion},
           {"provenance", t.provenance.is_direct() ? "DirectPass" : "Filtered"}};
    if (!t.provenance.is_direct()) j["j"] = t.provenance.removed;
    j["f_achieved"] = t.f_achieved;
    return j;
}

inline std::vector<Numbered<TripleRow>> read_triples(const std::filesystem::path& path) {
    return detail::read_jsonl<TripleRow>(path, [](const detail::FieldReader& r, std::size_t) {
        TripleRow t;
        t.question_id = r.string("question_id");
        t.level = r.level("level");
        t.prompt = r.string("prompt");
        t.completion = r.string("completion");
        const std::string prov = r.string("provenance");
        if (prov == "DirectPass") {
            if (r.has("j")) r.fail("j", "DirectPass triples carry no removal index");
            t.provenance = Provenance::direct();
        } else if (prov == "Filtered") {
            const std::size_t j = r.index("j");
            if (j < 1) r.fail("j", "removal index must be >= 1");
            t.provenance = Provenance::filtered_at(j);
        } else {
            r.fail("provenance", "expected DirectPass or Filtered");
        }
        t.f_achieved = r.number("f_achieved");
        if (!(t.f_achieved >= 0.0 && t.f_achieved <= 1.0)) r.fail("f_achieved", "must lie in [0, 1]");
        if (t.prompt.empty()) r.fail("prompt", "must be non-empty");
        if (t.completion.empty()) r.fail("completion", "must be non-empty");
        return t;
    });
}

inline void write_triples(const std::filesystem::path& path, const std::vector<TripleRow>& rows) {
    detail::write_jsonl(path, rows, [](const TripleRow& t) { return to_json(t); });
}

inline void write_triples(const std::filesystem::path& path, const std::vector<TrainingTriple>& triples) {
    std::vector<TripleRow> rows;
    rows.reserve(triples.size());
    for (const auto& t : triples) rows.push_back(to_row(t));
    write_triples(path, rows);
}

// --- evaluation records -----------------------------------------------------

inline json to_json(const EvaluationRecord& e) {
    json j{{"question_id", e.question_id}, {"method", e.method}};
    j["level"] = e.level_requested ? json(e.level_requested->value()) : json(nullptr);
    j["fact_count"] = e.fact_count;
    j["supported_count"] = e.supported_count;
    j["factuality"] = e.factuality ? json(*e.factuality) : json(nullptr);
    j["word_count"] = e.word_count;
    j["failed"] = e.failed;
    return j;
}

inline std::vector<Numbered<EvaluationRecord>> read_records(const std::filesystem::path& path) {
    return detail::read_jsonl<EvaluationRecord>(path, [](const detail::FieldReader& r, std::size_t) {
        EvaluationRecord e;
        e.question_id = r.string("question_id");
        if (r.has("method")) e.method = r.string("method");
        if (r.has("level")) e.level_requested = r.level("level");
        e.fact_count = r.index("fact_count");
        e.supported_count = r.index("supported_count");
        if (r.has("factuality")) e.factuality = r.number("factuality");
        e.word_count = r.index("word_count");
        if (r.has("failed")) e.failed = r.boolean("failed");
        r.validated("supported_count", [&] {
            e.validate();
            return 0;
        });
        return e;
    });
}

inline void write_records(const std::filesystem::path& path, const std::vector<EvaluationRecord>& rows) {
    detail::write_jsonl(path, rows, [](const EvaluationRecord& e) { return to_json(e); });
}

template <SchemaKind Kind>
auto parse_records(const std::filesystem::path& path) {
    if constexpr (Kind == SchemaKind::Entities) return read_entities(path);
    else if constexpr (Kind == SchemaKind::Responses) return read_responses(path);
    else if constexpr (Kind == SchemaKind::Labels) return read_labels(path);
    else if constexpr (Kind == SchemaKind::Triples) return read_triples(path);
    else return read_records(path);
}

// Drops line numbers.
template <class T>
std::vector<T> records_of(std::vector<Numbered<T>> numbered) {
    std::vector<T> out;
    out.reserve(numbered.size());
    for (auto& n : numbered) out.push_back(std::move(n.record));
    return out;
}

}  // namespace fcg
