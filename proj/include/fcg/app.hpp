#pragma once
// Command implementations behind the fcg CLI. Each command takes a resolved
// PipelineConfig and output streams and returns the process exit code:
//   0 success, 1 usage/config/input error, 2 completed with an empty result.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "fcg/backend.hpp"
#include "fcg/core.hpp"
#include "fcg/decompose.hpp"
#include "fcg/filter.hpp"
#include "fcg/format.hpp"
#include "fcg/http_backend.hpp"
#include "fcg/metrics.hpp"
#include "fcg/records_io.hpp"
#include "fcg/simworld.hpp"
#include "fcg/verify.hpp"

namespace fcg {

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

inline constexpr const char* kApiKeyEnv = "FCG_API_KEY";

struct PipelineConfig {
    std::string backend = "sim";  // sim | http
    std::string endpoint;
    std::string model;
    std::string api_key;          // from FCG_API_KEY only
    std::string verifier = "oracle";  // oracle | judge | exact
    std::filesystem::path corpus;
    std::filesystem::path labels;
    std::filesystem::path world;
    std::filesystem::path prompts_dir;
    Mode mode = Mode::Rule;
    std::vector<FactualityLevel> levels = default_level_grid();
    std::size_t concurrency = 1;
    std::filesystem::path cache_dir;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    bool revalidate = false;
    int max_tokens = 512;
    double temperature = 0.0;
    SimWorldParams sim;

    void validate() const {
        if (backend != "sim" && backend != "http") throw ConfigError("backend", "expected sim or http");
        if (backend == "http" && endpoint.empty()) throw ConfigError("endpoint", "required for the http backend");
        if (backend == "http" && model.empty()) throw ConfigError("model", "required for the http backend");
        if (verifier != "oracle" && verifier != "judge" && verifier != "exact") {
            throw ConfigError("verifier", "expected oracle, judge or exact");
        }
        if ((verifier == "judge" || verifier == "exact") && corpus.empty()) {
            throw ConfigError("corpus", "required for the " + verifier + " verifier");
        }
        if (levels.empty()) throw ConfigError("levels", "must list at least one level");
        for (std::size_t i = 1; i < levels.size(); ++i) {
            if (!(levels[i - 1] < levels[i])) throw ConfigError("levels", "must be sorted and distinct");
        }
        if (concurrency < 1) throw ConfigError("concurrency", "must be >= 1");
        if (max_tokens < 1) throw ConfigError("max_tokens", "must be >= 1");
        if (!(temperature >= 0.0)) throw ConfigError("temperature", "must be >= 0");
        try {
            sim.validate();
        } catch (const ValidationError& e) {
            throw ConfigError("sim", e.what());
        }
    }

    GenerationParams generation() const {
        GenerationParams p;
        p.max_tokens = max_tokens;
        p.temperature = temperature;
        p.seed = seed;
        return p;
    }
};

// "0.8,0.9,1.0" -> sorted, de-duplicated levels.
inline std::vector<FactualityLevel> parse_levels(const std::string& text) {
    std::vector<FactualityLevel> levels;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("levels", "not a number: '" + item + "'");
        }
        if (used != item.size()) throw ConfigError("levels", "not a number: '" + item + "'");
        try {
            levels.emplace_back(v);
        } catch (const ValidationError& e) {
            throw ConfigError("levels", e.what());
        }
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.empty()) throw ConfigError("levels", "must list at least one level");
    return levels;
}

namespace detail {

template <class T>
T parse_config_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        T out{};
        if constexpr (std::is_floating_point_v<T>) {
            out = static_cast<T>(std::stod(value, &used));
        } else {
            if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
            out = static_cast<T>(std::stoull(value, &used));
        }
        if (used != value.size()) throw std::invalid_argument("trailing text");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key, "invalid number '" + value + "'");
    }
}

inline bool parse_config_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + value + "'");
}

}  // namespace detail

// Applies one key = value setting. Keys are listed in README (Config file).
inline void apply_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "backend") c.backend = value;
    else if (key == "endpoint") c.endpoint = value;
    else if (key == "model") c.model = value;
    else if (key == "verifier") c.verifier = value;
    else if (key == "corpus") c.corpus = value;
    else if (key == "labels") c.labels = value;
    else if (key == "world") c.world = value;
    else if (key == "prompts_dir") c.prompts_dir = value;
    else if (key == "mode") {
        try {
            c.mode = parse_mode(value);
        } catch (const ValidationError& e) {
            throw ConfigError(key, e.what());
        }
    } else if (key == "levels") c.levels = parse_levels(value);
    else if (key == "concurrency") c.concurrency = parse_config_number<std::size_t>(key, value);
    else if (key == "cache_dir") c.cache_dir = value;
    else if (key == "seed") c.seed = parse_config_number<std::uint64_t>(key, value);
    else if (key == "out") c.out = value;
    else if (key == "revalidate") c.revalidate = parse_config_bool(key, value);
    else if (key == "max_tokens") c.max_tokens = parse_config_number<int>(key, value);
    else if (key == "temperature") c.temperature = parse_config_number<double>(key, value);
    else if (key == "sim.entities") c.sim.n_entities = parse_config_number<std::size_t>(key, value);
    else if (key == "sim.facts_per_entity") c.sim.facts_per_entity = parse_config_number<std::size_t>(key, value);
    else if (key == "sim.false_fraction") c.sim.false_fraction = parse_config_number<double>(key, value);
    else if (key == "sim.beta") c.sim.beta = parse_config_number<double>(key, value);
    else throw ConfigError(key, "unknown key");
}

// Lines of `key = value`; '#' starts a comment; blank lines ignored.
inline void load_config_file(PipelineConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config", path.string() + ":" + std::to_string(number) + ": expected key = value");
        }
        apply_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

// Everything a command needs, built from a config.
struct Pipeline {
    PipelineConfig config;
    PromptSet prompts;
    std::shared_ptr<const SimWorld> world;
    std::shared_ptr<Backend> backend;
    std::shared_ptr<const ReferenceCorpus> corpus;
    std::unique_ptr<Verifier> verifier;

    Decomposer decomposer() const { return Decomposer(config.mode, backend.get(), prompts, config.generation()); }

    BuildOptions build_options() const {
        BuildOptions o;
        o.generation = config.generation();
        o.prompts = prompts;
        o.revalidate = config.revalidate;
        o.concurrency = 1;
        return o;
    }
};

// `world` overrides config.world / generation for the sim backend.
inline Pipeline make_pipeline(const PipelineConfig& config, std::shared_ptr<const SimWorld> world = nullptr) {
    config.validate();
    Pipeline p;
    p.config = config;
    p.prompts = config.prompts_dir.empty() ? PromptSet{} : PromptSet::load(config.prompts_dir);

    std::shared_ptr<Backend> backend;
    if (config.backend == "sim") {
        if (!world) {
            if (!config.world.empty()) {
                if (!std::filesystem::exists(config.world)) throw ConfigError("world", "no such file " + config.world.string());
                world = std::make_shared<SimWorld>(load_world(config.world));
            } else {
                auto params = config.sim;
                params.seed = config.seed;
                world = std::make_shared<SimWorld>(generate_world(params));
            }
        }
        backend = std::make_shared<SimBackend>(world, p.prompts);
    } else {
        HttpBackendConfig http;
        http.endpoint = config.endpoint;
        http.model = config.model;
        http.api_key = config.api_key;
        backend = std::make_shared<HttpBackend>(http);
    }
    if (!config.cache_dir.empty()) backend = std::make_shared<CachedBackend>(backend, DiskCache(config.cache_dir));
    p.world = world;
    p.backend = backend;

    if (!config.corpus.empty()) {
        if (!std::filesystem::exists(config.corpus)) throw ConfigError("corpus", "no such path " + config.corpus.string());
        p.corpus = std::make_shared<ReferenceCorpus>(ReferenceCorpus::load(config.corpus));
        if (p.corpus->empty()) throw ConfigError("corpus", "corpus is empty");
    }
    if (config.verifier == "oracle") {
        LabelTable table;
        if (!config.labels.empty()) {
            if (!std::filesystem::exists(config.labels)) throw ConfigError("labels", "no such file " + config.labels.string());
            table = LabelTable(records_of(read_labels(config.labels)));
        } else if (world) {
            table = LabelTable(world_labels(*world));
        } else {
            throw ConfigError("labels", "the oracle verifier needs a labels file");
        }
        p.verifier = std::make_unique<OracleVerifier>(std::move(table));
    } else if (config.verifier == "exact") {
        p.verifier = std::make_unique<ExactVerifier>(p.corpus);
    } else {
        p.verifier = std::make_unique<JudgeVerifier>(p.corpus, *p.backend, p.prompts);
    }
    return p;
}

// Segments and verifies one response. Failures yield a record marked failed.
inline EvaluationRecord evaluate_text(const Pipeline& p, const std::string& question_id, const std::string& entity_name,
                                      const std::string& method, std::optional<FactualityLevel> level,
                                      const std::string& text, std::ostream& err) {
    try {
        std::vector<AtomicFact> facts;
        if (p.config.mode == Mode::Rule || !detail::trim(text).empty()) {
            ResponseRecord r{question_id, text, {}, Origin::External};
            facts = p.decomposer().segment(r);
        }
        facts = label_facts(std::move(facts), {question_id, entity_name}, *p.verifier);
        return evaluate_response(question_id, method, level, text, facts);
    } catch (const std::exception& e) {
        err << "warning: evaluation failed for " << question_id << ": " << e.what() << '\n';
        EvaluationRecord r;
        r.question_id = question_id;
        r.method = method;
        r.level_requested = level;
        r.word_count = count_words(text);
        r.failed = true;
        return r;
    }
}

inline void print_level_counts(const Dataset& ds, std::ostream& out) {
    out << "level  direct  filtered  skipped\n";
    for (const auto& [level, c] : ds.per_level) {
        out << format_fixed(level.value(), 1) << "  " << std::setw(6) << c.direct << "  " << std::setw(8) << c.filtered
            << "  " << std::setw(7) << c.skipped << '\n';
    }
}

// --- gen ----------------------------------------------------------------------

inline int cmd_gen(const PipelineConfig& config, const std::filesystem::path& entities, std::ostream& out,
                   std::ostream& err) {
    std::vector<Question> questions;
    Pipeline p;
    try {
        if (!std::filesystem::exists(entities)) throw ConfigError("entities", "no such file " + entities.string());
        questions = records_of(read_entities(entities));
        p = make_pipeline(config);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    TripleBuilder builder(*p.backend, *p.verifier, config.mode, p.build_options());
    const auto ds = build_dataset(questions, config.levels, builder, config.concurrency);
    for (const auto& q : ds.questions) {
        if (q.error) err << "warning: skipped " << *q.error << '\n';
    }
    try {
        write_triples(config.out / "triples.jsonl", ds.triples);
        write_text_file(config.out / "report.json", provenance_report(ds).dump(2) + "\n");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    print_level_counts(ds, out);
    out << ds.triples.size() << " triples written to " << (config.out / "triples.jsonl").string() << '\n';
    return ds.triples.empty() ? 2 : 0;
}

// --- eval / score -------------------------------------------------------------

namespace detail {

inline std::map<std::string, std::string> entity_names(const std::filesystem::path& entities) {
    std::map<std::string, std::string> names;
    if (entities.empty()) return names;
    for (const auto& q : read_entities(entities)) names[q.record.id] = q.record.entity_name;
    return names;
}

inline std::vector<EvaluationRecord> evaluate_file(const Pipeline& p, const std::vector<ResponseInput>& responses,
                                                   const std::map<std::string, std::string>& names, std::ostream& err) {
    std::vector<EvaluationRecord> records(responses.size());
    std::ostringstream warnings;
    std::mutex mu;
    parallel_for_index(responses.size(), p.config.concurrency, [&](std::size_t i) {
        const auto& r = responses[i];
        auto it = names.find(r.question_id);
        std::ostringstream local;
        records[i] = evaluate_text(p, r.question_id, it == names.end() ? r.question_id : it->second, r.method, r.level,
                                   r.text, local);
        std::lock_guard lock(mu);
        warnings << local.str();
    });
    err << warnings.str();
    return records;
}

}  // namespace detail

inline int cmd_eval(const PipelineConfig& config, const std::filesystem::path& responses_path,
                    const std::filesystem::path& entities, std::ostream& out, std::ostream& err) {
    std::vector<ResponseInput> responses;
    std::map<std::string, std::string> names;
    Pipeline p;
    try {
        if (!std::filesystem::exists(responses_path)) throw ConfigError("responses", "no such file " + responses_path.string());
        responses = records_of(read_responses(responses_path));
        if (responses.empty()) throw ConfigError("responses", "file contains no responses");
        names = detail::entity_names(entities);
        p = make_pipeline(config);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    const auto records = detail::evaluate_file(p, responses, names, err);
    const auto report = render_report(adherence_table(records, config.levels));
    try {
        write_records(config.out / "records.jsonl", records);
        write_text_file(config.out / "report.txt", report);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    out << report;
    const bool any = std::any_of(records.begin(), records.end(), [](const EvaluationRecord& r) { return !r.failed; });
    return any ? 0 : 2;
}

// Scores one response file at one level and prints per-response results.
inline int cmd_score(const PipelineConfig& config, const std::filesystem::path& responses_path, FactualityLevel level,
                     const std::filesystem::path& entities, std::ostream& out, std::ostream& err) {
    std::vector<ResponseInput> responses;
    std::map<std::string, std::string> names;
    Pipeline p;
    try {
        if (!std::filesystem::exists(responses_path)) throw ConfigError("responses", "no such file " + responses_path.string());
        responses = records_of(read_responses(responses_path));
        if (responses.empty()) throw ConfigError("responses", "file contains no responses");
        names = detail::entity_names(entities);
        p = make_pipeline(config);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    auto records = detail::evaluate_file(p, responses, names, err);
    out << "question_id\tfacts\tsupported\tfactuality\tadheres\n";
    for (const auto& r : records) {
        out << r.question_id << '\t';
        if (r.failed) {
            out << "failed\n";
            continue;
        }
        out << r.fact_count << '\t' << r.supported_count << '\t'
            << (r.factuality ? format_fixed(*r.factuality, 3) : std::string("undefined")) << '\t'
            << adherence(r.factuality, level) << '\n';
    }
    const bool any = std::any_of(records.begin(), records.end(), [](const EvaluationRecord& r) { return !r.failed; });
    if (!any) return 2;
    out << "adherence at c=" << format_number(level.value()) << ": " << format_fixed(adherence_rate(records, level), 1)
        << "%\n";
    return 0;
}

// --- curve --------------------------------------------------------------------

inline int cmd_curve(const PipelineConfig& config, const std::filesystem::path& records_path, const std::string& method,
                     bool length_normalized, std::ostream& out, std::ostream& err) {
    std::vector<EvaluationRecord> records;
    try {
        if (!std::filesystem::exists(records_path)) throw ConfigError("records", "no such file " + records_path.string());
        records = records_of(read_records(records_path));
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    std::vector<std::string> methods;
    for (const auto& r : records) {
        if (r.level_requested && std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
    }
    if (!method.empty() && std::find(methods.begin(), methods.end(), method) == methods.end()) {
        err << "error: no leveled records for method '" << method << "'\n";
        return 1;
    }
    if (methods.empty()) {
        err << "warning: no records carry a requested level\n";
        return 2;
    }
    const std::string csv_method = method.empty() ? methods.front() : method;
    CurveOptions options{length_normalized};
    std::vector<CurveSeries> series;
    std::vector<TradeoffPoint> csv_points;
    for (const auto& m : methods) {
        std::vector<EvaluationRecord> subset;
        for (const auto& r : records)
            if (r.method == m) subset.push_back(r);
        auto curve = tradeoff_curve(subset, config.levels, options);
        if (m == csv_method) {
            for (const auto& w : curve.warnings) err << "warning: " << m << ": " << w << '\n';
            csv_points = curve.points;
        }
        series.push_back({m, std::move(curve.points)});
    }
    try {
        write_text_file(config.out / "curve.csv", curve_csv(csv_points));
        write_text_file(config.out / "curve.svg",
                        curve_svg(series, length_normalized ? "informativeness (facts / 100 words)" : "informativeness (facts)"));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    out << curve_csv(csv_points);
    return csv_points.empty() ? 2 : 0;
}

// --- sim ------------------------------------------------------------------------

inline constexpr const char* kSimBaselineMethod = "NFC";
inline constexpr const char* kSimFilteredMethod = "FCG-data";

struct SimRun {
    std::shared_ptr<const SimWorld> world;
    Dataset dataset;
    std::vector<EvaluationRecord> records;
    Curve curve;
    AdherenceTable table;
};

// world -> triples -> evaluation -> curve, entirely in memory. Records hold the
// unconditioned answers (method NFC, no level) followed by every emitted triple
// evaluated at its own level (method FCG-data).
inline SimRun run_sim(const PipelineConfig& config, std::ostream& err) {
    auto params = config.sim;
    params.seed = config.seed;
    SimRun run;
    run.world = std::make_shared<SimWorld>(generate_world(params));
    auto p = make_pipeline(config, run.world);

    const auto questions = world_questions(*run.world);
    TripleBuilder builder(*p.backend, *p.verifier, config.mode, p.build_options());
    run.dataset = build_dataset(questions, config.levels, builder, config.concurrency);
    for (const auto& q : run.dataset.questions) {
        if (q.error) err << "warning: skipped " << *q.error << '\n';
    }

    for (const auto& q : questions) {
        const auto text = p.backend->complete(render_control_prompt(q, std::nullopt), config.generation());
        run.records.push_back(evaluate_text(p, q.id, q.entity_name, kSimBaselineMethod, std::nullopt, text, err));
    }
    for (const auto& t : run.dataset.triples) {
        run.records.push_back(
            evaluate_text(p, t.question.id, t.question.entity_name, kSimFilteredMethod, t.level, t.response.text, err));
    }
    std::vector<EvaluationRecord> filtered;
    for (const auto& r : run.records)
        if (r.method == kSimFilteredMethod) filtered.push_back(r);
    run.curve = tradeoff_curve(filtered, config.levels);
    run.table = adherence_table(run.records, config.levels);
    return run;
}

inline int cmd_sim(const PipelineConfig& config, std::ostream& out, std::ostream& err) {
    SimRun run;
    try {
        if (config.backend != "sim") throw ConfigError("backend", "sim requires the sim backend");
        config.validate();
        std::filesystem::create_directories(config.out);
        const auto probe = config.out / ".fcg-write-test";
        {
            std::ofstream test(probe);
            if (!test) throw ConfigError("out", "output directory is not writable: " + config.out.string());
        }
        std::filesystem::remove(probe);
        run = run_sim(config, err);
        save_world(config.out / "world.json", *run.world);
        write_entities(config.out / "entities.jsonl", world_questions(*run.world));
        write_labels(config.out / "labels.jsonl", world_labels(*run.world));
        write_triples(config.out / "triples.jsonl", run.dataset.triples);
        write_text_file(config.out / "report.json", provenance_report(run.dataset).dump(2) + "\n");
        write_records(config.out / "records.jsonl", run.records);
        write_text_file(config.out / "curve.csv", curve_csv(run.curve.points));
        write_text_file(config.out / "curve.svg", curve_svg({{kSimFilteredMethod, run.curve.points}}));
        write_text_file(config.out / "report.txt", render_report(run.table));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    print_level_counts(run.dataset, out);
    out << '\n' << render_report(run.table);
    return run.dataset.triples.empty() ? 2 : 0;
}

}  // namespace fcg
