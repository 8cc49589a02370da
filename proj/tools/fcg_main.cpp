// fcg: build factuality-controlled training data and evaluate responses.
//
// Settings resolve as defaults < --config file < command-line flags. The API
// key for the http backend is read from FCG_API_KEY only.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fcg/app.hpp"

namespace {

// Flags shared by every subcommand, each mapped to its config key.
struct SharedFlags {
    std::optional<std::string> config;
    std::map<std::string, std::optional<std::string>> values;
    bool revalidate = false;

    void attach(CLI::App& cmd) {
        cmd.add_option("--config", config, "Config file of `key = value` lines")->check(CLI::ExistingFile);
        add(cmd, "--seed", "seed", "Seed for every random choice (default 0)");
        add(cmd, "--out", "out", "Output directory (default out)");
        add(cmd, "--mode", "mode", "Segmentation/merge mode: rule or llm (default rule)");
        add(cmd, "--levels", "levels", "Comma-separated factuality levels (default 0.1,0.2,...,1.0)");
        add(cmd, "--concurrency", "concurrency", "Questions processed in parallel (default 1)");
        add(cmd, "--cache-dir", "cache_dir", "Directory for the backend response cache (default: no cache)");
        add(cmd, "--backend", "backend", "Model backend: sim or http (default sim)");
        add(cmd, "--endpoint", "endpoint", "Chat-completion URL for the http backend");
        add(cmd, "--model", "model", "Model name sent to the http backend");
        add(cmd, "--verifier", "verifier", "Fact verifier: oracle, judge or exact (default oracle)");
        add(cmd, "--labels", "labels", "Oracle labels.jsonl");
        add(cmd, "--corpus", "corpus", "Reference corpus: directory of .txt files or docs JSONL");
        add(cmd, "--world", "world", "world.json for the sim backend (default: generate from --seed)");
        add(cmd, "--prompts-dir", "prompts_dir", "Directory overriding the prompt templates");
        add(cmd, "--max-tokens", "max_tokens", "Completion token limit (default 512)");
        add(cmd, "--temperature", "temperature", "Sampling temperature (default 0)");
        cmd.add_flag("--revalidate", revalidate, "Re-segment and re-verify merged responses; drop those below level");
    }

    void add(CLI::App& cmd, const std::string& flag, const std::string& key, const std::string& help) {
        cmd.add_option(flag, values[key], help);
    }

    fcg::PipelineConfig resolve() const {
        fcg::PipelineConfig c;
        if (const char* key = std::getenv(fcg::kApiKeyEnv)) c.api_key = key;
        if (config) fcg::load_config_file(c, *config);
        for (const auto& [key, value] : values) {
            if (value) fcg::apply_config_value(c, key, *value);
        }
        if (revalidate) c.revalidate = true;
        c.validate();
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factuality-controlled generation: training data builder and evaluator"};
    app.require_subcommand(1);

    SharedFlags gen_flags, eval_flags, score_flags, curve_flags, sim_flags;

    auto* gen = app.add_subcommand("gen", "Build training triples for every entity and level");
    std::string gen_entities;
    gen->add_option("--entities", gen_entities, "entities.jsonl")->required();
    gen_flags.attach(*gen);

    auto* eval = app.add_subcommand("eval", "Score responses and print the adherence table");
    std::string eval_responses, eval_entities;
    eval->add_option("--responses", eval_responses, "responses.jsonl")->required();
    eval->add_option("--entities", eval_entities, "entities.jsonl naming each question's entity (judge verifier)");
    eval_flags.attach(*eval);

    auto* score = app.add_subcommand("score", "Score one response file at one level");
    std::string score_responses, score_entities;
    double score_level = 0.0;
    score->add_option("--responses", score_responses, "responses.jsonl")->required();
    score->add_option("--level", score_level, "Factuality level in [0, 1]")->required();
    score->add_option("--entities", score_entities, "entities.jsonl naming each question's entity (judge verifier)");
    score_flags.attach(*score);

    auto* curve = app.add_subcommand("curve", "Write curve.csv and curve.svg from records.jsonl");
    std::string curve_records, curve_method;
    bool per_100_words = false;
    curve->add_option("--records", curve_records, "records.jsonl from eval or sim")->required();
    curve->add_option("--method", curve_method, "Method written to curve.csv (default: first with levels)");
    curve->add_flag("--per-100-words", per_100_words, "Use facts per 100 words as informativeness");
    curve_flags.attach(*curve);

    auto* sim = app.add_subcommand("sim", "Closed loop on a simulated world: world, gen, eval, curve");
    sim_flags.attach(*sim);
    std::optional<std::string> sim_entities, sim_facts, sim_false, sim_beta;
    sim->add_option("--n-entities", sim_entities, "Entities in the world (default 50)");
    sim->add_option("--facts-per-entity", sim_facts, "Facts per entity (default 8)");
    sim->add_option("--false-fraction", sim_false, "Probability that a fact is false (default 0.3)");
    sim->add_option("--beta", sim_beta, "Confidence sharpness; 0 is uninformative (default 100)");

    auto* gc = app.add_subcommand("cache-gc", "Evict least-recently-used cache entries");
    std::string gc_dir;
    std::uintmax_t gc_max = 0;
    gc->add_option("--cache-dir", gc_dir, "Cache directory")->required();
    gc->add_option("--max-bytes", gc_max, "Size budget in bytes")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) return fcg::cmd_gen(gen_flags.resolve(), gen_entities, std::cout, std::cerr);
        if (*eval) return fcg::cmd_eval(eval_flags.resolve(), eval_responses, eval_entities, std::cout, std::cerr);
        if (*score) {
            return fcg::cmd_score(score_flags.resolve(), score_responses, fcg::FactualityLevel(score_level),
                                  score_entities, std::cout, std::cerr);
        }
        if (*curve) return fcg::cmd_curve(curve_flags.resolve(), curve_records, curve_method, per_100_words, std::cout, std::cerr);
        if (*sim) {
            auto config = sim_flags.resolve();
            if (sim_entities) fcg::apply_config_value(config, "sim.entities", *sim_entities);
            if (sim_facts) fcg::apply_config_value(config, "sim.facts_per_entity", *sim_facts);
            if (sim_false) fcg::apply_config_value(config, "sim.false_fraction", *sim_false);
            if (sim_beta) fcg::apply_config_value(config, "sim.beta", *sim_beta);
            return fcg::cmd_sim(config, std::cout, std::cerr);
        }
        if (*gc) {
            std::cout << fcg::cache_gc(gc_dir, gc_max) << " bytes freed\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
