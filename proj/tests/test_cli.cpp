#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <sstream>

#include "fcg/app.hpp"
#include "test_support.hpp"

using namespace fcg;
using fcg::testing::TempDir;
using fcg::testing::fixture;
using fcg::testing::read_file;
using fcg::testing::write_file;

namespace {

struct Run {
    int code = 0;
    std::string out;
};

// Runs the built fcg binary; stderr is folded into out.
Run run_cli(const std::string& args) {
    const std::string cmd = std::string(FCG_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    char buf[4096];
    while (auto n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

PipelineConfig sim_config(const TempDir& dir, std::size_t entities = 10) {
    PipelineConfig c;
    c.sim.n_entities = entities;
    c.out = dir / "out";
    return c;
}

}  // namespace

TEST(Gen, WritesTriplesAndReportForSimEntities) {
    TempDir dir;
    auto config = sim_config(dir);
    auto params = config.sim;
    params.seed = config.seed;
    write_entities(dir / "entities.jsonl", world_questions(generate_world(params)));
    std::ostringstream out, err;
    ASSERT_EQ(cmd_gen(config, dir / "entities.jsonl", out, err), 0) << err.str();
    const auto triples = records_of(read_triples(dir / "out" / "triples.jsonl"));
    EXPECT_FALSE(triples.empty());
    EXPECT_LE(triples.size(), 100u);
    const auto report = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
    EXPECT_EQ(report["triples"], triples.size());
    EXPECT_EQ(report["per_level"].size(), 10u);
    EXPECT_NE(out.str().find("direct"), std::string::npos);
}

TEST(Gen, MissingEntitiesFileExitsOne) {
    TempDir dir;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_gen(sim_config(dir), dir / "nope.jsonl", out, err), 1);
    EXPECT_NE(err.str().find("nope.jsonl"), std::string::npos);
}

TEST(Gen, AllFalseWorldAtFullLevelExitsTwo) {
    TempDir dir;
    auto config = sim_config(dir, 5);
    config.sim.false_fraction = 1.0;
    config.levels = {FactualityLevel(1.0)};
    auto params = config.sim;
    params.seed = config.seed;
    write_entities(dir / "entities.jsonl", world_questions(generate_world(params)));
    std::ostringstream out, err;
    EXPECT_EQ(cmd_gen(config, dir / "entities.jsonl", out, err), 2);
    EXPECT_TRUE(read_file(dir / "out" / "triples.jsonl").empty());
}

TEST(Eval, OracleFixturesGiveHandComputedTable) {
    TempDir dir;
    PipelineConfig config;
    config.labels = fixture("oracle_labels.jsonl");
    config.levels = parse_levels("0.8,0.9,1.0");
    config.out = dir / "out";
    std::ostringstream out, err;
    ASSERT_EQ(cmd_eval(config, fixture("oracle_responses.jsonl"), {}, out, err), 0) << err.str();
    const std::string expected =
        "Method    c=0.8    c=0.9      c=1\n"
        "FCG        50.0        -        -\n"
        "NFC        50.0     50.0     50.0\n";
    EXPECT_EQ(out.str(), expected);
    EXPECT_EQ(read_file(dir / "out" / "report.txt"), expected);
    const auto records = records_of(read_records(dir / "out" / "records.jsonl"));
    ASSERT_EQ(records.size(), 4u);
    EXPECT_EQ(*records[0].factuality, 0.8);
    EXPECT_EQ(*records[1].factuality, 0.5);
    EXPECT_EQ(*records[2].factuality, 0.75);
    EXPECT_EQ(*records[3].factuality, 1.0);
}

TEST(Eval, ThreeOfFourSupportedAdheresAtSevenNotEight) {
    TempDir dir;
    write_file(dir / "responses.jsonl", "{\"question_id\":\"r3\",\"text\":\"C was born in Lima. C studied music. "
                                        "C won an award. C died in 1990.\"}\n");
    PipelineConfig config;
    config.labels = fixture("oracle_labels.jsonl");
    config.levels = parse_levels("0.7,0.8");
    config.out = dir / "out";
    std::ostringstream out, err;
    ASSERT_EQ(cmd_eval(config, dir / "responses.jsonl", {}, out, err), 0);
    EXPECT_EQ(out.str(), "Method     c=0.7    c=0.8\ndefault    100.0      0.0\n");
}

TEST(Eval, EmptyResponsesFileExitsOne) {
    TempDir dir;
    write_file(dir / "responses.jsonl", "");
    PipelineConfig config;
    config.labels = fixture("oracle_labels.jsonl");
    config.out = dir / "out";
    std::ostringstream out, err;
    EXPECT_EQ(cmd_eval(config, dir / "responses.jsonl", {}, out, err), 1);
}

TEST(Eval, MissingLabelMarksRecordFailedAndContinues) {
    TempDir dir;
    write_file(dir / "responses.jsonl",
               "{\"question_id\":\"r4\",\"text\":\"D was born in Kyiv.\"}\n"
               "{\"question_id\":\"zz\",\"text\":\"Unknown.\"}\n");
    PipelineConfig config;
    config.labels = fixture("oracle_labels.jsonl");
    config.levels = parse_levels("1.0");
    config.out = dir / "out";
    std::ostringstream out, err;
    EXPECT_EQ(cmd_eval(config, dir / "responses.jsonl", {}, out, err), 0);
    const auto records = records_of(read_records(dir / "out" / "records.jsonl"));
    EXPECT_FALSE(records[0].failed);
    EXPECT_TRUE(records[1].failed);
    EXPECT_NE(err.str().find("zz"), std::string::npos);
}

TEST(Score, PrintsPerResponseAdherence) {
    TempDir dir;
    PipelineConfig config;
    config.labels = fixture("oracle_labels.jsonl");
    config.out = dir / "out";
    std::ostringstream out, err;
    ASSERT_EQ(cmd_score(config, fixture("oracle_responses.jsonl"), FactualityLevel(0.75), {}, out, err), 0);
    EXPECT_NE(out.str().find("r3\t4\t3\t0.750\t1"), std::string::npos) << out.str();
    EXPECT_NE(out.str().find("adherence at c=0.75: 75.0%"), std::string::npos) << out.str();
}

TEST(Curve, WritesCsvAndSvgFromRecords) {
    TempDir dir;
    auto config = sim_config(dir);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_sim(config, out, err), 0) << err.str();
    config.out = dir / "curve";
    std::ostringstream cout_, cerr_;
    ASSERT_EQ(cmd_curve(config, dir / "out" / "records.jsonl", kSimFilteredMethod, false, cout_, cerr_), 0);
    EXPECT_EQ(read_file(dir / "curve" / "curve.csv"), read_file(dir / "out" / "curve.csv"));
    EXPECT_NE(read_file(dir / "curve" / "curve.svg").find("<svg"), std::string::npos);
    std::ostringstream o2, e2;
    EXPECT_EQ(cmd_curve(config, dir / "out" / "records.jsonl", "nope", false, o2, e2), 1);
}

TEST(Sim, DefaultRunWritesEveryArtifact) {
    TempDir dir;
    auto config = sim_config(dir, 50);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_sim(config, out, err), 0) << err.str();
    for (const char* name : {"world.json", "entities.jsonl", "labels.jsonl", "triples.jsonl", "report.json",
                             "records.jsonl", "curve.csv", "curve.svg", "report.txt"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / "out" / name)) << name;
    }
    const auto csv = read_file(dir / "out" / "curve.csv");
    EXPECT_EQ(csv.rfind("level,mean_factuality,mean_informativeness,adherence_rate,n\n", 0), 0u);
}

TEST(Sim, SameSeedIsByteIdenticalAndBetaZeroRuns) {
    TempDir a, b;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_sim(sim_config(a, 20), out, err), 0);
    ASSERT_EQ(cmd_sim(sim_config(b, 20), out, err), 0);
    for (const char* name : {"world.json", "triples.jsonl", "records.jsonl", "curve.csv", "report.txt"}) {
        EXPECT_EQ(read_file(a / "out" / name), read_file(b / "out" / name)) << name;
    }
    TempDir c;
    auto uninformative = sim_config(c, 20);
    uninformative.sim.beta = 0.0;
    EXPECT_EQ(cmd_sim(uninformative, out, err), 0);
}

TEST(Sim, UnwritableOutputExitsOne) {
    TempDir dir;
    write_file(dir / "blocker", "file, not a directory");
    auto config = sim_config(dir);
    config.out = dir / "blocker" / "out";
    std::ostringstream out, err;
    EXPECT_EQ(cmd_sim(config, out, err), 1);
}

TEST(Config, FileValuesApplyAndUnknownKeysFail) {
    TempDir dir;
    write_file(dir / "fcg.conf", "# comment\nseed = 42\nlevels = 1.0, 0.5\nmode = llm  # trailing\nsim.beta = 3\n");
    PipelineConfig c;
    load_config_file(c, dir / "fcg.conf");
    EXPECT_EQ(c.seed, 42u);
    ASSERT_EQ(c.levels.size(), 2u);
    EXPECT_EQ(c.levels[0].value(), 0.5);
    EXPECT_EQ(c.mode, Mode::Llm);
    EXPECT_EQ(c.sim.beta, 3.0);
    write_file(dir / "bad.conf", "colour = blue\n");
    try {
        load_config_file(c, dir / "bad.conf");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "colour");
    }
    EXPECT_THROW(apply_config_value(c, "levels", "0.5,1.3"), ConfigError);
    EXPECT_THROW(apply_config_value(c, "concurrency", "-2"), ConfigError);
}

TEST(Config, HttpBackendNeedsEndpointAndJudgeNeedsCorpus) {
    PipelineConfig c;
    c.backend = "http";
    EXPECT_THROW(c.validate(), ConfigError);
    c = PipelineConfig{};
    c.verifier = "judge";
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Binary, HelpForEverySubcommandExitsZero) {
    for (const char* sub : {"", "gen ", "eval ", "score ", "curve ", "sim ", "cache-gc "}) {
        const auto r = run_cli(std::string(sub) + "--help");
        EXPECT_EQ(r.code, 0) << sub;
        EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
    }
}

TEST(Binary, UsageErrorsExitOne) {
    EXPECT_EQ(run_cli("").code, 1);
    EXPECT_EQ(run_cli("gen").code, 1);
    EXPECT_EQ(run_cli("frobnicate").code, 1);
    EXPECT_EQ(run_cli("sim --levels 2.0").code, 1);
}

TEST(Binary, FlagsOverrideConfigFile) {
    TempDir dir;
    write_file(dir / "fcg.conf", "seed = 1\nsim.entities = 3\nlevels = 0.5\nout = " + (dir / "from_file").string() + "\n");
    const auto from_file = run_cli("sim --config " + (dir / "fcg.conf").string());
    ASSERT_EQ(from_file.code, 0) << from_file.out;
    EXPECT_TRUE(std::filesystem::exists(dir / "from_file" / "world.json"));
    const auto world = nlohmann::json::parse(read_file(dir / "from_file" / "world.json"));
    EXPECT_EQ(world["seed"], 1);
    EXPECT_EQ(world["entities"].size(), 3u);

    const auto overridden = run_cli("sim --config " + (dir / "fcg.conf").string() + " --seed 2 --n-entities 4 --out " +
                                    (dir / "from_flags").string());
    ASSERT_EQ(overridden.code, 0) << overridden.out;
    const auto world2 = nlohmann::json::parse(read_file(dir / "from_flags" / "world.json"));
    EXPECT_EQ(world2["seed"], 2);
    EXPECT_EQ(world2["entities"].size(), 4u);
}

TEST(Binary, CacheGcReportsBytesFreed) {
    TempDir dir;
    const auto r = run_cli("cache-gc --cache-dir " + dir.path().string() + " --max-bytes 0");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("0 bytes freed"), std::string::npos);
    EXPECT_EQ(run_cli("cache-gc --cache-dir " + (dir / "missing").string() + " --max-bytes 0").code, 1);
}
