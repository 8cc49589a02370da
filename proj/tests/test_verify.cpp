#include <gtest/gtest.h>

#include <random>

#include "fcg/verify.hpp"
#include "test_support.hpp"

using namespace fcg;
using fcg::testing::ScriptedBackend;
using fcg::testing::TempDir;
using fcg::testing::fact;
using fcg::testing::write_file;

namespace {

std::shared_ptr<const ReferenceCorpus> sample_corpus() {
    return std::make_shared<const ReferenceCorpus>(std::vector<Document>{
        {"d2", "Alice Smith", "Alice Smith is a chemist born in Lyon."},
        {"d1", "Bob Jones", "Bob Jones is a painter."},
        {"d3", "Lyon", "Lyon is a city in France."},
    });
}

std::vector<AtomicFact> labeled(const std::vector<Label>& labels) {
    std::vector<AtomicFact> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out.push_back(fact("f" + std::to_string(i), i, 0.5, labels[i]));
    return out;
}

}  // namespace

TEST(Corpus, RetrieveRanksBySharedTokensThenDocId) {
    const auto corpus = sample_corpus();
    const auto hits = corpus->retrieve("Alice Smith Lyon", 3);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].document->doc_id, "d2");
    EXPECT_EQ(hits[0].score, 3u);
    EXPECT_EQ(hits[1].document->doc_id, "d3");
    EXPECT_EQ(hits[1].score, 1u);
    EXPECT_EQ(hits[2].document->doc_id, "d1");
    EXPECT_EQ(hits[2].score, 0u);
}

TEST(Corpus, TiesFollowDocIdOrder) {
    const auto corpus = sample_corpus();
    const auto hits = corpus->retrieve("is a", 3);
    EXPECT_EQ(hits[0].document->doc_id, "d1");
    EXPECT_EQ(hits[1].document->doc_id, "d2");
    EXPECT_EQ(hits[2].document->doc_id, "d3");
}

TEST(Corpus, KIsClampedAndValidated) {
    const auto corpus = sample_corpus();
    EXPECT_EQ(corpus->retrieve("x", 10).size(), 3u);
    EXPECT_THROW(corpus->retrieve("x", 0), ValidationError);
    EXPECT_THROW(ReferenceCorpus().retrieve("x", 1), Error);
}

TEST(Corpus, DuplicateIdsRejected) {
    EXPECT_THROW(ReferenceCorpus({{"a", "", "x"}, {"a", "", "y"}}), ValidationError);
}

TEST(Corpus, LoadsTextDirectoryAndJsonl) {
    TempDir dir;
    write_file(dir / "docs" / "Alice.txt", "Alice is a chemist.");
    write_file(dir / "docs" / "notes.md", "ignored");
    const auto from_dir = ReferenceCorpus::load(dir / "docs");
    ASSERT_EQ(from_dir.documents().size(), 1u);
    EXPECT_EQ(from_dir.documents()[0].title, "Alice");
    write_file(dir / "docs.jsonl", "{\"doc_id\":\"x\",\"title\":\"T\",\"text\":\"body\"}\n");
    const auto from_jsonl = ReferenceCorpus::load(dir / "docs.jsonl");
    ASSERT_EQ(from_jsonl.documents().size(), 1u);
    EXPECT_EQ(from_jsonl.documents()[0].text, "body");
}

TEST(Factuality, CountsSupportedOverTotal) {
    using enum Label;
    EXPECT_EQ(*factuality(labeled({Supported, Supported, Supported, Unsupported})).value, 0.75);
    EXPECT_EQ(*factuality(labeled({Supported, Supported})).value, 1.0);
    EXPECT_FALSE(factuality({}).defined());
    EXPECT_THROW(factuality(labeled({Supported, Unlabeled})), ValidationError);
}

// Factuality ignores fact order and cannot drop when an Unsupported fact is
// removed.
TEST(Factuality, PermutationInvariantAndMonotoneUnderRemovingUnsupported) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Label> labels(1 + rng() % 12);
        for (auto& l : labels) l = rng() % 2 ? Label::Supported : Label::Unsupported;
        auto facts = labeled(labels);
        const auto base = factuality(facts);
        auto shuffled = facts;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(factuality(shuffled).value, base.value);

        auto it = std::find_if(facts.begin(), facts.end(), [](const AtomicFact& f) { return f.label == Label::Unsupported; });
        if (it != facts.end() && facts.size() > 1) {
            facts.erase(it);
            EXPECT_GE(*factuality(facts).value, *base.value);
        }
    }
}

TEST(OracleVerifier, TextKeysWinOverIndexKeys) {
    LabelTable table({
        {"q1", 0, Label::Unsupported, std::nullopt},
        {"q1", 5, Label::Supported, std::string("Alice is a chemist.")},
    });
    OracleVerifier oracle(table);
    EXPECT_EQ(oracle.verify(fact("Alice is a chemist.", 0), {"q1", "Alice"}), Label::Supported);
    EXPECT_EQ(oracle.verify(fact("Other.", 0), {"q1", "Alice"}), Label::Unsupported);
    EXPECT_THROW(oracle.verify(fact("Other.", 1), {"q1", "Alice"}), MissingLabel);
    EXPECT_THROW(oracle.verify(fact("Other.", 0), {"q2", "Alice"}), MissingLabel);
}

TEST(ExactVerifier, SubstringOfAnyDocument) {
    ExactVerifier exact(sample_corpus());
    EXPECT_EQ(exact.verify(fact("Bob Jones is a painter.", 0), {}), Label::Supported);
    EXPECT_EQ(exact.verify(fact("Bob Jones is a chemist.", 0), {}), Label::Unsupported);
}

TEST(JudgeVerifier, BuildsPromptFromTopPassagesAndParsesVerdict) {
    ScriptedBackend backend;
    JudgeVerifier judge(sample_corpus(), backend, {}, 2);
    const FactContext ctx{"q1", "Alice Smith"};
    const auto f = fact("Alice Smith was born in Lyon.", 0);
    const std::string expected =
        "Answer the question about Alice Smith based on the given context.\n\n"
        "Title: Alice Smith\nText: Alice Smith is a chemist born in Lyon.\n\n"
        "Title: Lyon\nText: Lyon is a city in France.\n\n"
        "Input: Alice Smith was born in Lyon. True or False?\nOutput:";
    EXPECT_EQ(judge.prompt_for(f, ctx), expected);
    backend.reply(expected, " True.");
    EXPECT_EQ(judge.verify(f, ctx), Label::Supported);
}

TEST(ParseVerdict, FirstTrueOrFalseWordDecides) {
    EXPECT_EQ(parse_verdict("TRUE"), Label::Supported);
    EXPECT_EQ(parse_verdict("Answer: false, not true"), Label::Unsupported);
    EXPECT_THROW(parse_verdict("Unclear."), VerdictUnparseable);
    EXPECT_THROW(parse_verdict("Truest"), VerdictUnparseable);
}

TEST(LabelFacts, ConcurrentMatchesSequentialAndPropagatesErrors) {
    std::vector<LabelEntry> entries;
    std::vector<AtomicFact> facts;
    for (std::size_t i = 0; i < 30; ++i) {
        entries.push_back({"q", i, i % 3 ? Label::Supported : Label::Unsupported, std::nullopt});
        facts.push_back(fact("f" + std::to_string(i), i));
    }
    OracleVerifier oracle{LabelTable(entries)};
    EXPECT_EQ(label_facts(facts, {"q", "E"}, oracle, 1), label_facts(facts, {"q", "E"}, oracle, 4));
    facts.push_back(fact("missing", 99));
    EXPECT_THROW(label_facts(facts, {"q", "E"}, oracle, 3), MissingLabel);
}
