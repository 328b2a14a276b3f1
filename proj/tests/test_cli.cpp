#include <gtest/gtest.h>

#include <sstream>

#include <verbatim/cli.hpp>

#include "corpus_fixture.hpp"
#include "test_util.hpp"

using namespace verbatim;
namespace vt = verbatim::testing;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = cli::run(args, {out, err});
    return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& path) { return path.string(); }

// Gold rows over the fixture docs: one relevant row per document, gold span
// on the first sentence.
Json fixture_gold()
{
    Json rows = Json::array();
    for (auto const& d : vt::kFixtureDocs) {
        auto const text = vt::fixture_markdown(d);
        auto const start = utf8::length(text.substr(0, text.find(d.sentences[0])));
        rows.push_back({{"query_id", std::string(d.name) + "#0000/q1"},
                        {"query_text", std::string("about ") + d.title},
                        {"chunk_id", std::string(d.name) + "#0000"},
                        {"chunk_text", text},
                        {"relevance", "relevant"},
                        {"gold_spans", Json::array({Json::array({start, start + utf8::length(d.sentences[0])})})}});
    }
    return rows;
}

Json quoting_script(const std::string& failing_title)
{
    Json rules = Json::array();
    rules.push_back({{"contains", "[doc_0]\n# " + failing_title}, {"response", {{"error", "HTTP 503"}}}});
    for (auto const& d : vt::kFixtureDocs) {
        rules.push_back({{"contains", std::string("[doc_0]\n# ") + d.title},
                         {"response", Json{{"doc_0", Json::array({d.sentences[0]})}}.dump()}});
    }
    return Json{{"rules", rules}, {"fallback", "heuristic"}};
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override
    {
        vt::write_fixture_corpus(m_dir / "corpus", 5);
        write_file(m_dir / "script.json", quoting_script("Deserts").dump(2));
        write_file(m_dir / "verbatim.toml",
                   "index_dir = \"index\"\n[llm]\nbackend = \"scripted\"\nscript = \"script.json\"\n"
                   "[retrieval]\nmode = \"lexical\"\n");
        write_file(m_dir / "gold.json", fixture_gold().dump(2));
    }

    std::string config() const { return p(m_dir / "verbatim.toml"); }

    vt::TempDir m_dir;
};

}  // namespace

TEST(CliUsage, UnknownVerbOrMissingFlagsIs64)
{
    auto none = run_cli({});
    EXPECT_EQ(none.code, 64);
    auto unknown = run_cli({"frobnicate"});
    EXPECT_EQ(unknown.code, 64);
    EXPECT_NE(unknown.err.find("genqueries"), std::string::npos) << "usage text lists the verbs";
    EXPECT_EQ(run_cli({"chunk", "--in", "/nonexistent-dir", "--out", "x"}).code, 64);
    EXPECT_EQ(run_cli({"eval", "--gold", "/nonexistent.json"}).code, 64);
    EXPECT_EQ(run_cli({"extract", "--gold", "/etc/hostname", "--backend", "llm:poem", "--out", "x"}).code, 64);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(CliTest, ChunkIndexSearch)
{
    auto chunk = run_cli({"--config", config(), "chunk", "--in", p(m_dir / "corpus"), "--out", p(m_dir / "chunks.jsonl")});
    ASSERT_EQ(chunk.code, 0) << chunk.err;
    EXPECT_EQ(load_chunks(m_dir / "chunks.jsonl").size(), 5u);

    auto index = run_cli({"--config", config(), "index", "--chunks", p(m_dir / "chunks.jsonl")});
    ASSERT_EQ(index.code, 0) << index.err;
    EXPECT_TRUE(std::filesystem::exists(m_dir / "index" / "manifest.json"));

    auto search = run_cli({"--config", config(), "search", "-q", "coral bleaching warm water", "-k", "3"});
    ASSERT_EQ(search.code, 0) << search.err;
    std::istringstream lines(search.out);
    std::string first;
    std::getline(lines, first);
    EXPECT_EQ(first.rfind("1\t", 0), 0u) << search.out;
    EXPECT_NE(first.find("doc04#0000\tCoral"), std::string::npos) << search.out;
    EXPECT_EQ(std::count(search.out.begin(), search.out.end(), '\n'), 3);

    auto dense = run_cli({"--config", config(), "search", "-q", "coral", "--mode", "dense"});
    EXPECT_EQ(dense.code, 0) << dense.err;
}

TEST_F(CliTest, ChunkingIsByteIdenticalAcrossRuns)
{
    ASSERT_EQ(run_cli({"chunk", "--in", p(m_dir / "corpus"), "--out", p(m_dir / "a.jsonl")}).code, 0);
    ASSERT_EQ(run_cli({"chunk", "--in", p(m_dir / "corpus"), "--out", p(m_dir / "b.jsonl")}).code, 0);
    EXPECT_EQ(read_file(m_dir / "a.jsonl"), read_file(m_dir / "b.jsonl"));
}

TEST_F(CliTest, SkippedCorpusFilesArePartialFailure)
{
    write_file(m_dir / "corpus" / "broken.md", "\xff\xfe not utf-8");
    auto r = run_cli({"chunk", "--in", p(m_dir / "corpus"), "--out", p(m_dir / "c.jsonl")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("broken.md"), std::string::npos);
    EXPECT_EQ(load_chunks(m_dir / "c.jsonl").size(), 5u);
}

TEST_F(CliTest, GenqueriesWritesThreePerChunk)
{
    ASSERT_EQ(run_cli({"chunk", "--in", p(m_dir / "corpus"), "--out", p(m_dir / "chunks.jsonl")}).code, 0);
    auto r = run_cli({"--config", config(), "genqueries", "--chunks", p(m_dir / "chunks.jsonl"), "--n-chunks", "4",
                  "--seed", "3", "--out", p(m_dir / "queries.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto q = load_queries(m_dir / "queries.jsonl");
    EXPECT_EQ(q.size(), 12u);
    for (auto const& x : q) {
        EXPECT_EQ(x.prompt_version, "qgen-v1");
        EXPECT_FALSE(x.query.empty());
    }
}

TEST_F(CliTest, ExtractWithOneFailingChunkIsPartial)
{
    auto r = run_cli({"--config", config(), "extract", "--gold", p(m_dir / "gold.json"), "--backend", "llm:default",
                  "--out", p(m_dir / "pred.json")});
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("doc05#0000"), std::string::npos) << r.err;
    auto preds = load_results(m_dir / "pred.json");
    ASSERT_EQ(preds.size(), 9u);
    for (auto const& x : preds) {
        EXPECT_NE(x.chunk_id, "doc05#0000");
        EXPECT_EQ(x.spans.size(), 1u);
        EXPECT_EQ(x.backend, "llm:default:scripted-mock");
        EXPECT_FALSE(x.latency_s.has_value()) << "offline runs carry no latency";
    }

    // the missing row is scored as an abstention
    auto ev = run_cli({"eval", "--gold", p(m_dir / "gold.json"), "--pred", p(m_dir / "pred.json"), "--out",
                   p(m_dir / "report.json")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    auto report = parse_json(read_file(m_dir / "report.json"), "report");
    EXPECT_EQ(report["abstention_count"], 1);
    EXPECT_EQ(report["missing_predictions"], 1);
    EXPECT_NE(ev.out.find("llm:default:scripted-mock"), std::string::npos);
    EXPECT_EQ(read_file(m_dir / "report.json.txt"), ev.out);
}

TEST_F(CliTest, ScorerBackend)
{
    auto r = run_cli({"extract", "--gold", p(m_dir / "gold.json"), "--backend", "scorer", "--out", p(m_dir / "s.json")});
    EXPECT_EQ(r.code, 0) << r.err;
    auto preds = load_results(m_dir / "s.json");
    ASSERT_EQ(preds.size(), 10u);
    EXPECT_EQ(preds[0].backend, "scorer:mock-scorer");
}

TEST_F(CliTest, EvalWithMismatchedIdsNamesThePair)
{
    ExtractionResult stray;
    stray.query_id = "ghost/q1";
    stray.chunk_id = "ghost#0000";
    stray.backend = "x";
    save_results({stray}, m_dir / "bad.json");
    auto r = run_cli({"eval", "--gold", p(m_dir / "gold.json"), "--pred", p(m_dir / "bad.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("ghost/q1"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("ghost#0000"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalComparesSeveralBackends)
{
    auto gold = load_gold(m_dir / "gold.json");
    std::vector<ExtractionResult> perfect, none;
    for (auto const& g : gold) {
        perfect.push_back({g.query_id, g.chunk_id, g.gold_spans, "perfect", false, std::nullopt});
        none.push_back({g.query_id, g.chunk_id, {}, "silent", true, std::nullopt});
    }
    save_results(perfect, m_dir / "p1.json");
    save_results(none, m_dir / "p2.json");
    auto r = run_cli({"eval", "--gold", p(m_dir / "gold.json"), "--pred", p(m_dir / "p1.json"), "--pred",
                  p(m_dir / "p2.json"), "--thresholds", "0.5,1.0", "--out", p(m_dir / "r.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("perfect"), std::string::npos);
    EXPECT_NE(r.out.find("silent"), std::string::npos);
    auto j = parse_json(read_file(m_dir / "r.json"), "r");
    ASSERT_TRUE(j.is_array());
    EXPECT_DOUBLE_EQ(j[0]["word_f1"].get<double>(), 1.0);
    EXPECT_EQ(j[1]["abstention_count"], 10);
    EXPECT_EQ(run_cli({"eval", "--gold", p(m_dir / "gold.json"), "--pred", p(m_dir / "p1.json"), "--thresholds", "0,2"}).code,
              1);
}

TEST_F(CliTest, ServeWithoutIndexFails)
{
    auto r = run_cli({"--config", config(), "serve", "--port", "0"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("verbatim index"), std::string::npos) << r.err;
}
