#include <gtest/gtest.h>

#include <mutex>
#include <random>

#include <httplib.h>

#include <verbatim/index.hpp>
#include <verbatim/index_store.hpp>

#include "oracles/bm25_oracle.hpp"
#include "test_util.hpp"

using namespace verbatim;
namespace vt = verbatim::testing;

namespace {

/// Maps known texts to fixed vectors; anything else gets `fallback`.
class TableEmbedder : public EmbeddingClient {
  public:
    explicit TableEmbedder(std::size_t dim) : m_dim(dim) {}
    std::map<std::string, std::vector<float>> table;
    std::string id() const override { return "table"; }
    std::size_t dim() const override { return m_dim; }
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override
    {
        std::vector<std::vector<float>> out;
        for (auto const& t : texts) {
            auto it = table.find(t);
            if (it != table.end()) {
                out.push_back(it->second);
            } else {
                std::vector<float> v(m_dim, 0.0f);
                v[0] = 1.0f;
                out.push_back(v);
            }
        }
        return out;
    }

  private:
    std::size_t m_dim;
};

/// Fails for any batch containing `poison`, the first `transient` calls fail
/// regardless.
class FlakyEmbedder : public MockEmbedder {
  public:
    FlakyEmbedder(std::string poison, int transient) : MockEmbedder(8), m_poison(std::move(poison)), m_transient(transient) {}
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override
    {
        {
            std::lock_guard lock(m_mutex);
            ++calls;
            if (m_transient > 0) {
                --m_transient;
                throw BackendError("transient");
            }
        }
        for (auto const& t : texts) {
            if (!m_poison.empty() && t.find(m_poison) != std::string::npos) {
                throw BackendError("poisoned");
            }
        }
        return MockEmbedder::embed(texts);
    }
    int calls = 0;

  private:
    std::string m_poison;
    int m_transient;
    std::mutex m_mutex;
};

Chunk make_chunk(const std::string& id, const std::string& body)
{
    Chunk c;
    c.chunk_id = id;
    c.doc_id = id.substr(0, id.find('#'));
    c.body = body;
    c.source_range = {0, utf8::length(body)};
    return c;
}

std::string chunk_id(std::size_t i)
{
    return make_chunk_id("doc", i);
}

RetryPolicy quick_retry(int retries)
{
    return {retries, std::chrono::milliseconds(0), std::chrono::milliseconds(0)};
}

std::vector<std::pair<std::string, std::string>> random_docs(std::mt19937_64& rng, std::size_t n, std::size_t vocab)
{
    std::vector<std::pair<std::string, std::string>> docs;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        auto const len = vt::uniform(rng, 1, 40);
        for (std::size_t w = 0; w < len; ++w) {
            text += "w" + std::to_string(vt::uniform(rng, 0, vocab - 1)) + (w % 7 == 6 ? ". " : " ");
        }
        docs.emplace_back(chunk_id(i), text);
    }
    return docs;
}

const std::vector<std::pair<std::string, std::string>> kFixture = {
    {"a#0000", "Cosine similarity between dense vectors"},
    {"a#0001", "BM25 ranks documents by term frequency and inverse document frequency"},
    {"a#0002", "Reciprocal rank fusion combines two rankings"},
    {"a#0003", "term term term frequency saturation"},
    {"a#0004", "Chunking splits markdown at headings"},
    {"a#0005", "Tables and code fences are kept whole"},
    {"a#0006", "Dense retrieval uses unit vectors and cosine scores"},
    {"a#0007", "The lexical index stores postings per term"},
    {"a#0008", "Queries are tokenized like documents"},
    {"a#0009", "A very long document about frequency frequency and many other unrelated words to make it long"},
    {"a#0010", "Retrieval evaluation with top ten results"},
    {"a#0011", "Hybrid search fuses lexical and dense rankings"},
    {"a#0012", "Spans are character offsets into the chunk"},
    {"a#0013", "Verbatim extraction copies text exactly"},
    {"a#0014", "Inverse document frequency downweights common terms"},
    {"a#0015", "Unit vectors make dot products equal cosine"},
    {"a#0016", "Markdown headings define sections"},
    {"a#0017", "Ranking ties break by chunk id"},
    {"a#0018", "Document length normalisation in BM25"},
    {"a#0019", "Nothing relevant here at all"},
};

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnNonAlnum)
{
    EXPECT_EQ(tokenize("Hello, World! x2-y"), (std::vector<std::string>{"hello", "world", "x2", "y"}));
    EXPECT_EQ(tokenize("  ...  "), std::vector<std::string>{});
    EXPECT_EQ(tokenize("Ünïcode ΑΒΓ"), (std::vector<std::string>{"ünïcode", "αβγ"}));
}

TEST(LexicalIndex, EmptyCorpusHasNoDocuments)
{
    auto idx = LexicalIndex::build({});
    EXPECT_EQ(idx.doc_count(), 0u);
    EXPECT_TRUE(idx.search("anything", 5).empty());
}

TEST(LexicalIndex, RejectsDuplicateIds)
{
    EXPECT_THROW(LexicalIndex::build({{"x", "a"}, {"x", "b"}}), FormatError);
}

TEST(LexicalIndex, PostingsMatchRecountedFrequencies)
{
    std::mt19937_64 rng(7);
    auto docs = random_docs(rng, 100, 60);
    auto idx = LexicalIndex::build(docs);
    std::map<std::string, std::map<std::uint32_t, std::uint32_t>> expected;
    for (std::uint32_t d = 0; d < docs.size(); ++d) {
        for (auto const& t : tokenize(docs[d].second)) {
            ++expected[t][d];
        }
    }
    ASSERT_EQ(idx.postings().size(), expected.size());
    for (auto const& [term, per_doc] : expected) {
        auto list = idx.postings(term);
        ASSERT_EQ(list.size(), per_doc.size()) << term;
        for (auto const& p : list) {
            EXPECT_EQ(p.tf, per_doc.at(p.doc)) << term << " in doc " << p.doc;
        }
    }
}

TEST(LexicalIndex, SingleMatchingChunkRanksFirst)
{
    auto idx = LexicalIndex::build(kFixture);
    auto hits = idx.search("tokenized", 10);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].chunk_id, "a#0008");
    EXPECT_EQ(hits[0].lexical_rank, 1u);
}

TEST(LexicalIndex, AbsentTermsReturnNothing)
{
    auto idx = LexicalIndex::build(kFixture);
    EXPECT_TRUE(idx.search("zebra", 10).empty());
}

TEST(LexicalIndex, EmptyQueryIsAnError)
{
    auto idx = LexicalIndex::build(kFixture);
    try {
        idx.search("  ?! ", 10);
        FAIL() << "expected an error";
    } catch (const FormatError& e) {
        EXPECT_STREQ(e.what(), "empty query");
    }
    EXPECT_THROW(idx.search("term", 0), FormatError);
}

TEST(LexicalIndex, FixtureMatchesFullScan)
{
    auto idx = LexicalIndex::build(kFixture);
    for (std::string q : {"frequency", "term frequency", "dense cosine vectors", "BM25 document", "the rankings",
                          "unit vectors cosine dot", "chunk"}) {
        auto got = idx.search(q, 10);
        auto want = oracle::bm25_full_scan(kFixture, q, 10);
        ASSERT_EQ(got.size(), want.size()) << q;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].chunk_id, want[i].chunk_id) << q << " rank " << i + 1;
            EXPECT_NEAR(got[i].score, want[i].score, 1e-9) << q;
        }
    }
}

TEST(LexicalIndex, RepeatedTermSaturates)
{
    auto idx = LexicalIndex::build(kFixture);
    auto const w1 = idx.term_weight(1, 10, 1.0);
    auto const w3 = idx.term_weight(3, 10, 1.0);
    auto const w100 = idx.term_weight(100, 10, 1.0);
    EXPECT_GT(w3, w1);
    EXPECT_LT(w100, 2.2 + 1e-12);
    EXPECT_LT(w100 - w3, w3 - w1 + 1.0);
}

TEST(LexicalIndex, RandomCorporaMatchFullScan)
{
    std::mt19937_64 rng(11);
    for (int round = 0; round < 20; ++round) {
        auto docs = random_docs(rng, 100, 40);
        auto idx = LexicalIndex::build(docs);
        for (int q = 0; q < 10; ++q) {
            std::string query;
            for (std::size_t i = 0, n = vt::uniform(rng, 1, 4); i < n; ++i) {
                query += "w" + std::to_string(vt::uniform(rng, 0, 45)) + " ";
            }
            auto got = idx.search(query, 10);
            auto want = oracle::bm25_full_scan(docs, query, 10);
            ASSERT_EQ(got.size(), want.size()) << query;
            for (std::size_t i = 0; i < got.size(); ++i) {
                ASSERT_EQ(got[i].chunk_id, want[i].chunk_id) << query;
            }
        }
    }
}

// Swapping a non-query word for a query term never lowers that chunk's score.
TEST(LexicalIndex, AddingAQueryTermNeverLowersTheScore)
{
    std::mt19937_64 rng(3);
    for (int round = 0; round < 200; ++round) {
        auto docs = random_docs(rng, 30, 25);
        auto const target = vt::uniform(rng, 0, docs.size() - 1);
        std::string const term = "w" + std::to_string(vt::uniform(rng, 0, 24));
        auto score_of = [&](const std::vector<std::pair<std::string, std::string>>& d) {
            for (auto const& h : LexicalIndex::build(d).search(term, d.size())) {
                if (h.chunk_id == d[target].first) {
                    return h.score;
                }
            }
            return 0.0;
        };
        auto const before = score_of(docs);
        auto tokens = tokenize(docs[target].second);
        auto pos = std::find_if(tokens.begin(), tokens.end(), [&](auto const& t) { return t != term; });
        if (pos == tokens.end()) {
            continue;
        }
        *pos = term;
        std::string text;
        for (auto const& t : tokens) {
            text += t + " ";
        }
        auto changed = docs;
        changed[target].second = text;
        EXPECT_GE(score_of(changed), before - 1e-12) << round;
    }
}

TEST(DenseIndex, NormalisesOnInsert)
{
    DenseIndex idx(3, "t");
    std::vector<float> v{3, 0, 4};
    idx.add("x", v);
    auto stored = idx.vector(0);
    EXPECT_NEAR(stored[0], 0.6, 1e-7);
    EXPECT_NEAR(stored[2], 0.8, 1e-7);
    std::vector<float> zero{0, 0, 0};
    EXPECT_THROW(idx.add("z", zero), FormatError);
    std::vector<float> short_v{1, 0};
    EXPECT_THROW(idx.add("s", short_v), FormatError);
}

TEST(DenseIndex, IdenticalVectorScoresOne)
{
    DenseIndex idx(4, "t");
    std::vector<float> a{1, 2, 3, 4}, b{4, 3, 2, 1};
    idx.add("a", a);
    idx.add("b", b);
    auto hits = idx.search(DenseIndex::normalized(a), 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].chunk_id, "a");
    EXPECT_NEAR(hits[0].score, 1.0, 1e-6);
}

TEST(DenseIndex, OrthogonalVectorsScoreZero)
{
    DenseIndex idx(2, "t");
    std::vector<float> x{1, 0}, y{0, 1};
    idx.add("x", x);
    auto hits = idx.search(y, 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_NEAR(hits[0].score, 0.0, 1e-12);
}

TEST(DenseIndex, RandomVectorsMatchFullScan)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<float> gauss;
    for (int round = 0; round < 20; ++round) {
        DenseIndex idx(16, "t");
        std::vector<std::pair<std::string, std::vector<float>>> raw;
        for (std::size_t i = 0; i < 50; ++i) {
            std::vector<float> v(16);
            for (auto& x : v) {
                x = gauss(rng);
            }
            raw.emplace_back(chunk_id(i), v);
            idx.add(chunk_id(i), v);
        }
        std::vector<float> q(16);
        for (auto& x : q) {
            x = gauss(rng);
        }
        auto got = idx.search(DenseIndex::normalized(q), 10);
        auto want = oracle::cosine_full_scan(raw, q, 10);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].chunk_id, want[i]) << "round " << round << " rank " << i + 1;
        }
    }
}

TEST(DenseSearch, DimensionMismatchNamesBothDimensions)
{
    std::vector<Chunk> chunks{make_chunk("d#0000", "alpha beta")};
    MockEmbedder build_embedder(8);
    auto index = build_index(chunks, build_embedder);
    MockEmbedder other(12);
    try {
        dense_search(index.dense, "alpha", other, 1);
        FAIL() << "expected an error";
    } catch (const FormatError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("12"), std::string::npos) << msg;
        EXPECT_NE(msg.find("8"), std::string::npos) << msg;
    }
}

TEST(Rrf, SingleListContributions)
{
    std::vector<SearchHit> lex{{"a", 5.0, 1, {}}, {"b", 4.0, 2, {}}};
    std::vector<SearchHit> dense{{"a", 0.9, {}, 1}};
    auto fused = rrf_fuse(lex, dense, 10);
    ASSERT_EQ(fused.size(), 2u);
    EXPECT_EQ(fused[0].chunk_id, "a");
    EXPECT_NEAR(fused[0].score, 2.0 / 61.0, 1e-15);
    EXPECT_EQ(fused[1].chunk_id, "b");
    EXPECT_NEAR(fused[1].score, 1.0 / 62.0, 1e-15);
    EXPECT_EQ(fused[1].lexical_rank, 2u);
    EXPECT_FALSE(fused[1].dense_rank.has_value());
}

TEST(Rrf, HybridMatchesHandFusion)
{
    std::vector<Chunk> chunks;
    for (auto const& [id, text] : kFixture) {
        chunks.push_back(make_chunk(id, text));
    }
    MockEmbedder embed(32, 1);
    auto index = build_index(chunks, embed);
    for (std::string q : {"dense vectors", "frequency", "markdown sections", "rank fusion"}) {
        auto lex = index.lexical.search(q, 50);
        auto dense = dense_search(index.dense, q, embed, 50);
        std::vector<std::string> lex_ids, dense_ids;
        for (auto const& h : lex) {
            lex_ids.push_back(h.chunk_id);
        }
        for (auto const& h : dense) {
            dense_ids.push_back(h.chunk_id);
        }
        auto want = oracle::rrf(lex_ids, dense_ids, 10);
        auto got = search(index, q, embed, SearchMode::hybrid, 10);
        ASSERT_EQ(got.size(), want.size()) << q;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].chunk_id, want[i].first) << q;
            EXPECT_NEAR(got[i].score, want[i].second, 1e-12) << q;
        }
    }
}

TEST(SearchMode, ParsesKnownNames)
{
    EXPECT_EQ(parse_search_mode("lexical"), SearchMode::lexical);
    EXPECT_EQ(parse_search_mode("dense"), SearchMode::dense);
    EXPECT_EQ(parse_search_mode("hybrid"), SearchMode::hybrid);
    EXPECT_THROW(parse_search_mode("fuzzy"), FormatError);
}

TEST(BuildIndex, EmbedsRenderedTextInOrder)
{
    std::vector<Chunk> chunks;
    TableEmbedder embed(3);
    for (std::size_t i = 0; i < 40; ++i) {
        auto c = make_chunk(chunk_id(i), "body " + std::to_string(i));
        c.title_path = {"Doc"};
        c.prefix = "Doc\n\n";
        chunks.push_back(c);
        embed.table[render_chunk_text(c)] = {static_cast<float>(i + 1), 1.0f, 0.0f};
    }
    BuildOptions opts;
    opts.batch_size = 3;
    opts.parallelism = 4;
    auto index = build_index(chunks, embed, opts);
    ASSERT_EQ(index.dense.size(), 40u);
    for (std::size_t i = 0; i < 40; ++i) {
        EXPECT_EQ(index.dense.ids()[i], chunk_id(i));
        auto expected = DenseIndex::normalized(std::vector<float>{static_cast<float>(i + 1), 1.0f, 0.0f});
        EXPECT_NEAR(index.dense.vector(i)[0], expected[0], 1e-7);
    }
    ASSERT_NE(index.find(chunk_id(17)), nullptr);
    EXPECT_EQ(index.find(chunk_id(17))->body, "body 17");
    EXPECT_EQ(index.find("nope"), nullptr);
}

TEST(BuildIndex, TransientFailuresAreRetried)
{
    std::vector<Chunk> chunks{make_chunk("d#0000", "alpha"), make_chunk("d#0001", "beta")};
    FlakyEmbedder embed("", 2);
    BuildOptions opts;
    opts.retry = quick_retry(3);
    opts.parallelism = 1;
    vt::CaptureLog logs;
    auto index = build_index(chunks, embed, opts);
    EXPECT_EQ(index.dense.size(), 2u);
    EXPECT_EQ(embed.calls, 3);
}

TEST(BuildIndex, PersistentFailureNamesTheChunks)
{
    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < 10; ++i) {
        chunks.push_back(make_chunk(chunk_id(i), i == 6 ? "poison pill" : "fine " + std::to_string(i)));
    }
    FlakyEmbedder embed("poison", 0);
    BuildOptions opts;
    opts.retry = quick_retry(2);
    opts.batch_size = 4;
    vt::CaptureLog logs;
    try {
        build_index(chunks, embed, opts);
        FAIL() << "expected an error";
    } catch (const BackendError& e) {
        std::string msg = e.what();
        for (std::size_t i = 4; i < 8; ++i) {
            EXPECT_NE(msg.find(chunk_id(i)), std::string::npos) << msg;
        }
        EXPECT_EQ(msg.find(chunk_id(0)), std::string::npos) << msg;
    }
}

TEST(BuildIndex, RejectsDuplicateChunkIds)
{
    MockEmbedder embed;
    EXPECT_THROW(build_index({make_chunk("d#0000", "a"), make_chunk("d#0000", "b")}, embed), FormatError);
}

TEST(MockEmbedder, DeterministicAndUnitLength)
{
    MockEmbedder a(64, 3), b(64, 3), c(64, 4);
    auto va = a.embed_one("the same text");
    EXPECT_EQ(va, b.embed_one("the same text"));
    EXPECT_NE(va, c.embed_one("the same text"));
    double sq = 0;
    for (float x : va) {
        sq += static_cast<double>(x) * x;
    }
    EXPECT_NEAR(sq, 1.0, 1e-6);
    EXPECT_EQ(a.id(), "mock-hash-64-3");
    auto related = DenseIndex::dot(va, a.embed_one("the same words"));
    auto unrelated = DenseIndex::dot(va, a.embed_one("zebra quokka"));
    EXPECT_GT(related, unrelated);
}

TEST(HttpEmbedder, ParsesBothResponseShapes)
{
    auto a = HttpEmbedder::parse_response(R"({"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]})", 2);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0], (std::vector<float>{1, 0}));
    auto b = HttpEmbedder::parse_response(R"({"embeddings":[[0.5,0.5]]})", 1);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_THROW(HttpEmbedder::parse_response("not json", 1), BackendError);
    EXPECT_THROW(HttpEmbedder::parse_response(R"({"embeddings":[]})", 1), BackendError);
    EXPECT_THROW(HttpEmbedder::parse_response(R"({"other":1})", 1), BackendError);
}

TEST(HttpEmbedder, TalksToAnEmbeddingEndpoint)
{
    httplib::Server srv;
    std::string seen_auth;
    srv.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        auto body = Json::parse(req.body);
        Json out{{"data", Json::array()}};
        for (std::size_t i = 0; i < body["input"].size(); ++i) {
            out["data"].push_back({{"index", i}, {"embedding", {1.0, static_cast<double>(i)}}});
        }
        res.set_content(out.dump(), "application/json");
    });
    srv.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("down", "text/plain");
    });
    auto port = srv.bind_to_any_port("127.0.0.1");
    std::jthread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    ::setenv("VERBATIM_TEST_EMBED_KEY", "sekrit", 1);
    HttpEmbedder::Options opts;
    opts.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    opts.model = "m";
    opts.api_key_env = "VERBATIM_TEST_EMBED_KEY";
    HttpEmbedder embed(opts);
    auto v = embed.embed({"a", "b", "c"});
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[2], (std::vector<float>{1, 2}));
    EXPECT_EQ(embed.dim(), 2u);
    EXPECT_EQ(seen_auth, "Bearer sekrit");

    opts.url = "http://127.0.0.1:" + std::to_string(port) + "/broken";
    HttpEmbedder broken(opts);
    EXPECT_THROW(broken.embed({"a"}), BackendError);
    srv.stop();
}
