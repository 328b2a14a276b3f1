#include <random>

#include <gtest/gtest.h>

#include <verbatim/chunker.hpp>

#include "chunk_checks.hpp"
#include "test_util.hpp"

using namespace verbatim;
using verbatim::testing::chunk_violations;

namespace {

Document make_doc(std::string md, std::string title = "Paper", std::string id = "doc")
{
    Document d;
    d.doc_id = std::move(id);
    d.title = std::move(title);
    d.length_chars = utf8::length(md);
    d.markdown = std::move(md);
    return d;
}

std::string filler(std::size_t n, char c = 'w')
{
    // words of five letters separated by spaces, exactly n characters
    std::string s;
    while (s.size() < n) {
        s += (s.size() % 6 == 5) ? ' ' : c;
    }
    if (s.back() == ' ') {
        s.back() = c;
    }
    return s;
}

}  // namespace

TEST(RenderChunkText, JoinsTitlePath)
{
    ChunkerConfig cfg;
    Chunk c;
    c.title_path = {"Paper", "3 Method"};
    c.prefix = render_prefix(c.title_path, cfg);
    c.body = "x";
    EXPECT_EQ(render_chunk_text(c), "Paper > 3 Method\n\nx");
}

TEST(RenderChunkText, EmptyPathLeavesBodyUnchanged)
{
    Chunk c;
    c.prefix = render_prefix({}, ChunkerConfig{});
    c.body = "body text";
    EXPECT_EQ(render_chunk_text(c), "body text");
}

TEST(RenderChunkText, ThreeTitlesTwoSeparators)
{
    auto p = render_prefix({"A", "B", "C"}, ChunkerConfig{});
    EXPECT_EQ(p, "A > B > C\n\n");
    std::size_t seps = 0;
    for (std::size_t pos = p.find(" > "); pos != std::string::npos; pos = p.find(" > ", pos + 1)) {
        ++seps;
    }
    EXPECT_EQ(seps, 2u);
}

TEST(ChunkerConfig, RejectsInvertedBounds)
{
    ChunkerConfig cfg;
    cfg.min_chunk_chars = 5000;
    cfg.max_chunk_chars = 500;
    EXPECT_THROW(cfg.validate(), FormatError);
    cfg.min_chunk_chars = 0;
    EXPECT_THROW(cfg.validate(), FormatError);
}

TEST(ChunkDocument, SingleSectionInBounds)
{
    auto doc = make_doc("# Intro\n\n" + filler(1000) + "\n");
    auto chunks = chunk_document(doc);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].chunk_id, "doc#0000");
    EXPECT_EQ(chunks[0].title_path, (std::vector<std::string>{"Paper", "Intro"}));
    EXPECT_EQ(chunks[0].body, filler(1000));
    EXPECT_FALSE(chunks[0].atomic_oversize);
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
}

TEST(ChunkDocument, OversizedTableStaysWhole)
{
    std::string table = "| k | v |\n|---|---|\n";
    while (table.size() < 6000) {
        table += "| key | " + filler(40) + " |\n";
    }
    table.pop_back();
    auto doc = make_doc("# Results\n\n" + table + "\n");
    auto chunks = chunk_document(doc);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_TRUE(chunks[0].atomic_oversize);
    EXPECT_EQ(chunks[0].body, table);
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
}

TEST(ChunkDocument, LongSectionMatchesGreedyBlockPacking)
{
    // 12 paragraphs, 12000+ characters, in one section
    std::mt19937_64 rng(5);
    std::vector<std::string> paras;
    std::string md = "# Sec\n\n";
    for (int i = 0; i < 12; ++i) {
        paras.push_back(filler(700 + verbatim::testing::uniform(rng, 0, 600), static_cast<char>('a' + i)));
        md += paras.back() + "\n\n";
    }
    auto doc = make_doc(md);
    ChunkerConfig cfg;

    // Oracle: locate paragraphs, then pack greedily by hand.
    auto const prefix_len = std::string("Paper > Sec\n\n").size();
    std::vector<CharSpan> ranges;
    std::size_t pos = 0;
    for (auto const& p : paras) {
        pos = md.find(p, pos);
        ranges.push_back({pos, pos + p.size()});
        pos += p.size();
    }
    std::vector<CharSpan> expected;
    for (auto const& r : ranges) {
        if (!expected.empty() && prefix_len + (r.end - expected.back().start) <= cfg.max_chunk_chars) {
            expected.back().end = r.end;
        } else {
            expected.push_back(r);
        }
    }
    ASSERT_GE(expected.size(), 3u);
    ASSERT_GE(prefix_len + expected.back().length(), cfg.min_chunk_chars) << "fixture would need repair";

    auto chunks = chunk_document(doc, cfg);
    ASSERT_EQ(chunks.size(), expected.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        EXPECT_EQ(chunks[i].source_range, expected[i]);
        EXPECT_EQ(chunks[i].prefix, "Paper > Sec\n\n");
    }
    EXPECT_TRUE(chunk_violations(doc, chunks, cfg).empty());
}

TEST(ChunkDocument, ShortSiblingsMergeForward)
{
    auto doc = make_doc("# Paper\n\n## A\n\n" + filler(200) + "\n\n## B\n\n" + filler(200) + "\n\n## C\n\n" +
                        filler(800) + "\n");
    auto chunks = chunk_document(doc);
    ASSERT_EQ(chunks.size(), 1u) << chunks.size();
    // A and B merge (still short), then absorb C; common path is the parent
    EXPECT_EQ(chunks[0].title_path, (std::vector<std::string>{"Paper"}));
    EXPECT_NE(chunks[0].body.find("## B"), std::string::npos);
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
}

TEST(ChunkDocument, TrailingShortSiblingMergesBackward)
{
    auto doc = make_doc("# Paper\n\n## A\n\n" + filler(2000) + "\n\n## B\n\n" + filler(100) + "\n");
    auto chunks = chunk_document(doc);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].body.substr(0, 5), "wwwww");
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
}

TEST(ChunkDocument, ShortPieceBetweenLargeNeighboursIsRebalanced)
{
    auto doc = make_doc("# Paper\n\n## A\n\n" + filler(4900) + "\n\n## B\n\n" + filler(100) + "\n\n## C\n\n" +
                        filler(4900) + "\n");
    auto chunks = chunk_document(doc);
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
    for (auto const& c : chunks) {
        EXPECT_FALSE(c.atomic_oversize);
    }
}

TEST(ChunkDocument, OversizedParagraphSplitsAtWords)
{
    auto doc = make_doc("# Paper\n\n" + filler(12000) + "\n");
    auto chunks = chunk_document(doc);
    EXPECT_GE(chunks.size(), 3u);
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
    for (auto const& c : chunks) {
        EXPECT_NE(c.body.front(), ' ');
        EXPECT_NE(c.body.back(), ' ');
    }
}

TEST(ChunkDocument, PreambleGetsDocumentTitleOnly)
{
    auto doc = make_doc(filler(700) + "\n\n# Body\n\n" + filler(700) + "\n", "Title");
    auto chunks = chunk_document(doc);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].title_path, (std::vector<std::string>{"Title"}));
    EXPECT_EQ(chunks[1].title_path, (std::vector<std::string>{"Title", "Body"}));
}

TEST(ChunkDocument, HeadingOnlyDocumentHasNoChunks)
{
    EXPECT_TRUE(chunk_document(make_doc("# A\n## B\n")).empty());
}

TEST(ChunkDocument, NonAsciiLengthsCountCharacters)
{
    std::string para;
    while (utf8::length(para) < 600) {
        para += "数据λé ";
    }
    para.pop_back();
    auto doc = make_doc("# Überblick\n\n" + para + "\n");
    auto chunks = chunk_document(doc);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].body, para);
    EXPECT_TRUE(chunk_violations(doc, chunks, {}).empty());
}

TEST(ChunkDocument, RandomDocumentsSatisfyInvariants)
{
    std::mt19937_64 rng(2024);
    ChunkerConfig cfg;
    for (int i = 0; i < 100; ++i) {
        auto doc = make_doc(verbatim::testing::random_markdown(rng), "Doc " + std::to_string(i), "d" + std::to_string(i));
        auto chunks = chunk_document(doc, cfg);
        auto v = chunk_violations(doc, chunks, cfg);
        ASSERT_TRUE(v.empty()) << "doc " << i << ": " << v.front() << "\n" << doc.markdown.substr(0, 400);
        // pure function
        ASSERT_EQ(chunk_document(doc, cfg), chunks);
    }
}

TEST(ChunkDocument, SmallBoundsStillHold)
{
    std::mt19937_64 rng(77);
    ChunkerConfig cfg;
    cfg.min_chunk_chars = 200;
    cfg.max_chunk_chars = 1200;
    for (int i = 0; i < 50; ++i) {
        auto doc = make_doc(verbatim::testing::random_markdown(rng), "D", "s" + std::to_string(i));
        auto chunks = chunk_document(doc, cfg);
        auto v = chunk_violations(doc, chunks, cfg);
        ASSERT_TRUE(v.empty()) << "doc " << i << ": " << v.front();
    }
}
