#include <gtest/gtest.h>

#include <verbatim/markdown.hpp>

using namespace verbatim;
using namespace verbatim::markdown;

namespace {

std::size_t count_nodes(const SectionNode& n)
{
    std::size_t c = 1;
    for (auto const& ch : n.children) {
        c += count_nodes(ch);
    }
    return c;
}

void check_tree(const SectionNode& n)
{
    std::size_t prev = n.body_range.start;
    for (auto const& c : n.children) {
        EXPECT_GT(c.level, n.level);
        EXPECT_TRUE(n.body_range.contains(c.body_range));
        EXPECT_GE(c.body_range.start, prev);
        prev = c.body_range.end;
        check_tree(c);
    }
}

}  // namespace

TEST(ParseSections, EmptyText)
{
    auto root = parse_sections(U"");
    EXPECT_EQ(root.level, 0);
    EXPECT_EQ(root.body_range, (CharSpan{0, 0}));
    EXPECT_TRUE(root.children.empty());
}

TEST(ParseSections, NestedHeadings)
{
    std::u32string const text = U"# A\npara\n## B\npara2";
    auto root = parse_sections(text);
    ASSERT_EQ(root.children.size(), 1u);
    auto const& a = root.children[0];
    EXPECT_EQ(a.title, "A");
    EXPECT_EQ(a.level, 1);
    EXPECT_EQ(a.body_range, (CharSpan{0, 19}));
    ASSERT_EQ(a.children.size(), 1u);
    auto const& b = a.children[0];
    EXPECT_EQ(b.title, "B");
    EXPECT_EQ(b.body_range, (CharSpan{9, 19}));
    EXPECT_EQ(b.heading_range, (CharSpan{9, 14}));
    check_tree(root);
}

TEST(ParseSections, HashLineInsideFenceIsBodyText)
{
    std::u32string const text = U"# A\nintro\n```\n# not a heading\n## nor this\n```\n## B\ntext\n";
    auto root = parse_sections(text);
    EXPECT_EQ(count_nodes(root), 3u);  // root, A, B
    ASSERT_EQ(root.children.size(), 1u);
    ASSERT_EQ(root.children[0].children.size(), 1u);
    EXPECT_EQ(root.children[0].children[0].title, "B");
}

TEST(ParseSections, SiblingsAndLevelJumps)
{
    std::u32string const text = U"pre\n# A\n### A1\nx\n## A2\ny\n# B\nz";
    auto root = parse_sections(text, "Doc");
    EXPECT_EQ(root.title, "Doc");
    ASSERT_EQ(root.children.size(), 2u);
    EXPECT_EQ(root.children[0].children.size(), 2u);
    EXPECT_EQ(root.children[0].children[0].title, "A1");
    EXPECT_EQ(root.children[0].children[1].title, "A2");
    EXPECT_EQ(root.children[1].title, "B");
    check_tree(root);
}

TEST(ParseSections, SetextHeadingsAreRecognised)
{
    std::u32string const text = U"Title\n=====\n\ntext\n\nSub part\n--------\nmore\n";
    auto root = parse_sections(text);
    ASSERT_EQ(root.children.size(), 1u);
    EXPECT_EQ(root.children[0].title, "Title");
    EXPECT_EQ(root.children[0].level, 1);
    ASSERT_EQ(root.children[0].children.size(), 1u);
    EXPECT_EQ(root.children[0].children[0].title, "Sub part");
    EXPECT_EQ(root.children[0].children[0].level, 2);
}

TEST(ParseSections, AtxEdgeCases)
{
    auto root = parse_sections(U"#hashtag\n####### seven\n    # indented code\n## Closed ##\n");
    ASSERT_EQ(root.children.size(), 1u);
    EXPECT_EQ(root.children[0].title, "Closed");
}

TEST(ParseSections, NonAsciiTitlesAndOffsets)
{
    std::u32string const text = U"# Überblick\nλ text\n## 数据\nx";
    auto root = parse_sections(text);
    ASSERT_EQ(root.children.size(), 1u);
    EXPECT_EQ(root.children[0].title, "Überblick");
    ASSERT_EQ(root.children[0].children.size(), 1u);
    EXPECT_EQ(root.children[0].children[0].title, "数据");
    EXPECT_EQ(root.children[0].children[0].body_range.start, 19u);
}

TEST(SegmentBlocks, TwoParagraphs)
{
    auto b = segment_blocks(U"p1\n\np2");
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0].kind, BlockKind::paragraph);
    EXPECT_EQ(b[0].range, (CharSpan{0, 4}));
    EXPECT_EQ(b[1].range, (CharSpan{4, 6}));
}

TEST(SegmentBlocks, PipeTableIsOneAtomicBlock)
{
    auto b = segment_blocks(U"|a|b|\n|-|-|\n|1|2|");
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].kind, BlockKind::table);
    EXPECT_TRUE(b[0].atomic);
    EXPECT_EQ(b[0].range, (CharSpan{0, 17}));
}

TEST(SegmentBlocks, ParagraphFenceParagraphOffsets)
{
    // "intro text\n" = [0,11), blank line at 11, fence [12,29), blank at 29, "closing words" [30,43)
    std::u32string const body = U"intro text\n\n```\ncode # x\n```\n\nclosing words";
    ASSERT_EQ(body.size(), 43u);
    auto b = segment_blocks(body, 100);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0].kind, BlockKind::paragraph);
    EXPECT_EQ(b[0].range, (CharSpan{100, 112}));
    EXPECT_EQ(b[1].kind, BlockKind::code_fence);
    EXPECT_TRUE(b[1].atomic);
    EXPECT_EQ(b[1].range, (CharSpan{112, 130}));
    EXPECT_EQ(b[2].kind, BlockKind::paragraph);
    EXPECT_EQ(b[2].range, (CharSpan{130, 143}));
}

TEST(SegmentBlocks, UnterminatedFenceRunsToEndWithWarning)
{
    std::vector<std::string> warnings;
    log::ScopedSink sink([&](log::Level l, const std::string& m) {
        if (l == log::Level::warn) {
            warnings.push_back(m);
        }
    });
    auto b = segment_blocks(U"text\n\n~~~\ncode\nmore code\n");
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[1].kind, BlockKind::code_fence);
    EXPECT_EQ(b[1].range.end, 25u);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(SegmentBlocks, ListsHeadingsAndPlaceholders)
{
    std::u32string const body = U"## Head\n- one\n- two\n  cont\n\n- three\n\n<!-- image -->\nTail para\n";
    auto b = segment_blocks(body);
    ASSERT_EQ(b.size(), 4u);
    EXPECT_EQ(b[0].kind, BlockKind::heading);
    EXPECT_EQ(b[1].kind, BlockKind::list);
    EXPECT_EQ(b[2].kind, BlockKind::caption_placeholder);
    EXPECT_EQ(b[3].kind, BlockKind::paragraph);
    EXPECT_FALSE(b[1].atomic);
}

TEST(SegmentBlocks, BlocksPartitionTheBody)
{
    std::u32string const body =
        U"\n\nlead\n|x|\n|-|\n\n```\na\n```\n- i\n- j\n\n\npara one\npara one b\n\n<!-- formula-not-decoded -->\n";
    auto b = segment_blocks(body);
    ASSERT_FALSE(b.empty());
    EXPECT_EQ(b.front().range.start, 0u);
    EXPECT_EQ(b.back().range.end, body.size());
    for (std::size_t i = 1; i < b.size(); ++i) {
        EXPECT_EQ(b[i].range.start, b[i - 1].range.end);
    }
}

TEST(SegmentBlocks, WhitespaceOnlyBody)
{
    auto b = segment_blocks(U"\n  \n");
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].range, (CharSpan{0, 4}));
    EXPECT_TRUE(segment_blocks(U"").empty());
}
