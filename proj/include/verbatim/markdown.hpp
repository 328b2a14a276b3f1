#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "log.hpp"
#include "span.hpp"
#include "types.hpp"
#include "utf8.hpp"

namespace verbatim::markdown {

enum class BlockKind { paragraph, heading, table, code_fence, list, caption_placeholder };

inline std::string_view to_string(BlockKind k)
{
    switch (k) {
    case BlockKind::paragraph: return "paragraph";
    case BlockKind::heading: return "heading";
    case BlockKind::table: return "table";
    case BlockKind::code_fence: return "code_fence";
    case BlockKind::list: return "list";
    case BlockKind::caption_placeholder: return "caption_placeholder";
    }
    return "unknown";
}

struct Block {
    BlockKind kind = BlockKind::paragraph;
    CharSpan range;
    bool atomic = false;

    friend bool operator==(const Block&, const Block&) = default;
};

inline bool is_space(char32_t c)
{
    return c == U' ' || c == U'\t' || c == U'\r' || c == U'\n' || c == U'\f' || c == U'\v' || c == 0xA0 ||
           c == 0x2028 || c == 0x2029 || c == 0x3000 || (c >= 0x2000 && c <= 0x200A);
}

/// Narrows `r` so it neither starts nor ends with whitespace. Empty result
/// (start == end) when the range is all whitespace.
inline CharSpan trim(std::u32string_view text, CharSpan r)
{
    while (r.start < r.end && is_space(text[r.start])) {
        ++r.start;
    }
    while (r.end > r.start && is_space(text[r.end - 1])) {
        --r.end;
    }
    return r;
}

namespace detail {

struct Line {
    std::size_t start;  // first character
    std::size_t end;    // one past the last character, excluding '\n'
    std::size_t next;   // start of the following line
};

inline std::vector<Line> split_lines(std::u32string_view text, std::size_t from, std::size_t to)
{
    std::vector<Line> lines;
    std::size_t pos = from;
    while (pos < to) {
        std::size_t e = pos;
        while (e < to && text[e] != U'\n') {
            ++e;
        }
        lines.push_back({pos, e, e < to ? e + 1 : e});
        pos = e < to ? e + 1 : e;
    }
    return lines;
}

inline std::u32string_view view(std::u32string_view text, const Line& l)
{
    return text.substr(l.start, l.end - l.start);
}

inline bool blank(std::u32string_view s)
{
    for (char32_t c : s) {
        if (!is_space(c)) {
            return false;
        }
    }
    return true;
}

/// Strips up to three leading spaces; nullopt if the line is indented further.
inline std::optional<std::u32string_view> unindent(std::u32string_view s)
{
    std::size_t i = 0;
    while (i < s.size() && s[i] == U' ') {
        ++i;
    }
    if (i > 3) {
        return std::nullopt;
    }
    return s.substr(i);
}

struct Fence {
    char32_t ch;
    std::size_t count;
};

inline std::optional<Fence> fence_open(std::u32string_view s)
{
    auto u = unindent(s);
    if (!u || u->empty() || (u->front() != U'`' && u->front() != U'~')) {
        return std::nullopt;
    }
    auto const ch = u->front();
    std::size_t n = 0;
    while (n < u->size() && (*u)[n] == ch) {
        ++n;
    }
    if (n < 3) {
        return std::nullopt;
    }
    if (ch == U'`' && u->substr(n).find(U'`') != std::u32string_view::npos) {
        return std::nullopt;
    }
    return Fence{ch, n};
}

inline bool fence_close(std::u32string_view s, Fence f)
{
    auto u = unindent(s);
    if (!u) {
        return false;
    }
    std::size_t n = 0;
    while (n < u->size() && (*u)[n] == f.ch) {
        ++n;
    }
    return n >= f.count && blank(u->substr(n));
}

struct Atx {
    int level;
    std::u32string_view title;
};

inline std::optional<Atx> atx_heading(std::u32string_view s)
{
    auto u = unindent(s);
    if (!u) {
        return std::nullopt;
    }
    std::size_t n = 0;
    while (n < u->size() && (*u)[n] == U'#') {
        ++n;
    }
    if (n == 0 || n > 6) {
        return std::nullopt;
    }
    if (n < u->size() && (*u)[n] != U' ' && (*u)[n] != U'\t' && (*u)[n] != U'\r') {
        return std::nullopt;
    }
    auto title = u->substr(n);
    while (!title.empty() && is_space(title.front())) {
        title.remove_prefix(1);
    }
    while (!title.empty() && is_space(title.back())) {
        title.remove_suffix(1);
    }
    // optional closing sequence: " ###"
    auto k = title.size();
    while (k > 0 && title[k - 1] == U'#') {
        --k;
    }
    if (k == 0) {
        title = {};
    } else if (k < title.size() && is_space(title[k - 1])) {
        title = title.substr(0, k);
        while (!title.empty() && is_space(title.back())) {
            title.remove_suffix(1);
        }
    }
    return Atx{static_cast<int>(n), title};
}

/// 1 for "===", 2 for "---", 0 otherwise.
inline int setext_underline(std::u32string_view s)
{
    auto u = unindent(s);
    if (!u || u->empty() || (u->front() != U'=' && u->front() != U'-')) {
        return 0;
    }
    auto const ch = u->front();
    std::size_t n = 0;
    while (n < u->size() && (*u)[n] == ch) {
        ++n;
    }
    if (n < 3 || !blank(u->substr(n))) {
        return 0;
    }
    return ch == U'=' ? 1 : 2;
}

inline bool table_line(std::u32string_view s)
{
    auto u = unindent(s);
    return u && !u->empty() && u->front() == U'|';
}

inline bool list_item(std::u32string_view s)
{
    auto u = unindent(s);
    if (!u || u->empty()) {
        return false;
    }
    auto const c = u->front();
    if ((c == U'-' || c == U'*' || c == U'+') && u->size() >= 2 && (*u)[1] == U' ') {
        return true;
    }
    std::size_t n = 0;
    while (n < u->size() && n < 9 && (*u)[n] >= U'0' && (*u)[n] <= U'9') {
        ++n;
    }
    return n > 0 && n + 1 < u->size() && ((*u)[n] == U'.' || (*u)[n] == U')') && (*u)[n + 1] == U' ';
}

inline bool placeholder_line(std::u32string_view s)
{
    auto u = s;
    while (!u.empty() && is_space(u.front())) {
        u.remove_prefix(1);
    }
    while (!u.empty() && is_space(u.back())) {
        u.remove_suffix(1);
    }
    if (u.starts_with(U"<!--") && u.ends_with(U"-->")) {
        return true;
    }
    return u.starts_with(U"![") && u.ends_with(U")") && u.find(U"](") != std::u32string_view::npos;
}

/// A line that cannot be the title line of a setext heading.
inline bool setext_blocker(std::u32string_view s)
{
    return blank(s) || atx_heading(s) || fence_open(s) || table_line(s) || list_item(s) ||
           placeholder_line(s) || setext_underline(s) != 0;
}

inline std::u32string_view trimmed(std::u32string_view s)
{
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

/// Heading found while scanning lines. `first_line`/`last_line` index into the
/// line vector; setext headings span two lines.
struct HeadingHit {
    int level;
    std::u32string_view title;
    std::size_t first_line;
    std::size_t last_line;
};

/// Every heading outside code fences. Setext headings are recognised when a
/// single paragraph line (preceded by a blank line, a heading or the start)
/// is underlined; they are reported exactly like ATX headings.
inline std::vector<HeadingHit> find_headings(std::u32string_view text, const std::vector<Line>& lines)
{
    std::vector<HeadingHit> hits;
    std::optional<Fence> fence;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto const s = view(text, lines[i]);
        if (fence) {
            if (fence_close(s, *fence)) {
                fence.reset();
            }
            continue;
        }
        if (auto f = fence_open(s)) {
            fence = f;
            continue;
        }
        if (auto h = atx_heading(s)) {
            hits.push_back({h->level, h->title, i, i});
            continue;
        }
        if (i + 1 < lines.size() && !setext_blocker(s)) {
            auto const under = setext_underline(view(text, lines[i + 1]));
            bool const starts_para =
                i == 0 || blank(view(text, lines[i - 1])) || (!hits.empty() && hits.back().last_line + 1 == i);
            if (under != 0 && starts_para) {
                hits.push_back({under, trimmed(s), i, i + 1});
                ++i;
            }
        }
    }
    return hits;
}

}  // namespace detail

/// Heading tree of a document. The root spans the whole text; every heading
/// opens a node that runs until the next heading of the same or lower level.
/// Lines inside fenced code are never headings.
inline SectionNode parse_sections(std::u32string_view text, std::string root_title = {})
{
    SectionNode root;
    root.level = 0;
    root.title = std::move(root_title);
    root.body_range = CharSpan{0, text.size()};
    root.heading_range = CharSpan{0, 0};

    auto const lines = detail::split_lines(text, 0, text.size());
    auto const hits = detail::find_headings(text, lines);

    std::vector<SectionNode*> stack{&root};
    for (auto const& h : hits) {
        auto const start = lines[h.first_line].start;
        while (stack.size() > 1 && stack.back()->level >= h.level) {
            stack.back()->body_range.end = start;
            stack.pop_back();
        }
        SectionNode node;
        node.level = h.level;
        node.title = utf8::encode(h.title);
        node.heading_range = CharSpan{start, lines[h.last_line].next};
        node.body_range = CharSpan{start, text.size()};
        stack.back()->children.push_back(std::move(node));
        stack.push_back(&stack.back()->children.back());
    }
    return root;
}

inline SectionNode parse_sections(const Document& doc)
{
    return parse_sections(utf8::decode(doc.markdown), doc.title);
}

/// Splits one section's raw text into blocks. Every character of the input
/// belongs to exactly one block: blank lines are absorbed by the block before
/// them (or the first block, when leading). Tables and fenced code are atomic.
/// Returned ranges are offset by `base_offset`.
inline std::vector<Block> segment_blocks(std::u32string_view body, std::size_t base_offset = 0)
{
    using namespace detail;
    auto const lines = split_lines(body, 0, body.size());
    std::vector<Block> blocks;
    auto push = [&](BlockKind kind, std::size_t from, std::size_t to) {
        bool const atomic = kind == BlockKind::table || kind == BlockKind::code_fence;
        blocks.push_back({kind, CharSpan{from, to}, atomic});
    };

    std::size_t i = 0;
    std::size_t leading_blank_from = std::string::npos;
    auto const n = lines.size();
    auto const line_blank = [&](std::size_t k) { return blank(view(body, lines[k])); };

    while (i < n) {
        auto const s = view(body, lines[i]);
        if (blank(s)) {
            if (blocks.empty()) {
                if (leading_blank_from == std::string::npos) {
                    leading_blank_from = lines[i].start;
                }
            } else {
                blocks.back().range.end = lines[i].next;
            }
            ++i;
            continue;
        }
        auto const start = lines[i].start;
        if (auto f = fence_open(s)) {
            std::size_t j = i + 1;
            while (j < n && !fence_close(view(body, lines[j]), *f)) {
                ++j;
            }
            if (j >= n) {
                log::warn("unterminated code fence at offset " + std::to_string(base_offset + start) +
                          "; extending it to the end of the section");
                push(BlockKind::code_fence, start, lines[n - 1].next);
                i = n;
            } else {
                push(BlockKind::code_fence, start, lines[j].next);
                i = j + 1;
            }
            continue;
        }
        if (atx_heading(s)) {
            push(BlockKind::heading, start, lines[i].next);
            ++i;
            continue;
        }
        if (i + 1 < n && !setext_blocker(s) && setext_underline(view(body, lines[i + 1])) != 0 &&
            (i == 0 || line_blank(i - 1) || (!blocks.empty() && blocks.back().kind == BlockKind::heading &&
                                             blocks.back().range.end == start))) {
            push(BlockKind::heading, start, lines[i + 1].next);
            i += 2;
            continue;
        }
        if (table_line(s)) {
            std::size_t j = i;
            while (j < n && table_line(view(body, lines[j]))) {
                ++j;
            }
            push(BlockKind::table, start, lines[j - 1].next);
            i = j;
            continue;
        }
        if (placeholder_line(s)) {
            push(BlockKind::caption_placeholder, start, lines[i].next);
            ++i;
            continue;
        }
        auto const starts_other = [&](std::size_t k) {
            auto const t = view(body, lines[k]);
            return fence_open(t) || atx_heading(t) || table_line(t) || placeholder_line(t);
        };
        if (list_item(s)) {
            std::size_t j = i + 1;
            while (j < n) {
                if (line_blank(j)) {
                    // a list continues over blank lines when the next item or an indented continuation follows
                    std::size_t k = j;
                    while (k < n && line_blank(k)) {
                        ++k;
                    }
                    if (k < n && !starts_other(k) &&
                        (list_item(view(body, lines[k])) || view(body, lines[k]).starts_with(U"  "))) {
                        j = k;
                        continue;
                    }
                    break;
                }
                if (starts_other(j)) {
                    break;
                }
                ++j;
            }
            push(BlockKind::list, start, lines[j - 1].next);
            i = j;
            continue;
        }
        std::size_t j = i + 1;
        while (j < n && !line_blank(j) && !starts_other(j) && !list_item(view(body, lines[j]))) {
            ++j;
        }
        push(BlockKind::paragraph, start, lines[j - 1].next);
        i = j;
    }

    if (leading_blank_from != std::string::npos) {
        if (blocks.empty()) {
            push(BlockKind::paragraph, leading_blank_from, body.size());
        } else {
            blocks.front().range.start = leading_blank_from;
        }
    }
    for (auto& b : blocks) {
        b.range.start += base_offset;
        b.range.end += base_offset;
    }
    return blocks;
}

}  // namespace verbatim::markdown
