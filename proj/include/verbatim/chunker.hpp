#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "markdown.hpp"
#include "types.hpp"
#include "utf8.hpp"

namespace verbatim {

struct ChunkerConfig {
    std::size_t min_chunk_chars = 500;
    std::size_t max_chunk_chars = 5000;
    std::string prefix_separator = " > ";
    std::string prefix_terminator = "\n\n";

    void validate() const
    {
        if (min_chunk_chars == 0 || min_chunk_chars >= max_chunk_chars) {
            throw FormatError("chunker config requires 0 < min_chunk_chars < max_chunk_chars (got " +
                              std::to_string(min_chunk_chars) + ", " + std::to_string(max_chunk_chars) + ")");
        }
    }
};

inline std::string render_prefix(const std::vector<std::string>& title_path, const ChunkerConfig& cfg)
{
    if (title_path.empty()) {
        return {};
    }
    std::string out;
    for (std::size_t i = 0; i < title_path.size(); ++i) {
        if (i > 0) {
            out += cfg.prefix_separator;
        }
        out += title_path[i];
    }
    return out + cfg.prefix_terminator;
}

/// The text that gets indexed: title-path prefix followed by the body.
inline std::string render_chunk_text(const Chunk& chunk) { return chunk.prefix + chunk.body; }

inline std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal)
{
    std::ostringstream ss;
    ss << doc_id << '#' << std::setw(4) << std::setfill('0') << ordinal;
    return ss.str();
}

namespace detail::chunking {

using markdown::is_space;

struct Unit {
    CharSpan range;
    bool atomic = false;
};

struct Piece {
    std::vector<Unit> units;
    std::vector<std::string> path;
    std::size_t parent = 0;
    bool oversize = false;

    CharSpan extent() const { return {units.front().range.start, units.back().range.end}; }
    bool has_atomic() const
    {
        return std::any_of(units.begin(), units.end(), [](const Unit& u) { return u.atomic; });
    }
};

struct Segment {
    std::vector<Unit> units;
    std::vector<std::string> path;
    std::size_t parent;
};

class Chunker {
  public:
    Chunker(std::u32string_view text, const ChunkerConfig& cfg) : m_text(text), m_cfg(cfg) {}

    std::size_t prefix_len(const std::vector<std::string>& path) const
    {
        return utf8::length(render_prefix(path, m_cfg));
    }

    std::size_t length(const Piece& p) const { return prefix_len(p.path) + p.extent().length(); }

    std::size_t length(const std::vector<Unit>& units, const std::vector<std::string>& path) const
    {
        return prefix_len(path) + (units.back().range.end - units.front().range.start);
    }

    void collect(const SectionNode& node, std::vector<std::string> path, std::size_t parent,
                 std::size_t& next_id, std::vector<Segment>& out) const
    {
        auto const id = next_id++;
        if (!node.title.empty() && (path.empty() || path.back() != node.title)) {
            path.push_back(node.title);
        }
        CharSpan own{node.body_range.start,
                     node.children.empty() ? node.body_range.end : node.children.front().body_range.start};
        Segment seg{{}, path, parent};
        for (auto const& b : markdown::segment_blocks(m_text.substr(own.start, own.length()), own.start)) {
            if (b.kind == markdown::BlockKind::heading) {
                continue;
            }
            auto r = markdown::trim(m_text, b.range);
            if (!r.empty()) {
                seg.units.push_back({r, b.atomic});
            }
        }
        if (!seg.units.empty()) {
            out.push_back(std::move(seg));
        }
        for (auto const& child : node.children) {
            collect(child, path, id, next_id, out);
        }
    }

    /// Non-empty trimmed sub-ranges of `r`, split at line breaks (words=false)
    /// or at any whitespace (words=true).
    std::vector<CharSpan> atoms(CharSpan r, bool words) const
    {
        std::vector<CharSpan> out;
        std::size_t s = r.start;
        auto const is_break = [&](char32_t c) { return words ? is_space(c) : c == U'\n'; };
        for (std::size_t i = r.start; i <= r.end; ++i) {
            if (i == r.end || is_break(m_text[i])) {
                auto t = markdown::trim(m_text, CharSpan{s, i});
                if (!t.empty()) {
                    out.push_back(t);
                }
                s = i + 1;
            }
        }
        return out;
    }

    static std::vector<CharSpan> pack(const std::vector<CharSpan>& atoms, std::size_t limit)
    {
        std::vector<CharSpan> out;
        for (auto const& a : atoms) {
            if (!out.empty() && a.end - out.back().start <= limit) {
                out.back().end = a.end;
            } else {
                out.push_back(a);
            }
        }
        return out;
    }

    /// Splits a non-atomic range into pieces no longer than `limit`, preferring
    /// line breaks, then word boundaries, then a hard cut.
    std::vector<CharSpan> split_to_limit(CharSpan r, std::size_t limit, int level = 0) const
    {
        if (r.length() <= limit) {
            return {r};
        }
        if (level >= 2) {
            std::vector<CharSpan> out;
            for (auto s = r.start; s < r.end; s += limit) {
                out.push_back({s, std::min(r.end, s + limit)});
            }
            return out;
        }
        std::vector<CharSpan> fine;
        for (auto const& a : atoms(r, level == 1)) {
            auto sub = split_to_limit(a, limit, level + 1);
            fine.insert(fine.end(), sub.begin(), sub.end());
        }
        return pack(fine, limit);
    }

    std::vector<Piece> pieces_of(const Segment& seg) const
    {
        auto const plen = prefix_len(seg.path);
        auto const max = m_cfg.max_chunk_chars;
        auto const limit = max > plen ? max - plen : 1;

        std::vector<Unit> units;
        for (auto const& u : seg.units) {
            if (u.atomic || plen + u.range.length() <= max) {
                units.push_back(u);
                continue;
            }
            for (auto const& r : split_to_limit(u.range, limit)) {
                units.push_back({r, false});
            }
        }

        std::vector<Piece> out;
        Piece cur{{}, seg.path, seg.parent, false};
        auto flush = [&] {
            if (!cur.units.empty()) {
                out.push_back(cur);
                cur.units.clear();
            }
        };
        for (auto const& u : units) {
            if (u.atomic && plen + u.range.length() > max) {
                flush();
                out.push_back(Piece{{u}, seg.path, seg.parent, true});
                continue;
            }
            if (!cur.units.empty() && plen + (u.range.end - cur.units.front().range.start) > max) {
                flush();
            }
            cur.units.push_back(u);
        }
        flush();
        return out;
    }

    static std::vector<std::string> common_path(const std::vector<std::string>& a, const std::vector<std::string>& b)
    {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < std::min(a.size(), b.size()) && a[i] == b[i]; ++i) {
            out.push_back(a[i]);
        }
        return out;
    }

    static Piece merged(const Piece& a, const Piece& b)
    {
        Piece m = a;
        m.units.insert(m.units.end(), b.units.begin(), b.units.end());
        m.path = common_path(a.path, b.path);
        m.oversize = a.oversize || b.oversize;
        return m;
    }

    bool in_bounds(std::size_t len) const
    {
        return len >= m_cfg.min_chunk_chars && len <= m_cfg.max_chunk_chars;
    }

    bool short_piece(const Piece& p) const { return !p.oversize && length(p) < m_cfg.min_chunk_chars; }

    /// Under-min pieces merge into the following sibling with the same parent,
    /// and the last short sibling merges backward, as long as the result fits.
    void merge_siblings(std::vector<Piece>& pieces) const
    {
        for (std::size_t i = 0; i + 1 < pieces.size();) {
            auto& p = pieces[i];
            auto const& q = pieces[i + 1];
            if (short_piece(p) && !q.oversize && q.parent == p.parent) {
                auto m = merged(p, q);
                if (length(m) <= m_cfg.max_chunk_chars) {
                    p = std::move(m);
                    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(i) + 1);
                    continue;
                }
            }
            ++i;
        }
        for (std::size_t i = 1; i < pieces.size();) {
            auto const& p = pieces[i];
            auto const& prev = pieces[i - 1];
            bool const last_sibling = i + 1 == pieces.size() || pieces[i + 1].parent != p.parent;
            if (short_piece(p) && last_sibling && !prev.oversize && prev.parent == p.parent) {
                auto m = merged(prev, p);
                if (length(m) <= m_cfg.max_chunk_chars) {
                    pieces[i - 1] = std::move(m);
                    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(i));
                    continue;
                }
            }
            ++i;
        }
    }

    /// Re-splits two adjacent pieces at a new boundary so that both end up in
    /// bounds. Candidate cuts are tried at block boundaries first, then line
    /// breaks, then word boundaries; atomic units are never cut.
    bool rebalance(std::vector<Piece>& pieces, std::size_t a) const
    {
        auto const path = common_path(pieces[a].path, pieces[a + 1].path);
        std::vector<Unit> units = pieces[a].units;
        units.insert(units.end(), pieces[a + 1].units.begin(), pieces[a + 1].units.end());

        for (int level = 0; level < 3; ++level) {
            if (level > 0) {
                std::vector<Unit> finer;
                for (auto const& u : units) {
                    if (u.atomic) {
                        finer.push_back(u);
                        continue;
                    }
                    for (auto const& r : atoms(u.range, level == 2)) {
                        finer.push_back({r, false});
                    }
                }
                units = std::move(finer);
            }
            std::size_t best = 0;
            std::size_t best_diff = std::numeric_limits<std::size_t>::max();
            for (std::size_t k = 1; k < units.size(); ++k) {
                std::vector<Unit> first(units.begin(), units.begin() + static_cast<std::ptrdiff_t>(k));
                std::vector<Unit> second(units.begin() + static_cast<std::ptrdiff_t>(k), units.end());
                auto const l1 = length(first, path);
                auto const l2 = length(second, path);
                if (in_bounds(l1) && in_bounds(l2)) {
                    auto const diff = l1 > l2 ? l1 - l2 : l2 - l1;
                    if (diff < best_diff) {
                        best_diff = diff;
                        best = k;
                    }
                }
            }
            if (best > 0) {
                auto const parent_a = pieces[a].parent;
                auto const parent_b = pieces[a + 1].parent;
                pieces[a] = Piece{{units.begin(), units.begin() + static_cast<std::ptrdiff_t>(best)}, path, parent_a,
                                  false};
                pieces[a + 1] =
                    Piece{{units.begin() + static_cast<std::ptrdiff_t>(best), units.end()}, path, parent_b, false};
                return true;
            }
        }
        return false;
    }

    /// Second pass for pieces still under the minimum: merge with any
    /// neighbour, then re-split with a neighbour, then fold into an adjacent
    /// oversize piece. Whatever is left can only be a document whose whole
    /// content is shorter than the minimum.
    void repair_short(std::vector<Piece>& pieces) const
    {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < pieces.size() && !changed; ++i) {
                if (!short_piece(pieces[i])) {
                    continue;
                }
                auto const try_merge = [&](std::size_t a, bool allow_oversize) {
                    auto m = merged(pieces[a], pieces[a + 1]);
                    if (!allow_oversize && (m.oversize || length(m) > m_cfg.max_chunk_chars)) {
                        return false;
                    }
                    if (allow_oversize && !m.oversize) {
                        if (length(m) <= m_cfg.max_chunk_chars) {
                            // fits after all
                        } else if (m.has_atomic()) {
                            m.oversize = true;
                        } else {
                            return false;
                        }
                    }
                    pieces[a] = std::move(m);
                    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(a) + 1);
                    return true;
                };
                bool const has_next = i + 1 < pieces.size();
                bool const has_prev = i > 0;
                changed = (has_next && try_merge(i, false)) || (has_prev && try_merge(i - 1, false)) ||
                          (has_next && !pieces[i + 1].oversize && rebalance(pieces, i)) ||
                          (has_prev && !pieces[i - 1].oversize && rebalance(pieces, i - 1)) ||
                          (has_next && try_merge(i, true)) || (has_prev && try_merge(i - 1, true));
            }
        }
    }

    std::vector<Piece> run(const SectionNode& root) const
    {
        std::vector<Segment> segments;
        std::size_t next_id = 0;
        collect(root, {}, std::numeric_limits<std::size_t>::max(), next_id, segments);
        std::vector<Piece> pieces;
        for (auto const& seg : segments) {
            auto p = pieces_of(seg);
            pieces.insert(pieces.end(), p.begin(), p.end());
        }
        merge_siblings(pieces);
        repair_short(pieces);
        return pieces;
    }

  private:
    std::u32string_view m_text;
    const ChunkerConfig& m_cfg;
};

}  // namespace detail::chunking

/// Splits a document into title-prefixed chunks along section boundaries.
///
/// Sections become initial segments. A segment whose prefixed length exceeds
/// the maximum is split by greedily packing whole blocks; a table or code
/// fence longer than the maximum becomes its own chunk flagged
/// atomic_oversize. Segments under the minimum merge into the following
/// sibling (the last one backward). Anything still short is then merged or
/// re-split with its neighbours regardless of parent.
inline std::vector<Chunk> chunk_document(const Document& doc, const ChunkerConfig& cfg = {})
{
    cfg.validate();
    auto const text = utf8::decode(doc.markdown);
    auto const root = markdown::parse_sections(text, doc.title);
    detail::chunking::Chunker chunker(text, cfg);
    auto const pieces = chunker.run(root);

    std::vector<Chunk> out;
    out.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        auto const& p = pieces[i];
        Chunk c;
        c.chunk_id = make_chunk_id(doc.doc_id, i);
        c.doc_id = doc.doc_id;
        c.title_path = p.path;
        c.prefix = render_prefix(p.path, cfg);
        c.source_range = p.extent();
        c.body = utf8::encode(slice(text, c.source_range));
        c.atomic_oversize = p.oversize;
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkerConfig& cfg = {})
{
    std::vector<Chunk> out;
    for (auto const& d : docs) {
        auto c = chunk_document(d, cfg);
        out.insert(out.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
    }
    return out;
}

}  // namespace verbatim
