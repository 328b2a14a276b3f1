#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace verbatim {

/// Half-open character interval [start, end) into some host text.
struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    constexpr std::size_t length() const noexcept { return end > start ? end - start : 0; }
    constexpr bool empty() const noexcept { return end <= start; }

    /// 0 <= start < end <= text_length
    constexpr bool valid_in(std::size_t text_length) const noexcept
    {
        return start < end && end <= text_length;
    }

    constexpr bool contains(CharSpan other) const noexcept
    {
        return start <= other.start && other.end <= end;
    }

    friend constexpr auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

inline std::string to_string(CharSpan s)
{
    return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

constexpr std::size_t overlap(CharSpan a, CharSpan b) noexcept
{
    auto const lo = std::max(a.start, b.start);
    auto const hi = std::min(a.end, b.end);
    return hi > lo ? hi - lo : 0;
}

namespace spans {

inline bool sorted_disjoint(const std::vector<CharSpan>& s)
{
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i].start < s[i - 1].end) {
            return false;
        }
    }
    return true;
}

/// Sorted, disjoint union of the input; touching intervals are joined.
inline std::vector<CharSpan> union_of(std::vector<CharSpan> s)
{
    std::sort(s.begin(), s.end());
    std::vector<CharSpan> out;
    for (auto const& x : s) {
        if (x.empty()) {
            continue;
        }
        if (!out.empty() && x.start <= out.back().end) {
            out.back().end = std::max(out.back().end, x.end);
        } else {
            out.push_back(x);
        }
    }
    return out;
}

inline std::size_t total_length(const std::vector<CharSpan>& disjoint)
{
    std::size_t n = 0;
    for (auto const& s : disjoint) {
        n += s.length();
    }
    return n;
}

/// Characters of `s` covered by a sorted disjoint union.
inline std::size_t overlap_with(CharSpan s, const std::vector<CharSpan>& disjoint)
{
    auto it = std::lower_bound(disjoint.begin(), disjoint.end(), s.start,
                               [](CharSpan u, std::size_t pos) { return u.end <= pos; });
    std::size_t n = 0;
    for (; it != disjoint.end() && it->start < s.end; ++it) {
        n += overlap(s, *it);
    }
    return n;
}

}  // namespace spans

inline std::u32string_view slice(std::u32string_view text, CharSpan s)
{
    return text.substr(s.start, s.length());
}

}  // namespace verbatim
