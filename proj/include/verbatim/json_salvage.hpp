#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "io.hpp"

namespace verbatim::salvage {

/// End (exclusive) of the balanced bracket group opening at `open`, honouring
/// JSON string literals, or npos when it never closes.
inline std::size_t balanced_end(std::string_view s, std::size_t open)
{
    char const o = s[open];
    char const c = o == '[' ? ']' : '}';
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char const ch = s[i];
        if (in_string) {
            if (ch == '\\') {
                ++i;
            } else if (ch == '"') {
                in_string = false;
            }
            continue;
        }
        if (ch == '"') {
            in_string = true;
        } else if (ch == o) {
            ++depth;
        } else if (ch == c && --depth == 0) {
            return i + 1;
        }
    }
    return std::string_view::npos;
}

inline std::optional<Json> try_parse(std::string_view s)
{
    auto j = Json::parse(s.begin(), s.end(), nullptr, false);
    if (j.is_discarded()) {
        return std::nullopt;
    }
    return j;
}

/// Body of the first ``` fenced block, if any.
inline std::optional<std::string_view> fenced_block(std::string_view s)
{
    auto open = s.find("```");
    if (open == std::string_view::npos) {
        return std::nullopt;
    }
    auto body = s.find('\n', open);
    if (body == std::string_view::npos) {
        return std::nullopt;
    }
    auto close = s.find("```", body + 1);
    if (close == std::string_view::npos) {
        return std::nullopt;
    }
    return s.substr(body + 1, close - body - 1);
}

/// The first top-level JSON value of the given kind ('[' or '{') that parses.
inline std::optional<Json> first_of_kind(std::string_view s, char open)
{
    for (auto pos = s.find(open); pos != std::string_view::npos; pos = s.find(open, pos + 1)) {
        auto end = balanced_end(s, pos);
        if (end == std::string_view::npos) {
            continue;
        }
        if (auto j = try_parse(s.substr(pos, end - pos))) {
            return j;
        }
    }
    return std::nullopt;
}

/// Whole response if it is an array, else the first array inside it.
inline std::optional<Json> json_array(std::string_view s)
{
    if (auto j = try_parse(s); j && j->is_array()) {
        return j;
    }
    return first_of_kind(s, '[');
}

/// Whole response if it is an object, else the body of a code fence, else the
/// first balanced object.
inline std::optional<Json> json_object(std::string_view s)
{
    if (auto j = try_parse(s); j && j->is_object()) {
        return j;
    }
    if (auto fence = fenced_block(s)) {
        if (auto j = try_parse(*fence); j && j->is_object()) {
            return j;
        }
    }
    return first_of_kind(s, '{');
}

}  // namespace verbatim::salvage
