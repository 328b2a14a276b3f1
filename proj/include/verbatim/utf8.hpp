#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

// All character offsets in this library count unicode scalar values. Text is
// stored as UTF-8 and decoded to UTF-32 wherever offsets are needed.
namespace verbatim::utf8 {

/// Strict decode. Returns nullopt on overlong forms, surrogates, truncated
/// sequences and code points above U+10FFFF.
inline std::optional<std::u32string> try_decode(std::string_view in)
{
    std::u32string out;
    out.reserve(in.size());
    std::size_t i = 0;
    auto const n = in.size();
    while (i < n) {
        auto const b0 = static_cast<unsigned char>(in[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        char32_t min = 0;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
            min = 0x80;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
            min = 0x800;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
            min = 0x10000;
        } else {
            return std::nullopt;
        }
        if (i + len > n) {
            return std::nullopt;
        }
        for (int k = 1; k < len; ++k) {
            auto const b = static_cast<unsigned char>(in[i + k]);
            if ((b & 0xC0) != 0x80) {
                return std::nullopt;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return std::nullopt;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline std::u32string decode(std::string_view in)
{
    auto out = try_decode(in);
    if (!out) {
        throw FormatError("invalid UTF-8 text");
    }
    return std::move(*out);
}

inline bool is_valid(std::string_view in) { return try_decode(in).has_value(); }

inline void append(std::string& out, char32_t cp)
{
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode(std::u32string_view in)
{
    std::string out;
    out.reserve(in.size());
    for (char32_t cp : in) {
        append(out, cp);
    }
    return out;
}

/// Number of scalar values in valid UTF-8 text.
inline std::size_t length(std::string_view in)
{
    std::size_t count = 0;
    for (char c : in) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
            ++count;
        }
    }
    return count;
}

/// Character offset for every byte offset 0..size (inclusive). Bytes inside a
/// multi-byte sequence map to nullopt, since no character boundary lies there.
inline std::vector<std::optional<std::size_t>> byte_to_char_table(std::string_view in)
{
    std::vector<std::optional<std::size_t>> table(in.size() + 1);
    std::size_t chars = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if ((static_cast<unsigned char>(in[i]) & 0xC0) != 0x80) {
            table[i] = chars++;
        }
    }
    table[in.size()] = chars;
    return table;
}

}  // namespace verbatim::utf8
