#pragma once

#include <locale>
#include <string>
#include <string_view>
#include <vector>

#include "utf8.hpp"

namespace verbatim {

namespace detail {

inline const std::ctype<wchar_t>& unicode_ctype()
{
    static const std::locale loc = [] {
        for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
            try {
                return std::locale(name);
            } catch (const std::runtime_error&) {
            }
        }
        return std::locale::classic();
    }();
    return std::use_facet<std::ctype<wchar_t>>(loc);
}

}  // namespace detail

/// Lowercased word tokens: maximal runs of alphanumeric characters. No
/// stemming, no stopword removal. Invalid UTF-8 yields no tokens.
inline std::vector<std::string> tokenize(std::string_view text)
{
    static_assert(sizeof(wchar_t) == 4, "tokenizer relies on 32-bit wchar_t");
    auto const& ct = detail::unicode_ctype();
    std::vector<std::string> out;
    auto decoded = utf8::try_decode(text);
    if (!decoded) {
        return out;
    }
    std::string cur;
    for (char32_t c : *decoded) {
        auto const w = static_cast<wchar_t>(c);
        if (ct.is(std::ctype_base::alnum, w)) {
            utf8::append(cur, static_cast<char32_t>(ct.tolower(w)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

}  // namespace verbatim
