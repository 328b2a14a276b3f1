#pragma once

#include <random>
#include <string>
#include <vector>

#include <verbatim/types.hpp>
#include <verbatim/utf8.hpp>

#include "test_util.hpp"

namespace verbatim::testing {

/// A gold set with the benchmark's shape: 20 queries x top-5 chunks = 100
/// rows, 47 relevant rows carrying 78 spans in total (31 rows with two spans,
/// 16 with one), 53 irrelevant rows without spans.
inline std::vector<GoldRow> benchmark_shaped_gold(std::uint64_t seed = 7)
{
    std::mt19937_64 rng(seed);
    std::vector<GoldRow> rows;
    std::size_t relevant = 0;
    std::size_t two_span_rows = 0;
    for (int q = 0; q < 20; ++q) {
        for (int c = 0; c < 5; ++c) {
            GoldRow row;
            row.query_id = "q" + std::to_string(q);
            row.query_text = random_sentence(rng, 3, 6);
            row.chunk_id = "paper" + std::to_string(q * 5 + c) + "#000" + std::to_string(c);
            row.chunk_text = random_paragraph(rng, 400 + 40 * static_cast<std::size_t>(c));
            auto const index = static_cast<std::size_t>(q * 5 + c);
            // every other row is relevant until 47 are placed
            if (index % 2 == 0 && relevant < 47) {
                ++relevant;
                row.relevance = Relevance::relevant;
                auto const len = utf8::length(row.chunk_text);
                if (two_span_rows < 31) {
                    ++two_span_rows;
                    row.gold_spans = {{5, len / 3}, {len / 2, len - 5}};
                } else {
                    row.gold_spans = {{10, len / 2}};
                }
            } else {
                row.relevance = Relevance::irrelevant;
            }
            rows.push_back(std::move(row));
        }
    }
    // 50 even indices exist; the loop stops at 47 relevant
    return rows;
}

/// 99 characters: ten 9-letter words joined by single spaces.
inline std::string ten_word_text()
{
    std::string s;
    for (int i = 0; i < 10; ++i) {
        if (i > 0) {
            s += ' ';
        }
        s += std::string(9, static_cast<char>('a' + i));
    }
    return s;
}

}  // namespace verbatim::testing
