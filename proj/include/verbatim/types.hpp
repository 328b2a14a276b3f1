#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "span.hpp"

namespace verbatim {

struct Document {
    std::string doc_id;
    std::string source_path;
    std::string title;
    std::string markdown;  // UTF-8
    std::size_t length_chars = 0;

    friend bool operator==(const Document&, const Document&) = default;
};

/// One node of a document's heading tree. body_range covers the heading line
/// and everything up to the next heading of the same or lower level, so it
/// contains the ranges of all children.
struct SectionNode {
    int level = 0;  // 0 = document root
    std::string title;
    CharSpan body_range;
    CharSpan heading_range;  // empty for the root
    std::vector<SectionNode> children;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::vector<std::string> title_path;
    std::string prefix;
    std::string body;
    CharSpan source_range;
    bool atomic_oversize = false;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

enum class Relevance { relevant, irrelevant, unjudgeable };

inline std::string_view to_string(Relevance r)
{
    switch (r) {
    case Relevance::relevant: return "relevant";
    case Relevance::irrelevant: return "irrelevant";
    case Relevance::unjudgeable: return "unjudgeable";
    }
    return "unknown";
}

inline Relevance parse_relevance(std::string_view s)
{
    if (s == "relevant") {
        return Relevance::relevant;
    }
    if (s == "irrelevant") {
        return Relevance::irrelevant;
    }
    if (s == "unjudgeable") {
        return Relevance::unjudgeable;
    }
    throw FormatError("unknown relevance value '" + std::string(s) + "'");
}

struct GoldRow {
    std::string query_id;
    std::string query_text;
    std::string chunk_id;
    std::string chunk_text;
    Relevance relevance = Relevance::irrelevant;
    std::vector<CharSpan> gold_spans;

    friend bool operator==(const GoldRow&, const GoldRow&) = default;
};

struct ExtractionResult {
    std::string query_id;
    std::string chunk_id;
    std::vector<CharSpan> spans;  // most relevant first
    std::string backend;
    bool abstained = true;
    std::optional<double> latency_s;

    friend bool operator==(const ExtractionResult&, const ExtractionResult&) = default;
};

struct SyntheticQuery {
    std::string query_id;
    std::string chunk_id;
    std::string question_type;
    std::string question;
    std::string query;
    std::string model;
    std::string prompt_version;

    friend bool operator==(const SyntheticQuery&, const SyntheticQuery&) = default;
};

}  // namespace verbatim
