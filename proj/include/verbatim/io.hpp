#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "log.hpp"
#include "types.hpp"
#include "utf8.hpp"

namespace verbatim {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

inline Json parse_json(std::string_view text, const std::string& what)
{
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(what + ": " + e.what());
    }
}

inline std::vector<Json> read_jsonl(const std::filesystem::path& path)
{
    std::vector<Json> rows;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        rows.push_back(parse_json(line, path.string() + ":" + std::to_string(lineno)));
    }
    return rows;
}

template <typename T>
std::string to_jsonl(const std::vector<T>& items)
{
    std::string out;
    for (auto const& item : items) {
        out += Json(item).dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON mappings

inline void to_json(Json& j, const CharSpan& s) { j = Json::array({s.start, s.end}); }

inline void from_json(const Json& j, CharSpan& s)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
        throw FormatError("span must be a [start, end] integer pair, got " + j.dump());
    }
    auto a = j[0].get<long long>();
    auto b = j[1].get<long long>();
    if (a < 0 || b <= a) {
        throw FormatError("span must satisfy 0 <= start < end, got " + j.dump());
    }
    s = CharSpan{static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

inline void to_json(Json& j, const Chunk& c)
{
    j = Json{{"chunk_id", c.chunk_id},
             {"doc_id", c.doc_id},
             {"title_path", c.title_path},
             {"prefix", c.prefix},
             {"body", c.body},
             {"source_range", c.source_range},
             {"atomic_oversize", c.atomic_oversize}};
}

inline void from_json(const Json& j, Chunk& c)
{
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.title_path = j.at("title_path").get<std::vector<std::string>>();
    c.prefix = j.at("prefix").get<std::string>();
    c.body = j.at("body").get<std::string>();
    c.source_range = j.at("source_range").get<CharSpan>();
    c.atomic_oversize = j.value("atomic_oversize", false);
}

inline void to_json(Json& j, const ExtractionResult& r)
{
    j = Json{{"query_id", r.query_id},
             {"chunk_id", r.chunk_id},
             {"spans", r.spans},
             {"backend", r.backend},
             {"abstained", r.abstained}};
    if (r.latency_s) {
        j["latency_s"] = *r.latency_s;
    }
}

inline void from_json(const Json& j, ExtractionResult& r)
{
    r.query_id = j.at("query_id").get<std::string>();
    r.chunk_id = j.at("chunk_id").get<std::string>();
    r.spans = j.at("spans").get<std::vector<CharSpan>>();
    r.backend = j.value("backend", std::string{});
    r.abstained = j.value("abstained", r.spans.empty());
    if (j.contains("latency_s") && !j["latency_s"].is_null()) {
        r.latency_s = j["latency_s"].get<double>();
    } else {
        r.latency_s.reset();
    }
    if (r.abstained != r.spans.empty()) {
        throw FormatError("prediction " + r.query_id + "/" + r.chunk_id +
                          ": abstained must be true iff spans is empty");
    }
}

inline void to_json(Json& j, const SyntheticQuery& q)
{
    j = Json{{"query_id", q.query_id},
             {"chunk_id", q.chunk_id},
             {"question_type", q.question_type},
             {"question", q.question},
             {"query", q.query},
             {"provenance", {{"model", q.model}, {"prompt_version", q.prompt_version}}}};
}

inline void from_json(const Json& j, SyntheticQuery& q)
{
    q.query_id = j.at("query_id").get<std::string>();
    q.chunk_id = j.at("chunk_id").get<std::string>();
    q.question_type = j.at("question_type").get<std::string>();
    q.question = j.at("question").get<std::string>();
    q.query = j.at("query").get<std::string>();
    auto const& p = j.at("provenance");
    q.model = p.value("model", std::string{});
    q.prompt_version = p.value("prompt_version", std::string{});
}

inline void to_json(Json& j, const GoldRow& r)
{
    j = Json{{"query_id", r.query_id},
             {"query_text", r.query_text},
             {"chunk_id", r.chunk_id},
             {"chunk_text", r.chunk_text},
             {"relevance", std::string(to_string(r.relevance))},
             {"gold_spans", r.gold_spans}};
}

// ---------------------------------------------------------------------------
// Corpus

struct CorpusLoad {
    std::vector<Document> documents;
    std::vector<std::string> skipped;  // relative paths of files that could not be used
};

namespace detail {

inline bool is_markdown(const std::filesystem::path& p)
{
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".md" || ext == ".markdown";
}

/// First level-1 ATX heading outside a code fence, else the fallback.
inline std::string guess_title(std::string_view md, std::string fallback)
{
    std::istringstream in{std::string(md)};
    std::string line;
    bool fenced = false;
    while (std::getline(in, line)) {
        auto lead = line.find_first_not_of(' ');
        if (lead == std::string::npos || lead > 3) {
            continue;
        }
        auto body = std::string_view(line).substr(lead);
        if (body.starts_with("```") || body.starts_with("~~~")) {
            fenced = !fenced;
            continue;
        }
        if (!fenced && body.starts_with("# ")) {
            auto t = std::string(body.substr(2));
            while (!t.empty() && (t.back() == ' ' || t.back() == '\r' || t.back() == '#')) {
                t.pop_back();
            }
            if (!t.empty()) {
                return t;
            }
        }
    }
    return fallback;
}

}  // namespace detail

/// Reads every .md/.markdown file below `dir`, ordered by relative path.
/// doc_id is the relative path without extension. Files that are not valid
/// UTF-8 or are empty are skipped with a warning.
inline CorpusLoad load_corpus(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw IoError("corpus directory not readable: " + dir.string());
    }
    std::vector<fs::path> files;
    fs::recursive_directory_iterator it(dir, fs::directory_options::skip_permission_denied, ec);
    if (ec) {
        throw IoError("corpus directory not readable: " + dir.string() + ": " + ec.message());
    }
    for (auto const& entry : it) {
        if (entry.is_regular_file() && detail::is_markdown(entry.path())) {
            files.push_back(fs::relative(entry.path(), dir));
        }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

    CorpusLoad out;
    std::set<std::string> ids;
    for (auto const& rel : files) {
        auto const rel_str = rel.generic_string();
        std::string text;
        try {
            text = read_file(dir / rel);
        } catch (const IoError& e) {
            log::warn(std::string("skipping ") + rel_str + ": " + e.what());
            out.skipped.push_back(rel_str);
            continue;
        }
        if (text.starts_with("\xEF\xBB\xBF")) {
            text.erase(0, 3);
        }
        if (!utf8::is_valid(text)) {
            log::warn("skipping " + rel_str + ": not valid UTF-8");
            out.skipped.push_back(rel_str);
            continue;
        }
        if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
            log::warn("skipping " + rel_str + ": empty document");
            out.skipped.push_back(rel_str);
            continue;
        }
        auto id = (rel.parent_path() / rel.stem()).generic_string();
        if (!ids.insert(id).second) {
            log::warn("skipping " + rel_str + ": duplicate doc_id " + id);
            out.skipped.push_back(rel_str);
            continue;
        }
        Document doc;
        doc.doc_id = id;
        doc.source_path = rel_str;
        doc.title = detail::guess_title(text, rel.stem().string());
        doc.length_chars = utf8::length(text);
        doc.markdown = std::move(text);
        out.documents.push_back(std::move(doc));
    }
    if (!out.skipped.empty()) {
        log::warn(std::to_string(out.skipped.size()) + " corpus file(s) skipped");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gold rows

enum class OffsetUnit { character, byte };

namespace detail {

inline CharSpan bytes_to_chars(CharSpan s, const std::vector<std::optional<std::size_t>>& table,
                               const std::string& row)
{
    if (s.end >= table.size() || !table[s.start] || !table[s.end]) {
        throw FormatError("gold row " + row + ": byte span " + to_string(s) +
                          " does not fall on character boundaries");
    }
    return CharSpan{*table[s.start], *table[s.end]};
}

}  // namespace detail

/// Checks the row invariants; throws FormatError naming the row.
inline void validate(const GoldRow& row)
{
    auto const name = row.query_id + "/" + row.chunk_id;
    if (row.relevance != Relevance::relevant && !row.gold_spans.empty()) {
        throw FormatError("gold row " + name + ": relevance '" + std::string(to_string(row.relevance)) +
                          "' must not carry gold spans");
    }
    auto const len = utf8::length(row.chunk_text);
    for (std::size_t i = 0; i < row.gold_spans.size(); ++i) {
        auto const& s = row.gold_spans[i];
        if (!s.valid_in(len)) {
            throw FormatError("gold row " + name + ": span " + to_string(s) +
                              " out of bounds for chunk of " + std::to_string(len) + " characters");
        }
        if (i > 0 && s.start < row.gold_spans[i - 1].end) {
            throw FormatError("gold row " + name + ": spans must be sorted and non-overlapping (" +
                              to_string(row.gold_spans[i - 1]) + " then " + to_string(s) + ")");
        }
    }
}

/// Parses gold rows from JSON text. Accepts either a bare array of rows
/// (character offsets) or {"offset_unit": "char"|"byte", "rows": [...]}.
inline std::vector<GoldRow> parse_gold(std::string_view text, const std::string& origin = "gold")
{
    auto j = parse_json(text, origin);
    auto unit = OffsetUnit::character;
    const Json* rows = &j;
    if (j.is_object()) {
        auto u = j.value("offset_unit", std::string("char"));
        if (u == "byte" || u == "bytes") {
            unit = OffsetUnit::byte;
        } else if (u != "char" && u != "chars" && u != "character") {
            throw FormatError(origin + ": unknown offset_unit '" + u + "'");
        }
        if (!j.contains("rows")) {
            throw FormatError(origin + ": missing 'rows'");
        }
        rows = &j["rows"];
    }
    if (!rows->is_array()) {
        throw FormatError(origin + ": expected an array of gold rows");
    }
    std::vector<GoldRow> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (auto const& r : *rows) {
        GoldRow row;
        try {
            row.query_id = r.at("query_id").get<std::string>();
            row.query_text = r.value("query_text", std::string{});
            row.chunk_id = r.at("chunk_id").get<std::string>();
            row.chunk_text = r.at("chunk_text").get<std::string>();
            row.relevance = parse_relevance(r.at("relevance").get<std::string>());
            row.gold_spans = r.value("gold_spans", Json::array()).get<std::vector<CharSpan>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(origin + ": malformed gold row " + r.value("query_id", std::string("?")) +
                              ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(origin + ": gold row " + r.value("query_id", std::string("?")) + ": " +
                              e.what());
        }
        if (!utf8::is_valid(row.chunk_text)) {
            throw FormatError("gold row " + row.query_id + ": chunk_text is not valid UTF-8");
        }
        if (unit == OffsetUnit::byte) {
            auto table = utf8::byte_to_char_table(row.chunk_text);
            for (auto& s : row.gold_spans) {
                if (s.end >= table.size()) {
                    throw FormatError("gold row " + row.query_id + "/" + row.chunk_id + ": span " +
                                      to_string(s) + " out of bounds");
                }
                s = detail::bytes_to_chars(s, table, row.query_id + "/" + row.chunk_id);
            }
        }
        validate(row);
        if (!seen.emplace(row.query_id, row.chunk_id).second) {
            throw FormatError("gold row " + row.query_id + "/" + row.chunk_id + " appears twice");
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline std::vector<GoldRow> load_gold(const std::filesystem::path& path)
{
    return parse_gold(read_file(path), path.string());
}

inline void save_gold(const std::vector<GoldRow>& rows, const std::filesystem::path& path)
{
    write_file(path, Json(rows).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Predictions

inline std::string serialize_results(const std::vector<ExtractionResult>& results)
{
    return Json(results).dump(2) + "\n";
}

inline std::vector<ExtractionResult> parse_results(std::string_view text, const std::string& origin = "predictions")
{
    auto j = parse_json(text, origin);
    if (!j.is_array()) {
        throw FormatError(origin + ": expected an array of predictions");
    }
    std::vector<ExtractionResult> out;
    out.reserve(j.size());
    for (auto const& r : j) {
        try {
            out.push_back(r.get<ExtractionResult>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(origin + ": malformed prediction: " + e.what());
        }
    }
    return out;
}

inline void save_results(const std::vector<ExtractionResult>& results, const std::filesystem::path& path)
{
    write_file(path, serialize_results(results));
}

inline std::vector<ExtractionResult> load_results(const std::filesystem::path& path)
{
    return parse_results(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Chunk and query files (JSON lines)

inline void save_chunks(const std::vector<Chunk>& chunks, const std::filesystem::path& path)
{
    write_file(path, to_jsonl(chunks));
}

inline std::vector<Chunk> load_chunks(const std::filesystem::path& path)
{
    std::vector<Chunk> out;
    for (auto const& j : read_jsonl(path)) {
        try {
            out.push_back(j.get<Chunk>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": malformed chunk: " + e.what());
        }
    }
    return out;
}

inline void save_queries(const std::vector<SyntheticQuery>& queries, const std::filesystem::path& path)
{
    write_file(path, to_jsonl(queries));
}

inline std::vector<SyntheticQuery> load_queries(const std::filesystem::path& path)
{
    std::vector<SyntheticQuery> out;
    for (auto const& j : read_jsonl(path)) {
        try {
            out.push_back(j.get<SyntheticQuery>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": malformed query: " + e.what());
        }
    }
    return out;
}

}  // namespace verbatim
