#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hash.hpp"
#include "index.hpp"
#include "io.hpp"

// On-disk layout of an index directory:
//   manifest.json  format tag, version, embedder id, dimension, counts, and
//                  size + CRC-32 of every data file
//   lexical.bin    BM25 parameters, document table, postings
//   dense.bin      unit vectors
//   chunks.jsonl   the indexed chunks
// Binary files are little-endian and start with a 4-byte magic and a u32
// format version.
namespace verbatim {

inline constexpr std::uint32_t kIndexFormatVersion = 1;

namespace detail::store {

class Writer {
  public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            m_buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            m_buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        m_buf.append(s);
    }
    void raw(std::string_view s) { m_buf.append(s); }
    const std::string& bytes() const { return m_buf; }

  private:
    std::string m_buf;
};

class Reader {
  public:
    Reader(std::string_view data, std::string name) : m_data(data), m_name(std::move(name)) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(m_data[m_pos++])) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(m_data[m_pos++])) << (8 * i);
        }
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str()
    {
        auto const n = u32();
        need(n);
        std::string s(m_data.substr(m_pos, n));
        m_pos += n;
        return s;
    }
    std::string_view raw(std::size_t n)
    {
        need(n);
        auto s = m_data.substr(m_pos, n);
        m_pos += n;
        return s;
    }
    bool done() const { return m_pos == m_data.size(); }

  private:
    void need(std::size_t n) const
    {
        if (m_data.size() - m_pos < n) {
            throw FormatError(m_name + ": unexpected end of data");
        }
    }

    std::string_view m_data;
    std::size_t m_pos = 0;
    std::string m_name;
};

inline void header(Writer& w, std::string_view magic)
{
    w.raw(magic);
    w.u32(kIndexFormatVersion);
}

inline void expect_header(Reader& r, std::string_view magic, const std::string& name)
{
    if (r.raw(4) != magic) {
        throw FormatError(name + ": bad magic, not an index file");
    }
    auto const v = r.u32();
    if (v != kIndexFormatVersion) {
        throw VersionError(name + " has format version " + std::to_string(v) + " but this build reads version " +
                           std::to_string(kIndexFormatVersion) + "; rebuild the index with `verbatim index`");
    }
}

inline std::string encode_lexical(const LexicalIndex& idx)
{
    Writer w;
    header(w, "VQLX");
    w.f64(idx.params().k1);
    w.f64(idx.params().b);
    w.u32(static_cast<std::uint32_t>(idx.doc_count()));
    for (std::size_t i = 0; i < idx.doc_count(); ++i) {
        w.str(idx.ids()[i]);
        w.u32(idx.lengths()[i]);
    }
    w.u32(static_cast<std::uint32_t>(idx.postings().size()));
    for (auto const& [term, list] : idx.postings()) {
        w.str(term);
        w.u32(static_cast<std::uint32_t>(list.size()));
        for (auto const& p : list) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    return w.bytes();
}

inline LexicalIndex decode_lexical(std::string_view data)
{
    Reader r(data, "lexical.bin");
    expect_header(r, "VQLX", "lexical.bin");
    Bm25Params params;
    params.k1 = r.f64();
    params.b = r.f64();
    auto const n = r.u32();
    std::vector<std::string> ids;
    std::vector<std::uint32_t> lengths;
    for (std::uint32_t i = 0; i < n; ++i) {
        ids.push_back(r.str());
        lengths.push_back(r.u32());
    }
    std::map<std::string, std::vector<Posting>> postings;
    auto const terms = r.u32();
    for (std::uint32_t t = 0; t < terms; ++t) {
        auto term = r.str();
        auto const m = r.u32();
        std::vector<Posting> list;
        list.reserve(m);
        for (std::uint32_t j = 0; j < m; ++j) {
            auto const doc = r.u32();
            auto const tf = r.u32();
            list.push_back({doc, tf});
        }
        postings.emplace(std::move(term), std::move(list));
    }
    if (!r.done()) {
        throw FormatError("lexical.bin: trailing bytes");
    }
    return LexicalIndex::from_parts(std::move(ids), std::move(lengths), std::move(postings), params);
}

inline std::string encode_dense(const DenseIndex& idx)
{
    Writer w;
    header(w, "VQDN");
    w.str(idx.embedder_id());
    w.u32(static_cast<std::uint32_t>(idx.dim()));
    w.u32(static_cast<std::uint32_t>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        w.str(idx.ids()[i]);
        for (float x : idx.vector(i)) {
            w.f32(x);
        }
    }
    return w.bytes();
}

inline DenseIndex decode_dense(std::string_view data)
{
    Reader r(data, "dense.bin");
    expect_header(r, "VQDN", "dense.bin");
    auto id = r.str();
    auto const dim = r.u32();
    auto const n = r.u32();
    DenseIndex idx(dim, std::move(id));
    std::vector<float> v(dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto chunk_id = r.str();
        for (auto& x : v) {
            x = r.f32();
        }
        idx.add_raw(std::move(chunk_id), v);
    }
    if (!r.done()) {
        throw FormatError("dense.bin: trailing bytes");
    }
    return idx;
}

inline std::string crc_hex(std::string_view bytes)
{
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", hash::crc32(bytes));
    return buf;
}

}  // namespace detail::store

/// Writes the index into `dir` (created if needed), replacing any previous files.
inline void persist_index(const RetrievalIndex& index, const std::filesystem::path& dir)
{
    using namespace detail::store;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create index directory " + dir.string() + ": " + ec.message());
    }
    std::vector<std::pair<std::string, std::string>> files{
        {"lexical.bin", encode_lexical(index.lexical)},
        {"dense.bin", encode_dense(index.dense)},
        {"chunks.jsonl", to_jsonl(index.chunks)},
    };
    Json manifest{{"format", "verbatim-index"},
                  {"version", kIndexFormatVersion},
                  {"embedder_id", index.dense.embedder_id()},
                  {"dim", index.dense.dim()},
                  {"counts",
                   {{"chunks", index.chunks.size()},
                    {"terms", index.lexical.postings().size()},
                    {"vectors", index.dense.size()}}},
                  {"bm25", {{"k1", index.lexical.params().k1}, {"b", index.lexical.params().b}}},
                  {"files", Json::object()}};
    for (auto const& [name, bytes] : files) {
        write_file(dir / name, bytes);
        manifest["files"][name] = {{"bytes", bytes.size()}, {"crc32", crc_hex(bytes)}};
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Loads and verifies an index directory. Any mismatch (version, size,
/// checksum) throws before anything is returned.
inline RetrievalIndex load_index(const std::filesystem::path& dir)
{
    using namespace detail::store;
    if (!std::filesystem::exists(dir / "manifest.json")) {
        throw IoError("no index found at " + dir.string() + "; build one with `verbatim index`");
    }
    auto const manifest = parse_json(read_file(dir / "manifest.json"), (dir / "manifest.json").string());
    if (manifest.value("format", std::string{}) != "verbatim-index") {
        throw FormatError(dir.string() + " does not contain a verbatim index manifest");
    }
    auto const version = manifest.value("version", 0U);
    if (version != kIndexFormatVersion) {
        throw VersionError("index at " + dir.string() + " has format version " + std::to_string(version) +
                           " but this build reads version " + std::to_string(kIndexFormatVersion) +
                           "; rebuild the index with `verbatim index`");
    }
    auto load = [&](const std::string& name) {
        auto const& meta = manifest.at("files").at(name);
        auto bytes = read_file(dir / name);
        if (bytes.size() != meta.at("bytes").get<std::size_t>() || crc_hex(bytes) != meta.at("crc32").get<std::string>()) {
            throw ChecksumError("checksum mismatch for " + (dir / name).string() +
                                "; the index is corrupt or truncated, rebuild it");
        }
        return bytes;
    };
    try {
        auto const lexical_bytes = load("lexical.bin");
        auto const dense_bytes = load("dense.bin");
        auto const chunk_bytes = load("chunks.jsonl");

        RetrievalIndex index;
        index.lexical = decode_lexical(lexical_bytes);
        index.dense = decode_dense(dense_bytes);
        std::istringstream lines(chunk_bytes);
        std::string line;
        while (std::getline(lines, line)) {
            if (!line.empty()) {
                index.chunks.push_back(parse_json(line, "chunks.jsonl").get<Chunk>());
            }
        }
        if (index.chunks.size() != index.lexical.doc_count() || index.chunks.size() != index.dense.size()) {
            throw FormatError("index at " + dir.string() + " has inconsistent counts");
        }
        index.reindex_lookup();
        return index;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("index at " + dir.string() + " is malformed: " + e.what());
    }
}

}  // namespace verbatim
