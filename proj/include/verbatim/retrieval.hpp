#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "tokenize.hpp"

namespace verbatim {

struct SearchHit {
    std::string chunk_id;
    double score = 0.0;
    std::optional<std::size_t> lexical_rank;  // 1-based
    std::optional<std::size_t> dense_rank;    // 1-based

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Descending score, ties by ascending chunk_id.
inline void sort_hits(std::vector<SearchHit>& hits)
{
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.chunk_id < b.chunk_id;
    });
}

inline void truncate_hits(std::vector<SearchHit>& hits, std::size_t k)
{
    if (hits.size() > k) {
        hits.resize(k);
    }
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Inverted index scored with Okapi BM25.
///
///   idf(t)    = ln(1 + (N - df + 0.5) / (df + 0.5))
///   score(d)  = sum over distinct query terms t of
///               idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avglen))
class LexicalIndex {
  public:
    LexicalIndex() = default;

    /// `docs` are (chunk_id, indexed text) pairs; ids must be unique.
    static LexicalIndex build(const std::vector<std::pair<std::string, std::string>>& docs, Bm25Params params = {})
    {
        LexicalIndex idx;
        idx.m_params = params;
        std::set<std::string> seen;
        std::uint64_t total = 0;
        for (auto const& [id, text] : docs) {
            if (!seen.insert(id).second) {
                throw FormatError("duplicate chunk_id in index build: " + id);
            }
            auto const doc = static_cast<std::uint32_t>(idx.m_ids.size());
            auto const tokens = tokenize(text);
            std::map<std::string, std::uint32_t> tf;
            for (auto const& t : tokens) {
                ++tf[t];
            }
            for (auto const& [term, n] : tf) {
                idx.m_postings[term].push_back({doc, n});
            }
            idx.m_ids.push_back(id);
            idx.m_lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
            total += tokens.size();
        }
        idx.m_avg_length = idx.m_ids.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(idx.m_ids.size());
        return idx;
    }

    /// Reassembles an index from persisted parts.
    static LexicalIndex from_parts(std::vector<std::string> ids, std::vector<std::uint32_t> lengths,
                                   std::map<std::string, std::vector<Posting>> postings, Bm25Params params)
    {
        if (ids.size() != lengths.size()) {
            throw FormatError("lexical index: id and length tables differ in size");
        }
        LexicalIndex idx;
        idx.m_ids = std::move(ids);
        idx.m_lengths = std::move(lengths);
        idx.m_postings = std::move(postings);
        idx.m_params = params;
        std::uint64_t total = 0;
        for (auto l : idx.m_lengths) {
            total += l;
        }
        for (auto const& [term, list] : idx.m_postings) {
            for (auto const& p : list) {
                if (p.doc >= idx.m_ids.size()) {
                    throw FormatError("lexical index: posting for '" + term + "' points past the last document");
                }
            }
        }
        idx.m_avg_length = idx.m_ids.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(idx.m_ids.size());
        return idx;
    }

    std::size_t doc_count() const noexcept { return m_ids.size(); }
    double avg_doc_length() const noexcept { return m_avg_length; }
    const Bm25Params& params() const noexcept { return m_params; }
    const std::vector<std::string>& ids() const noexcept { return m_ids; }
    const std::vector<std::uint32_t>& lengths() const noexcept { return m_lengths; }
    const std::map<std::string, std::vector<Posting>>& postings() const noexcept { return m_postings; }

    std::span<const Posting> postings(const std::string& term) const
    {
        auto it = m_postings.find(term);
        if (it == m_postings.end()) {
            return {};
        }
        return it->second;
    }

    double idf(std::size_t df) const
    {
        auto const n = static_cast<double>(m_ids.size());
        auto const d = static_cast<double>(df);
        return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }

    double term_weight(std::uint32_t tf, std::uint32_t doc_length, double idf_value) const
    {
        auto const f = static_cast<double>(tf);
        auto const norm = 1.0 - m_params.b + m_params.b * static_cast<double>(doc_length) / m_avg_length;
        return idf_value * f * (m_params.k1 + 1.0) / (f + m_params.k1 * norm);
    }

    /// Top-k chunks containing at least one query term.
    std::vector<SearchHit> search(std::string_view query, std::size_t k) const
    {
        if (k == 0) {
            throw FormatError("k must be at least 1");
        }
        auto tokens = tokenize(query);
        if (tokens.empty()) {
            throw FormatError("empty query");
        }
        std::set<std::string> terms(tokens.begin(), tokens.end());
        std::unordered_map<std::uint32_t, double> acc;
        for (auto const& t : terms) {
            auto list = postings(t);
            if (list.empty()) {
                continue;
            }
            auto const w = idf(list.size());
            for (auto const& p : list) {
                acc[p.doc] += term_weight(p.tf, m_lengths[p.doc], w);
            }
        }
        std::vector<SearchHit> hits;
        hits.reserve(acc.size());
        for (auto const& [doc, score] : acc) {
            hits.push_back({m_ids[doc], score, std::nullopt, std::nullopt});
        }
        sort_hits(hits);
        truncate_hits(hits, k);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            hits[i].lexical_rank = i + 1;
        }
        return hits;
    }

    friend bool operator==(const LexicalIndex&, const LexicalIndex&) = default;

  private:
    std::vector<std::string> m_ids;
    std::vector<std::uint32_t> m_lengths;
    std::map<std::string, std::vector<Posting>> m_postings;
    double m_avg_length = 0.0;
    Bm25Params m_params;
};

/// Exact brute-force cosine index over unit-normalised vectors.
class DenseIndex {
  public:
    DenseIndex() = default;
    DenseIndex(std::size_t dim, std::string embedder_id) : m_dim(dim), m_embedder_id(std::move(embedder_id)) {}

    std::size_t dim() const noexcept { return m_dim; }
    const std::string& embedder_id() const noexcept { return m_embedder_id; }
    std::size_t size() const noexcept { return m_ids.size(); }
    const std::vector<std::string>& ids() const noexcept { return m_ids; }

    std::span<const float> vector(std::size_t i) const { return {m_data.data() + i * m_dim, m_dim}; }

    /// Normalises and stores. Throws on dimension mismatch or a zero vector.
    void add(std::string id, std::span<const float> v)
    {
        if (v.size() != m_dim) {
            throw FormatError("vector for " + id + " has dimension " + std::to_string(v.size()) +
                              ", index dimension is " + std::to_string(m_dim));
        }
        auto unit = normalized(v);
        m_ids.push_back(std::move(id));
        m_data.insert(m_data.end(), unit.begin(), unit.end());
    }

    /// Stores an already-normalised vector verbatim (used when loading).
    void add_raw(std::string id, std::span<const float> v)
    {
        if (v.size() != m_dim) {
            throw FormatError("vector dimension mismatch while loading " + id);
        }
        m_ids.push_back(std::move(id));
        m_data.insert(m_data.end(), v.begin(), v.end());
    }

    static std::vector<float> normalized(std::span<const float> v)
    {
        double sq = 0.0;
        for (float x : v) {
            sq += static_cast<double>(x) * static_cast<double>(x);
        }
        if (!(sq > 0.0) || !std::isfinite(sq)) {
            throw FormatError("cannot normalise a zero or non-finite vector");
        }
        auto const inv = 1.0 / std::sqrt(sq);
        std::vector<float> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[i] = static_cast<float>(static_cast<double>(v[i]) * inv);
        }
        return out;
    }

    static double dot(std::span<const float> a, std::span<const float> b)
    {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        }
        return s;
    }

    /// Full scan. `query` must already have the index dimension.
    std::vector<SearchHit> search(std::span<const float> query, std::size_t k) const
    {
        if (k == 0) {
            throw FormatError("k must be at least 1");
        }
        if (query.size() != m_dim) {
            throw FormatError("query embedding has dimension " + std::to_string(query.size()) +
                              " but the index has dimension " + std::to_string(m_dim));
        }
        auto const q = normalized(query);
        std::vector<SearchHit> hits;
        hits.reserve(m_ids.size());
        for (std::size_t i = 0; i < m_ids.size(); ++i) {
            hits.push_back({m_ids[i], dot(q, vector(i)), std::nullopt, std::nullopt});
        }
        sort_hits(hits);
        truncate_hits(hits, k);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            hits[i].dense_rank = i + 1;
        }
        return hits;
    }

    friend bool operator==(const DenseIndex&, const DenseIndex&) = default;

  private:
    std::size_t m_dim = 0;
    std::string m_embedder_id;
    std::vector<std::string> m_ids;
    std::vector<float> m_data;
};

/// Reciprocal-rank fusion of a lexical and a dense ranking:
/// score(c) = sum over rankings containing c of 1 / (rrf_k + rank).
inline std::vector<SearchHit> rrf_fuse(const std::vector<SearchHit>& lexical, const std::vector<SearchHit>& dense,
                                       std::size_t k, std::size_t rrf_k = 60)
{
    std::map<std::string, SearchHit> fused;
    for (std::size_t i = 0; i < lexical.size(); ++i) {
        auto& h = fused[lexical[i].chunk_id];
        h.chunk_id = lexical[i].chunk_id;
        h.lexical_rank = i + 1;
    }
    for (std::size_t i = 0; i < dense.size(); ++i) {
        auto& h = fused[dense[i].chunk_id];
        h.chunk_id = dense[i].chunk_id;
        h.dense_rank = i + 1;
    }
    std::vector<SearchHit> out;
    out.reserve(fused.size());
    for (auto& [id, h] : fused) {
        h.score = 0.0;
        if (h.lexical_rank) {
            h.score += 1.0 / static_cast<double>(rrf_k + *h.lexical_rank);
        }
        if (h.dense_rank) {
            h.score += 1.0 / static_cast<double>(rrf_k + *h.dense_rank);
        }
        out.push_back(std::move(h));
    }
    sort_hits(out);
    truncate_hits(out, k);
    return out;
}

}  // namespace verbatim
