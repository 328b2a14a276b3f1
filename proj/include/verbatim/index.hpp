#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "chunker.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "retry.hpp"
#include "retrieval.hpp"
#include "types.hpp"

namespace verbatim {

enum class SearchMode { lexical, dense, hybrid };

inline SearchMode parse_search_mode(std::string_view s)
{
    if (s == "lexical") {
        return SearchMode::lexical;
    }
    if (s == "dense") {
        return SearchMode::dense;
    }
    if (s == "hybrid") {
        return SearchMode::hybrid;
    }
    throw FormatError("unknown search mode '" + std::string(s) + "' (expected lexical, dense or hybrid)");
}

inline std::string_view to_string(SearchMode m)
{
    switch (m) {
    case SearchMode::lexical: return "lexical";
    case SearchMode::dense: return "dense";
    case SearchMode::hybrid: return "hybrid";
    }
    return "unknown";
}

/// Both indexes plus the chunks they were built from. Immutable once built.
struct RetrievalIndex {
    LexicalIndex lexical;
    DenseIndex dense;
    std::vector<Chunk> chunks;

    const Chunk* find(const std::string& chunk_id) const
    {
        auto it = std::lower_bound(m_order.begin(), m_order.end(), chunk_id,
                                   [&](std::size_t i, const std::string& id) { return chunks[i].chunk_id < id; });
        if (it == m_order.end() || chunks[*it].chunk_id != chunk_id) {
            return nullptr;
        }
        return &chunks[*it];
    }

    void reindex_lookup()
    {
        m_order.resize(chunks.size());
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            m_order[i] = i;
        }
        std::sort(m_order.begin(), m_order.end(),
                  [&](std::size_t a, std::size_t b) { return chunks[a].chunk_id < chunks[b].chunk_id; });
    }

  private:
    std::vector<std::size_t> m_order;
};

struct BuildOptions {
    Bm25Params bm25;
    std::size_t batch_size = 16;
    std::size_t parallelism = 4;  // embedding requests in flight
    RetryPolicy retry;
};

/// Indexes the rendered (prefix + body) text of every chunk lexically and
/// densely. Embedding batches run with bounded parallelism; a batch that still
/// fails after its retries makes the whole build fail, naming the chunks.
inline RetrievalIndex build_index(const std::vector<Chunk>& chunks, EmbeddingClient& embed, const BuildOptions& opts = {})
{
    std::set<std::string> ids;
    std::vector<std::pair<std::string, std::string>> docs;
    docs.reserve(chunks.size());
    for (auto const& c : chunks) {
        if (!ids.insert(c.chunk_id).second) {
            throw FormatError("duplicate chunk_id " + c.chunk_id);
        }
        docs.emplace_back(c.chunk_id, render_chunk_text(c));
    }

    RetrievalIndex index;
    index.lexical = LexicalIndex::build(docs, opts.bm25);
    index.chunks = chunks;
    index.reindex_lookup();

    auto const batch = std::max<std::size_t>(1, opts.batch_size);
    auto const n_batches = (docs.size() + batch - 1) / batch;
    std::vector<std::vector<std::vector<float>>> vectors(n_batches);
    std::vector<std::string> errors(n_batches);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (auto b = next++; b < n_batches; b = next++) {
            std::vector<std::string> texts;
            for (auto i = b * batch; i < std::min(docs.size(), (b + 1) * batch); ++i) {
                texts.push_back(docs[i].second);
            }
            try {
                vectors[b] = with_retries(opts.retry, "embedding batch " + std::to_string(b), [&] {
                    auto v = embed.embed(texts);
                    if (v.size() != texts.size()) {
                        throw BackendError("embedder returned " + std::to_string(v.size()) + " vectors for " +
                                           std::to_string(texts.size()) + " texts");
                    }
                    return v;
                });
            } catch (const std::exception& e) {
                errors[b] = e.what();
            }
        }
    };
    auto const threads = std::min(std::max<std::size_t>(1, opts.parallelism), std::max<std::size_t>(1, n_batches));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    std::string failed;
    for (std::size_t b = 0; b < n_batches; ++b) {
        if (errors[b].empty()) {
            continue;
        }
        for (auto i = b * batch; i < std::min(docs.size(), (b + 1) * batch); ++i) {
            failed += (failed.empty() ? "" : ", ") + docs[i].first;
        }
        failed += " (" + errors[b] + ")";
    }
    if (!failed.empty()) {
        throw BackendError("embedding failed for chunks: " + failed);
    }

    std::size_t dim = embed.dim();
    if (n_batches > 0 && !vectors[0].empty()) {
        dim = vectors[0][0].size();
    }
    index.dense = DenseIndex(dim, embed.id());
    for (std::size_t b = 0; b < n_batches; ++b) {
        for (std::size_t j = 0; j < vectors[b].size(); ++j) {
            index.dense.add(docs[b * batch + j].first, vectors[b][j]);
        }
    }
    return index;
}

inline std::vector<SearchHit> lexical_search(const LexicalIndex& index, std::string_view query, std::size_t k)
{
    return index.search(query, k);
}

inline std::vector<float> embed_query(EmbeddingClient& embed, const std::string& query, std::size_t index_dim,
                                      const RetryPolicy& retry = {})
{
    auto v = with_retries(retry, "query embedding", [&] { return embed.embed({query}); });
    if (v.size() != 1) {
        throw BackendError("embedder returned " + std::to_string(v.size()) + " vectors for one query");
    }
    if (v[0].size() != index_dim) {
        throw FormatError("embedder dimension " + std::to_string(v[0].size()) + " does not match index dimension " +
                          std::to_string(index_dim));
    }
    return std::move(v[0]);
}

inline std::vector<SearchHit> dense_search(const DenseIndex& index, const std::string& query, EmbeddingClient& embed,
                                           std::size_t k)
{
    if (embed.dim() != 0 && embed.dim() != index.dim()) {
        throw FormatError("embedder dimension " + std::to_string(embed.dim()) + " does not match index dimension " +
                          std::to_string(index.dim()));
    }
    return index.search(embed_query(embed, query, index.dim()), k);
}

/// Fuses the top max(k, 50) of each ranking with reciprocal-rank fusion.
inline std::vector<SearchHit> hybrid_search(const LexicalIndex& lex, const DenseIndex& dense, const std::string& query,
                                            EmbeddingClient& embed, std::size_t k, std::size_t rrf_k = 60)
{
    if (k == 0) {
        throw FormatError("k must be at least 1");
    }
    auto const depth = std::max<std::size_t>(k, 50);
    auto const lexical_hits = lex.search(query, depth);
    auto const dense_hits = dense_search(dense, query, embed, depth);
    return rrf_fuse(lexical_hits, dense_hits, k, rrf_k);
}

inline std::vector<SearchHit> search(const RetrievalIndex& index, const std::string& query, EmbeddingClient& embed,
                                     SearchMode mode, std::size_t k, std::size_t rrf_k = 60)
{
    switch (mode) {
    case SearchMode::lexical: return lexical_search(index.lexical, query, k);
    case SearchMode::dense: return dense_search(index.dense, query, embed, k);
    case SearchMode::hybrid: return hybrid_search(index.lexical, index.dense, query, embed, k, rrf_k);
    }
    return {};
}

}  // namespace verbatim
