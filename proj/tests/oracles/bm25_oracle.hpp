#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <verbatim/retrieval.hpp>
#include <verbatim/tokenize.hpp>

namespace verbatim::oracle {

/// Full-scan BM25: recounts every term in every document per query, with no
/// inverted index.
inline std::vector<SearchHit> bm25_full_scan(const std::vector<std::pair<std::string, std::string>>& docs,
                                             const std::string& query, std::size_t k, double k1 = 1.2, double b = 0.75)
{
    std::vector<std::vector<std::string>> tokens;
    double total = 0;
    for (auto const& d : docs) {
        tokens.push_back(tokenize(d.second));
        total += static_cast<double>(tokens.back().size());
    }
    auto const n = static_cast<double>(docs.size());
    auto const avg = total / n;
    auto q = tokenize(query);
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());

    std::vector<SearchHit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0.0;
        bool matched = false;
        for (auto const& term : q) {
            auto tf = std::count(tokens[i].begin(), tokens[i].end(), term);
            if (tf == 0) {
                continue;
            }
            matched = true;
            std::size_t df = 0;
            for (auto const& t : tokens) {
                df += std::find(t.begin(), t.end(), term) != t.end();
            }
            auto const d = static_cast<double>(df);
            auto const idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
            auto const f = static_cast<double>(tf);
            auto const norm = 1.0 - b + b * static_cast<double>(tokens[i].size()) / avg;
            score += idf * f * (k1 + 1.0) / (f + k1 * norm);
        }
        if (matched) {
            hits.push_back({docs[i].first, score, std::nullopt, std::nullopt});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
    });
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

/// Dot product of every stored vector with the query, sorted.
inline std::vector<std::string> cosine_full_scan(const std::vector<std::pair<std::string, std::vector<float>>>& vecs,
                                                 const std::vector<float>& query, std::size_t k)
{
    auto unit = [](const std::vector<float>& v) {
        double s = 0;
        for (float x : v) {
            s += static_cast<double>(x) * x;
        }
        std::vector<float> out;
        for (float x : v) {
            out.push_back(static_cast<float>(x / std::sqrt(s)));
        }
        return out;
    };
    auto const q = unit(query);
    std::vector<std::pair<double, std::string>> scored;
    for (auto const& [id, v] : vecs) {
        auto const u = unit(v);
        double s = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            s += static_cast<double>(q[i]) * static_cast<double>(u[i]);
        }
        scored.emplace_back(s, id);
    }
    std::sort(scored.begin(), scored.end(), [](auto const& a, auto const& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

/// Reciprocal-rank fusion recomputed from two ranked id lists.
inline std::vector<std::pair<std::string, double>> rrf(const std::vector<std::string>& lexical,
                                                       const std::vector<std::string>& dense, std::size_t k,
                                                       std::size_t rrf_k = 60)
{
    std::map<std::string, double> score;
    std::map<std::string, std::size_t> lex_rank, dense_rank;
    for (std::size_t i = 0; i < lexical.size(); ++i) {
        lex_rank[lexical[i]] = i + 1;
    }
    for (std::size_t i = 0; i < dense.size(); ++i) {
        dense_rank[dense[i]] = i + 1;
    }
    for (auto const& id : lexical) {
        score[id] = 0;
    }
    for (auto const& id : dense) {
        score[id] = 0;
    }
    for (auto& [id, s] : score) {
        if (lex_rank.count(id)) {
            s += 1.0 / static_cast<double>(rrf_k + lex_rank[id]);
        }
        if (dense_rank.count(id)) {
            s += 1.0 / static_cast<double>(rrf_k + dense_rank[id]);
        }
    }
    std::vector<std::pair<std::string, double>> out(score.begin(), score.end());
    std::sort(out.begin(), out.end(), [](auto const& a, auto const& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

}  // namespace verbatim::oracle
