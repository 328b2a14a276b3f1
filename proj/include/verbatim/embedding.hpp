#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "hash.hpp"
#include "http.hpp"
#include "tokenize.hpp"

namespace verbatim {

/// Turns texts into fixed-dimension vectors.
class EmbeddingClient {
  public:
    virtual ~EmbeddingClient() = default;
    virtual std::string id() const = 0;
    /// 0 when unknown until the first response.
    virtual std::size_t dim() const = 0;
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
};

/// Offline embedder: every token maps to a seeded pseudo-random vector and a
/// text embeds to the normalised sum of its token vectors, so texts sharing
/// words are close. Deterministic across runs and platforms.
class MockEmbedder : public EmbeddingClient {
  public:
    explicit MockEmbedder(std::size_t dim = 64, std::uint64_t seed = 0) : m_dim(dim), m_seed(seed) {}

    std::string id() const override { return "mock-hash-" + std::to_string(m_dim) + "-" + std::to_string(m_seed); }
    std::size_t dim() const override { return m_dim; }

    std::vector<float> embed_one(const std::string& text) const
    {
        std::vector<double> acc(m_dim, 0.0);
        for (auto const& tok : tokenize(text)) {
            std::uint64_t state = hash::fnv1a64(tok) ^ m_seed;
            for (std::size_t i = 0; i < m_dim; ++i) {
                auto const r = hash::splitmix64(state);
                acc[i] += static_cast<double>(r >> 11) / 9007199254740992.0 * 2.0 - 1.0;
            }
        }
        std::vector<float> out(m_dim, 0.0F);
        double sq = 0.0;
        for (double x : acc) {
            sq += x * x;
        }
        if (sq == 0.0) {
            out[0] = 1.0F;
            return out;
        }
        auto const inv = 1.0 / std::sqrt(sq);
        for (std::size_t i = 0; i < m_dim; ++i) {
            out[i] = static_cast<float>(acc[i] * inv);
        }
        return out;
    }

    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override
    {
        std::vector<std::vector<float>> out;
        out.reserve(texts.size());
        for (auto const& t : texts) {
            out.push_back(embed_one(t));
        }
        return out;
    }

  private:
    std::size_t m_dim;
    std::uint64_t m_seed;
};

/// Embedding service over HTTP. Sends {"model": ..., "input": [texts]} and
/// accepts either an OpenAI-style {"data": [{"embedding": [...], "index": i}]}
/// or a bare {"embeddings": [[...], ...]} response.
class HttpEmbedder : public EmbeddingClient {
  public:
    struct Options {
        std::string url;
        std::string model;
        std::string api_key_env;
        std::chrono::milliseconds timeout{60000};
    };

    explicit HttpEmbedder(Options opts) : m_opts(std::move(opts)) {}

    std::string id() const override { return m_opts.model.empty() ? m_opts.url : m_opts.model; }
    std::size_t dim() const override { return m_dim.load(); }

    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override
    {
        nlohmann::json body{{"model", m_opts.model}, {"input", texts}};
        auto const raw = http::post_json(m_opts.url, body.dump(), {m_opts.timeout, http::env(m_opts.api_key_env)});
        auto out = parse_response(raw, texts.size());
        for (auto const& v : out) {
            std::size_t seen = 0;
            if (!m_dim.compare_exchange_strong(seen, v.size()) && seen != v.size()) {
                throw BackendError("embedding service returned dimension " + std::to_string(v.size()) +
                                   " after earlier dimension " + std::to_string(seen));
            }
        }
        return out;
    }

    static std::vector<std::vector<float>> parse_response(const std::string& raw, std::size_t expected)
    {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError(std::string("embedding response is not JSON: ") + e.what());
        }
        std::vector<std::vector<float>> out;
        try {
            if (j.contains("data")) {
                out.resize(j["data"].size());
                for (std::size_t i = 0; i < j["data"].size(); ++i) {
                    auto const& item = j["data"][i];
                    auto const at = item.value("index", i);
                    if (at >= out.size()) {
                        throw BackendError("embedding response index out of range");
                    }
                    out[at] = item.at("embedding").get<std::vector<float>>();
                }
            } else if (j.contains("embeddings")) {
                out = j["embeddings"].get<std::vector<std::vector<float>>>();
            } else {
                throw BackendError("embedding response has neither 'data' nor 'embeddings'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed embedding response: ") + e.what());
        }
        if (out.size() != expected) {
            throw BackendError("embedding service returned " + std::to_string(out.size()) + " vectors for " +
                               std::to_string(expected) + " texts");
        }
        return out;
    }

  private:
    Options m_opts;
    std::atomic<std::size_t> m_dim{0};
};

}  // namespace verbatim
