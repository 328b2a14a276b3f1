#pragma once

#include <chrono>
#include <charconv>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>

#include "config.hpp"
#include "extraction.hpp"
#include "index.hpp"
#include "index_store.hpp"
#include "io.hpp"
#include "log.hpp"

namespace verbatim {

struct QueryHit {
    std::string chunk_id;
    std::vector<std::string> title_path;
    std::string chunk_body;
    double score = 0.0;
    std::vector<CharSpan> spans;  // against chunk_body, most relevant first
    bool abstained = true;
    std::optional<std::string> error;
};

struct StageTiming {
    double retrieval_ms = 0.0;
    double extraction_ms = 0.0;
    double total_ms = 0.0;
};

struct QueryResponse {
    std::string query;
    std::vector<QueryHit> hits;  // retrieval order
    StageTiming timing;
};

inline Json span_texts(const std::string& body, const std::vector<CharSpan>& spans)
{
    auto const u = utf8::decode(body);
    Json out = Json::array();
    for (auto const& s : spans) {
        out.push_back(utf8::encode(slice(u, s)));
    }
    return out;
}

inline void to_json(Json& j, const QueryHit& h)
{
    j = Json{{"chunk_id", h.chunk_id},   {"title_path", h.title_path}, {"chunk_body", h.chunk_body},
             {"score", h.score},         {"spans", h.spans},           {"span_texts", span_texts(h.chunk_body, h.spans)},
             {"abstained", h.abstained}};
    if (h.error) {
        j["error"] = *h.error;
    }
}

inline void to_json(Json& j, const StageTiming& t)
{
    j = Json{{"retrieval", t.retrieval_ms}, {"extraction", t.extraction_ms}, {"total", t.total_ms}};
}

inline void to_json(Json& j, const QueryResponse& r)
{
    j = Json{{"query", r.query}, {"hits", r.hits}, {"timing_ms", r.timing}};
}

/// Client error: bad request parameters or body. Maps to HTTP 400.
class RequestError : public Error {
  public:
    using Error::Error;
};

/// The request handlers, independent of the HTTP layer. The index is shared
/// read-only; everything else is per request.
class Service {
  public:
    Service(const RetrievalIndex& index, EmbeddingClient& embedder, ExtractionBackend& extractor, AppConfig cfg)
        : m_index(index), m_embedder(embedder), m_extractor(extractor), m_cfg(std::move(cfg))
    {
    }

    Json health() const
    {
        return Json{{"status", "ok"},
                    {"chunks", m_index.chunks.size()},
                    {"embedder", m_index.dense.embedder_id()},
                    {"extractor", m_extractor.name()}};
    }

    Json search(const std::string& q, std::size_t k, SearchMode mode) const
    {
        if (q.empty()) {
            throw RequestError("missing query parameter 'q'");
        }
        auto const t0 = Clock::now();
        auto hits = verbatim::search(m_index, q, m_embedder, mode, k, m_cfg.retrieval.rrf_k);
        Json out{{"query", q}, {"mode", to_string(mode)}, {"hits", Json::array()}};
        for (auto const& h : hits) {
            auto const* c = m_index.find(h.chunk_id);
            Json hit{{"chunk_id", h.chunk_id}, {"score", h.score}, {"title_path", c->title_path}};
            hit["lexical_rank"] = h.lexical_rank ? Json(*h.lexical_rank) : Json();
            hit["dense_rank"] = h.dense_rank ? Json(*h.dense_rank) : Json();
            out["hits"].push_back(std::move(hit));
        }
        out["timing_ms"] = Json{{"retrieval", ms_since(t0)}};
        return out;
    }

    /// body: {"query": ..., "chunk_ids": [...]} or {"query": ..., "chunks": [{"chunk_id"?, "text"}]}
    Json extract(const Json& body) const
    {
        auto const query = required_string(body, "query");
        std::vector<ExtractionInput> inputs;
        if (body.contains("chunk_ids")) {
            if (!body["chunk_ids"].is_array()) {
                throw RequestError("'chunk_ids' must be an array of strings");
            }
            for (auto const& id : body["chunk_ids"]) {
                if (!id.is_string()) {
                    throw RequestError("'chunk_ids' must be an array of strings");
                }
                auto const* c = m_index.find(id.get<std::string>());
                if (!c) {
                    throw RequestError("unknown chunk id '" + id.get<std::string>() + "'");
                }
                inputs.push_back({"request", query, c->chunk_id, c->body});
            }
        } else if (body.contains("chunks")) {
            if (!body["chunks"].is_array()) {
                throw RequestError("'chunks' must be an array of objects");
            }
            std::size_t n = 0;
            for (auto const& c : body["chunks"]) {
                if (!c.is_object()) {
                    throw RequestError("'chunks' must be an array of objects");
                }
                auto id = c.contains("chunk_id") ? required_string(c, "chunk_id") : "inline-" + std::to_string(n);
                auto text = required_string(c, "text");
                if (!utf8::is_valid(text)) {
                    throw RequestError("chunk '" + id + "' is not valid UTF-8");
                }
                inputs.push_back({"request", query, id, text});
                ++n;
            }
        } else {
            throw RequestError("body needs 'chunk_ids' or 'chunks'");
        }
        auto const t0 = Clock::now();
        auto outcomes = m_extractor.run(inputs);
        Json out{{"query", query}, {"backend", m_extractor.name()}, {"results", Json::array()}};
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            QueryHit h;
            h.chunk_id = inputs[i].chunk_id;
            h.chunk_body = inputs[i].chunk_text;
            fill_spans(h, outcomes[i]);
            Json r{{"chunk_id", h.chunk_id},
                   {"spans", h.spans},
                   {"span_texts", span_texts(h.chunk_body, h.spans)},
                   {"abstained", h.abstained}};
            if (h.error) {
                r["error"] = *h.error;
            }
            out["results"].push_back(std::move(r));
        }
        out["timing_ms"] = Json{{"extraction", ms_since(t0)}};
        return out;
    }

    QueryResponse query(const std::string& q, std::size_t k) const
    {
        if (q.empty()) {
            throw RequestError("'query' must not be empty");
        }
        QueryResponse resp;
        resp.query = q;
        auto const t0 = Clock::now();
        auto hits = verbatim::search(m_index, q, m_embedder, m_cfg.retrieval.mode, k, m_cfg.retrieval.rrf_k);
        resp.timing.retrieval_ms = ms_since(t0);

        auto const t1 = Clock::now();
        std::vector<ExtractionInput> inputs;
        for (auto const& h : hits) {
            auto const* c = m_index.find(h.chunk_id);
            QueryHit qh;
            qh.chunk_id = c->chunk_id;
            qh.title_path = c->title_path;
            qh.chunk_body = c->body;
            qh.score = h.score;
            resp.hits.push_back(std::move(qh));
            inputs.push_back({"request", q, c->chunk_id, c->body});
        }
        if (!inputs.empty()) {
            auto outcomes = m_extractor.run(inputs);
            for (std::size_t i = 0; i < outcomes.size(); ++i) {
                fill_spans(resp.hits[i], outcomes[i]);
            }
        }
        resp.timing.extraction_ms = ms_since(t1);
        resp.timing.total_ms = ms_since(t0);
        return resp;
    }

    Json chunk(const std::string& id) const
    {
        auto const* c = m_index.find(id);
        if (!c) {
            return nullptr;
        }
        return Json{{"chunk_id", c->chunk_id},
                    {"doc_id", c->doc_id},
                    {"title_path", c->title_path},
                    {"prefix", c->prefix},
                    {"body", c->body},
                    {"source_range", c->source_range},
                    {"atomic_oversize", c->atomic_oversize}};
    }

    const AppConfig& config() const { return m_cfg; }

  private:
    using Clock = std::chrono::steady_clock;

    static double ms_since(Clock::time_point t0)
    {
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }

    static std::string required_string(const Json& body, const char* key)
    {
        if (!body.is_object() || !body.contains(key) || !body[key].is_string()) {
            throw RequestError(std::string("body needs a string '") + key + "'");
        }
        return body[key].get<std::string>();
    }

    // Last line of defence for the verbatim guarantee: spans that do not
    // index into the body shipped with them are withheld.
    static void fill_spans(QueryHit& h, const ExtractionOutcome& o)
    {
        if (o.error) {
            h.error = *o.error;
            return;
        }
        try {
            assert_spans_in_chunk(o.result.spans, utf8::length(h.chunk_body), h.chunk_id);
        } catch (const std::logic_error& e) {
            log::error(e.what());
            h.error = "extraction produced an invalid span";
            return;
        }
        h.spans = o.result.spans;
        h.abstained = h.spans.empty();
    }

    const RetrievalIndex& m_index;
    EmbeddingClient& m_embedder;
    ExtractionBackend& m_extractor;
    AppConfig m_cfg;
};

namespace detail::server {

inline void send_json(httplib::Response& res, int status, const Json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& msg)
{
    send_json(res, status, Json{{"error", msg}});
}

inline std::size_t parse_k(const httplib::Request& req, std::size_t fallback)
{
    if (!req.has_param("k")) {
        return fallback;
    }
    auto const s = req.get_param_value("k");
    std::size_t k = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
    if (ec != std::errc{} || p != s.data() + s.size() || k == 0 || k > 1000) {
        throw RequestError("k must be an integer between 1 and 1000");
    }
    return k;
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn)
{
    try {
        fn();
    } catch (const RequestError& e) {
        send_error(res, 400, e.what());
    } catch (const BackendError& e) {
        log::error(e.what());
        send_error(res, 502, e.what());
    } catch (const std::exception& e) {
        log::error(e.what());
        send_error(res, 500, e.what());
    }
}

inline Json parse_body(const httplib::Request& req)
{
    try {
        return Json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        throw RequestError(std::string("malformed JSON body: ") + e.what());
    }
}

}  // namespace detail::server

/// Registers the HTTP routes on `srv`. CORS headers go on every response.
inline void install_routes(httplib::Server& srv, const Service& svc)
{
    namespace d = detail::server;
    auto const origin = svc.config().server.cors_origin;
    srv.set_default_headers({{"Access-Control-Allow-Origin", origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});

    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) {
        d::send_json(res, 200, svc.health());
    });

    srv.Get("/search", [&svc](const httplib::Request& req, httplib::Response& res) {
        d::guarded(res, [&] {
            auto const k = d::parse_k(req, svc.config().retrieval.k);
            auto mode = svc.config().retrieval.mode;
            if (req.has_param("mode")) {
                try {
                    mode = parse_search_mode(req.get_param_value("mode"));
                } catch (const FormatError& e) {
                    throw RequestError(e.what());
                }
            }
            d::send_json(res, 200, svc.search(req.get_param_value("q"), k, mode));
        });
    });

    srv.Post("/extract", [&svc](const httplib::Request& req, httplib::Response& res) {
        d::guarded(res, [&] { d::send_json(res, 200, svc.extract(d::parse_body(req))); });
    });

    srv.Post("/query", [&svc](const httplib::Request& req, httplib::Response& res) {
        d::guarded(res, [&] {
            auto body = d::parse_body(req);
            if (!body.is_object() || !body.contains("query") || !body["query"].is_string()) {
                throw RequestError("body needs a string 'query'");
            }
            auto k = svc.config().retrieval.k;
            if (body.contains("k")) {
                if (!body["k"].is_number_unsigned() || body["k"].get<std::size_t>() == 0 ||
                    body["k"].get<std::size_t>() > 1000) {
                    throw RequestError("k must be an integer between 1 and 1000");
                }
                k = body["k"].get<std::size_t>();
            }
            d::send_json(res, 200, Json(svc.query(body["query"].get<std::string>(), k)));
        });
    });

    srv.Get(R"(/chunks/(.+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        auto const id = req.matches[1].str();
        auto c = svc.chunk(id);
        if (c.is_null()) {
            d::send_error(res, 404, "no chunk '" + id + "'");
            return;
        }
        d::send_json(res, 200, c);
    });
}

/// Loads the index and serves until the process is stopped. Fails fast when
/// the index is missing.
inline void serve(const AppConfig& cfg)
{
    RetrievalIndex index;
    try {
        index = load_index(cfg.index_dir);
    } catch (const Error& e) {
        throw IoError(std::string(e.what()) + "\nbuild it first: verbatim index --chunks <chunks.jsonl> --out " +
                      cfg.index_dir.string());
    }
    auto embedder = make_embedder(cfg);
    auto raw = make_llm(cfg);
    BoundedLlmClient llm(*raw, static_cast<std::ptrdiff_t>(cfg.llm.max_in_flight));
    LlmExtractorOptions opts;
    opts.mode = cfg.extraction.mode;
    opts.post = cfg.extraction.post;
    LlmExtractor extractor(llm, opts);
    Service svc(index, *embedder, extractor, cfg);

    httplib::Server srv;
    auto const threads = std::max<std::size_t>(cfg.server.threads, 1);
    srv.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    install_routes(srv, svc);
    log::info("serving " + std::to_string(index.chunks.size()) + " chunks on " + cfg.server.bind + ":" +
              std::to_string(cfg.server.port));
    if (!srv.listen(cfg.server.bind, cfg.server.port)) {
        throw IoError("cannot listen on " + cfg.server.bind + ":" + std::to_string(cfg.server.port));
    }
}

}  // namespace verbatim
