#pragma once

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "chunker.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "extraction.hpp"
#include "index.hpp"
#include "io.hpp"
#include "llm.hpp"

namespace verbatim {

// ---------------------------------------------------------------------------
// A small TOML subset: [table] and [table.sub] headers, `key = value` pairs,
// '#' comments, basic and literal strings, integers, floats, booleans and
// single-line arrays of those. Keys come back flattened ("llm.model").

namespace toml_lite {

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline bool bare_key(std::string_view k)
{
    if (k.empty()) {
        return false;
    }
    for (char c : k) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') {
            return false;
        }
    }
    return k.front() != '.' && k.back() != '.' && k.find("..") == std::string_view::npos;
}

class ValueParser {
  public:
    ValueParser(std::string_view s, std::string where) : m_s(s), m_where(std::move(where)) {}

    Json parse_all()
    {
        auto v = value();
        skip_blank();
        if (m_pos < m_s.size() && m_s[m_pos] != '#') {
            fail("unexpected text after value");
        }
        return v;
    }

  private:
    [[noreturn]] void fail(const std::string& what) const { throw FormatError(m_where + ": " + what); }

    void skip_blank()
    {
        while (m_pos < m_s.size() && (m_s[m_pos] == ' ' || m_s[m_pos] == '\t')) {
            ++m_pos;
        }
    }

    Json value()
    {
        skip_blank();
        if (m_pos >= m_s.size()) {
            fail("missing value");
        }
        char const c = m_s[m_pos];
        if (c == '"') {
            return basic_string();
        }
        if (c == '\'') {
            auto end = m_s.find('\'', m_pos + 1);
            if (end == std::string_view::npos) {
                fail("unterminated string");
            }
            std::string out(m_s.substr(m_pos + 1, end - m_pos - 1));
            m_pos = end + 1;
            return out;
        }
        if (c == '[') {
            ++m_pos;
            Json arr = Json::array();
            skip_blank();
            if (m_pos < m_s.size() && m_s[m_pos] == ']') {
                ++m_pos;
                return arr;
            }
            for (;;) {
                arr.push_back(value());
                skip_blank();
                if (m_pos >= m_s.size()) {
                    fail("unterminated array (arrays must fit on one line)");
                }
                if (m_s[m_pos] == ',') {
                    ++m_pos;
                    skip_blank();
                    if (m_pos < m_s.size() && m_s[m_pos] == ']') {
                        ++m_pos;
                        return arr;
                    }
                    continue;
                }
                if (m_s[m_pos] == ']') {
                    ++m_pos;
                    return arr;
                }
                fail("expected ',' or ']' in array");
            }
        }
        auto end = m_pos;
        while (end < m_s.size() && m_s[end] != ',' && m_s[end] != ']' && m_s[end] != ' ' && m_s[end] != '\t' &&
               m_s[end] != '#') {
            ++end;
        }
        auto tok = m_s.substr(m_pos, end - m_pos);
        m_pos = end;
        if (tok == "true") {
            return true;
        }
        if (tok == "false") {
            return false;
        }
        std::string digits;
        for (char ch : tok) {
            if (ch != '_') {
                digits += ch;
            }
        }
        if (!digits.empty() && digits.front() == '+') {
            digits.erase(0, 1);
        }
        long long i = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
        if (ec == std::errc{} && p == digits.data() + digits.size() && !digits.empty()) {
            return i;
        }
        double d = 0;
        auto [pd, ecd] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
        if (ecd == std::errc{} && pd == digits.data() + digits.size() && !digits.empty()) {
            return d;
        }
        fail("cannot parse value '" + std::string(tok) + "'");
    }

    Json basic_string()
    {
        std::string out;
        ++m_pos;
        while (m_pos < m_s.size()) {
            char c = m_s[m_pos++];
            if (c == '"') {
                return out;
            }
            if (c != '\\') {
                out += c;
                continue;
            }
            if (m_pos >= m_s.size()) {
                break;
            }
            char e = m_s[m_pos++];
            switch (e) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'u': {
                if (m_pos + 4 > m_s.size()) {
                    fail("bad \\u escape");
                }
                unsigned cp = 0;
                auto [p, ec] = std::from_chars(m_s.data() + m_pos, m_s.data() + m_pos + 4, cp, 16);
                if (ec != std::errc{} || p != m_s.data() + m_pos + 4) {
                    fail("bad \\u escape");
                }
                m_pos += 4;
                utf8::append(out, static_cast<char32_t>(cp));
                break;
            }
            default: fail(std::string("unknown escape \\") + e);
            }
        }
        fail("unterminated string");
    }

    std::string_view m_s;
    std::string m_where;
    std::size_t m_pos = 0;
};

}  // namespace detail

using Table = std::map<std::string, Json>;

inline Table parse(std::string_view text, const std::string& origin = "config")
{
    Table out;
    std::string table;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        auto line = detail::trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++lineno;
        auto const where = origin + ":" + std::to_string(lineno);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (line.front() == '[') {
            auto close = line.find(']');
            if (close == std::string_view::npos || line.substr(0, 2) == "[[") {
                throw FormatError(where + ": bad table header");
            }
            auto rest = detail::trim(line.substr(close + 1));
            if (!rest.empty() && rest.front() != '#') {
                throw FormatError(where + ": unexpected text after table header");
            }
            auto name = detail::trim(line.substr(1, close - 1));
            if (!detail::bare_key(name)) {
                throw FormatError(where + ": bad table name '" + std::string(name) + "'");
            }
            table = std::string(name);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError(where + ": expected key = value");
        }
        auto key = detail::trim(line.substr(0, eq));
        if (!detail::bare_key(key)) {
            throw FormatError(where + ": bad key '" + std::string(key) + "'");
        }
        auto full = table.empty() ? std::string(key) : table + "." + std::string(key);
        auto value = detail::ValueParser(line.substr(eq + 1), where).parse_all();
        if (!out.emplace(full, std::move(value)).second) {
            throw FormatError(where + ": duplicate key '" + full + "'");
        }
    }
    return out;
}

}  // namespace toml_lite

// ---------------------------------------------------------------------------

struct AppConfig {
    std::filesystem::path corpus_dir = "corpus";
    std::filesystem::path index_dir = "index";
    ChunkerConfig chunker;

    struct Retrieval {
        std::size_t k = 5;
        SearchMode mode = SearchMode::hybrid;
        std::size_t rrf_k = 60;
    } retrieval;

    struct Llm {
        std::string backend = "http";  // http | scripted | heuristic
        std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
        std::string model = "gpt-4o-mini";
        std::string api_key_env = "VERBATIM_LLM_API_KEY";
        std::filesystem::path script;  // fixture file for the scripted backend
        std::size_t max_in_flight = 8;
        std::size_t timeout_s = 120;
    } llm;

    struct Embedder {
        std::string backend = "mock";  // mock | http
        std::string endpoint;
        std::string model;
        std::string api_key_env = "VERBATIM_EMBEDDER_API_KEY";
        std::size_t dim = 64;  // mock only
        std::uint64_t seed = 0;
    } embedder;

    struct Extraction {
        PromptMode mode = PromptMode::default_extraction;
        PostProcessConfig post;
        std::size_t parallelism = 4;
        std::string scorer_endpoint;  // empty: offline mock scorer
        std::string scorer_api_key_env = "VERBATIM_SCORER_API_KEY";
    } extraction;

    struct Server {
        std::string bind = "127.0.0.1";
        int port = 8080;
        std::string cors_origin = "*";
        std::size_t threads = 8;
    } server;

    void validate() const
    {
        if (retrieval.k == 0) {
            throw FormatError("retrieval.k must be at least 1");
        }
        if (retrieval.rrf_k == 0) {
            throw FormatError("retrieval.rrf_k must be at least 1");
        }
        if (chunker.min_chunk_chars > chunker.max_chunk_chars) {
            throw FormatError("chunker.min must not exceed chunker.max");
        }
        if (llm.backend != "http" && llm.backend != "scripted" && llm.backend != "heuristic") {
            throw FormatError("llm.backend must be http, scripted or heuristic (got '" + llm.backend + "')");
        }
        if (llm.backend == "scripted" && llm.script.empty()) {
            throw FormatError("llm.backend = \"scripted\" needs llm.script");
        }
        if (embedder.backend != "mock" && embedder.backend != "http") {
            throw FormatError("embedder.backend must be mock or http (got '" + embedder.backend + "')");
        }
        if (embedder.backend == "http" && embedder.endpoint.empty()) {
            throw FormatError("embedder.backend = \"http\" needs embedder.endpoint");
        }
        if (embedder.backend == "mock" && embedder.dim == 0) {
            throw FormatError("embedder.dim must be at least 1");
        }
        if (server.port < 0 || server.port > 65535) {
            throw FormatError("server.port out of range");
        }
        extraction.post.validate();
    }
};

namespace detail::config {

inline std::string as_string(const Json& v, const std::string& key)
{
    if (v.is_string()) {
        return v.get<std::string>();
    }
    throw FormatError("config key " + key + ": expected a string");
}

inline long long as_int(const Json& v, const std::string& key)
{
    if (v.is_number_integer()) {
        return v.get<long long>();
    }
    throw FormatError("config key " + key + ": expected an integer");
}

inline std::size_t as_count(const Json& v, const std::string& key)
{
    auto i = as_int(v, key);
    if (i < 0) {
        throw FormatError("config key " + key + ": must not be negative");
    }
    return static_cast<std::size_t>(i);
}

inline double as_double(const Json& v, const std::string& key)
{
    if (v.is_number()) {
        return v.get<double>();
    }
    throw FormatError("config key " + key + ": expected a number");
}

using Setter = std::function<void(AppConfig&, const Json&, const std::string&)>;

inline const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> s{
        {"corpus_dir", [](AppConfig& c, const Json& v, const std::string& k) { c.corpus_dir = as_string(v, k); }},
        {"index_dir", [](AppConfig& c, const Json& v, const std::string& k) { c.index_dir = as_string(v, k); }},
        {"chunker.min", [](AppConfig& c, const Json& v, const std::string& k) { c.chunker.min_chunk_chars = as_count(v, k); }},
        {"chunker.max", [](AppConfig& c, const Json& v, const std::string& k) { c.chunker.max_chunk_chars = as_count(v, k); }},
        {"retrieval.k", [](AppConfig& c, const Json& v, const std::string& k) { c.retrieval.k = as_count(v, k); }},
        {"retrieval.mode", [](AppConfig& c, const Json& v, const std::string& k) { c.retrieval.mode = parse_search_mode(as_string(v, k)); }},
        {"retrieval.rrf_k", [](AppConfig& c, const Json& v, const std::string& k) { c.retrieval.rrf_k = as_count(v, k); }},
        {"llm.backend", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.backend = as_string(v, k); }},
        {"llm.endpoint", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.endpoint = as_string(v, k); }},
        {"llm.model", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.model = as_string(v, k); }},
        {"llm.api_key_env", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.api_key_env = as_string(v, k); }},
        {"llm.script", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.script = as_string(v, k); }},
        {"llm.max_in_flight", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.max_in_flight = as_count(v, k); }},
        {"llm.timeout_s", [](AppConfig& c, const Json& v, const std::string& k) { c.llm.timeout_s = as_count(v, k); }},
        {"embedder.backend", [](AppConfig& c, const Json& v, const std::string& k) { c.embedder.backend = as_string(v, k); }},
        {"embedder.endpoint", [](AppConfig& c, const Json& v, const std::string& k) { c.embedder.endpoint = as_string(v, k); }},
        {"embedder.model", [](AppConfig& c, const Json& v, const std::string& k) { c.embedder.model = as_string(v, k); }},
        {"embedder.api_key_env", [](AppConfig& c, const Json& v, const std::string& k) { c.embedder.api_key_env = as_string(v, k); }},
        {"embedder.dim", [](AppConfig& c, const Json& v, const std::string& k) { c.embedder.dim = as_count(v, k); }},
        {"embedder.seed", [](AppConfig& c, const Json& v, const std::string& k) { c.embedder.seed = as_count(v, k); }},
        {"extraction.mode", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.mode = parse_prompt_mode(as_string(v, k)); }},
        {"extraction.min_span_chars", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.post.min_span_chars = as_count(v, k); }},
        {"extraction.merge_gap_chars", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.post.merge_gap_chars = as_count(v, k); }},
        {"extraction.decode_threshold", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.post.decode_threshold = as_double(v, k); }},
        {"extraction.parallelism", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.parallelism = as_count(v, k); }},
        {"extraction.scorer_endpoint", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.scorer_endpoint = as_string(v, k); }},
        {"extraction.scorer_api_key_env", [](AppConfig& c, const Json& v, const std::string& k) { c.extraction.scorer_api_key_env = as_string(v, k); }},
        {"server.bind", [](AppConfig& c, const Json& v, const std::string& k) { c.server.bind = as_string(v, k); }},
        {"server.port", [](AppConfig& c, const Json& v, const std::string& k) { c.server.port = static_cast<int>(as_int(v, k)); }},
        {"server.cors_origin", [](AppConfig& c, const Json& v, const std::string& k) { c.server.cors_origin = as_string(v, k); }},
        {"server.threads", [](AppConfig& c, const Json& v, const std::string& k) { c.server.threads = as_count(v, k); }},
    };
    return s;
}

// "llm.api_key_env" -> "VERBATIM_LLM_API_KEY_ENV"
inline std::string env_name(const std::string& key)
{
    std::string out = "VERBATIM_";
    for (char c : key) {
        out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

// Environment values are untyped; read them as TOML values when they parse,
// otherwise as plain strings.
inline Json env_value(const std::string& raw, const std::string& name)
{
    try {
        auto v = toml_lite::detail::ValueParser(raw, name).parse_all();
        if (!v.is_array()) {
            return v;
        }
    } catch (const FormatError&) {
    }
    return raw;
}

}  // namespace detail::config

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name)
{
    if (auto* v = std::getenv(name.c_str())) {
        return std::string(v);
    }
    return std::nullopt;
}

/// Builds a config from TOML-subset text, then applies VERBATIM_<KEY>
/// environment overrides. Unknown keys are an error so typos do not pass
/// silently. Relative paths resolve against `base_dir`.
inline AppConfig parse_config(std::string_view text, const std::string& origin = "config",
                              const std::filesystem::path& base_dir = {}, const EnvLookup& env = process_env)
{
    AppConfig cfg;
    auto const& set = detail::config::setters();
    for (auto const& [key, value] : toml_lite::parse(text, origin)) {
        auto it = set.find(key);
        if (it == set.end()) {
            throw FormatError(origin + ": unknown key '" + key + "'");
        }
        it->second(cfg, value, key);
    }
    for (auto const& [key, fn] : set) {
        auto const name = detail::config::env_name(key);
        if (auto v = env(name)) {
            fn(cfg, detail::config::env_value(*v, name), name);
        }
    }
    if (!base_dir.empty()) {
        for (auto* p : {&cfg.corpus_dir, &cfg.index_dir, &cfg.llm.script}) {
            if (!p->empty() && p->is_relative()) {
                *p = base_dir / *p;
            }
        }
    }
    cfg.validate();
    return cfg;
}

inline AppConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env)
{
    return parse_config(read_file(path), path.string(), path.parent_path(), env);
}

/// Defaults plus environment overrides, for runs without a config file.
inline AppConfig default_config(const EnvLookup& env = process_env) { return parse_config("", "defaults", {}, env); }

// ---------------------------------------------------------------------------
// Backend construction

inline std::unique_ptr<EmbeddingClient> make_embedder(const AppConfig& cfg)
{
    if (cfg.embedder.backend == "http") {
        return std::make_unique<HttpEmbedder>(
            HttpEmbedder::Options{cfg.embedder.endpoint, cfg.embedder.model, cfg.embedder.api_key_env});
    }
    return std::make_unique<MockEmbedder>(cfg.embedder.dim, cfg.embedder.seed);
}

/// The raw client; callers wrap it in BoundedLlmClient to enforce the cap.
inline std::unique_ptr<LlmClient> make_llm(const AppConfig& cfg)
{
    if (cfg.llm.backend == "scripted") {
        return std::make_unique<ScriptedLlmClient>(parse_json(read_file(cfg.llm.script), cfg.llm.script.string()));
    }
    if (cfg.llm.backend == "heuristic") {
        return std::make_unique<HeuristicLlmClient>();
    }
    return std::make_unique<HttpLlmClient>(HttpLlmClient::Options{
        cfg.llm.endpoint, cfg.llm.model, cfg.llm.api_key_env, std::chrono::seconds(cfg.llm.timeout_s)});
}

inline std::unique_ptr<TokenScorer> make_scorer(const AppConfig& cfg)
{
    if (cfg.extraction.scorer_endpoint.empty()) {
        return std::make_unique<MockTokenScorer>();
    }
    return std::make_unique<HttpTokenScorer>(
        HttpTokenScorer::Options{cfg.extraction.scorer_endpoint, cfg.extraction.scorer_api_key_env});
}

/// True when every configured model call is answered locally and
/// deterministically. Latency is not recorded for such runs.
inline bool offline_backends(const AppConfig& cfg, bool uses_scorer)
{
    if (uses_scorer) {
        return cfg.extraction.scorer_endpoint.empty();
    }
    return cfg.llm.backend != "http";
}

}  // namespace verbatim
