#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "hash.hpp"
#include "http.hpp"
#include "io.hpp"
#include "prompts.hpp"
#include "question_types.hpp"
#include "tokenize.hpp"

namespace verbatim {

struct LlmRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 1024;
};

/// Text-in, text-out completion backend. Implementations must be safe to call
/// from several threads.
class LlmClient {
  public:
    virtual ~LlmClient() = default;
    virtual std::string model_id() const = 0;
    virtual std::string complete(const LlmRequest& req) = 0;
};

/// OpenAI-compatible chat-completions endpoint.
class HttpLlmClient : public LlmClient {
  public:
    struct Options {
        std::string url;  // full URL, e.g. http://localhost:8000/v1/chat/completions
        std::string model;
        std::string api_key_env;
        std::chrono::milliseconds timeout{120000};
    };

    explicit HttpLlmClient(Options opts) : m_opts(std::move(opts)) {}

    std::string model_id() const override { return m_opts.model; }

    std::string complete(const LlmRequest& req) override
    {
        Json body{{"model", m_opts.model},
                  {"messages", Json::array({{{"role", "user"}, {"content", req.prompt}}})},
                  {"temperature", req.temperature},
                  {"max_tokens", req.max_tokens}};
        auto raw = http::post_json(m_opts.url, body.dump(), {m_opts.timeout, http::env(m_opts.api_key_env)});
        return parse_response(raw);
    }

    static std::string parse_response(const std::string& raw)
    {
        auto j = Json::parse(raw, nullptr, false);
        if (j.is_discarded()) {
            throw BackendError("LLM response is not JSON");
        }
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("unexpected LLM response shape: ") + e.what());
        }
    }

  private:
    Options m_opts;
};

namespace detail::heuristic {

inline const std::set<std::string>& stopwords()
{
    static const std::set<std::string> words{
        "a",     "about", "an",   "and",   "any",   "are",  "as",    "at",    "be",    "by",   "can",
        "do",    "does",  "for",  "from",  "has",   "have", "how",   "in",    "into",  "is",   "it",
        "its",   "many",  "much", "of",    "on",    "or",   "that",  "the",   "their", "them", "there",
        "these", "this",  "to",   "used",  "using", "was",  "were",  "what",  "when",  "where", "which",
        "who",   "why",   "will", "with",  "would", "you",  "your",  "text",  "say",   "says",
    };
    return words;
}

inline std::vector<std::string> keywords(std::string_view text)
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& t : tokenize(text)) {
        if (t.size() >= 3 && !stopwords().count(t) && seen.insert(t).second) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

/// Keywords ordered by frequency, then first appearance.
inline std::vector<std::string> salient(std::string_view text, std::size_t n)
{
    auto tokens = tokenize(text);
    std::map<std::string, std::size_t> count, first;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto const& t = tokens[i];
        if (t.size() < 3 || stopwords().count(t)) {
            continue;
        }
        ++count[t];
        first.emplace(t, i);
    }
    std::vector<std::string> words;
    for (auto const& [w, c] : count) {
        words.push_back(w);
    }
    std::sort(words.begin(), words.end(), [&](auto const& a, auto const& b) {
        return count[a] != count[b] ? count[a] > count[b] : first[a] < first[b];
    });
    words.resize(std::min(words.size(), n));
    return words;
}

inline std::string between(std::string_view s, std::string_view open, std::string_view close)
{
    auto a = s.find(open);
    if (a == std::string_view::npos) {
        return {};
    }
    a += open.size();
    auto b = close.empty() ? s.size() : s.find(close, a);
    return std::string(s.substr(a, b == std::string_view::npos ? s.size() - a : b - a));
}

inline std::string join(const std::vector<std::string>& v, std::string_view sep)
{
    std::string out;
    for (auto const& s : v) {
        out += (out.empty() ? "" : std::string(sep)) + s;
    }
    return out;
}

/// Sentence-ish pieces of `text`: split after ". ", "? ", "! " and at line
/// breaks, trimmed, never empty.
inline std::vector<std::string> sentences(std::string_view text)
{
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto b = cur.find_first_not_of(" \t\r\n");
        auto e = cur.find_last_not_of(" \t\r\n");
        if (b != std::string::npos) {
            out.push_back(cur.substr(b, e - b + 1));
        }
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') {
            flush();
            continue;
        }
        cur += c;
        if ((c == '.' || c == '?' || c == '!') && i + 1 < text.size() && text[i + 1] == ' ') {
            flush();
        }
    }
    flush();
    return out;
}

}  // namespace detail::heuristic

/// Deterministic offline stand-in for a real model. It recognises the four
/// shipped prompt kinds and answers each with something well-formed derived
/// from the prompt's own text, so pipelines run end to end without a network.
class HeuristicLlmClient : public LlmClient {
  public:
    std::string model_id() const override { return "heuristic-mock"; }

    std::string complete(const LlmRequest& req) override
    {
        using namespace detail::heuristic;
        std::string_view p = req.prompt;
        if (p.starts_with(prompts::kClassifyTemplate.substr(0, 60))) {
            return classify(between(p, "\nText: ", ""));
        }
        if (p.starts_with(prompts::kQuestionTemplate.substr(0, 60))) {
            return question(between(p, "Content of paper: ", "\n\nPlease generate"),
                            between(p, "- Question Type: ", "\n"));
        }
        if (p.starts_with(prompts::kRewriteTemplate.substr(0, 60))) {
            auto q = between(p, "Your question: ", "\n");
            auto k = keywords(q);
            return k.empty() ? q : join(k, " ");
        }
        if (p.starts_with(prompts::kExtractDefaultTemplate.substr(0, 40)) ||
            p.starts_with(prompts::kExtractParagraphTemplate.substr(0, 40))) {
            return extract(between(p, "Your task\nQuestion: ", "\n"), between(p, "\nDocuments:\n", "\n\nExtract "));
        }
        return "";
    }

  private:
    static std::string classify(const std::string& chunk)
    {
        static constexpr std::array<std::string_view, 8> preferred{
            "Definition", "Feature Specification", "Quantification", "Concept Completion",
            "Comparison", "Causal Antecedent",     "Example",        "Instrumental/Procedural"};
        auto const start = hash::fnv1a64(chunk) % preferred.size();
        Json out = Json::array();
        for (std::size_t i = 0; i < 3; ++i) {
            out.push_back({{"name", preferred[(start + i) % preferred.size()]}});
        }
        return out.dump();
    }

    static std::string question(const std::string& chunk, const std::string& type)
    {
        using namespace detail::heuristic;
        auto k = salient(chunk, 3);
        if (k.empty()) {
            k = {"this", "topic"};
        }
        auto const subject = join(k, " ");
        if (type == "Definition") {
            return "What is meant by " + subject + "?";
        }
        if (type == "Quantification") {
            return "How many " + subject + " are reported?";
        }
        if (type == "Comparison") {
            return "How does " + k.front() + " compare to related approaches?";
        }
        if (type == "Causal Antecedent") {
            return "Why does " + subject + " matter?";
        }
        if (type == "Instrumental/Procedural") {
            return "How is " + subject + " done?";
        }
        return "What is known about " + subject + "?";
    }

    static std::string extract(const std::string& question, const std::string& documents)
    {
        using namespace detail::heuristic;
        auto const q = keywords(question);
        std::set<std::string> qset(q.begin(), q.end());
        Json out = Json::object();
        std::size_t pos = 0;
        while ((pos = documents.find("[doc_", pos)) != std::string::npos) {
            auto close = documents.find("]\n", pos);
            if (close == std::string::npos) {
                break;
            }
            auto tag = documents.substr(pos + 1, close - pos - 1);
            auto next = documents.find("\n\n[doc_", close);
            auto body = documents.substr(close + 2, next == std::string::npos ? std::string::npos : next - close - 2);
            std::string best;
            std::size_t best_score = 0;
            for (auto const& s : sentences(body)) {
                std::size_t score = 0;
                for (auto const& k : keywords(s)) {
                    score += qset.count(k);
                }
                if (score > best_score) {
                    best_score = score;
                    best = s;
                }
            }
            out[tag] = best_score > 0 ? Json::array({best}) : Json::array();
            pos = close;
        }
        return out.dump();
    }
};

/// Replays canned responses from a JSON fixture:
///
///   {"model": "...",
///    "responses": {"<sha256 of prompt>": "text" | ["1st try", "2nd try"] | {"error": "msg"}},
///    "rules": [{"contains": "substring", "response": ...}],
///    "fallback": "heuristic"}
///
/// Exact hashes win over rules; rules are tried in order. A list answers
/// successive attempts at the same prompt, repeating its last entry. Without a
/// fallback an unmatched prompt is a BackendError.
class ScriptedLlmClient : public LlmClient {
  public:
    explicit ScriptedLlmClient(Json fixture) : m_fixture(std::move(fixture))
    {
        if (!m_fixture.is_object()) {
            throw FormatError("scripted LLM fixture must be a JSON object");
        }
        auto fb = m_fixture.value("fallback", std::string{});
        if (fb == "heuristic") {
            m_fallback = std::make_unique<HeuristicLlmClient>();
        } else if (!fb.empty()) {
            throw FormatError("unknown scripted LLM fallback '" + fb + "'");
        }
    }

    static ScriptedLlmClient from_file(const std::filesystem::path& p)
    {
        return ScriptedLlmClient(parse_json(read_file(p), p.string()));
    }

    std::string model_id() const override { return m_fixture.value("model", std::string("scripted-mock")); }

    std::string complete(const LlmRequest& req) override
    {
        auto const key = hash::sha256_hex(req.prompt);
        std::size_t attempt = 0;
        {
            std::lock_guard lock(m_mutex);
            attempt = m_attempts[key]++;
            m_prompts.push_back(req.prompt);
        }
        if (m_fixture.contains("responses") && m_fixture["responses"].contains(key)) {
            return answer(m_fixture["responses"][key], attempt);
        }
        if (m_fixture.contains("rules")) {
            for (auto const& rule : m_fixture["rules"]) {
                if (req.prompt.find(rule.at("contains").get<std::string>()) != std::string::npos) {
                    return answer(rule.at("response"), attempt);
                }
            }
        }
        if (m_fallback) {
            return m_fallback->complete(req);
        }
        throw BackendError("no scripted response for prompt " + key.substr(0, 12));
    }

    std::vector<std::string> prompts() const
    {
        std::lock_guard lock(m_mutex);
        return m_prompts;
    }

  private:
    static std::string answer(const Json& r, std::size_t attempt)
    {
        if (r.is_string()) {
            return r.get<std::string>();
        }
        if (r.is_array() && !r.empty()) {
            return answer(r[std::min(attempt, r.size() - 1)], 0);
        }
        if (r.is_object() && r.contains("error")) {
            throw BackendError(r["error"].get<std::string>());
        }
        throw FormatError("scripted response must be a string, a list, or {\"error\": ...}");
    }

    Json m_fixture;
    std::unique_ptr<LlmClient> m_fallback;
    mutable std::mutex m_mutex;
    std::map<std::string, std::size_t> m_attempts;
    std::vector<std::string> m_prompts;
};

/// Caps the number of requests in flight across all threads sharing it.
class BoundedLlmClient : public LlmClient {
  public:
    BoundedLlmClient(LlmClient& inner, std::ptrdiff_t max_in_flight)
        : m_inner(inner), m_slots(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 1024))
    {
    }

    std::string model_id() const override { return m_inner.model_id(); }

    std::string complete(const LlmRequest& req) override
    {
        m_slots.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{m_slots};
        return m_inner.complete(req);
    }

  private:
    LlmClient& m_inner;
    std::counting_semaphore<1024> m_slots;
};

}  // namespace verbatim
