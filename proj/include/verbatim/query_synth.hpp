#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "chunker.hpp"
#include "error.hpp"
#include "json_salvage.hpp"
#include "llm.hpp"
#include "log.hpp"
#include "prompts.hpp"
#include "question_types.hpp"
#include "retry.hpp"
#include "types.hpp"

namespace verbatim {

struct SynthOptions {
    int output_retries = 2;  // re-asks after an unusable answer
    double classify_temperature = 0.0;
    double question_temperature = 0.7;
    double rewrite_temperature = 0.0;
    int max_tokens = 512;
    RetryPolicy transport;  // for BackendError from the client itself
    std::size_t parallelism = 4;
};

namespace detail::synth {

inline std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> nonempty_lines(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto nl = s.find('\n', pos);
        auto line = trim(s.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (!line.empty()) {
            out.push_back(std::move(line));
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    return out;
}

/// Drops a leading "Question:", "Search query:", "**Query**:" style label and
/// one layer of enclosing quotes or backticks.
inline std::string strip_label_and_quotes(std::string s)
{
    for (bool changed = true; changed;) {
        changed = false;
        s = trim(s);
        while (s.starts_with("**") || s.starts_with("__")) {
            s = s.substr(2);
        }
        auto colon = s.find(':');
        if (colon != std::string::npos && colon <= 20) {
            std::string label;
            for (char c : s.substr(0, colon)) {
                if (c != '*' && c != '_') {
                    label += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                }
            }
            label = trim(label);
            for (std::string_view l : {"question", "query", "search query", "q", "answer", "rewritten query"}) {
                if (label == l) {
                    s = s.substr(colon + 1);
                    while (s.starts_with("**") || s.starts_with("__")) {
                        s = s.substr(2);
                    }
                    changed = true;
                    break;
                }
            }
        }
        s = trim(s);
        for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"\"", "\""},
                                   {"'", "'"},
                                   {"`", "`"},
                                   {"\xE2\x80\x9C", "\xE2\x80\x9D"},
                                   {"\xE2\x80\x98", "\xE2\x80\x99"}}) {
            if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
                s = s.substr(open.size(), s.size() - open.size() - close.size());
                changed = true;
                break;
            }
        }
    }
    return s;
}

/// Candidate type names from a parsed array: strings, or objects carrying the
/// name under "name", "type", "question_type" or "question type".
inline std::vector<std::string> names_in(const Json& arr)
{
    std::vector<std::string> out;
    for (auto const& item : arr) {
        if (item.is_string()) {
            out.push_back(item.get<std::string>());
        } else if (item.is_object()) {
            for (auto it = item.begin(); it != item.end(); ++it) {
                std::string key;
                for (char c : it.key()) {
                    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                }
                if ((key == "name" || key == "type" || key == "question_type" || key == "question type") &&
                    it.value().is_string()) {
                    out.push_back(it.value().get<std::string>());
                    break;
                }
            }
        }
    }
    return out;
}

/// "7. Definition" -> "Definition", "Definition: questions asking..." -> "Definition".
inline std::string clean_type_name(std::string s)
{
    s = trim(s);
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == ' ')) {
        ++i;
    }
    s = s.substr(i);
    if (auto colon = s.find(':'); colon != std::string::npos) {
        s = s.substr(0, colon);
    }
    return trim(s);
}

}  // namespace detail::synth

/// Parses a classification answer into unique catalog names in answer order.
/// Names outside the catalog are skipped with a warning.
inline std::vector<std::string> parse_question_types(std::string_view response)
{
    auto arr = salvage::json_array(response);
    if (!arr) {
        throw FormatError("classification answer contains no JSON array");
    }
    std::vector<std::string> out;
    for (auto const& raw : detail::synth::names_in(*arr)) {
        auto t = find_question_type(detail::synth::clean_type_name(raw));
        if (!t) {
            log::warn("ignoring unknown question type '" + raw + "'");
            continue;
        }
        std::string name(t->name);
        if (std::find(out.begin(), out.end(), name) == out.end()) {
            out.push_back(std::move(name));
        }
    }
    return out;
}

namespace detail::synth {

/// Calls the model until `parse` accepts an answer. `parse` throws FormatError
/// for unusable output; transport failures go through the retry policy.
template <typename Parse>
auto ask(LlmClient& llm, const LlmRequest& req, const SynthOptions& opts, const std::string& what, Parse&& parse)
    -> decltype(parse(std::string{}))
{
    std::string last_error;
    for (int attempt = 0; attempt <= opts.output_retries; ++attempt) {
        auto response = with_retries(opts.transport, what, [&] { return llm.complete(req); });
        try {
            return parse(response);
        } catch (const FormatError& e) {
            last_error = e.what();
            log::warn(what + ": unusable answer (attempt " + std::to_string(attempt + 1) + "): " + last_error);
        }
    }
    throw FormatError(what + " failed after " + std::to_string(opts.output_retries + 1) +
                      " attempts: " + last_error);
}

}  // namespace detail::synth

/// Asks for the three question types best answered by `chunk_text`.
inline std::vector<std::string> classify_question_types(const std::string& chunk_text, LlmClient& llm,
                                                        const SynthOptions& opts = {})
{
    if (detail::synth::trim(chunk_text).empty()) {
        throw FormatError("cannot classify an empty chunk");
    }
    LlmRequest req{prompts::fill_braces(prompts::kClassifyTemplate, {{"chunk", chunk_text}}),
                   opts.classify_temperature, opts.max_tokens};
    return detail::synth::ask(llm, req, opts, "question-type classification", [](const std::string& r) {
        auto names = parse_question_types(r);
        if (names.size() < 3) {
            throw FormatError("only " + std::to_string(names.size()) + " valid question types in answer");
        }
        names.resize(3);
        return names;
    });
}

/// Normalises a generated question: one non-empty line, labels and quotes removed.
inline std::string parse_question(std::string_view response)
{
    auto lines = detail::synth::nonempty_lines(response);
    if (lines.empty()) {
        throw FormatError("empty question");
    }
    if (lines.size() > 1) {
        throw FormatError("expected one question, got " + std::to_string(lines.size()) + " lines");
    }
    auto q = detail::synth::strip_label_and_quotes(lines.front());
    if (q.empty()) {
        throw FormatError("empty question");
    }
    return q;
}

inline std::string generate_question(const std::string& chunk_text, const std::string& qtype, LlmClient& llm,
                                     const SynthOptions& opts = {})
{
    auto t = find_question_type(qtype);
    if (!t) {
        throw FormatError("unknown question type '" + qtype + "'");
    }
    LlmRequest req{prompts::fill_braces(prompts::kQuestionTemplate, {{"chunk", chunk_text},
                                                                     {"q_type", std::string(t->name)},
                                                                     {"q_def", std::string(t->definition)},
                                                                     {"q_ex", std::string(t->example)}}),
                   opts.question_temperature, opts.max_tokens};
    return detail::synth::ask(llm, req, opts, "question generation (" + std::string(t->name) + ")", parse_question);
}

/// Normalises a rewritten query: the first non-empty line (others are dropped
/// with a warning), labels and quotes removed.
inline std::string parse_query(std::string_view response)
{
    auto lines = detail::synth::nonempty_lines(response);
    if (lines.empty()) {
        throw FormatError("empty query");
    }
    if (lines.size() > 1) {
        log::warn("query rewrite returned " + std::to_string(lines.size()) + " lines; keeping the first");
    }
    auto q = detail::synth::strip_label_and_quotes(lines.front());
    if (q.empty()) {
        throw FormatError("empty query");
    }
    return q;
}

inline std::string rewrite_query(const std::string& question, LlmClient& llm, const SynthOptions& opts = {})
{
    if (detail::synth::trim(question).empty()) {
        throw FormatError("cannot rewrite an empty question");
    }
    LlmRequest req{prompts::fill_braces(prompts::kRewriteTemplate, {{"question", question}}), opts.rewrite_temperature,
                   opts.max_tokens};
    return detail::synth::ask(llm, req, opts, "query rewrite", parse_query);
}

/// classify -> one question per type -> rewrite, for one chunk.
inline std::vector<SyntheticQuery> synthesize_for_chunk(const Chunk& chunk, LlmClient& llm,
                                                        const SynthOptions& opts = {})
{
    auto const text = render_chunk_text(chunk);
    std::vector<SyntheticQuery> out;
    auto types = classify_question_types(text, llm, opts);
    for (std::size_t i = 0; i < types.size(); ++i) {
        SyntheticQuery q;
        q.query_id = chunk.chunk_id + "/q" + std::to_string(i + 1);
        q.chunk_id = chunk.chunk_id;
        q.question_type = types[i];
        q.question = generate_question(text, types[i], llm, opts);
        q.query = rewrite_query(q.question, llm, opts);
        q.model = llm.model_id();
        q.prompt_version = std::string(prompts::kQueryPromptVersion);
        out.push_back(std::move(q));
    }
    return out;
}

struct SynthFailure {
    std::string chunk_id;
    std::string error;
};

struct SynthResult {
    std::vector<SyntheticQuery> queries;  // sorted by query_id
    std::vector<SynthFailure> failures;   // sorted by chunk_id
};

/// Runs every chunk with bounded parallelism. A chunk that fails at any stage
/// contributes no queries and one failure entry.
inline SynthResult synthesize(const std::vector<Chunk>& chunks, LlmClient& llm, const SynthOptions& opts = {})
{
    SynthResult result;
    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < chunks.size(); i = next++) {
            try {
                auto qs = synthesize_for_chunk(chunks[i], llm, opts);
                std::lock_guard lock(mutex);
                result.queries.insert(result.queries.end(), qs.begin(), qs.end());
            } catch (const Error& e) {
                log::warn("query synthesis failed for " + chunks[i].chunk_id + ": " + e.what());
                std::lock_guard lock(mutex);
                result.failures.push_back({chunks[i].chunk_id, e.what()});
            }
        }
    };
    auto const threads = std::clamp<std::size_t>(opts.parallelism, 1, std::max<std::size_t>(1, chunks.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }
    std::sort(result.queries.begin(), result.queries.end(),
              [](auto const& a, auto const& b) { return a.query_id < b.query_id; });
    std::sort(result.failures.begin(), result.failures.end(),
              [](auto const& a, auto const& b) { return a.chunk_id < b.chunk_id; });
    return result;
}

namespace detail::synth {

/// Uniform integer in [0, n) by rejection, so results do not depend on the
/// standard library's distribution implementation.
inline std::uint64_t below(std::mt19937_64& rng, std::uint64_t n)
{
    auto const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        auto v = rng();
        if (v < limit) {
            return v % n;
        }
    }
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[below(rng, i)]);
    }
}

}  // namespace detail::synth

/// Picks up to `n` chunks: papers in seeded random order, one random chunk per
/// paper per round, so every paper contributes before any paper repeats.
inline std::vector<Chunk> sample_chunks(const std::vector<Chunk>& chunks, std::size_t n, std::uint64_t seed)
{
    std::map<std::string, std::vector<std::size_t>> by_doc;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        by_doc[chunks[i].doc_id].push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> pools;
    for (auto& [doc, idx] : by_doc) {
        pools.push_back(std::move(idx));
    }
    std::vector<Chunk> out;
    while (out.size() < n) {
        std::vector<std::size_t> order;
        for (std::size_t p = 0; p < pools.size(); ++p) {
            if (!pools[p].empty()) {
                order.push_back(p);
            }
        }
        if (order.empty()) {
            break;
        }
        detail::synth::shuffle(order, rng);
        for (auto p : order) {
            if (out.size() == n) {
                break;
            }
            auto& pool = pools[p];
            auto const pick = detail::synth::below(rng, pool.size());
            out.push_back(chunks[pool[pick]]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
    }
    return out;
}

}  // namespace verbatim
