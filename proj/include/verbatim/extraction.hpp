#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <set>
#include <thread>
#include <vector>

#include "error.hpp"
#include "http.hpp"
#include "json_salvage.hpp"
#include "llm.hpp"
#include "log.hpp"
#include "prompts.hpp"
#include "retry.hpp"
#include "span.hpp"
#include "tokenize.hpp"
#include "types.hpp"
#include "utf8.hpp"

namespace verbatim {

enum class PromptMode { default_extraction, paragraph_extraction };

inline PromptMode parse_prompt_mode(std::string_view s)
{
    if (s == "default" || s == "default_extraction") {
        return PromptMode::default_extraction;
    }
    if (s == "paragraph" || s == "paragraph_extraction") {
        return PromptMode::paragraph_extraction;
    }
    throw FormatError("unknown prompt mode '" + std::string(s) + "' (expected default or paragraph)");
}

inline std::string_view to_string(PromptMode m)
{
    return m == PromptMode::default_extraction ? "default" : "paragraph";
}

struct PostProcessConfig {
    std::size_t min_span_chars = 10;
    std::size_t merge_gap_chars = 20;
    double decode_threshold = 0.2;

    void validate() const
    {
        if (min_span_chars < 1) {
            throw FormatError("min_span_chars must be at least 1");
        }
        if (!(decode_threshold > 0.0 && decode_threshold < 1.0)) {
            throw FormatError("decode_threshold must lie in (0, 1)");
        }
    }
};

// ---------------------------------------------------------------------------
// Span post-processing

/// Joins consecutive spans whose gap is at most `max_gap`, repeating until
/// nothing changes. Input may be unsorted or overlapping.
inline std::vector<CharSpan> merge_close(std::vector<CharSpan> spans, std::size_t max_gap)
{
    spans = spans::union_of(std::move(spans));
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<CharSpan> out;
        for (auto const& s : spans) {
            if (!out.empty() && s.start - out.back().end <= max_gap) {
                out.back().end = std::max(out.back().end, s.end);
                changed = true;
            } else {
                out.push_back(s);
            }
        }
        spans = std::move(out);
    }
    return spans;
}

/// Merge close neighbours, then drop spans shorter than the minimum.
inline std::vector<CharSpan> post_process(std::vector<CharSpan> spans, const PostProcessConfig& cfg)
{
    spans = merge_close(std::move(spans), cfg.merge_gap_chars);
    std::erase_if(spans, [&](const CharSpan& s) { return s.length() < cfg.min_span_chars; });
    return spans;
}

// ---------------------------------------------------------------------------
// Token-score decoding

struct TokenScore {
    CharSpan range;
    double prob = 0.0;

    friend bool operator==(const TokenScore&, const TokenScore&) = default;
};

inline void validate_scores(const std::vector<TokenScore>& scores, std::size_t text_length)
{
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto const& s = scores[i];
        if (!s.range.valid_in(text_length)) {
            throw FormatError("token " + std::to_string(i) + " range " + to_string(s.range) + " is out of bounds");
        }
        if (!std::isfinite(s.prob) || s.prob < 0.0 || s.prob > 1.0) {
            throw FormatError("token " + std::to_string(i) + " has probability outside [0, 1]");
        }
        if (i > 0 && s.range.start < scores[i - 1].range.end) {
            throw FormatError("token ranges must be ordered and non-overlapping (token " + std::to_string(i) + ")");
        }
    }
}

/// Indices of tokens with prob >= threshold.
inline std::vector<std::size_t> select_tokens(const std::vector<TokenScore>& scores, double threshold)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i].prob >= threshold) {
            out.push_back(i);
        }
    }
    return out;
}

/// Runs of consecutive selected tokens become one span from the first token's
/// start to the last token's end.
inline std::vector<CharSpan> coalesce_tokens(const std::vector<TokenScore>& scores,
                                             const std::vector<std::size_t>& selected)
{
    std::vector<CharSpan> out;
    for (std::size_t k = 0; k < selected.size(); ++k) {
        auto const i = selected[k];
        if (k > 0 && selected[k - 1] + 1 == i) {
            out.back().end = scores[i].range.end;
        } else {
            out.push_back(scores[i].range);
        }
    }
    return out;
}

inline std::vector<CharSpan> decode_spans(const std::vector<TokenScore>& scores, const PostProcessConfig& cfg)
{
    return post_process(coalesce_tokens(scores, select_tokens(scores, cfg.decode_threshold)), cfg);
}

/// Orders decoded spans by their highest token probability, then position.
inline std::vector<CharSpan> rank_by_score(std::vector<CharSpan> spans, const std::vector<TokenScore>& scores)
{
    std::vector<std::pair<double, CharSpan>> keyed;
    for (auto const& s : spans) {
        double best = 0.0;
        for (auto const& t : scores) {
            if (t.range.start >= s.start && t.range.end <= s.end) {
                best = std::max(best, t.prob);
            }
        }
        keyed.emplace_back(best, s);
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](auto const& a, auto const& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    spans.clear();
    for (auto const& [p, s] : keyed) {
        spans.push_back(s);
    }
    return spans;
}

// ---------------------------------------------------------------------------
// Verbatim location

enum class MatchKind { exact, whitespace_normalized };

struct Located {
    CharSpan span;
    MatchKind kind;
};

namespace detail {

inline bool is_unicode_space(char32_t c)
{
    return unicode_ctype().is(std::ctype_base::space, static_cast<wchar_t>(c));
}

/// Whitespace runs collapsed to one ' ', leading/trailing whitespace removed.
/// `origin[i]` is the source index of output character i and `origin_end[i]`
/// one past the last source character it stands for.
struct Collapsed {
    std::u32string text;
    std::vector<std::size_t> origin;
    std::vector<std::size_t> origin_end;
};

inline Collapsed collapse_whitespace(std::u32string_view s)
{
    Collapsed out;
    std::size_t i = 0;
    while (i < s.size() && is_unicode_space(s[i])) {
        ++i;
    }
    while (i < s.size()) {
        if (is_unicode_space(s[i])) {
            auto j = i;
            while (j < s.size() && is_unicode_space(s[j])) {
                ++j;
            }
            if (j == s.size()) {
                break;
            }
            out.text += U' ';
            out.origin.push_back(i);
            out.origin_end.push_back(j);
            i = j;
        } else {
            out.text += s[i];
            out.origin.push_back(i);
            out.origin_end.push_back(i + 1);
            ++i;
        }
    }
    return out;
}

}  // namespace detail

/// Leftmost exact occurrence of `needle` in `text`, else the leftmost match
/// after collapsing whitespace runs on both sides (mapped back to source
/// offsets). nullopt means the text is not in the chunk.
inline std::optional<Located> locate_verbatim(std::u32string_view needle, std::u32string_view text)
{
    // a blank quote carries no evidence, even where the chunk has that whitespace
    if (std::all_of(needle.begin(), needle.end(), detail::is_unicode_space)) {
        return std::nullopt;
    }
    if (auto pos = text.find(needle); pos != std::u32string_view::npos) {
        return Located{{pos, pos + needle.size()}, MatchKind::exact};
    }
    auto const n = detail::collapse_whitespace(needle);
    if (n.text.empty()) {
        return std::nullopt;
    }
    auto const h = detail::collapse_whitespace(text);
    auto pos = h.text.find(n.text);
    if (pos == std::u32string::npos) {
        return std::nullopt;
    }
    auto const last = pos + n.text.size() - 1;
    return Located{{h.origin[pos], h.origin_end[last]}, MatchKind::whitespace_normalized};
}

inline std::optional<Located> locate_verbatim(std::string_view needle, std::string_view text)
{
    auto n = utf8::try_decode(needle);
    auto t = utf8::try_decode(text);
    if (!n || !t) {
        return std::nullopt;
    }
    return locate_verbatim(std::u32string_view(*n), std::u32string_view(*t));
}

/// True when `a` and `b` are equal after collapsing whitespace runs.
inline bool same_modulo_whitespace(std::u32string_view a, std::u32string_view b)
{
    return detail::collapse_whitespace(a).text == detail::collapse_whitespace(b).text;
}

/// Throws std::logic_error when a span lies outside its chunk. Called on every
/// result before it leaves the extractor.
inline void assert_spans_in_chunk(const std::vector<CharSpan>& spans, std::size_t chunk_length,
                                  const std::string& chunk_id)
{
    auto sorted = spans;
    std::sort(sorted.begin(), sorted.end());
    for (auto const& s : sorted) {
        if (!s.valid_in(chunk_length)) {
            throw std::logic_error("extractor produced span " + to_string(s) + " outside chunk " + chunk_id);
        }
    }
    if (!spans::sorted_disjoint(sorted)) {
        throw std::logic_error("extractor produced overlapping spans for " + chunk_id);
    }
}

// ---------------------------------------------------------------------------
// LLM prompt and answer

struct PromptDoc {
    std::string tag;   // doc_0, doc_1, ...
    std::string text;  // chunk body
};

inline std::vector<PromptDoc> tag_documents(const std::vector<std::string>& texts)
{
    std::vector<PromptDoc> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.push_back({"doc_" + std::to_string(i), texts[i]});
    }
    return out;
}

/// Documents render as "[doc_i]\n<text>" blocks separated by blank lines.
inline std::string build_prompt(PromptMode mode, const std::string& question, const std::vector<PromptDoc>& docs)
{
    if (docs.empty()) {
        throw FormatError("extraction prompt needs at least one document");
    }
    std::string rendered;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) {
            rendered += "\n\n";
        }
        rendered += "[" + docs[i].tag + "]\n" + docs[i].text;
    }
    auto const tpl = mode == PromptMode::default_extraction ? prompts::kExtractDefaultTemplate
                                                            : prompts::kExtractParagraphTemplate;
    return prompts::fill_jinja(tpl, {{"question", question}, {"documents", rendered}});
}

struct ParsedExtraction {
    std::vector<std::vector<std::string>> spans;  // aligned with the docs passed in
    std::vector<std::string> unknown_tags;
    std::size_t non_string_items = 0;
};

/// Reads the {"doc_i": [...]} answer. Missing tags mean no spans.
inline ParsedExtraction parse_extraction(std::string_view response, const std::vector<PromptDoc>& docs)
{
    auto obj = salvage::json_object(response);
    if (!obj) {
        throw BackendError("extraction answer is not a JSON object");
    }
    ParsedExtraction out;
    out.spans.resize(docs.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        index[docs[i].tag] = i;
    }
    for (auto it = obj->begin(); it != obj->end(); ++it) {
        auto found = index.find(it.key());
        if (found == index.end()) {
            log::warn("extraction answer names unknown document '" + it.key() + "'");
            out.unknown_tags.push_back(it.key());
            continue;
        }
        auto const& value = it.value();
        if (value.is_string()) {
            out.spans[found->second].push_back(value.get<std::string>());
            continue;
        }
        if (!value.is_array()) {
            ++out.non_string_items;
            continue;
        }
        for (auto const& item : value) {
            if (item.is_string()) {
                out.spans[found->second].push_back(item.get<std::string>());
            } else {
                ++out.non_string_items;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backends

struct ExtractionInput {
    std::string query_id;
    std::string query;
    std::string chunk_id;
    std::string chunk_text;
};

struct Diagnostics {
    std::size_t exact_matches = 0;
    std::size_t normalized_matches = 0;
    std::size_t rejected = 0;  // span strings not found in their chunk
    std::vector<std::string> rejected_texts;
    std::size_t unknown_tags = 0;

    Diagnostics& operator+=(const Diagnostics& o)
    {
        exact_matches += o.exact_matches;
        normalized_matches += o.normalized_matches;
        rejected += o.rejected;
        rejected_texts.insert(rejected_texts.end(), o.rejected_texts.begin(), o.rejected_texts.end());
        unknown_tags += o.unknown_tags;
        return *this;
    }
};

struct ExtractionOutcome {
    ExtractionResult result;
    std::optional<std::string> error;  // set when the backend failed for this chunk
    Diagnostics diagnostics;
};

/// Locates raw LLM span strings in `chunk` and merges close neighbours (no
/// minimum length). Merged spans keep the best relevance rank of their parts.
inline std::vector<CharSpan> locate_and_merge(const std::vector<std::string>& raw, std::u32string_view chunk,
                                              const PostProcessConfig& cfg, Diagnostics& diag)
{
    std::vector<std::pair<CharSpan, std::size_t>> located;  // span, rank
    for (std::size_t r = 0; r < raw.size(); ++r) {
        auto const needle = utf8::try_decode(raw[r]);
        auto hit = needle ? locate_verbatim(std::u32string_view(*needle), chunk) : std::nullopt;
        if (!hit) {
            ++diag.rejected;
            diag.rejected_texts.push_back(raw[r]);
            log::debug("rejected non-verbatim span: " + raw[r]);
            continue;
        }
        (hit->kind == MatchKind::exact ? diag.exact_matches : diag.normalized_matches)++;
        located.emplace_back(hit->span, r);
    }
    std::vector<CharSpan> bare;
    for (auto const& [s, r] : located) {
        bare.push_back(s);
    }
    auto merged = merge_close(bare, cfg.merge_gap_chars);
    std::vector<std::pair<std::size_t, CharSpan>> ranked;
    for (auto const& m : merged) {
        std::size_t best = raw.size();
        for (auto const& [s, r] : located) {
            if (m.contains(s)) {
                best = std::min(best, r);
            }
        }
        ranked.emplace_back(best, m);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<CharSpan> out;
    for (auto const& [r, s] : ranked) {
        out.push_back(s);
    }
    return out;
}

class ExtractionBackend {
  public:
    virtual ~ExtractionBackend() = default;
    virtual std::string name() const = 0;
    /// All inputs share one query. One outcome per input, in input order.
    virtual std::vector<ExtractionOutcome> run(const std::vector<ExtractionInput>& inputs) = 0;
};

struct LlmExtractorOptions {
    PromptMode mode = PromptMode::default_extraction;
    PostProcessConfig post;
    std::size_t docs_per_prompt = 1;
    double temperature = 0.0;
    int max_tokens = 2048;
    RetryPolicy retry;
};

class LlmExtractor : public ExtractionBackend {
  public:
    LlmExtractor(LlmClient& llm, LlmExtractorOptions opts) : m_llm(llm), m_opts(std::move(opts)) {}

    std::string name() const override { return "llm:" + std::string(to_string(m_opts.mode)) + ":" + m_llm.model_id(); }

    std::vector<ExtractionOutcome> run(const std::vector<ExtractionInput>& inputs) override
    {
        std::vector<ExtractionOutcome> out;
        auto const per = std::max<std::size_t>(1, m_opts.docs_per_prompt);
        for (std::size_t begin = 0; begin < inputs.size(); begin += per) {
            auto const end = std::min(inputs.size(), begin + per);
            auto group = run_group(inputs, begin, end);
            out.insert(out.end(), group.begin(), group.end());
        }
        return out;
    }

  private:
    std::vector<ExtractionOutcome> run_group(const std::vector<ExtractionInput>& inputs, std::size_t begin,
                                             std::size_t end)
    {
        std::vector<PromptDoc> docs;
        for (auto i = begin; i < end; ++i) {
            docs.push_back({"doc_" + std::to_string(i - begin), inputs[i].chunk_text});
        }
        std::vector<ExtractionOutcome> out(end - begin);
        for (auto i = begin; i < end; ++i) {
            auto& r = out[i - begin].result;
            r.query_id = inputs[i].query_id;
            r.chunk_id = inputs[i].chunk_id;
            r.backend = name();
        }
        auto const t0 = std::chrono::steady_clock::now();
        ParsedExtraction parsed;
        try {
            LlmRequest req{build_prompt(m_opts.mode, inputs[begin].query, docs), m_opts.temperature,
                           m_opts.max_tokens};
            parsed = with_retries(m_opts.retry, "extraction for " + inputs[begin].chunk_id, [&] {
                return parse_extraction(m_llm.complete(req), docs);
            });
        } catch (const BackendError& e) {
            for (auto& o : out) {
                o.error = e.what();
            }
            return out;
        }
        auto const seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (auto i = begin; i < end; ++i) {
            auto& o = out[i - begin];
            auto const text = utf8::decode(inputs[i].chunk_text);
            o.result.spans = locate_and_merge(parsed.spans[i - begin], text, m_opts.post, o.diagnostics);
            o.result.abstained = o.result.spans.empty();
            o.result.latency_s = seconds / static_cast<double>(end - begin);
            assert_spans_in_chunk(o.result.spans, text.size(), inputs[i].chunk_id);
        }
        if (!out.empty()) {
            out.front().diagnostics.unknown_tags = parsed.unknown_tags.size();
        }
        return out;
    }

    LlmClient& m_llm;
    LlmExtractorOptions m_opts;
};

/// Per-token relevance probabilities for one chunk.
class TokenScorer {
  public:
    virtual ~TokenScorer() = default;
    virtual std::string id() const = 0;
    virtual std::vector<TokenScore> score(const std::string& question, const std::string& chunk_text) = 0;
};

/// Scorer service over HTTP: POST {"question", "chunk_text"}, answer is an
/// array of {"start", "end", "prob"} (or {"tokens": [...]}) in character offsets.
class HttpTokenScorer : public TokenScorer {
  public:
    struct Options {
        std::string url;
        std::string api_key_env;
        std::chrono::milliseconds timeout{60000};
    };

    explicit HttpTokenScorer(Options opts) : m_opts(std::move(opts)) {}

    std::string id() const override { return m_opts.url; }

    std::vector<TokenScore> score(const std::string& question, const std::string& chunk_text) override
    {
        Json body{{"question", question}, {"chunk_text", chunk_text}};
        auto raw = http::post_json(m_opts.url, body.dump(), {m_opts.timeout, http::env(m_opts.api_key_env)});
        return parse_response(raw);
    }

    static std::vector<TokenScore> parse_response(const std::string& raw)
    {
        auto j = Json::parse(raw, nullptr, false);
        if (j.is_discarded()) {
            throw BackendError("token scorer response is not JSON");
        }
        if (j.is_object() && j.contains("tokens")) {
            j = j["tokens"];
        }
        if (!j.is_array()) {
            throw BackendError("token scorer response must be an array");
        }
        std::vector<TokenScore> out;
        try {
            for (auto const& t : j) {
                out.push_back({{t.at("start").get<std::size_t>(), t.at("end").get<std::size_t>()},
                               t.at("prob").get<double>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed token score: ") + e.what());
        }
        return out;
    }

  private:
    Options m_opts;
};

/// Offline scorer: whitespace tokens; a token scores high when it shares a
/// word with the question, and its neighbours inherit part of that score.
class MockTokenScorer : public TokenScorer {
  public:
    std::string id() const override { return "mock-scorer"; }

    std::vector<TokenScore> score(const std::string& question, const std::string& chunk_text) override
    {
        std::set<std::string> q;
        for (auto& t : detail::heuristic::keywords(question)) {
            q.insert(t);
        }
        auto const text = utf8::decode(chunk_text);
        std::vector<TokenScore> out;
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && detail::is_unicode_space(text[i])) {
                ++i;
            }
            auto const start = i;
            while (i < text.size() && !detail::is_unicode_space(text[i])) {
                ++i;
            }
            if (i > start) {
                auto words = tokenize(utf8::encode(text.substr(start, i - start)));
                bool hit = std::any_of(words.begin(), words.end(), [&](auto const& w) { return q.count(w) > 0; });
                out.push_back({{start, i}, hit ? 0.9 : 0.05});
            }
        }
        for (std::size_t k = 0; k < out.size(); ++k) {
            double near = 0.0;
            for (std::size_t d = 1; d <= 3; ++d) {
                if (k >= d && out[k - d].prob >= 0.9) {
                    near = std::max(near, 0.9 - 0.2 * static_cast<double>(d));
                }
                if (k + d < out.size() && out[k + d].prob >= 0.9) {
                    near = std::max(near, 0.9 - 0.2 * static_cast<double>(d));
                }
            }
            if (out[k].prob < 0.9) {
                out[k].prob = std::max(out[k].prob, near);
            }
        }
        return out;
    }
};

class TokenScoreExtractor : public ExtractionBackend {
  public:
    TokenScoreExtractor(TokenScorer& scorer, PostProcessConfig cfg, RetryPolicy retry = {})
        : m_scorer(scorer), m_cfg(cfg), m_retry(retry)
    {
        m_cfg.validate();
    }

    std::string name() const override { return "scorer:" + m_scorer.id(); }

    std::vector<ExtractionOutcome> run(const std::vector<ExtractionInput>& inputs) override
    {
        std::vector<ExtractionOutcome> out;
        for (auto const& in : inputs) {
            ExtractionOutcome o;
            o.result.query_id = in.query_id;
            o.result.chunk_id = in.chunk_id;
            o.result.backend = name();
            auto const t0 = std::chrono::steady_clock::now();
            try {
                auto scores = with_retries(m_retry, "token scoring for " + in.chunk_id,
                                           [&] { return m_scorer.score(in.query, in.chunk_text); });
                auto const len = utf8::length(in.chunk_text);
                try {
                    validate_scores(scores, len);
                } catch (const FormatError& e) {
                    throw BackendError(std::string("invalid token scores: ") + e.what());
                }
                o.result.spans = rank_by_score(decode_spans(scores, m_cfg), scores);
                o.result.abstained = o.result.spans.empty();
                o.result.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                assert_spans_in_chunk(o.result.spans, len, in.chunk_id);
            } catch (const BackendError& e) {
                o.error = e.what();
            }
            out.push_back(std::move(o));
        }
        return out;
    }

  private:
    TokenScorer& m_scorer;
    PostProcessConfig m_cfg;
    RetryPolicy m_retry;
};

struct ExtractionRun {
    std::vector<ExtractionOutcome> outcomes;  // input order
    Diagnostics diagnostics;
    std::size_t failures = 0;

    std::vector<ExtractionResult> results() const
    {
        std::vector<ExtractionResult> out;
        for (auto const& o : outcomes) {
            if (!o.error) {
                out.push_back(o.result);
            }
        }
        return out;
    }
};

/// Runs `backend` over `inputs`, grouping consecutive inputs that share a
/// query so multi-document prompts see them together. Groups run with bounded
/// parallelism; one failing chunk never affects another.
inline ExtractionRun extract_all(const std::vector<ExtractionInput>& inputs, ExtractionBackend& backend,
                                 std::size_t parallelism = 4, std::size_t group_size = 1)
{
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < inputs.size();) {
        auto j = i + 1;
        while (j < inputs.size() && j - i < std::max<std::size_t>(1, group_size) && inputs[j].query == inputs[i].query) {
            ++j;
        }
        groups.emplace_back(i, j);
        i = j;
    }
    ExtractionRun run;
    run.outcomes.resize(inputs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto g = next++; g < groups.size(); g = next++) {
            auto [b, e] = groups[g];
            std::vector<ExtractionInput> slice(inputs.begin() + static_cast<std::ptrdiff_t>(b),
                                               inputs.begin() + static_cast<std::ptrdiff_t>(e));
            auto outs = backend.run(slice);
            for (std::size_t k = 0; k < outs.size(); ++k) {
                run.outcomes[b + k] = std::move(outs[k]);
            }
        }
    };
    auto const threads = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(1, groups.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }
    for (auto const& o : run.outcomes) {
        run.diagnostics += o.diagnostics;
        if (o.error) {
            ++run.failures;
            log::warn("extraction failed for " + o.result.chunk_id + ": " + *o.error);
        }
    }
    return run;
}

}  // namespace verbatim
