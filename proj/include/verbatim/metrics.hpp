#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "log.hpp"
#include "span.hpp"
#include "tokenize.hpp"
#include "types.hpp"
#include "utf8.hpp"

namespace verbatim {

/// A fraction threshold in (0, 1] held as an exact decimal num / 10^d, so
/// that "overlap >= t * length" is decided in integers.
struct Threshold {
    std::uint64_t num = 1;
    std::uint64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    /// true iff part >= t * whole.
    bool reached(std::uint64_t part, std::uint64_t whole) const { return part * den >= num * whole; }

    std::string label() const
    {
        if (num == den) {
            return "1.0";
        }
        auto s = std::to_string(num);
        auto digits = std::to_string(den).size() - 1;
        s.insert(0, digits - std::min(digits, s.size()), '0');
        return "0." + s;
    }

    friend bool operator==(const Threshold& a, const Threshold& b) { return a.num * b.den == b.num * a.den; }
    friend bool operator<(const Threshold& a, const Threshold& b) { return a.num * b.den < b.num * a.den; }
};

/// Parses a decimal such as "0.8", ".5" or "1". At most 9 fractional digits.
inline Threshold parse_threshold(std::string_view s)
{
    auto bad = [&] { return FormatError("invalid threshold '" + std::string(s) + "' (expected a decimal in (0, 1])"); };
    auto dot = s.find('.');
    auto int_part = s.substr(0, dot);
    auto frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if ((int_part.empty() && frac_part.empty()) || frac_part.size() > 9) {
        throw bad();
    }
    auto all_digits = [](std::string_view d) {
        return std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (!all_digits(int_part) || !all_digits(frac_part) || int_part.size() > 9) {
        throw bad();
    }
    std::uint64_t den = 1;
    std::uint64_t num = 0;
    for (char c : int_part) {
        num = num * 10 + static_cast<std::uint64_t>(c - '0');
    }
    for (char c : frac_part) {
        num = num * 10 + static_cast<std::uint64_t>(c - '0');
        den *= 10;
    }
    if (num == 0 || num > den) {
        throw bad();
    }
    while (den > 1 && num % 10 == 0) {
        num /= 10;
        den /= 10;
    }
    return {num, den};
}

/// Exact decimal of the shortest representation of `t`, e.g. 0.8 -> 8/10.
inline Threshold threshold_from_double(double t)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, t, std::chars_format::fixed);
    if (ec != std::errc{}) {
        throw FormatError("invalid threshold");
    }
    return parse_threshold(std::string_view(buf, static_cast<std::size_t>(end - buf)));
}

using ThresholdGrid = std::vector<Threshold>;

inline ThresholdGrid default_grid()
{
    return {{5, 10}, {8, 10}, {1, 1}};
}

/// Comma-separated list, e.g. "0.5,0.8,1.0". Sorted ascending, duplicates removed.
inline ThresholdGrid parse_grid(std::string_view s)
{
    ThresholdGrid grid;
    while (!s.empty()) {
        auto comma = s.find(',');
        auto item = s.substr(0, comma);
        while (!item.empty() && item.front() == ' ') {
            item.remove_prefix(1);
        }
        while (!item.empty() && item.back() == ' ') {
            item.remove_suffix(1);
        }
        grid.push_back(parse_threshold(item));
        s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
    }
    if (grid.empty()) {
        throw FormatError("empty threshold list");
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

struct RowEval {
    std::string query_id;
    std::string chunk_id;
    std::u32string chunk_text;
    std::vector<CharSpan> gold_spans;
    std::vector<CharSpan> pred_spans;
};

/// Checks bounds and that each side is internally non-overlapping.
inline void validate(const RowEval& row)
{
    auto where = "(" + row.query_id + ", " + row.chunk_id + ")";
    for (auto const* side : {&row.gold_spans, &row.pred_spans}) {
        auto const name = side == &row.gold_spans ? "gold" : "predicted";
        for (auto const& s : *side) {
            if (!s.valid_in(row.chunk_text.size())) {
                throw FormatError(std::string(name) + " span " + to_string(s) + " is out of bounds for chunk of " +
                                  std::to_string(row.chunk_text.size()) + " characters in " + where);
            }
        }
        auto sorted = *side;
        std::sort(sorted.begin(), sorted.end());
        if (!spans::sorted_disjoint(sorted)) {
            throw FormatError(std::string(name) + " spans overlap in " + where);
        }
    }
}

namespace detail {

struct Word {
    std::size_t start;
    std::size_t end;
};

inline std::vector<Word> words_of(std::u32string_view text)
{
    auto const& ct = unicode_ctype();
    std::vector<Word> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && ct.is(std::ctype_base::space, static_cast<wchar_t>(text[i]))) {
            ++i;
        }
        auto const start = i;
        while (i < text.size() && !ct.is(std::ctype_base::space, static_cast<wchar_t>(text[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back({start, i});
        }
    }
    return out;
}

}  // namespace detail

/// Indices of whitespace-delimited words with at least half of their
/// characters inside the union of `spans`.
inline std::vector<std::size_t> word_cover(std::u32string_view text, const std::vector<CharSpan>& spans)
{
    std::vector<std::size_t> out;
    if (spans.empty()) {
        return out;
    }
    auto const u = spans::union_of(spans);
    auto const words = detail::words_of(text);
    for (std::size_t w = 0; w < words.size(); ++w) {
        CharSpan const span{words[w].start, words[w].end};
        if (2 * spans::overlap_with(span, u) >= span.length()) {
            out.push_back(w);
        }
    }
    return out;
}

struct WordCounts {
    std::uint64_t tp = 0;
    std::uint64_t pred = 0;
    std::uint64_t gold = 0;

    WordCounts& operator+=(const WordCounts& o)
    {
        tp += o.tp;
        pred += o.pred;
        gold += o.gold;
        return *this;
    }
};

inline WordCounts word_prf(const RowEval& row)
{
    auto const g = word_cover(row.chunk_text, row.gold_spans);
    auto const p = word_cover(row.chunk_text, row.pred_spans);
    std::vector<std::size_t> both;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(both));
    return {both.size(), p.size(), g.size()};
}

/// Hits and total over pooled spans.
struct SpanCounts {
    std::uint64_t hit = 0;
    std::uint64_t total = 0;

    double ratio() const { return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total); }
};

namespace detail {

inline SpanCounts pooled_overlap(const std::vector<RowEval>& rows, const Threshold& t, bool pred_side)
{
    SpanCounts c;
    for (auto const& row : rows) {
        auto const& own = pred_side ? row.pred_spans : row.gold_spans;
        auto const other = spans::union_of(pred_side ? row.gold_spans : row.pred_spans);
        for (auto const& s : own) {
            ++c.total;
            c.hit += t.reached(spans::overlap_with(s, other), s.length());
        }
    }
    return c;
}

}  // namespace detail

/// Predicted spans whose overlap with the row's gold union reaches t of their
/// length, over all predicted spans.
inline SpanCounts containment_counts(const std::vector<RowEval>& rows, const Threshold& t)
{
    return detail::pooled_overlap(rows, t, true);
}

/// Gold spans whose overlap with the row's predicted union reaches t of their
/// length, over all gold spans.
inline SpanCounts coverage_counts(const std::vector<RowEval>& rows, const Threshold& t)
{
    return detail::pooled_overlap(rows, t, false);
}

/// 0 when there are no predicted spans at all (see MetricsReport::containment_undefined).
inline double containment_at(const std::vector<RowEval>& rows, const Threshold& t)
{
    return containment_counts(rows, t).ratio();
}

inline double coverage_at(const std::vector<RowEval>& rows, const Threshold& t)
{
    auto c = coverage_counts(rows, t);
    if (c.total == 0) {
        throw FormatError("coverage is undefined: there are no gold spans");
    }
    return c.ratio();
}

/// Greedy one-to-one matches with IoU >= threshold, best IoU first; ties go
/// to the earlier predicted span, then the earlier gold span.
inline std::vector<std::pair<std::size_t, std::size_t>> iou_matches(const std::vector<CharSpan>& pred,
                                                                   const std::vector<CharSpan>& gold,
                                                                   const Threshold& threshold)
{
    struct Cand {
        std::uint64_t inter, uni;
        std::size_t p, g;
    };
    std::vector<Cand> cands;
    for (std::size_t p = 0; p < pred.size(); ++p) {
        for (std::size_t g = 0; g < gold.size(); ++g) {
            auto const inter = overlap(pred[p], gold[g]);
            if (inter == 0) {
                continue;
            }
            auto const uni = pred[p].length() + gold[g].length() - inter;
            if (threshold.reached(inter, uni)) {
                cands.push_back({inter, uni, p, g});
            }
        }
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
        auto const l = a.inter * b.uni;
        auto const r = b.inter * a.uni;
        if (l != r) {
            return l > r;
        }
        if (pred[a.p] != pred[b.p]) {
            return pred[a.p] < pred[b.p];
        }
        return gold[a.g] < gold[b.g];
    });
    std::vector<bool> used_p(pred.size()), used_g(gold.size());
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (auto const& c : cands) {
        if (!used_p[c.p] && !used_g[c.g]) {
            used_p[c.p] = used_g[c.g] = true;
            out.emplace_back(c.p, c.g);
        }
    }
    return out;
}

inline double f1_from(std::uint64_t tp, std::uint64_t pred, std::uint64_t gold)
{
    if (tp == 0) {
        return 0.0;
    }
    return 2.0 * static_cast<double>(tp) / static_cast<double>(pred + gold);
}

inline double iou_f1(const std::vector<RowEval>& rows, const Threshold& threshold = {5, 10})
{
    std::uint64_t tp = 0, pred = 0, gold = 0;
    for (auto const& row : rows) {
        tp += iou_matches(row.pred_spans, row.gold_spans, threshold).size();
        pred += row.pred_spans.size();
        gold += row.gold_spans.size();
    }
    return f1_from(tp, pred, gold);
}

struct MetricsReport {
    std::string backend;
    double word_precision = 0.0;
    double word_recall = 0.0;
    double word_f1 = 0.0;
    WordCounts word_counts;
    std::vector<std::pair<Threshold, double>> containment_at;  // ascending t
    std::vector<std::pair<Threshold, double>> coverage_at;
    bool containment_undefined = false;  // no predicted spans
    bool coverage_undefined = false;     // no gold spans
    double iou_f1_at_05 = 0.0;
    std::size_t abstention_count = 0;
    std::size_t row_count = 0;
    std::size_t relevant_row_count = 0;
    std::size_t gold_span_count = 0;
    std::size_t pred_span_count = 0;
    std::size_t unjudgeable_excluded = 0;
    std::size_t missing_predictions = 0;
    std::optional<double> mean_latency_s;

    double containment(const Threshold& t) const { return lookup(containment_at, t); }
    double coverage(const Threshold& t) const { return lookup(coverage_at, t); }

  private:
    static double lookup(const std::vector<std::pair<Threshold, double>>& v, const Threshold& t)
    {
        for (auto const& [k, x] : v) {
            if (k == t) {
                return x;
            }
        }
        throw FormatError("threshold " + t.label() + " was not evaluated");
    }
};

/// Metrics over already-joined rows.
inline MetricsReport evaluate_rows(const std::vector<RowEval>& rows, const ThresholdGrid& grid = default_grid())
{
    MetricsReport r;
    r.row_count = rows.size();
    for (auto const& row : rows) {
        validate(row);
        r.word_counts += word_prf(row);
        r.gold_span_count += row.gold_spans.size();
        r.pred_span_count += row.pred_spans.size();
        r.abstention_count += row.pred_spans.empty();
        r.relevant_row_count += !row.gold_spans.empty();
    }
    auto const& wc = r.word_counts;
    r.word_precision = wc.pred == 0 ? 0.0 : static_cast<double>(wc.tp) / static_cast<double>(wc.pred);
    r.word_recall = wc.gold == 0 ? 0.0 : static_cast<double>(wc.tp) / static_cast<double>(wc.gold);
    r.word_f1 = f1_from(wc.tp, wc.pred, wc.gold);
    r.containment_undefined = r.pred_span_count == 0;
    r.coverage_undefined = r.gold_span_count == 0;
    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    for (auto const& t : sorted) {
        r.containment_at.emplace_back(t, containment_counts(rows, t).ratio());
        r.coverage_at.emplace_back(t, coverage_counts(rows, t).ratio());
    }
    r.iou_f1_at_05 = iou_f1(rows);
    return r;
}

/// Joins predictions to gold rows on (query_id, chunk_id) and evaluates the
/// judged rows. A judged gold row with no prediction counts as an abstention.
inline MetricsReport evaluate(const std::vector<GoldRow>& gold, const std::vector<ExtractionResult>& preds,
                              const ThresholdGrid& grid = default_grid())
{
    using Key = std::pair<std::string, std::string>;
    std::map<Key, const ExtractionResult*> by_key;
    for (auto const& p : preds) {
        if (!by_key.emplace(Key{p.query_id, p.chunk_id}, &p).second) {
            throw FormatError("duplicate prediction for (" + p.query_id + ", " + p.chunk_id + ")");
        }
    }
    std::set<Key> gold_keys;
    for (auto const& g : gold) {
        gold_keys.insert({g.query_id, g.chunk_id});
    }
    for (auto const& [key, p] : by_key) {
        if (!gold_keys.count(key)) {
            throw FormatError("prediction (" + key.first + ", " + key.second + ") has no gold row");
        }
    }

    std::vector<RowEval> rows;
    std::size_t excluded = 0, missing = 0;
    double latency = 0.0;
    std::size_t timed = 0;
    std::string backend;
    for (auto const& g : gold) {
        if (g.relevance == Relevance::unjudgeable) {
            ++excluded;
            continue;
        }
        RowEval row{g.query_id, g.chunk_id, utf8::decode(g.chunk_text), g.gold_spans, {}};
        auto it = by_key.find({g.query_id, g.chunk_id});
        if (it == by_key.end()) {
            ++missing;
        } else {
            row.pred_spans = it->second->spans;
            std::sort(row.pred_spans.begin(), row.pred_spans.end());
            if (it->second->latency_s) {
                latency += *it->second->latency_s;
                ++timed;
            }
            if (backend.empty()) {
                backend = it->second->backend;
            }
        }
        rows.push_back(std::move(row));
    }
    if (missing > 0) {
        log::warn(std::to_string(missing) + " gold rows have no prediction and count as abstentions");
    }
    auto report = evaluate_rows(rows, grid);
    report.backend = backend;
    report.unjudgeable_excluded = excluded;
    report.missing_predictions = missing;
    if (timed > 0) {
        report.mean_latency_s = latency / static_cast<double>(timed);
    }
    return report;
}

inline Json to_json(const MetricsReport& r)
{
    Json containment = Json::object(), coverage = Json::object();
    for (auto const& [t, v] : r.containment_at) {
        containment[t.label()] = r.containment_undefined ? Json(nullptr) : Json(v);
    }
    for (auto const& [t, v] : r.coverage_at) {
        coverage[t.label()] = r.coverage_undefined ? Json(nullptr) : Json(v);
    }
    Json j{{"backend", r.backend},
           {"word_precision", r.word_precision},
           {"word_recall", r.word_recall},
           {"word_f1", r.word_f1},
           {"word_counts", {{"tp", r.word_counts.tp}, {"pred", r.word_counts.pred}, {"gold", r.word_counts.gold}}},
           {"containment_at", containment},
           {"coverage_at", coverage},
           {"iou_f1_at_05", r.iou_f1_at_05},
           {"abstention_count", r.abstention_count},
           {"row_count", r.row_count},
           {"relevant_row_count", r.relevant_row_count},
           {"gold_span_count", r.gold_span_count},
           {"pred_span_count", r.pred_span_count},
           {"unjudgeable_excluded", r.unjudgeable_excluded},
           {"missing_predictions", r.missing_predictions},
           {"mean_latency_s", r.mean_latency_s ? Json(*r.mean_latency_s) : Json(nullptr)}};
    return j;
}

/// Fixed-width table: word P/R/F1, containment and coverage per threshold
/// (highest first), IoU-F1, abstentions and latency. Ratios in percent.
inline std::string render_table(const std::vector<MetricsReport>& reports)
{
    if (reports.empty()) {
        return "";
    }
    std::vector<std::string> header{"Backend", "Word P", "Word R", "Word F1"};
    auto ts = reports.front().containment_at;
    std::reverse(ts.begin(), ts.end());
    for (auto const& [t, v] : ts) {
        header.push_back("Cont@" + t.label());
    }
    for (auto const& [t, v] : ts) {
        header.push_back("Cov@" + t.label());
    }
    for (auto h : {"IoU-F1@0.5", "Abstain", "Rows", "Latency"}) {
        header.emplace_back(h);
    }
    auto pct = [](double v) {
        std::ostringstream o;
        o << std::fixed << std::setprecision(2) << v * 100.0;
        return o.str();
    };
    std::vector<std::vector<std::string>> body;
    for (auto const& r : reports) {
        std::vector<std::string> row{r.backend.empty() ? "-" : r.backend, pct(r.word_precision), pct(r.word_recall),
                                     pct(r.word_f1)};
        for (auto const& [t, v] : ts) {
            row.push_back(r.containment_undefined ? "n/a" : pct(r.containment(t)));
        }
        for (auto const& [t, v] : ts) {
            row.push_back(r.coverage_undefined ? "n/a" : pct(r.coverage(t)));
        }
        row.push_back(pct(r.iou_f1_at_05));
        row.push_back(std::to_string(r.abstention_count));
        row.push_back(std::to_string(r.row_count));
        if (r.mean_latency_s) {
            std::ostringstream o;
            o << std::fixed << std::setprecision(2) << *r.mean_latency_s;
            row.push_back(o.str());
        } else {
            row.push_back("-");
        }
        body.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (auto const& row : body) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == 0) {
                out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            } else {
                out << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
            }
        }
        out << "\n";
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) {
        total += w + 2;
    }
    out << std::string(total - 2, '-') << "\n";
    for (auto const& row : body) {
        emit(row);
    }
    return out.str();
}

}  // namespace verbatim
