#pragma once

#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chunker.hpp"
#include "config.hpp"
#include "extraction.hpp"
#include "index.hpp"
#include "index_store.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "query_synth.hpp"
#include "server.hpp"

namespace verbatim::cli {

enum ExitCode : int { ok = 0, fatal = 1, partial = 2, usage = 64 };

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

namespace detail {

struct Args {
    std::string config_path;
    std::string log_level = "info";

    std::string in, out, chunks, gold, index_dir, backend = "llm:default", query, mode, thresholds = "0.5,0.8,1.0";
    std::vector<std::string> preds;
    std::size_t min_chars = 0, max_chars = 0, k = 0, n_chunks = 0;
    std::uint64_t seed = 0;
    std::string bind;
    int port = -1;
};

inline AppConfig config_for(const Args& a)
{
    return a.config_path.empty() ? default_config() : load_config(a.config_path);
}

inline int run_chunk(const Args& a, Streams io)
{
    auto cfg = config_for(a);
    if (a.min_chars) {
        cfg.chunker.min_chunk_chars = a.min_chars;
    }
    if (a.max_chars) {
        cfg.chunker.max_chunk_chars = a.max_chars;
    }
    cfg.validate();
    auto corpus = load_corpus(a.in.empty() ? cfg.corpus_dir : std::filesystem::path(a.in));
    auto chunks = chunk_corpus(corpus.documents, cfg.chunker);
    save_chunks(chunks, a.out);
    io.out << "chunked " << corpus.documents.size() << " documents into " << chunks.size() << " chunks -> " << a.out
           << "\n";
    if (!corpus.skipped.empty()) {
        for (auto const& s : corpus.skipped) {
            io.err << "skipped: " << s << "\n";
        }
        return partial;
    }
    return ok;
}

inline int run_index(const Args& a, Streams io)
{
    auto cfg = config_for(a);
    auto const dir = a.out.empty() ? cfg.index_dir : std::filesystem::path(a.out);
    auto chunks = load_chunks(a.chunks);
    auto embedder = make_embedder(cfg);
    auto index = build_index(chunks, *embedder);
    persist_index(index, dir);
    io.out << "indexed " << index.chunks.size() << " chunks (embedder " << embedder->id() << ") -> " << dir.string()
           << "\n";
    return ok;
}

inline int run_search(const Args& a, Streams io)
{
    auto cfg = config_for(a);
    auto const dir = a.index_dir.empty() ? cfg.index_dir : std::filesystem::path(a.index_dir);
    auto index = load_index(dir);
    auto embedder = make_embedder(cfg);
    auto const mode = a.mode.empty() ? cfg.retrieval.mode : parse_search_mode(a.mode);
    auto const k = a.k ? a.k : cfg.retrieval.k;
    auto hits = search(index, a.query, *embedder, mode, k, cfg.retrieval.rrf_k);
    std::size_t rank = 0;
    for (auto const& h : hits) {
        auto const* c = index.find(h.chunk_id);
        std::string path;
        for (auto const& t : c->title_path) {
            path += (path.empty() ? "" : " > ") + t;
        }
        std::ostringstream score;
        score << std::fixed << std::setprecision(6) << h.score;
        io.out << ++rank << "\t" << score.str() << "\t" << h.chunk_id << "\t" << path << "\n";
    }
    if (hits.empty()) {
        io.err << "no hits\n";
    }
    return ok;
}

inline int run_genqueries(const Args& a, Streams io)
{
    auto cfg = config_for(a);
    auto chunks = load_chunks(a.chunks);
    if (a.n_chunks) {
        chunks = sample_chunks(chunks, a.n_chunks, a.seed);
    }
    auto raw = make_llm(cfg);
    BoundedLlmClient llm(*raw, static_cast<std::ptrdiff_t>(cfg.llm.max_in_flight));
    auto result = synthesize(chunks, llm);
    save_queries(result.queries, a.out);
    io.out << "wrote " << result.queries.size() << " queries for " << chunks.size() - result.failures.size()
           << " chunks -> " << a.out << "\n";
    for (auto const& f : result.failures) {
        io.err << "failed: " << f.chunk_id << ": " << f.error << "\n";
    }
    return result.failures.empty() ? ok : partial;
}

inline int run_extract(const Args& a, Streams io)
{
    auto cfg = config_for(a);
    auto gold = load_gold(a.gold);
    std::vector<ExtractionInput> inputs;
    inputs.reserve(gold.size());
    for (auto const& r : gold) {
        if (r.relevance == Relevance::unjudgeable) {
            continue;
        }
        inputs.push_back({r.query_id, r.query_text, r.chunk_id, r.chunk_text});
    }

    std::unique_ptr<LlmClient> raw;
    std::unique_ptr<BoundedLlmClient> llm;
    std::unique_ptr<TokenScorer> scorer;
    std::unique_ptr<ExtractionBackend> backend;
    bool const uses_scorer = a.backend == "scorer";
    if (uses_scorer) {
        scorer = make_scorer(cfg);
        backend = std::make_unique<TokenScoreExtractor>(*scorer, cfg.extraction.post);
    } else if (a.backend.rfind("llm:", 0) == 0) {
        LlmExtractorOptions opts;
        opts.mode = parse_prompt_mode(a.backend.substr(4));
        opts.post = cfg.extraction.post;
        raw = make_llm(cfg);
        llm = std::make_unique<BoundedLlmClient>(*raw, static_cast<std::ptrdiff_t>(cfg.llm.max_in_flight));
        backend = std::make_unique<LlmExtractor>(*llm, opts);
    } else {
        throw FormatError("unknown backend '" + a.backend + "' (expected llm:default, llm:paragraph or scorer)");
    }

    auto run = extract_all(inputs, *backend, cfg.extraction.parallelism);
    auto results = run.results();
    if (offline_backends(cfg, uses_scorer)) {
        for (auto& r : results) {
            r.latency_s.reset();
        }
    }
    save_results(results, a.out);
    auto const& d = run.diagnostics;
    io.out << "extracted " << results.size() << " of " << inputs.size() << " rows with " << backend->name() << " -> "
           << a.out << "\n";
    io.out << "spans: " << d.exact_matches << " exact, " << d.normalized_matches << " whitespace-normalized, "
           << d.rejected << " rejected as not verbatim\n";
    for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
        if (run.outcomes[i].error) {
            io.err << "failed: " << inputs[i].query_id << "/" << inputs[i].chunk_id << ": " << *run.outcomes[i].error
                   << "\n";
        }
    }
    return run.failures ? partial : ok;
}

inline int run_eval(const Args& a, Streams io)
{
    auto gold = load_gold(a.gold);
    auto grid = parse_grid(a.thresholds);
    std::vector<MetricsReport> reports;
    for (auto const& p : a.preds) {
        reports.push_back(evaluate(gold, load_results(p), grid));
    }
    auto const table = render_table(reports);
    io.out << table;
    if (!a.out.empty()) {
        Json j = Json::array();
        for (auto const& r : reports) {
            j.push_back(to_json(r));
        }
        write_file(a.out, (reports.size() == 1 ? j[0] : j).dump(2) + "\n");
        auto table_path = a.out + ".txt";
        write_file(table_path, table);
    }
    return ok;
}

inline int run_serve(const Args& a, Streams)
{
    auto cfg = config_for(a);
    if (!a.bind.empty()) {
        cfg.server.bind = a.bind;
    }
    if (a.port >= 0) {
        cfg.server.port = a.port;
    }
    if (!a.index_dir.empty()) {
        cfg.index_dir = a.index_dir;
    }
    cfg.validate();
    serve(cfg);
    return ok;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one verb.
inline int run(const std::vector<std::string>& args, Streams io = {std::cout, std::cerr})
{
    detail::Args a;
    CLI::App app{"verbatim: chunk, index, search, synthesize queries, extract verbatim spans, evaluate"};
    app.set_help_all_flag("--help-all");
    app.require_subcommand(1, 1);
    app.add_option("--config", a.config_path, "TOML config file")->check(CLI::ExistingFile);
    app.add_option("--log-level", a.log_level, "debug|info|warn|error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    auto* chunk = app.add_subcommand("chunk", "split a markdown corpus into chunks (JSON lines)");
    chunk->add_option("--in", a.in, "corpus directory")->check(CLI::ExistingDirectory);
    chunk->add_option("--out", a.out, "chunk file")->required();
    chunk->add_option("--min", a.min_chars, "minimum prefixed chunk length")->check(CLI::PositiveNumber);
    chunk->add_option("--max", a.max_chars, "maximum prefixed chunk length")->check(CLI::PositiveNumber);

    auto* index = app.add_subcommand("index", "build and persist the retrieval index");
    index->add_option("--chunks", a.chunks, "chunk file")->required()->check(CLI::ExistingFile);
    index->add_option("--out", a.out, "index directory (default: index_dir from config)");

    auto* search = app.add_subcommand("search", "print the ranked hits for one query");
    search->add_option("--index", a.index_dir, "index directory");
    search->add_option("-q,--query", a.query, "query text")->required();
    search->add_option("-k,--k", a.k, "hits to return")->check(CLI::PositiveNumber);
    search->add_option("--mode", a.mode, "lexical|dense|hybrid")->check(CLI::IsMember({"lexical", "dense", "hybrid"}));

    auto* gen = app.add_subcommand("genqueries", "synthesize queries for sampled chunks");
    gen->add_option("--chunks", a.chunks, "chunk file")->required()->check(CLI::ExistingFile);
    gen->add_option("--n-chunks", a.n_chunks, "chunks to sample (0: all)");
    gen->add_option("--seed", a.seed, "sampling seed");
    gen->add_option("--out", a.out, "query file")->required();

    auto* ext = app.add_subcommand("extract", "extract verbatim spans for every gold row");
    ext->add_option("--gold", a.gold, "gold file")->required()->check(CLI::ExistingFile);
    ext->add_option("--backend", a.backend, "llm:default|llm:paragraph|scorer")
        ->check(CLI::IsMember({"llm:default", "llm:paragraph", "scorer"}));
    ext->add_option("--out", a.out, "predictions file")->required();

    auto* ev = app.add_subcommand("eval", "score predictions against gold");
    ev->add_option("--gold", a.gold, "gold file")->required()->check(CLI::ExistingFile);
    ev->add_option("--pred", a.preds, "predictions file (repeat for several backends)")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--thresholds", a.thresholds, "comma-separated thresholds");
    ev->add_option("--out", a.out, "JSON report path (the table goes to <out>.txt too)");

    auto* srv = app.add_subcommand("serve", "run the HTTP API");
    srv->add_option("--index", a.index_dir, "index directory");
    srv->add_option("--bind", a.bind, "bind address");
    srv->add_option("--port", a.port, "port")->check(CLI::Range(0, 65535));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        io.out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        io.out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        io.err << "error: " << e.what() << "\n\n" << app.help();
        return usage;
    }

    auto const level = a.log_level == "debug"  ? log::Level::debug
                       : a.log_level == "warn" ? log::Level::warn
                       : a.log_level == "error" ? log::Level::error
                                                : log::Level::info;
    log::ScopedSink sink([&io, level](log::Level l, const std::string& msg) {
        if (l >= level) {
            static constexpr const char* names[] = {"debug", "info", "warn", "error"};
            io.err << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
        }
    });

    try {
        if (chunk->parsed()) {
            return detail::run_chunk(a, io);
        }
        if (index->parsed()) {
            return detail::run_index(a, io);
        }
        if (search->parsed()) {
            return detail::run_search(a, io);
        }
        if (gen->parsed()) {
            return detail::run_genqueries(a, io);
        }
        if (ext->parsed()) {
            return detail::run_extract(a, io);
        }
        if (ev->parsed()) {
            return detail::run_eval(a, io);
        }
        return detail::run_serve(a, io);
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return fatal;
    }
}

inline int run(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args);
}

}  // namespace verbatim::cli
