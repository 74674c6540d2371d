#include "rada/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rada/augment.hpp"
#include "rada/corpus.hpp"
#include "rada/http_embedder.hpp"
#include "rada/llmclient.hpp"
#include "rada/manifest.hpp"
#include "rada/quality.hpp"
#include "rada/retrieval.hpp"

namespace rada::cli {

std::atomic<bool>& interrupt_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace {

struct GlobalOptions {
    std::optional<std::uint64_t> rng_seed;
    std::string backend = "mock";
};

struct EmbedderOptions {
    std::string kind = "hashed";
    std::size_t dim = 256;
    std::string endpoint;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--embedder", kind, "Embedding provider")->check(CLI::IsMember({"hashed", "http"}));
        cmd->add_option("--embedding-dim", dim, "Dimension of the hashed embedder")->check(CLI::PositiveNumber);
        cmd->add_option("--embedding-endpoint", endpoint,
                        "URL of the HTTP embedding provider (default: $RADA_EMBED_ENDPOINT)");
    }

    std::unique_ptr<EmbeddingProvider> make() const {
        if (kind == "hashed") return std::make_unique<HashedBagOfWordsEmbedder>(dim);
        HttpEmbedderConfig cfg;
        cfg.endpoint = endpoint;
        if (cfg.endpoint.empty()) {
            const char* env = std::getenv("RADA_EMBED_ENDPOINT");
            if (env != nullptr) cfg.endpoint = env;
        }
        if (cfg.endpoint.empty()) throw ConfigError("HTTP embedder needs --embedding-endpoint or RADA_EMBED_ENDPOINT");
        if (const char* key = std::getenv("RADA_EMBED_API_KEY")) cfg.api_key = key;
        return std::make_unique<HttpEmbeddingProvider>(cfg);
    }
};

std::vector<StoreSource> store_sources(const std::vector<std::string>& specs) {
    std::vector<StoreSource> out;
    for (const auto& s : specs) out.push_back(parse_store_source(s));
    return out;
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string task = "extractive_qa";
    std::string seed;
    std::string test_inputs;
    std::vector<std::string> stores;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
    const auto task = parse_task_kind(a.task);
    if (a.seed.empty() && a.test_inputs.empty() && a.stores.empty()) {
        throw ConfigError("nothing to ingest: pass --seed, --test-inputs or --store");
    }
    if (!a.seed.empty()) {
        const auto ds = load_seed(a.seed, task, SeedMode::training);
        out << "seed " << a.seed << ": " << ds.size_n() << " examples\n";
    }
    if (!a.test_inputs.empty()) {
        const auto ds = load_seed(a.test_inputs, task, SeedMode::test_time);
        out << "test-inputs " << a.test_inputs << ": " << ds.size_n() << " examples\n";
    }
    if (!a.stores.empty()) {
        const auto sources = store_sources(a.stores);
        for (const auto& src : sources) {
            const auto one = load_store(std::span<const StoreSource>(&src, 1));
            std::size_t complete = 0;
            for (const auto& e : one.entries()) complete += e.complete() ? 1 : 0;
            out << "store " << src.path.string() << ": " << one.size() << " entries (" << complete
                << " with question+answer)\n";
        }
        const auto all = load_store(sources);
        out << "store total: " << all.size() << " entries\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct IndexArgs {
    std::vector<std::string> stores;
    std::string field = "context";
    std::string retriever = "bm25";
    std::vector<std::string> queries;
    std::size_t k = 10;
    EmbedderOptions embedder;
};

int cmd_index(const IndexArgs& a, std::ostream& out) {
    const auto sources = store_sources(a.stores);
    const auto store = load_store(sources);
    const auto field = parse_field_selector(a.field);
    nlohmann::ordered_json stats;
    std::unique_ptr<Retriever> retriever;
    std::unique_ptr<EmbeddingProvider> provider;
    if (a.retriever == "bm25") {
        auto bm25 = std::make_unique<Bm25Retriever>(store, field);
        const auto& idx = bm25->index();
        stats["retriever"] = bm25->describe();
        stats["entries"] = idx.size();
        stats["vocabulary"] = idx.vocabulary_size();
        stats["average_length"] = idx.average_length();
        retriever = std::move(bm25);
    } else {
        provider = a.embedder.make();
        auto dense = std::make_unique<DenseRetriever>(store, field, *provider);
        stats["retriever"] = dense->describe();
        stats["entries"] = dense->index().size();
        stats["dimension"] = dense->index().dim();
        retriever = std::move(dense);
    }
    out << stats.dump() << "\n";
    for (const auto& q : a.queries) {
        nlohmann::ordered_json hits = nlohmann::ordered_json::array();
        for (const auto& h : retriever->retrieve(q, a.k)) {
            hits.push_back({{"rank", h.rank}, {"entry_id", h.entry_id}, {"score", h.score}});
        }
        out << nlohmann::ordered_json{{"query", q}, {"hits", hits}}.dump() << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
    std::string task = "extractive_qa";
    std::string seed;
    std::string test_inputs;
    std::vector<std::string> stores;
    std::string strategy = "rada_train";
    std::size_t k = 3;
    std::size_t demo_count = kDefaultDemoCount;
    std::size_t multiplier = 30;
    std::string target_query_field = "context";
    int max_parse_retries = 2;
    std::size_t in_flight = 1;
    std::string retriever = "bm25";
    EmbedderOptions embedder;
    std::string output;
    std::string manifest;
    double temperature = 0.7;
    int max_new_tokens = 512;
    int max_retries = 3;
    std::uint64_t mock_seed = 0;
    double requests_per_second = 0.0;
    std::string completion_log;
    bool record_timestamps = false;
};

int cmd_augment(const AugmentArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    const auto task = parse_task_kind(a.task);
    AugmentConfig cfg;
    cfg.strategy = parse_strategy(a.strategy);
    cfg.k_retrieval = a.k;
    cfg.demo_count = a.demo_count;
    cfg.multiplier_m = a.multiplier;
    cfg.target_query_field = parse_field_selector(a.target_query_field);
    cfg.rng_seed = g.rng_seed.value_or(0);
    cfg.max_parse_retries_per_slot = a.max_parse_retries;
    cfg.in_flight_limit = a.in_flight;
    cfg.generation.temperature = a.temperature;
    cfg.generation.max_new_tokens = a.max_new_tokens;
    cfg.generation.max_retries = a.max_retries;
    cfg = cfg.effective();
    if (a.output.empty()) throw ConfigError("--output is required");

    RunManifest manifest;
    manifest.task = std::string(to_string(task));
    manifest.config = config_to_json(cfg);
    manifest.templates = template_digests(cfg.demo_count);

    SeedDataset seed;
    if (cfg.strategy == Strategy::rada_test_time) {
        if (a.test_inputs.empty()) throw ConfigError("rada_test_time needs --test-inputs");
        seed = load_seed(a.test_inputs, task, SeedMode::test_time);
        manifest.inputs.emplace_back("test_inputs:" + a.test_inputs, file_sha256(a.test_inputs));
    } else {
        if (a.seed.empty()) throw ConfigError(std::string(to_string(cfg.strategy)) + " needs --seed");
        seed = load_seed(a.seed, task, SeedMode::training);
        manifest.inputs.emplace_back("seed:" + a.seed, file_sha256(a.seed));
    }
    DataStore store;
    const bool needs_store = cfg.strategy != Strategy::seed_only && cfg.strategy != Strategy::self_instruct;
    if (needs_store || !a.stores.empty()) {
        if (a.stores.empty()) throw ConfigError(std::string(to_string(cfg.strategy)) + " needs --store");
        const auto sources = store_sources(a.stores);
        store = load_store(sources);
        for (const auto& s : sources) {
            manifest.inputs.emplace_back("store:" + (s.name_space.empty() ? s.path.stem().string() : s.name_space) +
                                             "=" + s.path.string(),
                                         file_sha256(s.path));
        }
    }

    std::unique_ptr<EmbeddingProvider> provider;
    RetrieverFactory factory;
    if (a.retriever == "bm25") {
        factory = bm25_factory();
        manifest.retriever = "bm25(k1=1.2,b=0.75)";
    } else {
        provider = a.embedder.make();
        factory = dense_factory(*provider);
        manifest.retriever = "dense(" + provider->fingerprint() + ")";
    }

    std::unique_ptr<LlmBackend> backend;
    if (g.backend == "mock") {
        backend = std::make_unique<MockBackend>(a.mock_seed);
    } else {
        auto chat = ChatClientConfig::from_env();
        chat.in_flight_limit = static_cast<std::ptrdiff_t>(cfg.in_flight_limit);
        chat.requests_per_second = a.requests_per_second;
        backend = std::make_unique<ChatCompletionClient>(chat);
    }
    std::unique_ptr<AuditingBackend> audit;
    LlmBackend* llm = backend.get();
    if (!a.completion_log.empty()) {
        audit = std::make_unique<AuditingBackend>(*backend, a.completion_log);
        llm = audit.get();
    }
    manifest.backend = llm->identity();

    const std::filesystem::path output(a.output);
    const std::filesystem::path manifest_path = a.manifest.empty() ? std::filesystem::path(a.output + ".manifest.json")
                                                                   : std::filesystem::path(a.manifest);
    manifest.outputs["augmented"] = output.filename().string();
    if (a.record_timestamps) manifest.started_at = utc_now();
    manifest.write(manifest_path);

    RunControl control;
    control.cancel = &interrupt_flag();
    AugmentResult result;
    try {
        result = run_augmentation(seed, store, cfg, *llm, factory, control);
    } catch (const SkipBudgetExceeded& e) {
        result = e.result();
        write_augmented(result.samples, output);
        manifest.status = "aborted";
        if (a.record_timestamps) manifest.finished_at = utc_now();
        manifest.result = result;
        manifest.write(manifest_path);
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    write_augmented(result.samples, output);
    manifest.status = result.cancelled ? "incomplete" : "complete";
    if (a.record_timestamps) manifest.finished_at = utc_now();
    manifest.result = result;
    manifest.write(manifest_path);

    out << "strategy " << to_string(cfg.strategy) << ": slots " << result.slots_total << ", samples "
        << result.samples.size() << ", skipped " << result.skipped.size() << " (demo pool "
        << result.demo_pool_size << ", target pool " << result.target_pool_size << ")\n";
    if (result.cancelled) {
        err << "interrupted: partial output written, manifest marked incomplete\n";
        return kExitRuntime;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct FilterArgs {
    std::string input;
    std::string kept;
    std::string rejected;
    std::string span = "strict";
    std::optional<double> rouge_threshold;
    std::optional<double> embedding_threshold;
    EmbedderOptions embedder;
};

int cmd_filter(const FilterArgs& a, std::ostream& out) {
    FilterConfig cfg;
    cfg.enable_span_filter = a.span != "off";
    cfg.normalization = a.span == "relaxed" ? SpanNormalization::relaxed : SpanNormalization::strict;
    cfg.rouge_dedup_threshold = a.rouge_threshold;
    cfg.embedding_dedup_threshold = a.embedding_threshold;
    cfg.validate();
    if (a.kept.empty()) throw ConfigError("--kept is required");
    const auto samples = load_augmented(a.input);
    std::unique_ptr<EmbeddingProvider> provider;
    if (cfg.embedding_dedup_threshold) provider = a.embedder.make();
    const auto result = apply_filters(samples, cfg, provider.get());
    write_augmented(result.kept, a.kept);
    std::map<std::string, std::size_t> by_reason;
    for (const auto& r : result.rejected) ++by_reason[r.reason];
    if (!a.rejected.empty()) {
        std::ofstream rej(a.rejected, std::ios::binary | std::ios::trunc);
        if (!rej) throw Error("cannot write " + a.rejected);
        for (const auto& r : result.rejected) {
            auto j = nlohmann::ordered_json::parse(augmented_to_line(r.sample));
            j["reason"] = r.reason;
            j["detail"] = r.detail;
            rej << j.dump() << '\n';
        }
    }
    out << "input " << samples.size() << ", kept " << result.kept.size() << ", rejected " << result.rejected.size()
        << "\n";
    for (const auto& [reason, n] : by_reason) out << "  " << reason << ": " << n << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string task = "extractive_qa";
    std::string seed;
    std::string input;
    std::vector<std::string> stores;
    std::string output;
    std::string embedding_csv;
    std::string unit = "question_and_answer";
    std::size_t workers = 1;
    EmbedderOptions embedder;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    const auto task = parse_task_kind(a.task);
    const auto seed = load_seed(a.seed, task, SeedMode::training);
    const auto samples = load_augmented(a.input);
    std::optional<DataStore> store;
    if (!a.stores.empty()) store = load_store(store_sources(a.stores));
    DiversityOptions opts;
    opts.unit = a.unit == "question" ? DiversityUnit::question_only : DiversityUnit::question_and_answer;
    opts.workers = a.workers;
    std::unique_ptr<EmbeddingProvider> provider;
    if (!a.embedding_csv.empty()) {
        provider = a.embedder.make();
        opts.embedding_csv = a.embedding_csv;
    }
    const auto report = diversity_report(seed, samples, store ? &*store : nullptr, provider.get(), opts);
    const auto json = report_to_json(report);
    if (!a.output.empty()) {
        std::ofstream f(a.output, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + a.output);
        f << json << "\n";
    }
    out << "samples " << report.per_sample_max_rouge.size() << ", mean max-ROUGE-L " << fmt(report.mean)
        << ", median " << fmt(report.median) << ", stddev " << fmt(report.stddev) << "\n";
    for (const auto& [domain, n] : report.domain_tally) out << "  domain " << domain << ": " << n << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string task = "extractive_qa";
    std::string golds;
    std::string predictions;
};

std::map<std::string, std::string> load_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path + ": cannot open file");
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(path, n, std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("prediction") ||
            !j["prediction"].is_string()) {
            throw SchemaError(path, n, "prediction records need string fields \"id\" and \"prediction\"");
        }
        if (!out.emplace(j["id"].get<std::string>(), j["prediction"].get<std::string>()).second) {
            throw SchemaError(path, n, "duplicate id \"" + j["id"].get<std::string>() + "\"");
        }
    }
    return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const auto task = parse_task_kind(a.task);
    const auto golds = load_seed(a.golds, task, SeedMode::training);
    const auto preds = load_predictions(a.predictions);
    if (preds.size() != golds.size_n()) {
        throw SchemaError("predictions (" + std::to_string(preds.size()) + ") and golds (" +
                          std::to_string(golds.size_n()) + ") differ in count");
    }
    std::vector<std::string> ordered;
    for (const auto& e : golds.examples) {
        const auto it = preds.find(example_id(e));
        if (it == preds.end()) throw SchemaError("no prediction for gold id \"" + example_id(e) + "\"");
        ordered.push_back(it->second);
    }
    if (task == TaskKind::extractive_qa) {
        double f1 = 0.0;
        double em = 0.0;
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            const auto& gold = example_answer(golds.examples[i]);
            f1 += squad_f1(ordered[i], gold);
            em += exact_match(ordered[i], gold);
        }
        const auto n = static_cast<double>(ordered.size());
        out << "n " << ordered.size() << ", f1 " << fmt(f1 / n) << ", exact_match " << fmt(em / n) << "\n";
    } else {
        std::vector<McqExample> mcq;
        for (const auto& e : golds.examples) mcq.push_back(std::get<McqExample>(e));
        out << "n " << ordered.size() << ", accuracy " << fmt(mcq_accuracy(ordered, mcq)) << "\n";
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Retrieval-augmented data augmentation pipeline", "rada"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--rng-seed", g.rng_seed, "Seed for every random draw");
    app.add_option("--backend", g.backend, "Generation backend")->check(CLI::IsMember({"mock", "http"}));

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate seed, test-input and store files and print counts");
    c_ingest->add_option("--task", ingest.task, "extractive_qa or mcq");
    c_ingest->add_option("--seed", ingest.seed, "Seed file (JSONL)");
    c_ingest->add_option("--test-inputs", ingest.test_inputs, "Unlabeled test inputs (JSONL)");
    c_ingest->add_option("--store", ingest.stores, "Store file, optionally as namespace=path");

    IndexArgs index;
    auto* c_index = app.add_subcommand("index", "Build a retrieval index over a store and optionally query it");
    c_index->add_option("--store", index.stores, "Store file, optionally as namespace=path")->required();
    c_index->add_option("--field", index.field, "context, question or context_and_question");
    c_index->add_option("--retriever", index.retriever, "bm25 or dense")->check(CLI::IsMember({"bm25", "dense"}));
    c_index->add_option("--query", index.queries, "Query text (repeatable)");
    c_index->add_option("-k", index.k, "Hits per query")->check(CLI::PositiveNumber);
    index.embedder.add_to(c_index);

    AugmentArgs aug;
    auto* c_aug = app.add_subcommand("augment", "Generate an augmented dataset");
    c_aug->add_option("--task", aug.task, "extractive_qa or mcq");
    c_aug->add_option("--seed", aug.seed, "Seed file (JSONL)");
    c_aug->add_option("--test-inputs", aug.test_inputs, "Unlabeled test inputs for rada_test_time");
    c_aug->add_option("--store", aug.stores, "Store file, optionally as namespace=path");
    c_aug->add_option("--strategy", aug.strategy, "Augmentation strategy");
    c_aug->add_option("-k,--k-retrieval", aug.k, "Top-k per retrieval query");
    c_aug->add_option("--demo-count", aug.demo_count, "Demonstrations per prompt");
    c_aug->add_option("--multiplier", aug.multiplier, "Samples per seed example")->check(CLI::PositiveNumber);
    c_aug->add_option("--target-query-field", aug.target_query_field, "context or question");
    c_aug->add_option("--max-parse-retries", aug.max_parse_retries, "Extra attempts per slot");
    c_aug->add_option("--in-flight", aug.in_flight, "Concurrent generation calls")->check(CLI::PositiveNumber);
    c_aug->add_option("--retriever", aug.retriever, "bm25 or dense")->check(CLI::IsMember({"bm25", "dense"}));
    aug.embedder.add_to(c_aug);
    c_aug->add_option("--output", aug.output, "Augmented output (JSONL)");
    c_aug->add_option("--manifest", aug.manifest, "Run manifest path (default <output>.manifest.json)");
    c_aug->add_option("--temperature", aug.temperature, "Sampling temperature");
    c_aug->add_option("--max-new-tokens", aug.max_new_tokens, "Generation length cap");
    c_aug->add_option("--max-retries", aug.max_retries, "Transient-failure retries per request (<= 5)");
    c_aug->add_option("--mock-seed", aug.mock_seed, "Seed of the mock backend");
    c_aug->add_option("--requests-per-second", aug.requests_per_second, "Rate limit for the HTTP backend (0 = off)");
    c_aug->add_option("--completion-log", aug.completion_log, "Append completion records to this JSONL file");
    c_aug->add_flag("--record-timestamps", aug.record_timestamps, "Add wall-clock timestamps to the manifest");

    FilterArgs filt;
    auto* c_filter = app.add_subcommand("filter", "Apply span and near-duplicate filters");
    c_filter->add_option("--input", filt.input, "Augmented file")->required();
    c_filter->add_option("--kept", filt.kept, "Output for kept samples");
    c_filter->add_option("--rejected", filt.rejected, "Output for rejected samples with reasons");
    c_filter->add_option("--span", filt.span, "strict, relaxed or off")
        ->check(CLI::IsMember({"strict", "relaxed", "off"}));
    c_filter->add_option("--rouge-threshold", filt.rouge_threshold, "ROUGE-L F dedup threshold in (0,1]");
    c_filter->add_option("--embedding-threshold", filt.embedding_threshold, "Cosine dedup threshold in (0,1]");
    filt.embedder.add_to(c_filter);

    ReportArgs rep;
    auto* c_report = app.add_subcommand("report", "Diversity report against the seed");
    c_report->add_option("--task", rep.task, "extractive_qa or mcq");
    c_report->add_option("--seed", rep.seed, "Seed file")->required();
    c_report->add_option("--input", rep.input, "Augmented file")->required();
    c_report->add_option("--store", rep.stores, "Store files, for the domain tally");
    c_report->add_option("--output", rep.output, "Report JSON path");
    c_report->add_option("--embedding-csv", rep.embedding_csv, "Export seed and sample embeddings as CSV");
    c_report->add_option("--unit", rep.unit, "question_and_answer or question")
        ->check(CLI::IsMember({"question_and_answer", "question"}));
    c_report->add_option("--workers", rep.workers, "Threads for the ROUGE matrix")->check(CLI::PositiveNumber);
    rep.embedder.add_to(c_report);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score predictions against golds (F1/EM or accuracy)");
    c_eval->add_option("--task", ev.task, "extractive_qa or mcq");
    c_eval->add_option("--golds", ev.golds, "Gold file in seed format")->required();
    c_eval->add_option("--predictions", ev.predictions, "JSONL of {\"id\", \"prediction\"}")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_ingest->parsed()) return cmd_ingest(ingest, out);
        if (c_index->parsed()) return cmd_index(index, out);
        if (c_aug->parsed()) return cmd_augment(aug, g, out, err);
        if (c_filter->parsed()) return cmd_filter(filt, out);
        if (c_report->parsed()) return cmd_report(rep, out);
        if (c_eval->parsed()) return cmd_eval(ev, out);
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace rada::cli
