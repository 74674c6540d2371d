#include "support/fixtures.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>
#include <unistd.h>

#include <json.hpp>

#include "rada/rng.hpp"

namespace rada::testing {

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rada-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path fixtures_dir() { return RADA_FIXTURES_DIR; }

const std::vector<std::string>& biomedical_words() {
    static const std::vector<std::string> w = {
        "virus",   "protein",  "cell",     "antibody", "vaccine",  "infection", "immune",  "patient",
        "clinical", "genome",  "receptor", "pathogen", "respiratory", "symptom", "therapy", "dose",
        "trial",   "mortality", "cohort",  "lesion",   "enzyme",   "plasma",    "tissue",  "serum",
        "diagnosis", "outbreak", "incubation", "viral", "host",    "strain"};
    return w;
}

const std::vector<std::string>& computing_words() {
    static const std::vector<std::string> w = {
        "kernel",  "compiler", "processor", "memory",  "cache",    "thread",   "socket",   "network",
        "packet",  "router",   "database",  "query",   "index",    "server",   "cluster",  "binary",
        "register", "pointer", "stack",     "heap",    "bytecode", "runtime",  "latency",  "bandwidth",
        "firmware", "driver",  "scheduler", "mutex",   "compile",  "linker"};
    return w;
}

const std::vector<std::string>& policy_words() {
    static const std::vector<std::string> w = {
        "tariff",  "senate",   "ballot",   "statute",  "treaty",   "regulation", "privacy", "consent",
        "clause",  "agency",   "lawmaker", "subsidy",  "levy",     "amendment",  "charter", "mandate",
        "ordinance", "tribunal", "verdict", "appeal",  "license",  "compliance", "audit",   "sanction"};
    return w;
}

namespace {

std::vector<std::string> draw_words(const std::vector<std::string>& vocab, std::size_t n, Rng& rng) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[rng.below(vocab.size())]);
    return out;
}

std::string join(const std::vector<std::string>& words, std::size_t from, std::size_t count) {
    std::string out;
    for (std::size_t i = from; i < from + count && i < words.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += words[i];
    }
    return out;
}

struct QaParts {
    std::string context;
    std::string question;
    std::string answer;
};

QaParts make_parts(const std::vector<std::string>& vocab, Rng& rng, std::size_t context_len) {
    const auto words = draw_words(vocab, context_len, rng);
    QaParts p;
    p.context = join(words, 0, words.size()) + ".";
    const std::size_t q_at = rng.below(words.size() - 5);
    p.question = "what about " + join(words, q_at, 5) + "?";
    const std::size_t a_at = rng.below(words.size() - 2);
    p.answer = join(words, a_at, 2);
    return p;
}

std::array<std::string, 4> make_options(const std::vector<std::string>& vocab, Rng& rng) {
    const auto idx = rng.sample_indices(vocab.size(), 4);
    return {vocab[idx[0]] + " " + vocab[idx[1]], vocab[idx[1]] + " " + vocab[idx[2]],
            vocab[idx[2]] + " " + vocab[idx[3]], vocab[idx[3]] + " " + vocab[idx[0]]};
}

}  // namespace

SeedDataset make_qa_seed(const std::vector<std::string>& vocab, std::size_t n, std::uint64_t seed,
                         const std::string& id_prefix, std::size_t context_len, const std::string& domain) {
    Rng rng(seed);
    SeedDataset ds;
    ds.task_kind = TaskKind::extractive_qa;
    for (std::size_t i = 0; i < n; ++i) {
        const auto parts = make_parts(vocab, rng, context_len);
        QaExample e;
        e.id = id_prefix + std::to_string(i);
        e.context = parts.context;
        e.question = parts.question;
        e.answer = parts.answer;
        if (!domain.empty()) e.domain_tag = domain;
        ds.examples.emplace_back(std::move(e));
    }
    return ds;
}

std::vector<StoreEntry> make_store_entries(const std::vector<std::string>& vocab, std::size_t n, std::uint64_t seed,
                                           const std::string& id_prefix, const std::string& domain, bool complete,
                                           std::size_t context_len) {
    Rng rng(seed);
    std::vector<StoreEntry> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto parts = make_parts(vocab, rng, context_len);
        StoreEntry e;
        e.id = id_prefix + std::to_string(i);
        e.context = parts.context;
        if (complete) {
            e.question = parts.question;
            e.answer = parts.answer;
        }
        if (!domain.empty()) e.domain_tag = domain;
        out.push_back(std::move(e));
    }
    return out;
}

SeedDataset make_mcq_seed(const std::vector<std::string>& vocab, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    SeedDataset ds;
    ds.task_kind = TaskKind::mcq;
    for (std::size_t i = 0; i < n; ++i) {
        McqExample e;
        e.id = "mseed-" + std::to_string(i);
        e.question = "which pairing matches " + join(draw_words(vocab, 6, rng), 0, 6) + "?";
        e.options = make_options(vocab, rng);
        e.answer = e.options[rng.below(4)];
        ds.examples.emplace_back(std::move(e));
    }
    return ds;
}

std::vector<StoreEntry> make_mcq_store_entries(const std::vector<std::string>& vocab, std::size_t n,
                                               std::uint64_t seed, const std::string& id_prefix,
                                               const std::string& domain) {
    Rng rng(seed);
    std::vector<StoreEntry> out;
    for (std::size_t i = 0; i < n; ++i) {
        StoreEntry e;
        e.id = id_prefix + std::to_string(i);
        e.question = "which pairing matches " + join(draw_words(vocab, 6, rng), 0, 6) + "?";
        e.context = *e.question;
        e.options = make_options(vocab, rng);
        e.answer = (*e.options)[rng.below(4)];
        if (!domain.empty()) e.domain_tag = domain;
        out.push_back(std::move(e));
    }
    return out;
}

void write_store_file(const std::filesystem::path& path, const std::vector<StoreEntry>& entries) {
    std::string content;
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        const auto sep = e.id.find("::");
        j["id"] = sep == std::string::npos ? e.id : e.id.substr(sep + 2);
        if (e.options) {
            j["question"] = *e.question;
            j["options"] = *e.options;
            j["answer"] = *e.answer;
        } else {
            j["context"] = e.context;
            if (e.question) j["question"] = *e.question;
            if (e.answer) j["answer"] = *e.answer;
        }
        if (e.domain_tag) j["domain_tag"] = *e.domain_tag;
        content += j.dump() + "\n";
    }
    write_text(path, content);
}

}  // namespace rada::testing
