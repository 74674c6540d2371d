#include <doctest.h>

#include <sstream>

#include "rada/cli.hpp"
#include "rada/corpus.hpp"
#include "support/fixtures.hpp"

using namespace rada;
using rada::testing::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (const char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

// Seed of 10 biomedical examples plus a store with two namespaces.
struct Workspace {
    TempDir dir;
    std::string seed = (dir / "seed.jsonl").string();
    std::string bio = (dir / "bio.jsonl").string();
    std::string tech = (dir / "tech.jsonl").string();

    Workspace() {
        write_seed(rada::testing::make_qa_seed(rada::testing::biomedical_words(), 10, 3), seed);
        rada::testing::write_store_file(bio, rada::testing::make_store_entries(rada::testing::biomedical_words(), 30, 4,
                                                                               "b", "biomedical"));
        rada::testing::write_store_file(tech, rada::testing::make_store_entries(rada::testing::computing_words(), 30, 5,
                                                                                "t", "computing"));
    }

    std::vector<std::string> augment(const std::string& strategy, const std::string& output,
                                     std::vector<std::string> extra = {}) const {
        std::vector<std::string> a{"--rng-seed", "7", "augment", "--seed", seed, "--store", "bio=" + bio, "--store",
                                   "tech=" + tech, "--strategy", strategy, "--output", output};
        a.insert(a.end(), extra.begin(), extra.end());
        return a;
    }
};

}  // namespace

TEST_CASE("ingest accepts a valid seed and store") {
    Workspace w;
    const auto r = run({"ingest", "--seed", w.seed, "--store", "bio=" + w.bio});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find(": 10 examples") != std::string::npos);
    CHECK(r.out.find("30 entries (30 with question+answer)") != std::string::npos);
}

TEST_CASE("ingest reports the failing line of a malformed file") {
    TempDir dir;
    const auto bad = dir / "bad.jsonl";
    rada::testing::write_text(bad, "{\"id\":\"a\",\"context\":\"x y\",\"question\":\"q\",\"answer\":\"x\"}\n{oops\n");
    const auto r = run({"ingest", "--seed", bad.string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find(":2") != std::string::npos);

    CHECK(run({"ingest", "--seed", (dir / "missing.jsonl").string()}).code == cli::kExitUsage);
    CHECK(run({"ingest"}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run({"augment", "--strategy", "nope", "--seed", bad.string(), "--output", "x"}).code == cli::kExitUsage);
}

TEST_CASE("index prints hits for a query") {
    Workspace w;
    const auto r = run({"index", "--store", "bio=" + w.bio, "--query", rada::testing::biomedical_words()[0], "-k", "2"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("\"hits\"") != std::string::npos);
    CHECK(r.out.find("bio::") != std::string::npos);
}

TEST_CASE("augment writes m x n samples and a complete manifest") {
    Workspace w;
    const auto out = (w.dir / "aug.jsonl").string();
    const auto r = run(w.augment("rada_train", out));
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.out.find("samples 300") != std::string::npos);
    CHECK(count_lines(rada::testing::read_text(out)) == 300);
    const auto manifest = rada::testing::read_text(out + ".manifest.json");
    CHECK(manifest.find("\"status\": \"complete\"") != std::string::npos);
    CHECK(manifest.find("\"timestamps\"") == std::string::npos);

    const auto samples = load_augmented(out);
    const auto seed = load_seed(w.seed, TaskKind::extractive_qa);
    const std::vector<StoreSource> srcs{parse_store_source("bio=" + w.bio), parse_store_source("tech=" + w.tech)};
    CHECK(unresolved_provenance(samples, known_ids(seed, load_store(srcs))).empty());
}

TEST_CASE("two identical runs give byte-identical files") {
    Workspace w;
    const auto a = (w.dir / "a" / "aug.jsonl").string();
    const auto b = (w.dir / "b" / "aug.jsonl").string();
    std::filesystem::create_directories(w.dir / "a");
    std::filesystem::create_directories(w.dir / "b");
    REQUIRE(run(w.augment("rada_train", a, {"--multiplier", "5", "--in-flight", "4"})).code == 0);
    REQUIRE(run(w.augment("rada_train", b, {"--multiplier", "5", "--in-flight", "4"})).code == 0);
    CHECK(rada::testing::read_text(a) == rada::testing::read_text(b));
    CHECK(rada::testing::read_text(a + ".manifest.json") == rada::testing::read_text(b + ".manifest.json"));
}

TEST_CASE("test-time augmentation needs only test inputs and a store") {
    Workspace w;
    const auto inputs = rada::testing::fixtures_dir() / "test_inputs.jsonl";
    const auto out = (w.dir / "tt.jsonl").string();
    const auto r = run({"augment", "--strategy", "rada_test_time", "--test-inputs", inputs.string(), "--store",
                        "bio=" + w.bio, "--multiplier", "2", "--output", out});
    REQUIRE(r.code == cli::kExitOk);
    const auto samples = load_augmented(out);
    CHECK(samples.size() == 6);
    for (const auto& s : samples) CHECK(s.demonstration_ids.empty());

    CHECK(run({"augment", "--strategy", "rada_test_time", "--store", "bio=" + w.bio, "--output", out}).code ==
          cli::kExitUsage);
}

TEST_CASE("ablate_random_all records random origins") {
    Workspace w;
    const auto out = (w.dir / "abl.jsonl").string();
    REQUIRE(run(w.augment("ablate_random_all", out, {"--multiplier", "3"})).code == cli::kExitOk);
    for (const auto& s : load_augmented(out)) {
        CHECK(s.target_origin == Origin::random);
        for (const auto o : s.demonstration_origins) CHECK(o != Origin::retrieved);
    }
}

TEST_CASE("seed_only runs without a store") {
    Workspace w;
    const auto out = (w.dir / "so.jsonl").string();
    const auto r = run({"augment", "--seed", w.seed, "--strategy", "seed_only", "--multiplier", "2", "--output", out});
    CHECK(r.code == cli::kExitOk);
    CHECK(load_augmented(out).size() == 20);
    CHECK(run({"augment", "--seed", w.seed, "--output", out}).code == cli::kExitUsage);
}

TEST_CASE("strict span filter keeps every mock sample") {
    Workspace w;
    const auto out = (w.dir / "aug.jsonl").string();
    REQUIRE(run(w.augment("rada_train", out, {"--multiplier", "3"})).code == 0);
    const auto kept = (w.dir / "kept.jsonl").string();
    const auto r = run({"filter", "--input", out, "--kept", kept, "--span", "strict"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("input 30, kept 30, rejected 0") != std::string::npos);

    const auto dedup = run({"filter", "--input", out, "--kept", kept, "--rouge-threshold", "1.5"});
    CHECK(dedup.code == cli::kExitUsage);
}

TEST_CASE("report prints the diversity summary and domain tally") {
    Workspace w;
    const auto out = (w.dir / "aug.jsonl").string();
    REQUIRE(run(w.augment("rada_train", out, {"--multiplier", "2"})).code == 0);
    const auto json = (w.dir / "report.json").string();
    const auto r = run({"report", "--seed", w.seed, "--input", out, "--store", "bio=" + w.bio, "--store",
                        "tech=" + w.tech, "--output", json});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("samples 20, mean max-ROUGE-L") != std::string::npos);
    CHECK(r.out.find("domain biomedical") != std::string::npos);
    CHECK(std::filesystem::exists(json));
}

TEST_CASE("eval scores predictions against golds") {
    Workspace w;
    const auto seed = load_seed(w.seed, TaskKind::extractive_qa);
    std::string preds;
    for (const auto& e : seed.examples) {
        preds += "{\"id\":\"" + example_id(e) + "\",\"prediction\":\"" + example_answer(e) + "\"}\n";
    }
    const auto p = w.dir / "preds.jsonl";
    rada::testing::write_text(p, preds);
    const auto r = run({"eval", "--golds", w.seed, "--predictions", p.string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out == "n 10, f1 1.000000, exact_match 1.000000\n");

    rada::testing::write_text(p, preds.substr(0, preds.find('\n') + 1));
    CHECK(run({"eval", "--golds", w.seed, "--predictions", p.string()}).code == cli::kExitUsage);
}

TEST_CASE("config file supplies options and flags override it") {
    Workspace w;
    const auto out = (w.dir / "cfg.jsonl").string();
    const auto cfg = w.dir / "run.toml";
    rada::testing::write_text(cfg, "rng-seed = 7\n[augment]\nstrategy = \"seed_only\"\nmultiplier = 2\nseed = \"" +
                                       w.seed + "\"\noutput = \"" + out + "\"\n");
    auto r = run({"--config", cfg.string(), "augment"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(load_augmented(out).size() == 20);
    r = run({"--config", cfg.string(), "augment", "--multiplier", "1"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(load_augmented(out).size() == 10);
}
