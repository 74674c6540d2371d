#include <doctest.h>

#include <atomic>
#include <set>

#include "rada/augment.hpp"
#include "support/fixtures.hpp"

using namespace rada;
namespace fx = rada::testing;

namespace {

DataStore mixed_store() {
    auto entries = fx::make_store_entries(fx::biomedical_words(), 40, 101, "bio::", "biomedical");
    auto tech = fx::make_store_entries(fx::computing_words(), 40, 202, "tech::", "computing");
    auto bare = fx::make_store_entries(fx::biomedical_words(), 10, 303, "bare::", "biomedical", false);
    entries.insert(entries.end(), tech.begin(), tech.end());
    entries.insert(entries.end(), bare.begin(), bare.end());
    return DataStore(std::move(entries));
}

SeedDataset seed10() { return fx::make_qa_seed(fx::biomedical_words(), 10, 7); }

AugmentConfig config(Strategy s, std::size_t m = 3) {
    AugmentConfig cfg;
    cfg.strategy = s;
    cfg.multiplier_m = m;
    cfg.rng_seed = 1234;
    return cfg;
}

std::set<std::string> seed_ids(const SeedDataset& seed) {
    std::set<std::string> out;
    for (const auto& e : seed.examples) out.insert(example_id(e));
    return out;
}

// Backend whose reply never parses.
class GarbageBackend final : public LlmBackend {
public:
    CompletionRecord complete(const RenderedPrompt& p, const GenerationParams&) override {
        ++calls;
        return {p.digest, "no labels at all", "garbage", {}, 1};
    }
    std::string name() const override { return "garbage"; }
    std::atomic<int> calls{0};
};

// Fails to parse on odd slots' first attempt only; counts calls per digest.
class FlakyBackend final : public LlmBackend {
public:
    CompletionRecord complete(const RenderedPrompt& p, const GenerationParams& g) override {
        if (++calls % 3 == 0) return {p.digest, "Answer: missing question", "flaky", {}, 1};
        return inner.complete(p, g);
    }
    std::string name() const override { return "flaky"; }
    MockBackend inner;
    std::atomic<int> calls{0};
};

class AuthFailBackend final : public LlmBackend {
public:
    CompletionRecord complete(const RenderedPrompt&, const GenerationParams&) override {
        throw LlmError(LlmErrorKind::auth, 1, "denied");
    }
    std::string name() const override { return "deny"; }
};

}  // namespace

TEST_CASE("demonstration pool is bounded by |D| + k|D|") {
    const auto seed = seed10();
    const auto store = mixed_store();
    const auto pool = build_demonstration_pool(seed, store, bm25_factory(), config(Strategy::rada_train));
    CHECK(pool.members.size() <= 40);
    CHECK(pool.members.size() > 10);
    std::set<std::string> ids;
    for (const auto& m : pool.members) {
        CHECK(ids.insert(m.id).second);
        if (m.origin == Origin::retrieved) {
            const auto* e = store.find(m.id);
            REQUIRE(e != nullptr);
            CHECK(e->complete());
        }
    }
}

TEST_CASE("k = 0 reduces the demonstration pool to the seed") {
    const auto seed = seed10();
    auto cfg = config(Strategy::rada_train);
    cfg.k_retrieval = 0;
    const auto pool = build_demonstration_pool(seed, mixed_store(), bm25_factory(), cfg);
    const auto baseline = build_demonstration_pool(seed, mixed_store(), bm25_factory(), config(Strategy::seed_only));
    REQUIRE(pool.members.size() == 10);
    REQUIRE(baseline.members.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(pool.members[i].id == baseline.members[i].id);
}

TEST_CASE("random in-context pools are reproducible") {
    const auto seed = seed10();
    const auto store = mixed_store();
    const auto a = build_demonstration_pool(seed, store, bm25_factory(), config(Strategy::ablate_random_incontext));
    const auto b = build_demonstration_pool(seed, store, bm25_factory(), config(Strategy::ablate_random_incontext));
    REQUIRE(a.members.size() == b.members.size());
    for (std::size_t i = 0; i < a.members.size(); ++i) CHECK(a.members[i].id == b.members[i].id);
    bool any_random = false;
    for (const auto& m : a.members) any_random = any_random || m.origin == Origin::random;
    CHECK(any_random);
}

TEST_CASE("demonstration pool needs complete store entries") {
    const auto seed = seed10();
    const DataStore bare(fx::make_store_entries(fx::biomedical_words(), 5, 1, "p::", "", false));
    CHECK_THROWS_AS(build_demonstration_pool(seed, bare, bm25_factory(), config(Strategy::rada_train)), AugmentError);
}

TEST_CASE("seed_only target pool is the seed contexts") {
    const auto seed = seed10();
    const auto pool = build_target_pool(seed, mixed_store(), bm25_factory(), config(Strategy::seed_only));
    REQUIRE(pool.members.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(pool.members[i].id == example_id(seed.examples[i]));
        CHECK(pool.members[i].text == std::get<QaExample>(seed.examples[i]).context);
    }
}

TEST_CASE("test-time target pool with 5 queries and k = 3") {
    auto queries = fx::make_qa_seed(fx::biomedical_words(), 5, 77, "test-");
    queries.mode = SeedMode::test_time;
    for (auto& e : queries.examples) std::get<QaExample>(e).answer.clear();
    auto cfg = config(Strategy::rada_test_time);
    CHECK(cfg.effective().demo_count == 0);
    const auto pool = build_target_pool(queries, mixed_store(), bm25_factory(), cfg);
    CHECK(pool.members.size() <= 15);
    CHECK_FALSE(pool.members.empty());
    CHECK(build_demonstration_pool(queries, mixed_store(), bm25_factory(), cfg).members.empty());
}

TEST_CASE("target pool deduplicates entries hit by several queries") {
    auto seed = seed10();
    // identical queries retrieve identical entries
    for (auto& e : seed.examples) std::get<QaExample>(e).context = std::get<QaExample>(seed.examples[0]).context;
    const auto pool = build_target_pool(seed, mixed_store(), bm25_factory(), config(Strategy::rada_train));
    CHECK(pool.members.size() == 3);
    std::set<std::string> ids;
    for (const auto& m : pool.members) CHECK(ids.insert(m.id).second);
}

TEST_CASE("rada_train produces m|D| samples with resolvable provenance") {
    const auto seed = seed10();
    const auto store = mixed_store();
    MockBackend mock;
    const auto result = run_augmentation(seed, store, config(Strategy::rada_train, 30), mock, bm25_factory());
    REQUIRE(result.samples.size() == 300);
    CHECK(result.skipped.empty());
    CHECK(unresolved_provenance(result.samples, known_ids(seed, store)).empty());
    const auto seeds = seed_ids(seed);
    for (const auto& s : result.samples) {
        CHECK(s.strategy == Strategy::rada_train);
        CHECK(s.demonstration_ids.size() == 3);
        CHECK(seeds.count(s.target_context_source) == 0);
        CHECK_NOTHROW(validate(s));
    }
}

TEST_CASE("seed_only targets are seed ids") {
    const auto seed = seed10();
    MockBackend mock;
    const auto result = run_augmentation(seed, mixed_store(), config(Strategy::seed_only, 1), mock, bm25_factory());
    REQUIRE(result.samples.size() == 10);
    const auto seeds = seed_ids(seed);
    for (const auto& s : result.samples) {
        CHECK(seeds.count(s.target_context_source) == 1);
        for (const auto& d : s.demonstration_ids) CHECK(seeds.count(d) == 1);
    }
}

TEST_CASE("round-robin covers every target before repeating") {
    const auto seed = seed10();
    const auto store = mixed_store();
    MockBackend mock;
    const auto cfg = config(Strategy::rada_train, 5);
    const auto pool = build_target_pool(seed, store, bm25_factory(), cfg);
    const auto result = run_augmentation(seed, store, cfg, mock, bm25_factory());
    std::set<std::string> first_pass;
    for (std::size_t i = 0; i < pool.members.size(); ++i) first_pass.insert(result.samples[i].target_context_source);
    CHECK(first_pass.size() == pool.members.size());
}

TEST_CASE("runs are deterministic across in-flight limits") {
    const auto seed = seed10();
    const auto store = mixed_store();
    MockBackend mock;
    auto cfg = config(Strategy::rada_train, 5);
    const auto serial = run_augmentation(seed, store, cfg, mock, bm25_factory());
    cfg.in_flight_limit = 6;
    const auto parallel = run_augmentation(seed, store, cfg, mock, bm25_factory());
    CHECK(serial.samples == parallel.samples);
}

TEST_CASE("unparseable replies are retried then skipped") {
    const auto seed = seed10();
    GarbageBackend garbage;
    auto cfg = config(Strategy::seed_only, 1);
    cfg.max_parse_retries_per_slot = 2;
    try {
        run_augmentation(seed, mixed_store(), cfg, garbage, bm25_factory());
        FAIL("expected SkipBudgetExceeded");
    } catch (const SkipBudgetExceeded& e) {
        CHECK(e.result().skipped.size() == 10);
        CHECK(e.result().skipped[0].attempts == 3);
        CHECK(e.result().skipped[0].reason == "parse-skip");
    }
    CHECK(garbage.calls.load() == 30);

    cfg.max_skip_fraction = 1.0;
    const auto r = run_augmentation(seed, mixed_store(), cfg, garbage, bm25_factory());
    CHECK(r.samples.empty());
    CHECK(r.skipped.size() == 10);
}

TEST_CASE("count contract: samples plus skips equal the slot count") {
    const auto seed = seed10();
    FlakyBackend flaky;
    auto cfg = config(Strategy::rada_train, 3);
    cfg.max_parse_retries_per_slot = 0;
    cfg.max_skip_fraction = 1.0;
    const auto r = run_augmentation(seed, mixed_store(), cfg, flaky, bm25_factory());
    CHECK(r.samples.size() + r.skipped.size() == 30);
    CHECK_FALSE(r.skipped.empty());
}

TEST_CASE("auth errors abort the run") {
    AuthFailBackend deny;
    CHECK_THROWS_AS(run_augmentation(seed10(), mixed_store(), config(Strategy::seed_only, 1), deny, bm25_factory()),
                    LlmError);
}

TEST_CASE("cancellation stops early") {
    std::atomic<bool> cancel{true};
    MockBackend mock;
    RunControl control;
    control.cancel = &cancel;
    const auto r = run_augmentation(seed10(), mixed_store(), config(Strategy::seed_only, 2), mock, bm25_factory(), control);
    CHECK(r.cancelled);
    CHECK(r.samples.size() < 20);
}

TEST_CASE("training strategies reject unlabeled or empty seeds") {
    MockBackend mock;
    SeedDataset empty;
    CHECK_THROWS_AS(run_augmentation(empty, mixed_store(), config(Strategy::rada_train), mock, bm25_factory()),
                    AugmentError);
    auto seed = seed10();
    std::get<QaExample>(seed.examples[3]).answer.clear();
    CHECK_THROWS_AS(run_augmentation(seed, mixed_store(), config(Strategy::rada_train), mock, bm25_factory()),
                    AugmentError);
}

TEST_CASE("config validation") {
    auto cfg = config(Strategy::rada_train);
    cfg.multiplier_m = 0;
    CHECK_THROWS_AS(cfg.effective(), ConfigError);
    cfg = config(Strategy::rada_train);
    cfg.in_flight_limit = 0;
    CHECK_THROWS_AS(cfg.effective(), ConfigError);
}

TEST_CASE("MCQ augmentation alternates templates") {
    const auto seed = fx::make_mcq_seed(fx::computing_words(), 6, 5);
    const DataStore store(fx::make_mcq_store_entries(fx::computing_words(), 30, 6, "mm::", "computing"));
    MockBackend mock;
    const auto r = run_augmentation(seed, store, config(Strategy::rada_train, 2), mock, bm25_factory());
    REQUIRE(r.samples.size() == 12);
    CHECK(slot_template(TaskKind::mcq, 0) == TemplateKind::mmlu_v1);
    CHECK(slot_template(TaskKind::mcq, 1) == TemplateKind::mmlu_v2);
    for (const auto& s : r.samples) {
        const auto& e = std::get<McqExample>(s.example);
        CHECK(option_index(e.options, e.answer).has_value());
    }
    // v2 slots keep the retrieved options list
    const auto& odd = std::get<McqExample>(r.samples[1].example);
    CHECK(store.find(r.samples[1].target_context_source)->options == odd.options);
}

TEST_CASE("self-instruct grows its pool by generated samples each round") {
    const auto seed = seed10();
    MockBackend mock;
    auto cfg = config(Strategy::self_instruct, 4);
    const auto r = run_self_instruct_baseline(seed, cfg, mock);
    REQUIRE(r.samples.size() == 40);
    REQUIRE(r.round_pool_sizes.size() == 4);
    for (std::size_t round = 0; round < 4; ++round) CHECK(r.round_pool_sizes[round] == 10 + 10 * (round + 1));
    // first round draws only from the seed
    const auto seeds = seed_ids(seed);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(seeds.count(r.samples[i].target_context_source) == 1);
        for (const auto& d : r.samples[i].demonstration_ids) CHECK(seeds.count(d) == 1);
    }
    bool later_uses_generated = false;
    for (std::size_t i = 10; i < 40; ++i) {
        later_uses_generated = later_uses_generated || r.samples[i].target_origin == Origin::generated;
    }
    CHECK(later_uses_generated);
    const auto again = run_self_instruct_baseline(seed, cfg, mock);
    CHECK(again.samples == r.samples);
}
