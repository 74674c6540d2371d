#include "rada/augment.hpp"

#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "rada/rng.hpp"
#include "rada/text.hpp"

namespace rada {

namespace {

// Stream tags for Rng::stream.
constexpr std::uint64_t kTagTargets = 1;
constexpr std::uint64_t kTagSlot = 2;
constexpr std::uint64_t kTagRandomDemos = 3;
constexpr std::uint64_t kTagRandomTargets = 4;
constexpr std::uint64_t kTagSelfInstructTarget = 5;

bool uses_retrieved_demos(Strategy s) {
    return s == Strategy::rada_train || s == Strategy::ablate_random_target;
}
bool uses_random_demos(Strategy s) {
    return s == Strategy::ablate_random_incontext || s == Strategy::ablate_random_all;
}
bool uses_random_targets(Strategy s) {
    return s == Strategy::ablate_random_target || s == Strategy::ablate_random_all;
}

bool usable_as_demo(const StoreEntry& e, TaskKind task) {
    if (!e.complete()) return false;
    if (task == TaskKind::mcq) return e.options.has_value() && resolve_option(*e.options, *e.answer).has_value();
    return true;
}

bool usable_as_target(const StoreEntry& e, TaskKind task) {
    if (task == TaskKind::mcq) return e.question.has_value() && e.options.has_value();
    return true;
}

Demonstration demo_from_example(const Example& e) {
    if (const auto* qa = std::get_if<QaExample>(&e)) return QaDemonstration{qa->context, qa->question, qa->answer};
    const auto& m = std::get<McqExample>(e);
    return McqDemonstration{m.question, m.options, m.answer};
}

Demonstration demo_from_entry(const StoreEntry& e, TaskKind task) {
    if (task == TaskKind::extractive_qa) return QaDemonstration{e.context, *e.question, *e.answer};
    const auto idx = resolve_option(*e.options, *e.answer);
    return McqDemonstration{*e.question, *e.options, (*e.options)[*idx]};
}

TargetMember target_from_example(const Example& e, Origin origin) {
    TargetMember t;
    t.id = example_id(e);
    t.origin = origin;
    t.domain_tag = example_domain(e);
    if (const auto* qa = std::get_if<QaExample>(&e)) {
        t.text = qa->context;
    } else {
        const auto& m = std::get<McqExample>(e);
        t.text = m.question;
        t.options = m.options;
    }
    return t;
}

TargetMember target_from_entry(const StoreEntry& e, TaskKind task, Origin origin) {
    TargetMember t;
    t.id = e.id;
    t.origin = origin;
    t.domain_tag = e.domain_tag;
    if (task == TaskKind::extractive_qa) {
        t.text = e.context;
    } else {
        t.text = *e.question;
        t.options = e.options;
    }
    return t;
}

std::string query_text(const Example& e, FieldSelector field) {
    if (const auto* qa = std::get_if<QaExample>(&e)) {
        switch (field) {
            case FieldSelector::context: return qa->context;
            case FieldSelector::question: return qa->question;
            case FieldSelector::context_and_question: return qa->context + "\n" + qa->question;
        }
    }
    return example_question(e);
}

// Distinct entries (first-seen order) retrieved for each query.
std::vector<std::size_t> retrieve_union(const DataStore& sub, FieldSelector index_field,
                                        const std::vector<std::string>& queries, std::size_t k,
                                        const RetrieverFactory& make_retriever) {
    std::vector<std::size_t> out;
    if (k == 0 || queries.empty()) return out;
    auto retriever = make_retriever(sub, index_field);
    std::unordered_set<std::string> seen;
    for (const auto& q : queries) {
        for (const auto& hit : retriever->retrieve(q, k)) {
            if (seen.insert(hit.entry_id).second) out.push_back(*sub.position_of(hit.entry_id));
        }
    }
    return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Stops handing out new
// indices when cancel is set or fn throws; the first exception is rethrown.
template <typename Fn>
std::size_t parallel_slots(std::size_t n, std::size_t workers, const RunControl& control, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex mu;
    const auto cancelled = [&] {
        return failed.load() || (control.cancel != nullptr && control.cancel->load());
    };
    const auto work = [&] {
        for (;;) {
            if (cancelled()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
            const auto d = done.fetch_add(1) + 1;
            if (control.progress) {
                std::lock_guard lock(mu);
                control.progress(d, n);
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
    return done.load();
}

struct SlotOutcome {
    std::optional<AugmentedSample> sample;
    SkippedSlot skip;
};

// Everything one slot needs; demo members are drawn from `demos`.
struct SlotPlan {
    std::size_t slot = 0;
    TaskKind task = TaskKind::extractive_qa;
    const TargetMember* target = nullptr;
    const std::vector<DemonstrationMember>* demos = nullptr;
    std::size_t demo_count = 0;
    std::size_t configured_count = kDefaultDemoCount;
    Strategy strategy = Strategy::rada_train;
};

Example build_example(const SlotPlan& plan, TemplateKind kind, const ParsedGeneration& parsed) {
    const auto& target = *plan.target;
    if (plan.task == TaskKind::extractive_qa) {
        QaExample e;
        e.id = generated_id(plan.slot);
        e.context = target.text;
        e.question = *parsed.question;
        e.answer = *parsed.answer;
        e.source = ExampleSource::generated;
        e.domain_tag = target.domain_tag;
        validate(e, true);
        return e;
    }
    McqExample e;
    e.id = generated_id(plan.slot);
    e.source = ExampleSource::generated;
    e.domain_tag = target.domain_tag;
    if (kind == TemplateKind::mmlu_v1) {
        e.question = target.text;
        e.options = *parsed.options;
    } else {
        e.question = *parsed.question;
        e.options = *target.options;
    }
    const auto idx = resolve_option(e.options, *parsed.answer);
    if (!idx) throw ParseError("answer does not match any option");
    e.answer = e.options[*idx];
    validate(e, true);
    return e;
}

SlotOutcome run_slot(const SlotPlan& plan, const AugmentConfig& cfg, LlmBackend& llm) {
    const TemplateKind kind = slot_template(plan.task, plan.slot);
    SlotOutcome out;
    out.skip.slot = plan.slot;
    out.skip.reason = "parse-skip";
    const int attempts = 1 + std::max(0, cfg.max_parse_retries_per_slot);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        out.skip.attempts = attempt + 1;
        auto rng = Rng::stream(cfg.rng_seed, {kTagSlot, plan.slot, static_cast<std::uint64_t>(attempt)});
        const auto picks = rng.sample_indices(plan.demos->size(), plan.demo_count);
        std::vector<Demonstration> demos;
        AugmentedSample sample;
        for (const auto p : picks) {
            const auto& m = (*plan.demos)[p];
            demos.push_back(m.demo);
            sample.demonstration_ids.push_back(m.id);
            sample.demonstration_origins.push_back(m.origin);
        }
        PromptTarget target{plan.target->text, std::nullopt};
        if (kind == TemplateKind::mmlu_v2) target.options = plan.target->options;
        const auto prompt = render_augmentation_prompt(kind, demos, target, plan.configured_count);

        CompletionRecord rec;
        try {
            rec = llm.complete(prompt, cfg.generation);
        } catch (const LlmError& e) {
            if (e.kind() == LlmErrorKind::auth) throw;
            out.skip.detail = e.what();
            continue;
        }
        try {
            const auto parsed = parse_generation(kind, rec.raw_text);
            sample.example = build_example(plan, kind, parsed);
        } catch (const Error& e) {
            out.skip.detail = e.what();
            continue;
        }
        sample.strategy = plan.strategy;
        sample.target_context_source = plan.target->id;
        sample.target_origin = plan.target->origin;
        sample.prompt_digest = prompt.digest;
        sample.raw_generation = rec.raw_text;
        out.sample = std::move(sample);
        return out;
    }
    return out;
}

void collect(AugmentResult& result, std::vector<std::optional<SlotOutcome>>& outcomes) {
    for (auto& o : outcomes) {
        if (!o) {
            result.cancelled = true;
            continue;
        }
        if (o->sample) {
            result.samples.push_back(std::move(*o->sample));
        } else {
            result.skipped.push_back(std::move(o->skip));
        }
    }
}

void enforce_skip_budget(AugmentResult& result, double max_fraction) {
    if (result.slots_total == 0) return;
    const double fraction = static_cast<double>(result.skipped.size()) / static_cast<double>(result.slots_total);
    if (fraction > max_fraction) throw SkipBudgetExceeded(std::move(result));
}

void require_labeled(const SeedDataset& seed) {
    if (seed.size_n() == 0) throw AugmentError("training-time strategies need at least one seed example");
    for (const auto& e : seed.examples) {
        if (text::trim(example_answer(e)).empty()) {
            throw AugmentError("seed example " + example_id(e) + " is unlabeled");
        }
    }
}

}  // namespace

AugmentConfig AugmentConfig::effective() const {
    AugmentConfig c = *this;
    if (c.strategy == Strategy::rada_test_time) c.demo_count = 0;
    if (c.multiplier_m == 0) throw ConfigError("multiplier must be positive");
    if (c.in_flight_limit == 0) throw ConfigError("in_flight_limit must be positive");
    if (c.max_parse_retries_per_slot < 0) throw ConfigError("max_parse_retries_per_slot must be >= 0");
    if (c.strategy != Strategy::rada_test_time && c.demo_count == 0) {
        throw ConfigError("demo_count must be positive for " + std::string(to_string(c.strategy)));
    }
    if (!(c.max_skip_fraction >= 0.0 && c.max_skip_fraction <= 1.0)) {
        throw ConfigError("max_skip_fraction must lie in [0, 1]");
    }
    c.generation.validate();
    return c;
}

SkipBudgetExceeded::SkipBudgetExceeded(AugmentResult partial)
    : AugmentError("skip budget exceeded: " + std::to_string(partial.skipped.size()) + " of " +
                   std::to_string(partial.slots_total) + " slots skipped"),
      result_(std::move(partial)) {}

TemplateKind slot_template(TaskKind task, std::size_t slot) {
    if (task == TaskKind::extractive_qa) return TemplateKind::extractive_qa;
    return slot % 2 == 0 ? TemplateKind::mmlu_v1 : TemplateKind::mmlu_v2;
}

std::string generated_id(std::size_t slot) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "gen-%06zu", slot);
    return buf;
}

DemonstrationPool build_demonstration_pool(const SeedDataset& seed, const DataStore& store,
                                           const RetrieverFactory& make_retriever, const AugmentConfig& raw_cfg) {
    const auto cfg = raw_cfg.effective();
    DemonstrationPool pool;
    if (cfg.demo_count == 0) return pool;
    require_labeled(seed);
    std::unordered_set<std::string> seen;
    for (const auto& e : seed.examples) {
        if (seen.insert(example_id(e)).second) pool.members.push_back({example_id(e), Origin::seed, demo_from_example(e)});
    }
    const bool retrieved = uses_retrieved_demos(cfg.strategy);
    const bool random = uses_random_demos(cfg.strategy);
    if ((retrieved || random) && cfg.k_retrieval > 0) {
        const auto complete = store.subset([&](const StoreEntry& e) { return usable_as_demo(e, seed.task_kind); });
        if (complete.empty()) {
            throw AugmentError("no complete (question+answer) store entries available for demonstrations");
        }
        std::vector<std::string> queries;
        for (const auto& e : seed.examples) queries.push_back(example_question(e));
        // In-context retrieval compares input queries: seed questions against store questions.
        const auto hits = retrieve_union(complete, FieldSelector::question, queries, cfg.k_retrieval, make_retriever);
        pool.retrieved_count = hits.size();
        std::vector<std::size_t> chosen = hits;
        Origin origin = Origin::retrieved;
        if (random) {
            auto rng = Rng::stream(cfg.rng_seed, {kTagRandomDemos});
            chosen = rng.sample_indices(complete.size(), hits.size());
            origin = Origin::random;
        }
        for (const auto pos : chosen) {
            const auto& entry = complete.at(pos);
            if (seen.insert(entry.id).second) {
                pool.members.push_back({entry.id, origin, demo_from_entry(entry, seed.task_kind)});
            }
        }
    }
    if (pool.members.size() < cfg.demo_count) {
        throw AugmentError("demonstration pool has " + std::to_string(pool.members.size()) + " members; " +
                           std::to_string(cfg.demo_count) + " are needed per prompt");
    }
    return pool;
}

TargetPool build_target_pool(const SeedDataset& queries, const DataStore& store, const RetrieverFactory& make_retriever,
                             const AugmentConfig& raw_cfg) {
    const auto cfg = raw_cfg.effective();
    TargetPool pool;
    if (cfg.strategy == Strategy::seed_only || cfg.strategy == Strategy::self_instruct) {
        std::unordered_set<std::string> seen;
        for (const auto& e : queries.examples) {
            if (seen.insert(example_id(e)).second) pool.members.push_back(target_from_example(e, Origin::seed));
        }
    } else {
        const TaskKind task = queries.task_kind;
        const auto candidates = store.subset([&](const StoreEntry& e) { return usable_as_target(e, task); });
        if (candidates.empty()) throw AugmentError("store has no entries usable as target contexts");
        std::vector<std::string> texts;
        for (const auto& e : queries.examples) {
            texts.push_back(task == TaskKind::extractive_qa ? query_text(e, cfg.target_query_field)
                                                            : example_question(e));
        }
        // QA targets are documents; MCQ targets are questions (with their options).
        const FieldSelector index_field = task == TaskKind::extractive_qa ? FieldSelector::context
                                                                          : FieldSelector::question;
        auto chosen = retrieve_union(candidates, index_field, texts, cfg.k_retrieval, make_retriever);
        Origin origin = Origin::retrieved;
        if (uses_random_targets(cfg.strategy)) {
            auto rng = Rng::stream(cfg.rng_seed, {kTagRandomTargets});
            chosen = rng.sample_indices(candidates.size(), chosen.size());
            origin = Origin::random;
        }
        for (const auto pos : chosen) pool.members.push_back(target_from_entry(candidates.at(pos), task, origin));
    }
    if (pool.members.empty()) throw AugmentError("target pool is empty");
    return pool;
}

AugmentResult run_augmentation(const SeedDataset& seed, const DataStore& store, const AugmentConfig& raw_cfg,
                               LlmBackend& llm, const RetrieverFactory& make_retriever, const RunControl& control) {
    const auto cfg = raw_cfg.effective();
    if (cfg.strategy == Strategy::self_instruct) return run_self_instruct_baseline(seed, raw_cfg, llm, control);
    if (cfg.strategy != Strategy::rada_test_time) require_labeled(seed);
    if (seed.size_n() == 0) throw AugmentError("no seed examples or test inputs to query with");

    const auto demos = build_demonstration_pool(seed, store, make_retriever, cfg);
    const auto targets = build_target_pool(seed, store, make_retriever, cfg);

    AugmentResult result;
    result.slots_total = cfg.multiplier_m * seed.size_n();
    result.demo_pool_size = demos.members.size();
    result.target_pool_size = targets.members.size();

    // Round-robin over the target pool, reshuffled on every pass.
    const std::size_t pool_n = targets.members.size();
    std::vector<std::size_t> assignment(result.slots_total);
    std::vector<std::size_t> order(pool_n);
    for (std::size_t i = 0; i < result.slots_total; ++i) {
        if (i % pool_n == 0) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng::stream(cfg.rng_seed, {kTagTargets, i / pool_n}).shuffle(order);
        }
        assignment[i] = order[i % pool_n];
    }

    std::vector<std::optional<SlotOutcome>> outcomes(result.slots_total);
    parallel_slots(result.slots_total, cfg.in_flight_limit, control, [&](std::size_t i) {
        SlotPlan plan;
        plan.slot = i;
        plan.task = seed.task_kind;
        plan.target = &targets.members[assignment[i]];
        plan.demos = &demos.members;
        plan.demo_count = cfg.demo_count;
        plan.configured_count = cfg.demo_count == 0 ? kDefaultDemoCount : cfg.demo_count;
        plan.strategy = cfg.strategy;
        outcomes[i] = run_slot(plan, cfg, llm);
    });
    collect(result, outcomes);
    if (!result.cancelled) enforce_skip_budget(result, cfg.max_skip_fraction);
    return result;
}

AugmentResult run_self_instruct_baseline(const SeedDataset& seed, const AugmentConfig& raw_cfg, LlmBackend& llm,
                                         const RunControl& control) {
    auto cfg = raw_cfg;
    cfg.strategy = Strategy::self_instruct;
    cfg = cfg.effective();
    require_labeled(seed);

    std::vector<DemonstrationMember> demo_pool;
    std::vector<TargetMember> target_pool;
    for (const auto& e : seed.examples) {
        demo_pool.push_back({example_id(e), Origin::seed, demo_from_example(e)});
        target_pool.push_back(target_from_example(e, Origin::seed));
    }
    if (demo_pool.size() < cfg.demo_count) {
        throw AugmentError("seed has " + std::to_string(demo_pool.size()) + " examples; " +
                           std::to_string(cfg.demo_count) + " demonstrations are needed per prompt");
    }

    AugmentResult result;
    result.slots_total = cfg.multiplier_m * seed.size_n();
    result.demo_pool_size = demo_pool.size();
    result.target_pool_size = target_pool.size();
    const std::size_t round_size = seed.size_n();

    for (std::size_t first = 0; first < result.slots_total && !result.cancelled; first += round_size) {
        const std::size_t n = std::min(round_size, result.slots_total - first);
        // Draws within a round see only what existed when the round began.
        const auto demo_snapshot = demo_pool;
        const auto target_snapshot = target_pool;
        std::vector<std::optional<SlotOutcome>> outcomes(n);
        parallel_slots(n, cfg.in_flight_limit, control, [&](std::size_t j) {
            const std::size_t slot = first + j;
            auto rng = Rng::stream(cfg.rng_seed, {kTagSelfInstructTarget, slot});
            SlotPlan plan;
            plan.slot = slot;
            plan.task = seed.task_kind;
            plan.target = &target_snapshot[rng.below(target_snapshot.size())];
            plan.demos = &demo_snapshot;
            plan.demo_count = cfg.demo_count;
            plan.configured_count = cfg.demo_count;
            plan.strategy = Strategy::self_instruct;
            outcomes[j] = run_slot(plan, cfg, llm);
        });
        const std::size_t before = result.samples.size();
        collect(result, outcomes);
        for (std::size_t s = before; s < result.samples.size(); ++s) {
            const auto& sample = result.samples[s];
            demo_pool.push_back({example_id(sample.example), Origin::generated, demo_from_example(sample.example)});
            target_pool.push_back(target_from_example(sample.example, Origin::generated));
        }
        result.round_pool_sizes.push_back(demo_pool.size());
    }
    result.demo_pool_size = demo_pool.size();
    result.target_pool_size = target_pool.size();
    if (!result.cancelled) enforce_skip_budget(result, cfg.max_skip_fraction);
    return result;
}

}  // namespace rada
