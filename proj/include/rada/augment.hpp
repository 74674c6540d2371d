#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rada/corpus.hpp"
#include "rada/llmclient.hpp"
#include "rada/promptgen.hpp"
#include "rada/retrieval.hpp"

namespace rada {

struct AugmentConfig {
    Strategy strategy = Strategy::rada_train;
    std::size_t k_retrieval = 3;
    std::size_t demo_count = kDefaultDemoCount;
    std::size_t multiplier_m = 30;
    // Query text for target-context retrieval (QA only).
    FieldSelector target_query_field = FieldSelector::context;
    std::uint64_t rng_seed = 0;
    int max_parse_retries_per_slot = 2;
    std::size_t in_flight_limit = 1;
    // Abort when more than this fraction of slots is skipped.
    double max_skip_fraction = 0.2;
    GenerationParams generation;

    // Copy with the strategy-implied settings applied (demo_count = 0 for
    // test-time). Throws ConfigError on out-of-range values.
    AugmentConfig effective() const;
};

class AugmentError : public Error {
public:
    using Error::Error;
};

struct DemonstrationMember {
    std::string id;
    Origin origin = Origin::seed;
    Demonstration demo;
};

struct DemonstrationPool {
    std::vector<DemonstrationMember> members;
    // Distinct store entries returned by seed-query retrieval.
    std::size_t retrieved_count = 0;
};

struct TargetMember {
    std::string id;
    Origin origin = Origin::seed;
    std::string text;  // context (QA) or question (MCQ)
    std::optional<std::array<std::string, 4>> options;
    std::optional<std::string> domain_tag;
};

struct TargetPool {
    std::vector<TargetMember> members;
};

// Seed examples plus, for retrieval strategies, the top-k complete store
// entries for every seed question (deduplicated). The random in-context
// ablations swap the retrieved members for as many random complete entries.
DemonstrationPool build_demonstration_pool(const SeedDataset& seed, const DataStore& store,
                                           const RetrieverFactory& make_retriever, const AugmentConfig& cfg);

// Union of top-k store contexts (QA) or store questions with options (MCQ)
// retrieved for every query example; the seed itself for seed_only; random
// entries of equal count for the random target ablations.
TargetPool build_target_pool(const SeedDataset& queries, const DataStore& store,
                             const RetrieverFactory& make_retriever, const AugmentConfig& cfg);

// Template used for slot i: extractive QA, or MMLU v1/v2 alternating by parity.
TemplateKind slot_template(TaskKind task, std::size_t slot);

std::string generated_id(std::size_t slot);

struct SkippedSlot {
    std::size_t slot = 0;
    int attempts = 0;
    std::string reason;  // stable code, "parse-skip"
    std::string detail;
};

struct AugmentResult {
    std::vector<AugmentedSample> samples;  // slot order
    std::vector<SkippedSlot> skipped;
    std::size_t slots_total = 0;
    std::size_t demo_pool_size = 0;
    std::size_t target_pool_size = 0;
    bool cancelled = false;
    // Pool size after each round (self-instruct only).
    std::vector<std::size_t> round_pool_sizes;
};

class SkipBudgetExceeded : public AugmentError {
public:
    explicit SkipBudgetExceeded(AugmentResult partial);
    const AugmentResult& result() const noexcept { return result_; }

private:
    AugmentResult result_;
};

struct RunControl {
    const std::atomic<bool>* cancel = nullptr;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

// m * |seed| slots. For rada_test_time, `seed` holds the unlabeled test
// inputs. Each slot draws its demonstrations from a stream keyed by
// (rng_seed, slot, attempt), so results do not depend on in_flight_limit.
AugmentResult run_augmentation(const SeedDataset& seed, const DataStore& store, const AugmentConfig& cfg,
                               LlmBackend& llm, const RetrieverFactory& make_retriever, const RunControl& control = {});

// Self-Instruct style baseline: rounds of |seed| slots whose targets and
// demonstrations come from the seed plus everything generated so far.
AugmentResult run_self_instruct_baseline(const SeedDataset& seed, const AugmentConfig& cfg, LlmBackend& llm,
                                         const RunControl& control = {});

}  // namespace rada
