#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace rada {

enum class TaskKind { extractive_qa, mcq };
enum class ExampleSource { seed, store, generated };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view s);

struct QaExample {
    std::string id;
    std::string context;
    std::string question;
    std::string answer;  // empty only for unlabeled test inputs
    ExampleSource source = ExampleSource::seed;
    std::optional<std::string> domain_tag;

    bool operator==(const QaExample&) const = default;
};

struct McqExample {
    std::string id;
    std::string question;
    std::array<std::string, 4> options;
    std::string answer;  // equals one of options (trimmed); empty only for unlabeled inputs
    ExampleSource source = ExampleSource::seed;
    std::optional<std::string> domain_tag;

    bool operator==(const McqExample&) const = default;
};

using Example = std::variant<QaExample, McqExample>;

const std::string& example_id(const Example& e);
const std::string& example_question(const Example& e);
const std::string& example_answer(const Example& e);
const std::optional<std::string>& example_domain(const Example& e);

// Throws SchemaError describing the first violated invariant. labeled=false
// admits an empty answer.
void validate(const QaExample& e, bool labeled = true);
void validate(const McqExample& e, bool labeled = true);

// Index of the option equal to answer after trimming, if exactly one matches.
std::optional<std::size_t> option_index(const std::array<std::string, 4>& options,
                                        std::string_view answer);

enum class SeedMode {
    training,   // labeled, at least one record
    test_time,  // unlabeled answers allowed, may be empty
};

struct SeedDataset {
    TaskKind task_kind = TaskKind::extractive_qa;
    SeedMode mode = SeedMode::training;
    std::vector<Example> examples;

    std::size_t size_n() const noexcept { return examples.size(); }
};

struct StoreEntry {
    std::string id;
    std::string context;
    std::optional<std::string> question;
    std::optional<std::string> answer;
    std::optional<std::array<std::string, 4>> options;
    std::optional<std::string> domain_tag;

    // question and answer both present.
    bool complete() const noexcept { return question.has_value() && answer.has_value(); }
    bool operator==(const StoreEntry&) const = default;
};

class DataStore {
public:
    DataStore() = default;
    // Throws SchemaError on duplicate ids or invalid entries.
    explicit DataStore(std::vector<StoreEntry> entries);

    const std::vector<StoreEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const StoreEntry& at(std::size_t pos) const { return entries_.at(pos); }
    const StoreEntry* find(std::string_view id) const;
    std::optional<std::size_t> position_of(std::string_view id) const;

    // Entries satisfying pred, in original order.
    template <typename Pred>
    DataStore subset(Pred pred) const {
        std::vector<StoreEntry> out;
        for (const auto& e : entries_) {
            if (pred(e)) out.push_back(e);
        }
        return DataStore(std::move(out));
    }

private:
    std::vector<StoreEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_of_ids_;
};

void validate(const StoreEntry& e);

enum class Strategy {
    rada_train,
    rada_test_time,
    seed_only,
    ablate_random_incontext,
    ablate_random_target,
    ablate_random_all,
    self_instruct,
};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

// Where a pool member came from.
enum class Origin { seed, retrieved, random, generated };

std::string_view to_string(Origin o);
Origin parse_origin(std::string_view s);

struct AugmentedSample {
    Example example;
    Strategy strategy = Strategy::rada_train;
    std::string target_context_source;
    std::vector<std::string> demonstration_ids;
    std::string prompt_digest;
    std::string raw_generation;
    Origin target_origin = Origin::seed;
    std::vector<Origin> demonstration_origins;

    bool operator==(const AugmentedSample&) const = default;
};

// Checks the sample-local invariants (example validity, demonstration_ids
// empty iff test-time, origins aligned with ids).
void validate(const AugmentedSample& s);

// Loads a seed (or unlabeled test-input) file. One JSON object per line;
// blank lines are skipped. Errors carry the 1-based line number.
SeedDataset load_seed(const std::filesystem::path& path, TaskKind kind,
                      SeedMode mode = SeedMode::training);

void write_seed(const SeedDataset& seed, const std::filesystem::path& path);

struct StoreSource {
    std::filesystem::path path;
    std::string name_space;  // defaults to the file stem when empty
};

// Parses "ns=path" or "path".
StoreSource parse_store_source(std::string_view spec);

// Concatenates every file; ids become "<namespace>::<original-id>".
DataStore load_store(std::span<const StoreSource> sources);
DataStore load_store(std::span<const std::filesystem::path> paths);

void write_augmented(std::span<const AugmentedSample> samples, const std::filesystem::path& path);
std::vector<AugmentedSample> load_augmented(const std::filesystem::path& path);

// Serialized line for one sample (no trailing newline).
std::string augmented_to_line(const AugmentedSample& s);

// Ids referenced by samples (targets and demonstrations) that are not in known.
std::vector<std::string> unresolved_provenance(std::span<const AugmentedSample> samples,
                                               const std::unordered_set<std::string>& known);

std::unordered_set<std::string> known_ids(const SeedDataset& seed, const DataStore& store);

}  // namespace rada
