#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rada/corpus.hpp"
#include "rada/retrieval.hpp"

namespace rada {

// ---------------------------------------------------------------------------
// Metrics

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

// LCS over word_tokens(). P = LCS/|candidate|, R = LCS/|reference|,
// F = 2PR/(P+R) (0 when P+R = 0).
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

// Same, over pre-tokenized input.
RougeScore rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference);

// Token-overlap F1 after squad_normalize().
double squad_f1(std::string_view prediction, std::string_view gold);
double exact_match(std::string_view prediction, std::string_view gold);

// Fraction of predictions naming the gold option, by text or leading letter.
double mcq_accuracy(std::span<const std::string> predictions, std::span<const McqExample> golds);

// ---------------------------------------------------------------------------
// Filters

enum class SpanNormalization {
    strict,   // case fold + whitespace collapse, then substring check
    relaxed,  // no containment check
};

struct FilterConfig {
    bool enable_span_filter = true;
    SpanNormalization normalization = SpanNormalization::strict;
    std::optional<double> rouge_dedup_threshold;      // suggested 0.7
    std::optional<double> embedding_dedup_threshold;  // suggested 0.9

    // Thresholds, when set, must lie in (0, 1].
    void validate() const;
};

inline constexpr std::string_view kReasonNotASpan = "not-a-span";
inline constexpr std::string_view kReasonRougeDup = "rouge-dup";
inline constexpr std::string_view kReasonEmbeddingDup = "embedding-dup";
inline constexpr std::string_view kReasonParseSkip = "parse-skip";

struct Rejection {
    AugmentedSample sample;
    std::string reason;
    std::string detail;
};

struct FilterResult {
    std::vector<AugmentedSample> kept;
    std::vector<Rejection> rejected;
};

// Keeps samples whose answer is a contiguous substring of their context.
// MCQ samples pass through untouched.
FilterResult span_filter(std::span<const AugmentedSample> samples, const FilterConfig& cfg);

// Greedy pass in order: reject a sample whose question's ROUGE-L F against any
// already-kept question is >= threshold.
FilterResult rouge_dedup_filter(std::span<const AugmentedSample> samples, double threshold);

// Same rule under cosine similarity of question embeddings.
FilterResult embedding_dedup_filter(std::span<const AugmentedSample> samples, EmbeddingProvider& provider,
                                    double threshold);

// span -> rouge -> embedding, as enabled in cfg. provider may be null when
// the embedding filter is disabled.
FilterResult apply_filters(std::span<const AugmentedSample> samples, const FilterConfig& cfg,
                           EmbeddingProvider* provider);

// ---------------------------------------------------------------------------
// Diversity report

enum class DiversityUnit { question_and_answer, question_only };

struct DiversityOptions {
    DiversityUnit unit = DiversityUnit::question_and_answer;
    std::size_t workers = 1;
    // Written when a provider is passed to diversity_report.
    std::optional<std::filesystem::path> embedding_csv;
};

struct DiversityReport {
    static constexpr std::size_t kBins = 20;  // width 0.05 over [0, 1]

    std::vector<std::pair<std::string, double>> per_sample_max_rouge;
    std::array<std::size_t, kBins> histogram{};
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;  // population
    std::map<std::string, std::size_t> domain_tally;  // target domain -> count ("untagged" when absent)
    std::optional<std::filesystem::path> embedding_export_path;
    std::string unit;
};

std::size_t histogram_bin(double value);

// Max ROUGE-L F of every sample against every seed example. store (may be
// null) resolves target domains for the tally.
DiversityReport diversity_report(const SeedDataset& seed, std::span<const AugmentedSample> samples,
                                 const DataStore* store, EmbeddingProvider* provider,
                                 const DiversityOptions& opts = {});

std::string report_to_json(const DiversityReport& report);

}  // namespace rada
