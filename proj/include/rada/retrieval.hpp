#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rada/corpus.hpp"
#include "rada/error.hpp"

namespace rada {

enum class FieldSelector { context, question, context_and_question };

std::string_view to_string(FieldSelector f);
FieldSelector parse_field_selector(std::string_view s);

// Text of the selected field(s); nullopt when the entry lacks them.
std::optional<std::string> field_text(const StoreEntry& e, FieldSelector f);

struct RetrievalHit {
    std::string entry_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based

    bool operator==(const RetrievalHit&) const = default;
};

// ---------------------------------------------------------------------------
// Lexical (Okapi BM25)

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class LexicalIndex {
public:
    struct Posting {
        std::uint32_t entry;
        std::uint32_t tf;
    };

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::uint32_t>& entry_lengths() const noexcept { return lengths_; }
    double average_length() const noexcept { return avg_length_; }
    const Bm25Params& params() const noexcept { return params_; }
    FieldSelector field() const noexcept { return field_; }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    const std::vector<Posting>* postings(const std::string& term) const;

    // idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5))
    double idf(std::size_t doc_freq) const noexcept;

private:
    friend LexicalIndex build_lexical_index(const DataStore&, FieldSelector, Bm25Params);

    std::vector<std::string> ids_;
    std::vector<std::uint32_t> lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_length_ = 0.0;
    Bm25Params params_;
    FieldSelector field_ = FieldSelector::context;
};

// Entries lacking the selected field are left out of the index. Throws
// SchemaError when the store is empty or no entry has the field.
LexicalIndex build_lexical_index(const DataStore& store, FieldSelector field, Bm25Params params = {});

struct LexicalResult {
    std::vector<RetrievalHit> hits;
    bool empty_query = false;  // query had no tokens; hits is empty
};

// min(k, |index|) hits by BM25 score descending, ties by ascending entry id.
LexicalResult lexical_topk(const LexicalIndex& index, std::string_view query, std::size_t k);

// ---------------------------------------------------------------------------
// Embeddings

using Vector = std::vector<double>;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    // Identifies the model producing the vectors (name, dimension, version).
    virtual std::string fingerprint() const = 0;
    // One vector per text, in order.
    virtual std::vector<Vector> embed(std::span<const std::string> texts) = 0;
};

// Feature-hashed bag of words over word_tokens(): each token adds +1 or -1
// to one of `dim` buckets. Deterministic and offline.
class HashedBagOfWordsEmbedder final : public EmbeddingProvider {
public:
    explicit HashedBagOfWordsEmbedder(std::size_t dim = 256, std::uint64_t salt = 0);
    std::string fingerprint() const override;
    std::vector<Vector> embed(std::span<const std::string> texts) override;
    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t salt_;
};

class EmbeddingIndex {
public:
    EmbeddingIndex(std::vector<std::string> ids, std::vector<Vector> vectors, std::string fingerprint);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& fingerprint() const noexcept { return fingerprint_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const double> vector(std::size_t pos) const;
    double norm(std::size_t pos) const { return norms_.at(pos); }

private:
    std::vector<std::string> ids_;
    std::vector<double> data_;  // row-major size() x dim()
    std::vector<double> norms_;
    std::size_t dim_ = 0;
    std::string fingerprint_;
};

struct EmbeddingBuildOptions {
    FieldSelector field = FieldSelector::context;
    std::size_t batch_size = 64;
};

// Throws SchemaError when the store is empty and Error on a dimension
// mismatch or non-finite vector.
EmbeddingIndex build_embedding_index(const DataStore& store, EmbeddingProvider& provider,
                                     EmbeddingBuildOptions opts = {});

// Top-k by cosine similarity, ties by ascending entry id. Entries with a zero
// vector score 0. Throws on dimension mismatch or a zero-norm query.
std::vector<RetrievalHit> embedding_topk(const EmbeddingIndex& index, std::span<const double> query,
                                         std::size_t k);

double cosine(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Text-query retrievers used by the augmentation pipeline.

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) = 0;
    virtual std::string describe() const = 0;
};

class Bm25Retriever final : public Retriever {
public:
    Bm25Retriever(const DataStore& store, FieldSelector field, Bm25Params params = {});
    std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) override;
    std::string describe() const override;
    const LexicalIndex& index() const noexcept { return index_; }

private:
    LexicalIndex index_;
};

class DenseRetriever final : public Retriever {
public:
    // provider must outlive the retriever.
    DenseRetriever(const DataStore& store, FieldSelector field, EmbeddingProvider& provider);
    std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) override;
    std::string describe() const override;
    const EmbeddingIndex& index() const noexcept { return index_; }

private:
    EmbeddingProvider* provider_;
    EmbeddingIndex index_;
};

using RetrieverFactory = std::function<std::unique_ptr<Retriever>(const DataStore&, FieldSelector)>;

RetrieverFactory bm25_factory(Bm25Params params = {});
RetrieverFactory dense_factory(EmbeddingProvider& provider);

}  // namespace rada
