#include "rada/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rada/text.hpp"

namespace rada {

namespace {

// Orders positions by (score desc, id asc) and keeps the first k.
std::vector<RetrievalHit> rank_positions(const std::vector<double>& scores, const std::vector<std::string>& ids,
                                         std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    };
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
    std::vector<RetrievalHit> hits;
    hits.reserve(take);
    for (std::size_t r = 0; r < take; ++r) hits.push_back({ids[order[r]], scores[order[r]], r + 1});
    return hits;
}

}  // namespace

std::string_view to_string(FieldSelector f) {
    switch (f) {
        case FieldSelector::context: return "context";
        case FieldSelector::question: return "question";
        case FieldSelector::context_and_question: return "context_and_question";
    }
    return "unknown";
}

FieldSelector parse_field_selector(std::string_view s) {
    if (s == "context") return FieldSelector::context;
    if (s == "question") return FieldSelector::question;
    if (s == "context_and_question") return FieldSelector::context_and_question;
    throw ConfigError("unknown field selector: " + std::string(s));
}

std::optional<std::string> field_text(const StoreEntry& e, FieldSelector f) {
    switch (f) {
        case FieldSelector::context: return e.context;
        case FieldSelector::question: return e.question;
        case FieldSelector::context_and_question:
            return e.question ? e.context + "\n" + *e.question : e.context;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

const std::vector<LexicalIndex::Posting>* LexicalIndex::postings(const std::string& term) const {
    const auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

double LexicalIndex::idf(std::size_t doc_freq) const noexcept {
    const auto n = static_cast<double>(ids_.size());
    const auto df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

LexicalIndex build_lexical_index(const DataStore& store, FieldSelector field, Bm25Params params) {
    if (store.empty()) throw SchemaError("cannot index an empty store");
    LexicalIndex index;
    index.params_ = params;
    index.field_ = field;
    std::uint64_t total = 0;
    for (const auto& entry : store.entries()) {
        const auto body = field_text(entry, field);
        if (!body) continue;
        const auto pos = static_cast<std::uint32_t>(index.ids_.size());
        const auto tokens = text::word_tokens(*body);
        std::unordered_map<std::string, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        // Sorted so posting lists do not depend on hash-map iteration order.
        std::vector<std::pair<std::string, std::uint32_t>> terms(tf.begin(), tf.end());
        std::sort(terms.begin(), terms.end());
        for (auto& [term, count] : terms) index.postings_[term].push_back({pos, count});
        index.ids_.push_back(entry.id);
        index.lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
    }
    if (index.ids_.empty()) {
        throw SchemaError("field absent: no store entry has a \"" + std::string(to_string(field)) + "\" field");
    }
    index.avg_length_ = static_cast<double>(total) / static_cast<double>(index.ids_.size());
    // All-empty documents would make the length normalization divide by zero.
    if (index.avg_length_ <= 0.0) index.avg_length_ = 1.0;
    return index;
}

LexicalResult lexical_topk(const LexicalIndex& index, std::string_view query, std::size_t k) {
    if (k == 0) throw ConfigError("k must be >= 1");
    LexicalResult result;
    const auto terms = text::word_tokens(query);
    if (terms.empty()) {
        result.empty_query = true;
        return result;
    }
    const auto& p = index.params();
    const auto& lengths = index.entry_lengths();
    std::vector<double> norm(index.size());
    for (std::size_t d = 0; d < index.size(); ++d) {
        norm[d] = p.k1 * (1.0 - p.b + p.b * static_cast<double>(lengths[d]) / index.average_length());
    }
    std::vector<double> scores(index.size(), 0.0);
    for (const auto& term : terms) {
        const auto* list = index.postings(term);
        if (list == nullptr) continue;
        const double idf = index.idf(list->size());
        for (const auto& posting : *list) {
            const double tf = posting.tf;
            scores[posting.entry] += idf * (tf * (p.k1 + 1.0)) / (tf + norm[posting.entry]);
        }
    }
    result.hits = rank_positions(scores, index.ids(), k);
    return result;
}

// ---------------------------------------------------------------------------

HashedBagOfWordsEmbedder::HashedBagOfWordsEmbedder(std::size_t dim, std::uint64_t salt)
    : dim_(dim), salt_(salt) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::string HashedBagOfWordsEmbedder::fingerprint() const {
    std::ostringstream os;
    os << "hashed-bow/fnv1a64/d=" << dim_ << "/salt=" << salt_;
    return os.str();
}

std::vector<Vector> HashedBagOfWordsEmbedder::embed(std::span<const std::string> texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    const std::uint64_t basis = 14695981039346656037ULL ^ salt_;
    for (const auto& t : texts) {
        Vector v(dim_, 0.0);
        for (const auto& tok : text::word_tokens(t)) {
            const std::uint64_t h = text::fnv1a64(tok, basis);
            v[h % dim_] += ((h >> 63) != 0U) ? -1.0 : 1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, std::vector<Vector> vectors, std::string fingerprint)
    : ids_(std::move(ids)), fingerprint_(std::move(fingerprint)) {
    if (ids_.size() != vectors.size()) throw Error("embedding index: ids and vectors differ in count");
    if (vectors.empty()) throw SchemaError("embedding index: no vectors");
    dim_ = vectors.front().size();
    if (dim_ == 0) throw Error("embedding index: zero-dimensional vectors");
    data_.reserve(dim_ * vectors.size());
    norms_.reserve(vectors.size());
    for (const auto& v : vectors) {
        if (v.size() != dim_) throw Error("embedding dimension mismatch");
        double sq = 0.0;
        for (const double x : v) {
            if (!std::isfinite(x)) throw Error("embedding contains a non-finite value");
            sq += x * x;
        }
        data_.insert(data_.end(), v.begin(), v.end());
        norms_.push_back(std::sqrt(sq));
    }
}

std::span<const double> EmbeddingIndex::vector(std::size_t pos) const {
    if (pos >= ids_.size()) throw std::out_of_range("embedding index position");
    return {data_.data() + pos * dim_, dim_};
}

EmbeddingIndex build_embedding_index(const DataStore& store, EmbeddingProvider& provider,
                                     EmbeddingBuildOptions opts) {
    if (store.empty()) throw SchemaError("cannot index an empty store");
    if (opts.batch_size == 0) opts.batch_size = 1;
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& e : store.entries()) {
        auto body = field_text(e, opts.field);
        if (!body) continue;
        ids.push_back(e.id);
        texts.push_back(std::move(*body));
    }
    if (ids.empty()) {
        throw SchemaError("field absent: no store entry has a \"" + std::string(to_string(opts.field)) + "\" field");
    }
    std::vector<Vector> vectors;
    vectors.reserve(texts.size());
    std::size_t dim = 0;
    for (std::size_t start = 0; start < texts.size(); start += opts.batch_size) {
        const std::size_t n = std::min(opts.batch_size, texts.size() - start);
        auto batch = provider.embed(std::span<const std::string>(texts).subspan(start, n));
        if (batch.size() != n) throw Error("embedding provider returned the wrong number of vectors");
        for (auto& v : batch) {
            if (dim == 0) dim = v.size();
            if (v.size() != dim) {
                throw Error("embedding dimension mismatch: expected " + std::to_string(dim) + ", got " +
                            std::to_string(v.size()));
            }
            vectors.push_back(std::move(v));
        }
    }
    return EmbeddingIndex(std::move(ids), std::move(vectors), provider.fingerprint());
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<RetrievalHit> embedding_topk(const EmbeddingIndex& index, std::span<const double> query, std::size_t k) {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (query.size() != index.dim()) {
        throw Error("query dimension " + std::to_string(query.size()) + " != index dimension " +
                    std::to_string(index.dim()));
    }
    double sq = 0.0;
    for (const double x : query) sq += x * x;
    const double qnorm = std::sqrt(sq);
    if (!(qnorm > 0.0) || !std::isfinite(qnorm)) throw Error("zero-norm or non-finite query vector");
    std::vector<double> scores(index.size(), 0.0);
    for (std::size_t pos = 0; pos < index.size(); ++pos) {
        const double en = index.norm(pos);
        if (en == 0.0) continue;
        const auto v = index.vector(pos);
        double dot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) dot += query[i] * v[i];
        scores[pos] = dot / (qnorm * en);
    }
    return rank_positions(scores, index.ids(), k);
}

// ---------------------------------------------------------------------------

Bm25Retriever::Bm25Retriever(const DataStore& store, FieldSelector field, Bm25Params params)
    : index_(build_lexical_index(store, field, params)) {}

std::vector<RetrievalHit> Bm25Retriever::retrieve(std::string_view query, std::size_t k) {
    return lexical_topk(index_, query, k).hits;
}

std::string Bm25Retriever::describe() const {
    std::ostringstream os;
    os << "bm25(k1=" << index_.params().k1 << ",b=" << index_.params().b << ",field=" << to_string(index_.field())
       << ")";
    return os.str();
}

DenseRetriever::DenseRetriever(const DataStore& store, FieldSelector field, EmbeddingProvider& provider)
    : provider_(&provider), index_(build_embedding_index(store, provider, {field, 64})) {}

std::vector<RetrievalHit> DenseRetriever::retrieve(std::string_view query, std::size_t k) {
    const std::string q(query);
    const auto vecs = provider_->embed(std::span<const std::string>(&q, 1));
    if (vecs.size() != 1) throw Error("embedding provider returned the wrong number of vectors");
    double sq = 0.0;
    for (const double x : vecs.front()) sq += x * x;
    // A query with no usable tokens has nothing to rank against.
    if (sq == 0.0) return {};
    return embedding_topk(index_, vecs.front(), k);
}

std::string DenseRetriever::describe() const { return "dense(" + index_.fingerprint() + ")"; }

RetrieverFactory bm25_factory(Bm25Params params) {
    return [params](const DataStore& store, FieldSelector field) -> std::unique_ptr<Retriever> {
        return std::make_unique<Bm25Retriever>(store, field, params);
    };
}

RetrieverFactory dense_factory(EmbeddingProvider& provider) {
    return [&provider](const DataStore& store, FieldSelector field) -> std::unique_ptr<Retriever> {
        return std::make_unique<DenseRetriever>(store, field, provider);
    };
}

}  // namespace rada
