#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "rada/retrieval.hpp"
#include "rada/rng.hpp"
#include "rada/text.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace rada;

namespace {

DataStore passages(const std::vector<std::string>& texts) {
    std::vector<StoreEntry> entries;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        entries.push_back(StoreEntry{"e" + std::to_string(i), texts[i], {}, {}, {}, {}});
    }
    return DataStore(std::move(entries));
}

std::vector<std::string> hit_ids(const std::vector<RetrievalHit>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) out.push_back(h.entry_id);
    return out;
}

std::vector<std::string> ranked_ids(const std::vector<oracle::Ranked>& r) {
    std::vector<std::string> out;
    for (const auto& x : r) out.push_back(x.id);
    return out;
}

// Small vocabulary so that ties and repeated terms are common.
std::string random_doc(Rng& rng, std::size_t max_len) {
    static const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta",
                                                   "theta", "iota", "kappa", "lambda", "mu"};
    std::string s;
    const auto len = rng.below(max_len + 1);
    for (std::uint64_t i = 0; i < len; ++i) {
        if (!s.empty()) s += ' ';
        s += vocab[rng.below(vocab.size())];
    }
    return s.empty() ? "." : s;
}

class FlakyDimProvider final : public EmbeddingProvider {
public:
    std::string fingerprint() const override { return "flaky"; }
    std::vector<Vector> embed(std::span<const std::string> texts) override {
        const std::size_t d = calls_++ == 0 ? 64 : 32;
        return std::vector<Vector>(texts.size(), Vector(d, 1.0));
    }

private:
    int calls_ = 0;
};

}  // namespace

TEST_CASE("entry lengths sum to the total token count") {
    const auto store = passages({"the cat sat", "on the mat today", "x"});
    const auto idx = build_lexical_index(store, FieldSelector::context);
    REQUIRE(idx.size() == 3);
    const auto& lens = idx.entry_lengths();
    CHECK(std::accumulate(lens.begin(), lens.end(), 0U) == 8);
    CHECK(idx.average_length() == doctest::Approx(8.0 / 3.0));
}

TEST_CASE("postings sum to entry length") {
    Rng rng(11);
    std::vector<std::string> docs;
    for (int i = 0; i < 40; ++i) docs.push_back(random_doc(rng, 12));
    const auto store = passages(docs);
    const auto idx = build_lexical_index(store, FieldSelector::context);
    std::vector<std::uint32_t> sums(idx.size(), 0);
    std::set<std::string> vocab;
    for (const auto& d : docs) {
        for (const auto& t : oracle::ascii_tokens(d)) vocab.insert(t);
    }
    CHECK(idx.vocabulary_size() == vocab.size());
    for (const auto& t : vocab) {
        const auto* p = idx.postings(t);
        REQUIRE(p != nullptr);
        for (const auto& post : *p) sums[post.entry] += post.tf;
    }
    CHECK(sums == idx.entry_lengths());
}

TEST_CASE("average length over 200 docs equals the hand-summed mean") {
    Rng rng(5);
    std::vector<std::string> docs;
    std::size_t total = 0;
    for (int i = 0; i < 200; ++i) {
        docs.push_back(random_doc(rng, 15));
        total += oracle::ascii_tokens(docs.back()).size();
    }
    const auto idx = build_lexical_index(passages(docs), FieldSelector::context);
    CHECK(idx.average_length() == doctest::Approx(static_cast<double>(total) / 200.0).epsilon(1e-12));
}

TEST_CASE("question field over a passages-only store is absent") {
    const auto store = passages({"a b", "c d"});
    CHECK_THROWS_WITH_AS(build_lexical_index(store, FieldSelector::question), doctest::Contains("field absent"),
                         SchemaError);
    CHECK_THROWS_AS(build_lexical_index(DataStore{}, FieldSelector::context), SchemaError);
}

TEST_CASE("unique term finds its entry") {
    const auto store = passages({"apple banana", "banana cherry", "cherry durian zucchini", "apple"});
    const auto idx = build_lexical_index(store, FieldSelector::context);
    const auto r = lexical_topk(idx, "zucchini", 3);
    REQUIRE_FALSE(r.hits.empty());
    CHECK(r.hits[0].entry_id == "e2");
    CHECK(r.hits[0].rank == 1);
}

TEST_CASE("k is clamped to the corpus size") {
    const auto store = passages({"a", "b", "c", "d", "e", "f", "g"});
    const auto idx = build_lexical_index(store, FieldSelector::context);
    CHECK(lexical_topk(idx, "a", 1000).hits.size() == 7);
}

TEST_CASE("empty query is flagged") {
    const auto idx = build_lexical_index(passages({"a b"}), FieldSelector::context);
    const auto r = lexical_topk(idx, " ?! ", 3);
    CHECK(r.empty_query);
    CHECK(r.hits.empty());
}

TEST_CASE("ranks are gapless and scores non-increasing") {
    Rng rng(19);
    std::vector<std::string> docs;
    for (int i = 0; i < 60; ++i) docs.push_back(random_doc(rng, 10));
    const auto idx = build_lexical_index(passages(docs), FieldSelector::context);
    const auto hits = lexical_topk(idx, "alpha beta beta mu", 20).hits;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].rank == i + 1);
        if (i > 0) CHECK(hits[i - 1].score >= hits[i].score);
    }
}

TEST_CASE("lexical top-k matches the brute-force oracle") {
    Rng rng(2024);
    for (int round = 0; round < 60; ++round) {
        const auto n = 1 + rng.below(200);
        std::vector<std::string> docs;
        std::vector<std::string> ids;
        for (std::uint64_t i = 0; i < n; ++i) {
            docs.push_back(random_doc(rng, 14));
            ids.push_back("e" + std::to_string(i));
        }
        const auto idx = build_lexical_index(passages(docs), FieldSelector::context);
        for (int q = 0; q < 5; ++q) {
            const auto query = random_doc(rng, 4) + " unseen";
            const auto k = 1 + rng.below(20);
            const auto got = lexical_topk(idx, query, k).hits;
            const auto want = oracle::bm25_rank(ids, docs, query, k);
            REQUIRE(hit_ids(got) == ranked_ids(want));
        }
    }
}

TEST_CASE("top-k is a prefix of top-(k+1) and deterministic") {
    Rng rng(77);
    std::vector<std::string> docs;
    for (int i = 0; i < 80; ++i) docs.push_back(random_doc(rng, 8));
    const auto idx = build_lexical_index(passages(docs), FieldSelector::context);
    for (std::size_t k = 1; k < 30; ++k) {
        const auto a = hit_ids(lexical_topk(idx, "gamma delta", k).hits);
        const auto b = hit_ids(lexical_topk(idx, "gamma delta", k + 1).hits);
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
    CHECK(lexical_topk(idx, "eta", 9).hits == lexical_topk(idx, "eta", 9).hits);
}

TEST_CASE("context_and_question field indexes both parts") {
    std::vector<StoreEntry> entries{{"a", "red blue", std::string("green?"), std::string("red"), {}, {}},
                                    {"b", "yellow", {}, {}, {}, {}}};
    const DataStore store(entries);
    const auto q = build_lexical_index(store, FieldSelector::question);
    CHECK(q.size() == 1);
    const auto cq = build_lexical_index(store, FieldSelector::context_and_question);
    CHECK(cq.size() == 2);
    CHECK(lexical_topk(cq, "green", 1).hits[0].entry_id == "a");
}

TEST_CASE("hashed embedder shape and determinism") {
    HashedBagOfWordsEmbedder emb(32);
    const std::vector<std::string> texts{"a b c", "d e", "a b c", "x", "y z"};
    const auto v = emb.embed(texts);
    REQUIRE(v.size() == 5);
    for (const auto& x : v) CHECK(x.size() == 32);
    CHECK(v[0] == v[2]);

    const auto store = passages(texts);
    const auto idx = build_embedding_index(store, emb, {FieldSelector::context, 2});
    CHECK(idx.size() == 5);
    CHECK(idx.dim() == 32);
    CHECK(idx.fingerprint() == emb.fingerprint());
}

TEST_CASE("dimension mismatch across batches") {
    FlakyDimProvider flaky;
    const auto store = passages({"a", "b", "c"});
    CHECK_THROWS_AS(build_embedding_index(store, flaky, {FieldSelector::context, 2}), Error);
}

TEST_CASE("embedding self-similarity and orthogonality") {
    const EmbeddingIndex idx({"a", "b", "c"}, {{1, 0, 0, 0}, {0, 2, 0, 0}, {0, 0, 3, 1}}, "fixed");
    const std::vector<double> q{0, 0, 3, 1};
    const auto hits = embedding_topk(idx, q, 3);
    CHECK(hits[0].entry_id == "c");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));

    const std::vector<double> orth{0, 0, 0, 0};
    CHECK_THROWS(embedding_topk(idx, orth, 2));
    const EmbeddingIndex idx2({"a", "b"}, {{1, 0, 0}, {0, 1, 0}}, "fixed");
    const std::vector<double> z{0, 0, 5};
    for (const auto& h : embedding_topk(idx2, z, 2)) CHECK(h.score == 0.0);
    const std::vector<double> wrong{1, 0};
    CHECK_THROWS(embedding_topk(idx2, wrong, 1));
}

TEST_CASE("embedding index rejects non-finite vectors") {
    CHECK_THROWS(EmbeddingIndex({"a"}, {{1.0, NAN}}, "x"));
    CHECK_THROWS(EmbeddingIndex({"a", "b"}, {{1.0, 0.0}, {1.0}}, "x"));
}

TEST_CASE("embedding top-k matches a full cosine scan") {
    Rng rng(99);
    for (int round = 0; round < 40; ++round) {
        const auto n = 1 + rng.below(100);
        const auto d = 1 + rng.below(8);
        std::vector<std::string> ids;
        std::vector<Vector> vecs;
        for (std::uint64_t i = 0; i < n; ++i) {
            ids.push_back("v" + std::to_string(i));
            Vector v(d);
            // small integer coordinates make exact ties and zero vectors likely
            for (auto& x : v) x = static_cast<double>(static_cast<int>(rng.below(5)) - 2);
            vecs.push_back(v);
        }
        const EmbeddingIndex idx(ids, vecs, "rand");
        Vector q(d, 0.0);
        while (std::all_of(q.begin(), q.end(), [](double x) { return x == 0.0; })) {
            for (auto& x : q) x = static_cast<double>(static_cast<int>(rng.below(5)) - 2);
        }
        const auto k = 1 + rng.below(20);
        REQUIRE(hit_ids(embedding_topk(idx, q, k)) == ranked_ids(oracle::cosine_rank(ids, vecs, q, k)));
    }
}

TEST_CASE("retriever factories") {
    const auto store = passages({"kernel cache thread", "virus protein cell", "router packet"});
    auto bm25 = bm25_factory()(store, FieldSelector::context);
    CHECK(bm25->retrieve("virus", 1)[0].entry_id == "e1");
    HashedBagOfWordsEmbedder emb(64);
    auto dense = dense_factory(emb)(store, FieldSelector::context);
    CHECK(dense->retrieve("packet router", 1)[0].entry_id == "e2");
    CHECK(dense->retrieve("?!", 2).empty());
    CHECK(dense->describe().find("dense") != std::string::npos);
}
