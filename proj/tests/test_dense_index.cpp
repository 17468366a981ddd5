// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <gtest/gtest.h>

#include "support/helpers.hpp"

using namespace dpr;

namespace {

EmbeddingIndex random_index(std::size_t n, std::size_t d, std::uint64_t seed, std::vector<float>* keep = nullptr) {
    Rng rng(seed);
    std::vector<PassageId> ids(n);
    std::vector<float> m(n * d);
    for (std::size_t i = 0; i < n; ++i) ids[i] = n - i;  // descending so tie order is not insertion order
    for (auto& v : m) v = static_cast<float>(2.0 * uniform01(rng) - 1.0);
    if (keep) *keep = m;
    return EmbeddingIndex::from_memory(ids, m, d);
}

std::vector<Passage> small_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Passage> ps;
    for (std::size_t i = 0; i < n; ++i) ps.push_back({i + 100, std::nullopt, dpr::testing::random_text(rng, 3, 12, 400)});
    return ps;
}

EncoderParams params(std::size_t d = 16) {
    EncoderConfig c;
    c.dim = d;
    c.buckets = 1024;
    return init_params(c, 3);
}

}  // namespace

TEST(Search, MatchesNaiveScoreAndSort) {
    auto ix = random_index(2000, 16, 1);
    Rng rng(2);
    std::vector<float> q(5 * 16);
    for (auto& v : q) v = static_cast<float>(uniform01(rng) - 0.5);
    for (std::size_t k : {1u, 20u, 100u}) {
        auto res = ix.search(q, k);
        ASSERT_EQ(res.size(), 5u);
        for (std::size_t i = 0; i < 5; ++i) {
            auto want = dpr::testing::naive_search(ix.ids(), ix.matrix(), std::span<const float>(q).subspan(i * 16, 16), 16, k);
            ASSERT_EQ(res[i].size(), want.size());
            for (std::size_t r = 0; r < want.size(); ++r) {
                EXPECT_EQ(res[i][r].id, want[r].id);
                EXPECT_EQ(res[i][r].score, want[r].score);
            }
        }
    }
}

TEST(Search, OrthogonalQueryTiesByAscendingId) {
    std::vector<PassageId> ids{30, 10, 20};
    std::vector<float> m{1, 0, 2, 0, 3, 0};
    auto ix = EmbeddingIndex::from_memory(ids, m, 2);
    std::vector<float> q{0, 1};
    auto r = ix.search(q, 3)[0];
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].id, 10u);
    EXPECT_EQ(r[1].id, 20u);
    EXPECT_EQ(r[2].id, 30u);
    for (auto& h : r) EXPECT_EQ(h.score, 0.0);
}

TEST(Search, SelfQueryRanksFirstOnNormalizedRows) {
    Rng rng(4);
    const std::size_t n = 200, d = 8;
    std::vector<PassageId> ids(n);
    std::vector<float> m(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = i;
        double norm = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            m[i * d + k] = static_cast<float>(uniform01(rng) - 0.5);
            norm += m[i * d + k] * m[i * d + k];
        }
        for (std::size_t k = 0; k < d; ++k) m[i * d + k] = static_cast<float>(m[i * d + k] / std::sqrt(norm));
    }
    auto ix = EmbeddingIndex::from_memory(ids, m, d);
    for (std::size_t i = 0; i < n; i += 17) {
        EXPECT_EQ(ix.search(ix.row(i), 1)[0][0].id, i);
    }
}

TEST(Search, ErrorsAndShortResults) {
    auto ix = random_index(5, 4, 1);
    std::vector<float> q(4, 0.1f);
    EXPECT_EQ(ix.search(q, 50)[0].size(), 5u);
    EXPECT_THROW(ix.search(q, 0), UsageError);
    std::vector<float> bad(3, 0.1f);
    EXPECT_THROW(ix.search(bad, 1), UsageError);
    EXPECT_THROW(EmbeddingIndex::from_memory({1, 1}, std::vector<float>(8), 4), DataError);
}

TEST(Index, PersistenceRoundTrip) {
    dpr::testing::TempDir dir;
    auto ix = random_index(300, 8, 5);
    ix.save(dir.file("i.bin"));
    auto re = EmbeddingIndex::open(dir.file("i.bin"));
    std::vector<float> q(8 * 3, 0.25f);
    q[3] = -1.0f;
    auto a = ix.search(q, 10);
    auto b = re.search(q, 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t r = 0; r < a[i].size(); ++r) {
            EXPECT_EQ(a[i][r].id, b[i][r].id);
            EXPECT_EQ(a[i][r].score, b[i][r].score);
        }
    }
    EXPECT_EQ(dpr::testing::slurp(dir.file("i.bin")).size(), kIndexHeaderSize + 300 * (8 + 8 * 4));
    {
        std::ofstream out(dir.file("bad.bin"), std::ios::binary);
        out << "garbage";
    }
    EXPECT_THROW(EmbeddingIndex::open(dir.file("bad.bin")), DataError);
}

TEST(Embed, SinglePassageEqualsEncode) {
    auto p = params();
    std::vector<Passage> ps{{7, std::string("Title"), "some body text"}};
    auto ix = embed_corpus(p, ps);
    std::vector<std::string> t{passage_text(ps[0])};
    auto m = encode_texts(p, t, Side::passage);
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(ix.row(0)[k], static_cast<float>(m(0, k)));
    EXPECT_THROW(embed_corpus(p, std::vector<Passage>{}), UsageError);
}

TEST(Embed, ShardSizeInvariance) {
    dpr::testing::TempDir dir;
    auto p = params();
    auto ps = small_corpus(100, 6);
    embed_corpus(p, ps, 1, dir.file("a.bin"));
    embed_corpus(p, ps, 100, dir.file("b.bin"));
    embed_corpus(p, ps, 7, dir.file("c.bin"));
    auto a = dpr::testing::slurp(dir.file("a.bin"));
    EXPECT_EQ(a, dpr::testing::slurp(dir.file("b.bin")));
    EXPECT_EQ(a, dpr::testing::slurp(dir.file("c.bin")));
    embed_corpus(p, ps).save(dir.file("d.bin"));
    EXPECT_EQ(a, dpr::testing::slurp(dir.file("d.bin")));
}

TEST(Embed, NonFiniteEmbeddingNamesPassage) {
    auto p = params(4);
    for (auto& v : p.towers[0].embedding) v = std::numeric_limits<double>::infinity();
    std::vector<Passage> ps{{42, std::nullopt, "boom"}};
    try {
        (void)embed_corpus(p, ps);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
    }
}

TEST(DenseMining, DepthTwoGoldFirst) {
    std::vector<Passage> ps{{1, std::nullopt, "alpha"}, {2, std::nullopt, "beta"}, {3, std::nullopt, "gamma"}};
    PassageCollection coll(ps);
    auto p = params(8);
    auto ix = embed_corpus(p, ps);
    auto ranked = ix.search(encode_queries_f32(p, std::vector<Query>{{0, "alpha"}}), 3)[0];
    std::vector<TrainPair> pairs{{{0, "alpha"}, coll.at(ranked[0].id), {}}};
    auto r = mine_hard_negatives(ix, p, coll, pairs, 2, 5, 1);
    ASSERT_EQ(r.pairs[0].hard_negatives.size(), 1u);
    EXPECT_EQ(r.pairs[0].hard_negatives[0].id, ranked[1].id);
    auto none = mine_hard_negatives(ix, p, coll, pairs, 1, 5, 1);
    EXPECT_EQ(none.without_negatives, 1u);
}

TEST(DenseMining, ExcludesGoldAndClamps) {
    auto ps = small_corpus(300, 7);
    PassageCollection coll(ps);
    auto p = params();
    auto ix = embed_corpus(p, ps);
    Rng rng(8);
    std::vector<TrainPair> pairs;
    for (std::size_t i = 0; i < 500; ++i) {
        const auto& gold = ps[uniform_index(rng, ps.size())];
        pairs.push_back({{i, gold.text}, gold, {}});
    }
    auto r = mine_hard_negatives(ix, p, coll, pairs, 10, 4, 2);
    ASSERT_EQ(r.pairs.size(), 500u);
    for (const auto& pr : r.pairs) {
        EXPECT_EQ(pr.hard_negatives.size(), 4u);
        for (const auto& n : pr.hard_negatives) EXPECT_NE(n.id, pr.positive.id);
    }
    auto all = mine_hard_negatives(ix, p, coll, pairs, 5, 100, 2);
    for (const auto& pr : all.pairs) EXPECT_GE(pr.hard_negatives.size(), 4u);
    auto again = mine_hard_negatives(ix, p, coll, pairs, 10, 4, 2);
    EXPECT_EQ(again.pairs, r.pairs);
}
