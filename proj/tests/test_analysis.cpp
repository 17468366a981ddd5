// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <gtest/gtest.h>

#include "support/helpers.hpp"

using namespace dpr;

namespace {

std::vector<std::string> random_words(Rng& rng, std::size_t max_len, std::size_t vocab) {
    std::vector<std::string> w(uniform_index(rng, max_len + 1));
    for (auto& x : w) x = dpr::testing::random_word(rng, vocab);
    return w;
}

std::string unwords(const std::vector<std::string>& w) { return join(w, " "); }

}  // namespace

TEST(Normalize, LowercaseStripCollapse) {
    EXPECT_EQ(normalize_question("  Who   WROTE Hamlet?!  "), "who wrote hamlet");
    EXPECT_EQ(normalize_question("what's up"), "what's up");
    EXPECT_EQ(question_words("A  b.")[1], "b");
}

TEST(Verbatim, SupersetAndDisjoint) {
    std::vector<std::string> test{"who is it?", "where now"};
    std::vector<std::string> bank{"Who is it", "where  now?", "other"};
    EXPECT_EQ(verbatim_overlap(test, bank), 1.0);
    std::vector<std::string> other{"nothing alike"};
    EXPECT_EQ(verbatim_overlap(test, other), 0.0);
    EXPECT_THROW(verbatim_overlap({}, bank), UsageError);
}

TEST(Verbatim, PlantedNineInHundred) {
    std::vector<std::string> test, bank;
    for (int i = 0; i < 100; ++i) test.push_back("test question number " + std::to_string(i) + "?");
    for (int i = 0; i < 500; ++i) bank.push_back("bank question " + std::to_string(i));
    for (int i = 0; i < 9; ++i) bank.push_back("Test question number " + std::to_string(i * 11));
    EXPECT_EQ(verbatim_overlap(test, bank), 0.09);
}

TEST(Levenshtein, Basics) {
    EXPECT_EQ(word_levenshtein("who wrote hamlet", "who wrote hamlet"), 0u);
    EXPECT_EQ(word_levenshtein("who wrote hamlet", "who wrote macbeth"), 1u);
    EXPECT_EQ(word_levenshtein("", "a b c"), 3u);
    EXPECT_EQ(word_levenshtein("a b c d", "b c d e"), 2u);
}

TEST(Levenshtein, MatchesReferenceAndIsAMetric) {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        auto a = random_words(rng, 20, 6);
        auto b = random_words(rng, 20, 6);
        auto c = random_words(rng, 20, 6);
        const auto ab = word_levenshtein(a, b);
        EXPECT_EQ(ab, dpr::testing::ref_levenshtein(a, b));
        EXPECT_EQ(ab, word_levenshtein(b, a));
        EXPECT_EQ(word_levenshtein(a, a), 0u);
        if (a != b) EXPECT_GT(ab, 0u);
        EXPECT_LE(word_levenshtein(a, c), ab + word_levenshtein(b, c));
    }
}

TEST(BankDistance, VerbatimAndExhaustive) {
    Rng rng(2);
    std::vector<std::string> bank;
    for (int i = 0; i < 50; ++i) bank.push_back(unwords(random_words(rng, 10, 30)) + " w0");
    QuestionBank qb(bank);
    EXPECT_EQ(min_distance_to_bank(bank[17], qb, 5).distance, 0u);
    for (int t = 0; t < 100; ++t) {
        std::string q = unwords(random_words(rng, 10, 30)) + " w0";
        std::size_t best = SIZE_MAX;
        for (const auto& b : bank) best = std::min(best, word_levenshtein(q, b));
        auto full = min_distance_to_bank(q, qb, bank.size());
        EXPECT_EQ(full.distance, best);
        EXPECT_FALSE(full.flagged);
        EXPECT_GE(min_distance_to_bank(q, qb, 3).distance, full.distance);
    }
}

TEST(BankDistance, PlantedNeighbourAndEmptyShortlist) {
    std::vector<std::string> bank;
    for (int i = 0; i < 300; ++i) bank.push_back("filler question about topic " + std::to_string(i));
    bank.push_back("which river flows through the old capital city");
    QuestionBank qb(bank);
    auto d = min_distance_to_bank("which river runs through the old capital town", qb, 100);
    EXPECT_EQ(d.distance, 2u);
    auto none = min_distance_to_bank("zzz yyy xxx", qb, 100);
    EXPECT_TRUE(none.flagged);
    EXPECT_EQ(none.distance, 3u);
    EXPECT_THROW(min_distance_to_bank("a", qb, 0), UsageError);
}

TEST(Stratified, ConstructedPartitionMeans) {
    Qrels qr;
    RunFile a, b;
    std::map<QueryId, double> dist;
    std::array<std::array<double, 2>, 2> sum{};
    std::array<std::array<std::size_t, 2>, 2> cnt{};
    Rng rng(3);
    for (QueryId q = 0; q < 400; ++q) {
        qr.relevant[q] = {1000 + q};
        const int ra = static_cast<int>(uniform_index(rng, 2));
        const int rb = static_cast<int>(uniform_index(rng, 2));
        auto hits = [&](int miss) {
            std::vector<ScoredPassage> h;
            for (PassageId i = 0; i < 30; ++i) h.push_back({i, 1.0});
            if (!miss) h[uniform_index(rng, 20)].id = 1000 + q;  // within top 20
            else h[20 + uniform_index(rng, 10)].id = 1000 + q;   // beyond top 20
            return h;
        };
        a.add(q, hits(ra));
        b.add(q, hits(rb));
        dist[q] = static_cast<double>(uniform_index(rng, 8));
        sum[ra][rb] += dist[q];
        ++cnt[ra][rb];
    }
    auto rep = stratified_comparison(a, b, qr, 20, dist);
    EXPECT_EQ(rep.total(), 400u);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            EXPECT_EQ(rep.count[i][j], cnt[i][j]);
            ASSERT_TRUE(rep.mean_distance[i][j].has_value());
            EXPECT_EQ(*rep.mean_distance[i][j], sum[i][j] / static_cast<double>(cnt[i][j]));
        }
    }
    auto self = stratified_comparison(a, a, qr, 20, dist);
    EXPECT_FALSE(self.mean_distance[0][1].has_value());
    EXPECT_FALSE(self.mean_distance[1][0].has_value());
    auto kv = format_overlap_kv(self);
    EXPECT_NE(kv.find("a_hit_b_miss_mean=absent"), std::string::npos);
    EXPECT_NE(format_overlap_table(rep, "A", "B").find("R@20 hit"), std::string::npos);
}

TEST(Stratified, CoverageMismatchAndPerfectRuns) {
    Qrels qr;
    qr.relevant[1] = {5};
    qr.relevant[2] = {6};
    RunFile a, b;
    a.add(1, std::vector<ScoredPassage>{{5, 1.0}});
    a.add(2, std::vector<ScoredPassage>{{6, 1.0}});
    b.add(1, std::vector<ScoredPassage>{{5, 1.0}});
    std::map<QueryId, double> d{{1, 1.0}, {2, 3.0}};
    EXPECT_THROW(stratified_comparison(a, b, qr, 20, d), DataError);
    auto rep = stratified_comparison(a, a, qr, 20, d);
    EXPECT_EQ(rep.count[0][0], 2u);
    EXPECT_EQ(*rep.mean_distance[0][0], 2.0);
    EXPECT_FALSE(rep.mean_distance[1][1].has_value());
}
