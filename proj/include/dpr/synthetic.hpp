// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Synthetic corpora for desk-scale experiments.
//
// Passages mix topic words with a Zipfian background vocabulary. Two query
// families are available: word-dropout views of a passage (lexical matching)
// and "questions" whose content words are mostly rewritten through a fixed
// paraphrase lexicon, which a retriever can only match after learning it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dpr/eval.hpp"
#include "dpr/pretrain_tasks.hpp"
#include "dpr/random.hpp"
#include "dpr/types.hpp"

namespace dpr {

struct SyntheticConfig {
    std::size_t vocab_size = 8000;
    std::size_t topics = 100;
    std::size_t topic_words = 120;
    std::size_t min_len = 30;
    std::size_t max_len = 50;
    double topic_mix = 0.5;          // fraction of passage words drawn from its topic
    double zipf_exponent = 1.0;
    std::size_t question_len = 6;
    double paraphrase_prob = 0.8;    // chance a question word is rewritten
    std::size_t common_words = 100;  // most frequent background words never used in questions
};

class SyntheticWorld {
  public:
    explicit SyntheticWorld(SyntheticConfig cfg = {}, std::uint64_t seed = 1) : cfg_(cfg) {
        Rng rng(seed);
        std::unordered_set<std::string> seen;
        vocab_ = make_words(cfg_.vocab_size, rng, seen);
        paraphrase_ = make_words(cfg_.vocab_size, rng, seen);
        cdf_.resize(cfg_.vocab_size);
        double acc = 0.0;
        for (std::size_t r = 0; r < cfg_.vocab_size; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r + 1), cfg_.zipf_exponent);
            cdf_[r] = acc;
        }
        for (auto& c : cdf_) c /= acc;
        topics_.resize(cfg_.topics);
        for (auto& t : topics_) {
            for (std::size_t i = 0; i < cfg_.topic_words; ++i) {
                t.push_back(cfg_.common_words + uniform_index(rng, cfg_.vocab_size - cfg_.common_words));
            }
        }
    }

    [[nodiscard]] const SyntheticConfig& config() const { return cfg_; }
    [[nodiscard]] const std::vector<std::string>& vocabulary() const { return vocab_; }

    [[nodiscard]] Passage passage(PassageId id, Rng& rng) const {
        const auto& topic = topics_[uniform_index(rng, topics_.size())];
        const std::size_t len = cfg_.min_len + uniform_index(rng, cfg_.max_len - cfg_.min_len + 1);
        std::string text;
        for (std::size_t i = 0; i < len; ++i) {
            std::size_t w = uniform01(rng) < cfg_.topic_mix ? topic[uniform_index(rng, topic.size())] : zipf(rng);
            if (i) text.push_back(' ');
            text += vocab_[w];
        }
        return {id, std::nullopt, text};
    }

    [[nodiscard]] std::vector<Passage> passages(PassageId first_id, std::size_t n, Rng& rng) const {
        std::vector<Passage> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(passage(first_id + i, rng));
        return out;
    }

    /// Each passage word is dropped independently with probability `drop`; at least one survives.
    [[nodiscard]] std::string dropout_query(const Passage& p, double drop, Rng& rng) const {
        auto w = words(p.text);
        std::vector<std::string> kept;
        for (auto& x : w) {
            if (uniform01(rng) >= drop) kept.push_back(x);
        }
        if (kept.empty()) kept.push_back(w[uniform_index(rng, w.size())]);
        return join(kept, " ");
    }

    /// Question built from uncommon passage words, each rewritten through the
    /// paraphrase lexicon with probability paraphrase_prob.
    [[nodiscard]] std::string question(const Passage& p, Rng& rng) const {
        auto w = words(p.text);
        std::vector<std::size_t> content;
        for (const auto& x : w) {
            auto r = rank_of(x);
            if (r >= cfg_.common_words) content.push_back(r);
        }
        std::vector<std::string> q;
        for (std::size_t i = 0; i < cfg_.question_len && !content.empty(); ++i) {
            const std::size_t r = content[uniform_index(rng, content.size())];
            q.push_back(uniform01(rng) < cfg_.paraphrase_prob ? paraphrase_[r] : vocab_[r]);
        }
        if (q.empty()) q.push_back(w.front());
        return join(q, " ") + "?";
    }

    /// Documents of several paragraphs of several sentences each.
    [[nodiscard]] std::vector<Document> documents(std::size_t n, std::size_t paragraphs, std::size_t sentences,
                                                  Rng& rng) const {
        std::vector<Document> out;
        for (std::size_t d = 0; d < n; ++d) {
            Document doc;
            doc.id = d;
            doc.title = vocab_[zipf(rng)] + " " + vocab_[zipf(rng)];
            for (std::size_t p = 0; p < paragraphs; ++p) {
                std::vector<std::string> sents;
                for (std::size_t s = 0; s < sentences; ++s) {
                    std::string sent;
                    const std::size_t len = 5 + uniform_index(rng, 6);
                    for (std::size_t i = 0; i < len; ++i) {
                        if (i) sent.push_back(' ');
                        sent += vocab_[zipf(rng)];
                    }
                    // unique suffix keeps every sentence distinguishable
                    sent += " d" + std::to_string(d) + "p" + std::to_string(p) + "s" + std::to_string(s) + ".";
                    sents.push_back(std::move(sent));
                }
                doc.paragraphs.push_back(join(sents, " "));
            }
            out.push_back(std::move(doc));
        }
        return out;
    }

  private:
    static std::vector<std::string> make_words(std::size_t n, Rng& rng, std::unordered_set<std::string>& seen) {
        static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "ch"};
        static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
        std::vector<std::string> out;
        out.reserve(n);
        while (out.size() < n) {
            std::string w;
            const std::size_t syl = 2 + uniform_index(rng, 3);
            for (std::size_t s = 0; s < syl; ++s) {
                w += kOnsets[uniform_index(rng, std::size(kOnsets))];
                w += kVowels[uniform_index(rng, std::size(kVowels))];
            }
            if (seen.insert(w).second) out.push_back(std::move(w));
        }
        return out;
    }

    [[nodiscard]] std::size_t zipf(Rng& rng) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), uniform01(rng));
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

    [[nodiscard]] std::size_t rank_of(const std::string& w) const {
        if (rank_.empty()) {
            for (std::size_t i = 0; i < vocab_.size(); ++i) rank_.emplace(vocab_[i], i);
        }
        return rank_.at(w);
    }

    SyntheticConfig cfg_;
    std::vector<std::string> vocab_;
    std::vector<std::string> paraphrase_;
    std::vector<double> cdf_;
    std::vector<std::vector<std::size_t>> topics_;
    mutable std::unordered_map<std::string, std::size_t> rank_;
};

/// Corpus, training pairs over one subset of passages, and held-out test queries
/// over a disjoint subset.
struct RetrievalBenchmark {
    std::vector<Passage> corpus;
    std::vector<TrainPair> train_pairs;
    std::vector<Query> test_queries;
    Qrels test_qrels;
};

enum class QueryFamily { dropout, question };

inline RetrievalBenchmark make_benchmark(const SyntheticWorld& world, QueryFamily family, std::size_t num_passages,
                                         std::size_t num_train, std::size_t num_test, std::uint64_t seed,
                                         double drop = 0.3, std::size_t train_views = 1) {
    if (num_train + num_test > num_passages) throw UsageError("benchmark: more queries than passages");
    Rng rng(seed);
    RetrievalBenchmark b;
    b.corpus = world.passages(0, num_passages, rng);
    std::vector<std::size_t> order(num_passages);
    for (std::size_t i = 0; i < num_passages; ++i) order[i] = i;
    for (std::size_t i = num_passages; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    auto make_query = [&](const Passage& p) {
        return family == QueryFamily::dropout ? world.dropout_query(p, drop, rng) : world.question(p, rng);
    };
    for (std::size_t v = 0; v < train_views; ++v) {
        for (std::size_t i = 0; i < num_train; ++i) {
            const Passage& p = b.corpus[order[i]];
            b.train_pairs.push_back({{v * num_train + i, make_query(p)}, p, {}});
        }
    }
    for (std::size_t i = 0; i < num_test; ++i) {
        const Passage& p = b.corpus[order[num_train + i]];
        const QueryId qid = 1'000'000 + i;
        b.test_queries.push_back({qid, make_query(p)});
        b.test_qrels.relevant[qid].insert(p.id);
    }
    return b;
}

/// Question pairs over a fresh passage pool (ids from `first_id`), the
/// pre-training counterpart of the question benchmark.
inline std::vector<TrainPair> make_question_pairs(const SyntheticWorld& world, std::size_t num_pairs,
                                                  std::size_t per_passage, PassageId first_id, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainPair> out;
    out.reserve(num_pairs);
    PassageId next = first_id;
    while (out.size() < num_pairs) {
        Passage p = world.passage(next++, rng);
        for (std::size_t k = 0; k < per_passage && out.size() < num_pairs; ++k) {
            out.push_back({{out.size(), world.question(p, rng)}, p, {}});
        }
    }
    return out;
}

}  // namespace dpr
