// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dpr/error.hpp"
#include "dpr/text.hpp"
#include "dpr/types.hpp"

namespace dpr {

/// Okapi BM25 with the Lucene/anserini idf, ln(1 + (N - df + 0.5) / (df + 0.5)),
/// which stays positive for every df. Defaults follow anserini (k1 = 0.9, b = 0.4).
struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
    std::unordered_set<std::string> stopwords;
};

struct ScoredPassage {
    PassageId id = 0;
    double score = 0.0;

    friend bool operator==(const ScoredPassage&, const ScoredPassage&) = default;
};

/// Higher score first, then ascending passage id.
inline bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

class InvertedIndex {
  public:
    struct Posting {
        std::uint32_t doc = 0;  // internal index; internal order is ascending passage id
        std::uint32_t tf = 0;
    };

    InvertedIndex() = default;

    /// Indexes title + text of every passage. Ids must be unique.
    static InvertedIndex build(std::span<const Passage> passages, Bm25Params params = {}) {
        InvertedIndex ix;
        ix.params_ = std::move(params);
        std::vector<std::size_t> order(passages.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return passages[a].id < passages[b].id; });
        ix.doc_ids_.reserve(passages.size());
        ix.doc_len_.reserve(passages.size());
        double total_len = 0.0;
        std::unordered_map<std::uint32_t, std::uint32_t> tf;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Passage& p = passages[order[k]];
            if (k > 0 && p.id == ix.doc_ids_.back()) {
                throw DataError("duplicate passage id " + std::to_string(p.id));
            }
            const auto doc = static_cast<std::uint32_t>(k);
            ix.doc_ids_.push_back(p.id);
            ix.doc_index_.emplace(p.id, doc);
            tf.clear();
            std::vector<std::uint32_t> first_seen;
            std::uint32_t len = 0;
            for (auto& w : ix.terms(passage_text(p))) {
                auto [it, fresh] = ix.term_ids_.try_emplace(std::move(w), static_cast<std::uint32_t>(ix.postings_.size()));
                if (fresh) ix.postings_.emplace_back();
                if (tf[it->second]++ == 0) first_seen.push_back(it->second);
                ++len;
            }
            for (auto t : first_seen) ix.postings_[t].push_back({doc, tf[t]});
            ix.doc_len_.push_back(len);
            total_len += len;
        }
        ix.avgdl_ = passages.empty() ? 0.0 : total_len / static_cast<double>(passages.size());
        return ix;
    }

    /// Normalized terms of a text, stopwords removed.
    [[nodiscard]] std::vector<std::string> terms(std::string_view text) const {
        auto w = words(text);
        if (!params_.stopwords.empty()) {
            std::erase_if(w, [&](const std::string& s) { return params_.stopwords.contains(s); });
        }
        return w;
    }

    [[nodiscard]] std::size_t num_docs() const { return doc_ids_.size(); }
    [[nodiscard]] std::size_t num_terms() const { return postings_.size(); }
    [[nodiscard]] double avgdl() const { return avgdl_; }
    [[nodiscard]] const Bm25Params& params() const { return params_; }

    [[nodiscard]] std::size_t df(const std::string& term) const {
        auto it = term_ids_.find(term);
        return it == term_ids_.end() ? 0 : postings_[it->second].size();
    }

    [[nodiscard]] std::uint32_t tf(const std::string& term, PassageId id) const {
        auto t = term_ids_.find(term);
        auto d = doc_index_.find(id);
        if (t == term_ids_.end() || d == doc_index_.end()) return 0;
        const auto& pl = postings_[t->second];
        auto it = std::lower_bound(pl.begin(), pl.end(), d->second, [](const Posting& p, std::uint32_t doc) { return p.doc < doc; });
        return (it != pl.end() && it->doc == d->second) ? it->tf : 0;
    }

    [[nodiscard]] std::uint32_t doc_length(PassageId id) const { return doc_len_.at(doc_index(id)); }

    [[nodiscard]] std::span<const Posting> postings(const std::string& term) const {
        auto it = term_ids_.find(term);
        if (it == term_ids_.end()) return {};
        return postings_[it->second];
    }

    [[nodiscard]] PassageId passage_id(std::uint32_t doc) const { return doc_ids_[doc]; }

    [[nodiscard]] double idf(std::size_t df) const {
        const auto n = static_cast<double>(num_docs());
        const auto f = static_cast<double>(df);
        return std::log(1.0 + (n - f + 0.5) / (f + 0.5));
    }

    /// Contribution of one query term occurrence with term frequency tf in a document of length len.
    [[nodiscard]] double term_weight(std::size_t df, std::uint32_t tf, std::uint32_t len) const {
        if (tf == 0) return 0.0;
        const double f = tf;
        const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(len) / avgdl_);
        return idf(df) * f * (params_.k1 + 1.0) / (f + norm);
    }

    /// Sum over query terms (repeats count) of the per-term weight. Absent terms add 0.
    [[nodiscard]] double score(std::span<const std::string> query_terms, PassageId id) const {
        const std::uint32_t len = doc_length(id);
        double s = 0.0;
        for (const auto& t : query_terms) s += term_weight(df(t), tf(t, id), len);
        return s;
    }

    /// Exact top-k over documents sharing at least one term with the query,
    /// ties broken by ascending passage id. May return fewer than k.
    [[nodiscard]] std::vector<ScoredPassage> topk(std::span<const std::string> query_terms, std::size_t k) const {
        if (k < 1) throw UsageError("bm25 topk: k must be >= 1");
        std::vector<double> acc(num_docs(), 0.0);
        std::vector<char> hit(num_docs(), 0);
        std::vector<std::uint32_t> touched;
        for (const auto& t : query_terms) {
            auto it = term_ids_.find(t);
            if (it == term_ids_.end()) continue;
            const auto& pl = postings_[it->second];
            for (const auto& p : pl) {
                acc[p.doc] += term_weight(pl.size(), p.tf, doc_len_[p.doc]);
                if (!hit[p.doc]) {
                    hit[p.doc] = 1;
                    touched.push_back(p.doc);
                }
            }
        }
        std::vector<ScoredPassage> res;
        res.reserve(touched.size());
        for (auto d : touched) res.push_back({doc_ids_[d], acc[d]});
        const std::size_t n = std::min(k, res.size());
        std::partial_sort(res.begin(), res.begin() + static_cast<std::ptrdiff_t>(n), res.end(), ranks_before);
        res.resize(n);
        return res;
    }

    [[nodiscard]] std::vector<ScoredPassage> topk(std::string_view query, std::size_t k) const {
        auto t = terms(query);
        return topk(t, k);
    }

  private:
    [[nodiscard]] std::uint32_t doc_index(PassageId id) const {
        auto it = doc_index_.find(id);
        if (it == doc_index_.end()) throw UsageError("passage " + std::to_string(id) + " not in index");
        return it->second;
    }

    Bm25Params params_;
    std::vector<PassageId> doc_ids_;
    std::unordered_map<PassageId, std::uint32_t> doc_index_;
    std::vector<std::uint32_t> doc_len_;
    double avgdl_ = 0.0;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::vector<Posting>> postings_;
};

inline InvertedIndex build_inverted_index(std::span<const Passage> passages, double k1 = 0.9, double b = 0.4) {
    Bm25Params p;
    p.k1 = k1;
    p.b = b;
    return InvertedIndex::build(passages, std::move(p));
}

/// Pairs with mined negatives plus the number of queries that produced none.
struct MiningResult {
    std::vector<TrainPair> pairs;
    std::size_t without_negatives = 0;
};

/// Attaches the top-n BM25 results for each query, excluding the gold passage.
/// Existing negatives are replaced.
template <typename Pairs>
MiningResult mine_bm25_negatives(const InvertedIndex& index, const PassageCollection& passages, const Pairs& pairs,
                                 std::size_t n) {
    MiningResult out;
    out.pairs.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        TrainPair pair = pairs.at(i);
        pair.hard_negatives.clear();
        if (n > 0) {
            for (const auto& hit : index.topk(pair.query.text, n + 1)) {
                if (hit.id == pair.positive.id) continue;
                if (pair.hard_negatives.size() == n) break;
                pair.hard_negatives.push_back(passages.at(hit.id));
            }
        }
        if (pair.hard_negatives.empty()) ++out.without_negatives;
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

}  // namespace dpr
