// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Overlap between test questions and a pre-training question bank: verbatim
// matches, minimum word-level edit distance over a BM25 shortlist, and the 2x2
// comparison of two retrievers stratified by hit@k.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpr/bm25.hpp"
#include "dpr/error.hpp"
#include "dpr/eval.hpp"
#include "dpr/text.hpp"

namespace dpr {

/// Lowercase, drop trailing punctuation, collapse whitespace.
inline std::string normalize_question(std::string_view text) {
    std::string low = lowercase(text);
    std::string_view s = trim(low);
    while (!s.empty() && (detail::is_ascii_punct(s.back()) || detail::is_ascii_space(s.back()))) s.remove_suffix(1);
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (detail::is_ascii_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

inline std::vector<std::string> question_words(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream is(normalize_question(text));
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

/// Fraction of test questions whose normalized text equals some bank question.
inline double verbatim_overlap(std::span<const std::string> test, std::span<const std::string> bank) {
    if (test.empty() || bank.empty()) throw UsageError("verbatim_overlap: inputs must be non-empty");
    std::unordered_set<std::string> norm;
    norm.reserve(bank.size());
    for (const auto& b : bank) norm.insert(normalize_question(b));
    std::size_t hits = 0;
    for (const auto& t : test) hits += norm.contains(normalize_question(t)) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

/// Unit-cost edit distance over word sequences (two-row dynamic program).
inline std::size_t word_levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::size_t word_levenshtein(std::string_view a, std::string_view b) {
    return word_levenshtein(question_words(a), question_words(b));
}

/// The bank indexed for shortlisting; passage ids are bank positions.
class QuestionBank {
  public:
    explicit QuestionBank(std::vector<std::string> questions) : questions_(std::move(questions)) {
        std::vector<Passage> docs;
        docs.reserve(questions_.size());
        for (std::size_t i = 0; i < questions_.size(); ++i) docs.push_back({i, std::nullopt, questions_[i]});
        index_ = InvertedIndex::build(docs);
    }

    [[nodiscard]] std::span<const std::string> questions() const { return questions_; }
    [[nodiscard]] const InvertedIndex& index() const { return index_; }

  private:
    std::vector<std::string> questions_;
    InvertedIndex index_;
};

struct BankDistance {
    std::size_t distance = 0;
    bool flagged = false;  // BM25 found no candidate; distance is the all-insertions bound
};

/// Minimum word edit distance from `query` to the BM25 top-`shortlist` bank questions.
inline BankDistance min_distance_to_bank(std::string_view query, const QuestionBank& bank, std::size_t shortlist) {
    if (shortlist < 1) throw UsageError("min_distance_to_bank: shortlist must be >= 1");
    auto qw = question_words(query);
    auto hits = bank.index().topk(query, shortlist);
    if (hits.empty()) return {qw.size(), true};
    std::size_t best = SIZE_MAX;
    for (const auto& h : hits) {
        best = std::min(best, word_levenshtein(qw, question_words(bank.questions()[h.id])));
        if (best == 0) break;
    }
    return {best, false};
}

/// 2x2 table: row = hit@k of model A, column = hit@k of model B; index 0 is a hit.
struct OverlapReport {
    std::array<std::array<std::optional<double>, 2>, 2> mean_distance{};
    std::array<std::array<std::size_t, 2>, 2> count{};
    std::size_t k = 20;

    [[nodiscard]] std::size_t total() const { return count[0][0] + count[0][1] + count[1][0] + count[1][1]; }
};

inline OverlapReport stratified_comparison(const RunFile& run_a, const RunFile& run_b, const Qrels& qrels, std::size_t k,
                                           const std::map<QueryId, double>& distances) {
    if (run_a.queries.size() != run_b.queries.size()) throw DataError("stratified_comparison: runs cover different queries");
    for (const auto& [q, e] : run_a.queries) {
        if (!run_b.queries.contains(q)) throw DataError("stratified_comparison: runs cover different queries");
    }
    OverlapReport rep;
    rep.k = k;
    std::array<std::array<double, 2>, 2> sum{};
    for (const auto& [q, e] : run_a.queries) {
        auto rel = qrels.relevant.find(q);
        if (rel == qrels.relevant.end()) throw DataError("query " + std::to_string(q) + " missing from qrels");
        auto d = distances.find(q);
        if (d == distances.end()) throw DataError("query " + std::to_string(q) + " has no distance");
        const int row = recall_at_k(run_a.ranked_ids(q), rel->second, k) ? 0 : 1;
        const int col = recall_at_k(run_b.ranked_ids(q), rel->second, k) ? 0 : 1;
        sum[row][col] += d->second;
        ++rep.count[row][col];
    }
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            if (rep.count[r][c] > 0) rep.mean_distance[r][c] = sum[r][c] / static_cast<double>(rep.count[r][c]);
        }
    }
    return rep;
}

/// Text table in the layout rows = model A, columns = model B.
inline std::string format_overlap_table(const OverlapReport& r, std::string_view name_a, std::string_view name_b) {
    std::ostringstream os;
    char buf[128];
    auto cell = [&](int i, int j) {
        if (!r.mean_distance[i][j]) return std::string("-");
        std::snprintf(buf, sizeof buf, "%.2f (n=%zu)", *r.mean_distance[i][j], r.count[i][j]);
        return std::string(buf);
    };
    std::snprintf(buf, sizeof buf, "%-20s", (std::string(name_a) + " \\ " + std::string(name_b)).c_str());
    os << buf;
    std::snprintf(buf, sizeof buf, "%18s%18s\n", ("R@" + std::to_string(r.k) + " hit").c_str(),
                  ("R@" + std::to_string(r.k) + " miss").c_str());
    os << buf;
    for (int i = 0; i < 2; ++i) {
        std::string label = "R@" + std::to_string(r.k) + (i == 0 ? " hit" : " miss");
        auto c0 = cell(i, 0);
        auto c1 = cell(i, 1);
        std::snprintf(buf, sizeof buf, "%-20s%18s%18s\n", label.c_str(), c0.c_str(), c1.c_str());
        os << buf;
    }
    return os.str();
}

inline std::string format_overlap_kv(const OverlapReport& r) {
    std::ostringstream os;
    const char* tag[2] = {"hit", "miss"};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            os << "a_" << tag[i] << "_b_" << tag[j] << "_count=" << r.count[i][j] << '\n';
            os << "a_" << tag[i] << "_b_" << tag[j] << "_mean=";
            if (r.mean_distance[i][j]) {
                os << format_score(*r.mean_distance[i][j]);
            } else {
                os << "absent";
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace dpr
