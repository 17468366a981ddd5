// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Test fixtures and independent reference implementations shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "dpr/dpr.hpp"

namespace dpr::testing {

namespace fs = std::filesystem;

class TempDir {
  public:
    TempDir() {
        static std::uint64_t counter = 0;
        Rng rng(std::random_device{}());
        path_ = fs::temp_directory_path() /
                ("dpr_test_" + std::to_string(rng()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }
    [[nodiscard]] const fs::path& path() const { return path_; }

  private:
    fs::path path_;
};

inline std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string random_word(Rng& rng, std::size_t vocab) {
    return "w" + std::to_string(uniform_index(rng, vocab));
}

inline std::string random_text(Rng& rng, std::size_t min_words, std::size_t max_words, std::size_t vocab) {
    const std::size_t n = min_words + uniform_index(rng, max_words - min_words + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s.push_back(' ');
        s += random_word(rng, vocab);
    }
    return s;
}

inline TokenSeq random_seq(Rng& rng, std::size_t max_len, std::uint32_t vocab) {
    TokenSeq s;
    const std::size_t n = 1 + uniform_index(rng, max_len);
    for (std::size_t i = 0; i < n; ++i) s.ids.push_back(static_cast<std::uint32_t>(uniform_index(rng, vocab)));
    return s;
}

/// Random tokenized batch over a small bucket range so rows are shared across sequences.
inline TrainBatch random_batch(Rng& rng, std::size_t b, std::size_t h, std::uint32_t vocab, std::size_t max_len = 5) {
    TrainBatch batch;
    for (std::size_t i = 0; i < b; ++i) {
        batch.queries.push_back(random_seq(rng, max_len, vocab));
        batch.positives.push_back(random_seq(rng, max_len, vocab));
        batch.hard_negatives.emplace_back();
        for (std::size_t j = 0; j < h; ++j) batch.hard_negatives.back().push_back(random_seq(rng, max_len, vocab));
    }
    return batch;
}

/// Softmax NLL recomputed from a score matrix, candidate i is query i's positive.
inline double reference_loss(const Matrix& scores) {
    double total = 0.0;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        double m = -INFINITY;
        for (std::size_t j = 0; j < scores.cols; ++j) m = std::max(m, scores(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < scores.cols; ++j) z += std::exp(scores(i, j) - m);
        total += -(scores(i, i) - m - std::log(z));
    }
    return total / static_cast<double>(scores.rows);
}

struct GradCheck {
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t checked = 0;
};

/// Central finite differences over every touched embedding coordinate and every
/// head parameter. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck finite_difference_check(const EncoderParams& base, const TrainBatch& batch, double eps, double floor) {
    EncoderParams p = base;
    auto st = forward_loss(p, batch);
    Gradients g = backward(p, st);
    GradCheck out;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = forward_loss(p, batch).loss;
        param = saved - eps;
        const double down = forward_loss(p, batch).loss;
        param = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double diff = std::abs(analytic - numeric);
        out.max_abs = std::max(out.max_abs, diff);
        out.max_rel = std::max(out.max_rel, diff / std::max({std::abs(analytic), std::abs(numeric), floor}));
        ++out.checked;
    };
    const std::size_t d = p.config.dim;
    for (std::size_t t = 0; t < p.towers.size(); ++t) {
        auto& tw = p.towers[t];
        const auto& tg = g.towers[t];
        for (std::size_t s = 0; s < tg.rows.size(); ++s) {
            const std::uint32_t r = tg.rows[s];
            for (std::size_t k = 0; k < d; ++k) probe(tw.embedding[r * d + k], tg.row_grad[s * d + k]);
        }
        if (p.config.head == Head::projection_layernorm) {
            for (std::size_t i = 0; i < tw.proj_w.size(); ++i) probe(tw.proj_w[i], tg.proj_w[i]);
            for (std::size_t i = 0; i < d; ++i) {
                probe(tw.proj_b[i], tg.proj_b[i]);
                probe(tw.ln_gain[i], tg.ln_gain[i]);
                probe(tw.ln_bias[i], tg.ln_bias[i]);
            }
        }
    }
    return out;
}

/// Score every row in double, round to float, sort by (score desc, id asc).
inline std::vector<ScoredPassage> naive_search(std::span<const PassageId> ids, std::span<const float> matrix,
                                               std::span<const float> query, std::size_t dim, std::size_t k) {
    std::vector<ScoredPassage> all;
    for (std::size_t r = 0; r < ids.size(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < dim; ++c) s += static_cast<double>(matrix[r * dim + c]) * static_cast<double>(query[c]);
        all.push_back({ids[r], static_cast<double>(static_cast<float>(s))});
    }
    std::sort(all.begin(), all.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

// Metric references written from the definitions, without the library helpers.

inline double ref_recall(const std::vector<PassageId>& ranked, const std::set<PassageId>& rel, std::size_t k) {
    std::set<PassageId> top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size())));
    for (auto id : rel) {
        if (top.count(id)) return 1.0;
    }
    return 0.0;
}

inline double ref_mrr(const std::vector<PassageId>& ranked, const std::set<PassageId>& rel, std::size_t k) {
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
        if (rel.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

inline double ref_rprec(const std::vector<PassageId>& ranked, const std::set<PassageId>& rel) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size() && i < rel.size(); ++i) hits += rel.count(ranked[i]);
    return static_cast<double>(hits) / static_cast<double>(rel.size());
}

/// Full-matrix edit distance, kept deliberately different from the two-row version.
inline std::size_t ref_levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
        }
    }
    return dp[a.size()][b.size()];
}

}  // namespace dpr::testing
