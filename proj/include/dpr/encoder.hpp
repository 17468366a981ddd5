// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Bi-encoder: hashed embedding bag with mean pooling, optionally followed by a
// square projection and layer normalization. Query and passage towers are either
// shared (one set of weights) or separate. Similarity is the plain dot product and
// training minimizes the softmax negative log-likelihood of the positive passage
// among all positives and hard negatives of the batch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpr/error.hpp"
#include "dpr/random.hpp"
#include "dpr/tensor.hpp"
#include "dpr/text.hpp"
#include "dpr/types.hpp"

namespace dpr {

enum class Head : std::uint8_t { none = 0, projection_layernorm = 1 };

inline constexpr double kLayerNormEps = 1e-5;

struct EncoderConfig {
    std::size_t dim = 64;
    std::size_t buckets = kTokenBuckets;
    bool shared = true;
    Head head = Head::none;
    std::size_t max_len_query = 256;
    std::size_t max_len_passage = 256;

    void validate() const {
        if (dim < 2) throw UsageError("encoder dim must be >= 2");
        if (buckets < dim) throw UsageError("encoder buckets must be >= dim");
        if (max_len_query < 1 || max_len_passage < 1) throw UsageError("max_len must be >= 1");
    }

    [[nodiscard]] std::size_t max_len(Side side) const {
        return side == Side::query ? max_len_query : max_len_passage;
    }

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Weights of one tower.
struct Tower {
    std::vector<double> embedding;  // buckets x dim
    std::vector<double> proj_w;     // dim x dim, out x in; empty without head
    std::vector<double> proj_b;
    std::vector<double> ln_gain;
    std::vector<double> ln_bias;

    friend bool operator==(const Tower&, const Tower&) = default;
};

/// All trainable weights. With a shared config there is one tower and both
/// sides resolve to it.
struct EncoderParams {
    EncoderConfig config;
    std::vector<Tower> towers;

    [[nodiscard]] std::size_t tower_index(Side side) const {
        return (config.shared || side == Side::query) ? 0 : 1;
    }
    Tower& tower(Side side) { return towers[tower_index(side)]; }
    [[nodiscard]] const Tower& tower(Side side) const { return towers[tower_index(side)]; }

    [[nodiscard]] std::span<double> embedding_row(Side side, std::size_t row) {
        return {tower(side).embedding.data() + row * config.dim, config.dim};
    }
    [[nodiscard]] std::span<const double> embedding_row(Side side, std::size_t row) const {
        return {tower(side).embedding.data() + row * config.dim, config.dim};
    }

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

inline std::size_t bucket_row(const EncoderConfig& cfg, std::uint32_t token) { return token % cfg.buckets; }

/// Embedding rows ~ U(-1/sqrt(d), 1/sqrt(d)); projection = identity + U(-0.01, 0.01);
/// layer norm gain 1, bias 0.
inline EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    EncoderParams p;
    p.config = config;
    const std::size_t d = config.dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(seed);
    p.towers.resize(config.shared ? 1 : 2);
    for (auto& t : p.towers) {
        t.embedding.resize(config.buckets * d);
        for (auto& w : t.embedding) w = (2.0 * uniform01(rng) - 1.0) * bound;
        if (config.head == Head::projection_layernorm) {
            t.proj_w.resize(d * d);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    t.proj_w[i * d + j] = (i == j ? 1.0 : 0.0) + (2.0 * uniform01(rng) - 1.0) * 0.01;
                }
            }
            t.proj_b.assign(d, 0.0);
            t.ln_gain.assign(d, 1.0);
            t.ln_bias.assign(d, 0.0);
        }
    }
    return p;
}

/// Activations kept for the backward pass of one encode() call.
struct EncodeCache {
    std::vector<TokenSeq> seqs;
    Side side = Side::query;
    Matrix pooled;   // mean of embedding rows
    Matrix normed;   // layer-normalized projection (head only)
    std::vector<double> inv_std;
    Matrix out;
};

inline EncodeCache encode_cached(const EncoderParams& params, std::span<const TokenSeq> batch, Side side) {
    const auto& cfg = params.config;
    const std::size_t d = cfg.dim;
    const Tower& tw = params.tower(side);
    EncodeCache c;
    c.seqs.assign(batch.begin(), batch.end());
    c.side = side;
    c.pooled = Matrix(batch.size(), d);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& seq = batch[i];
        if (seq.empty()) throw EmptyTextError("encode: empty token sequence");
        auto x = c.pooled.row(i);
        for (auto tok : seq.ids) {
            const double* e = tw.embedding.data() + bucket_row(cfg, tok) * d;
            for (std::size_t k = 0; k < d; ++k) x[k] += e[k];
        }
        const auto n = static_cast<double>(seq.size());
        for (auto& v : x) v /= n;
    }
    if (cfg.head == Head::none) {
        c.out = c.pooled;
        return c;
    }
    c.normed = Matrix(batch.size(), d);
    c.out = Matrix(batch.size(), d);
    c.inv_std.resize(batch.size());
    std::vector<double> z(d);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto x = c.pooled.row(i);
        for (std::size_t k = 0; k < d; ++k) {
            z[k] = tw.proj_b[k] + dot({tw.proj_w.data() + k * d, d}, x);
        }
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        c.inv_std[i] = inv;
        auto zh = c.normed.row(i);
        auto y = c.out.row(i);
        for (std::size_t k = 0; k < d; ++k) {
            zh[k] = (z[k] - mean) * inv;
            y[k] = tw.ln_gain[k] * zh[k] + tw.ln_bias[k];
        }
    }
    return c;
}

/// Embeds a batch of token sequences with the tower of `side`. Returns [B x d].
inline Matrix encode(const EncoderParams& params, std::span<const TokenSeq> batch, Side side) {
    return encode_cached(params, batch, side).out;
}

inline Matrix encode_texts(const EncoderParams& params, std::span<const std::string> texts, Side side) {
    std::vector<TokenSeq> seqs;
    seqs.reserve(texts.size());
    for (const auto& t : texts) seqs.push_back(tokenize(t, params.config.max_len(side), side));
    return encode(params, seqs, side);
}

/// Gradient of one tower. Embedding rows are sparse; rows absent from `rows`
/// have zero gradient. Head gradients are dense.
struct TowerGrad {
    std::size_t dim = 0;
    std::vector<std::uint32_t> rows;
    std::vector<double> row_grad;
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<double> proj_w;
    std::vector<double> proj_b;
    std::vector<double> ln_gain;
    std::vector<double> ln_bias;

    std::span<double> row(std::uint32_t r) {
        auto [it, fresh] = slot.try_emplace(r, rows.size());
        if (fresh) {
            rows.push_back(r);
            row_grad.resize(row_grad.size() + dim, 0.0);
        }
        return {row_grad.data() + it->second * dim, dim};
    }

    /// Empty span when the row was not touched.
    [[nodiscard]] std::span<const double> find(std::uint32_t r) const {
        auto it = slot.find(r);
        if (it == slot.end()) return {};
        return {row_grad.data() + it->second * dim, dim};
    }
};

struct Gradients {
    std::vector<TowerGrad> towers;
};

inline Gradients zero_gradients(const EncoderParams& params) {
    Gradients g;
    g.towers.resize(params.towers.size());
    const std::size_t d = params.config.dim;
    for (auto& t : g.towers) {
        t.dim = d;
        if (params.config.head == Head::projection_layernorm) {
            t.proj_w.assign(d * d, 0.0);
            t.proj_b.assign(d, 0.0);
            t.ln_gain.assign(d, 0.0);
            t.ln_bias.assign(d, 0.0);
        }
    }
    return g;
}

/// Backpropagates dL/d(out) for rows [first, last) of a cached encode into `grads`.
inline void encode_backward(const EncoderParams& params, const EncodeCache& cache, const Matrix& d_out,
                            Gradients& grads, std::size_t first, std::size_t last) {
    const auto& cfg = params.config;
    const std::size_t d = cfg.dim;
    const std::size_t ti = params.tower_index(cache.side);
    const Tower& tw = params.towers[ti];
    TowerGrad& g = grads.towers[ti];
    std::vector<double> dx(d);
    std::vector<double> gz(d);
    std::vector<double> dz(d);
    for (std::size_t i = first; i < last; ++i) {
        auto dy = d_out.row(i);
        if (cfg.head == Head::none) {
            std::copy(dy.begin(), dy.end(), dx.begin());
        } else {
            auto zh = cache.normed.row(i);
            auto x = cache.pooled.row(i);
            double mean_g = 0.0;
            double mean_gz = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                g.ln_gain[k] += dy[k] * zh[k];
                g.ln_bias[k] += dy[k];
                gz[k] = dy[k] * tw.ln_gain[k];
                mean_g += gz[k];
                mean_gz += gz[k] * zh[k];
            }
            mean_g /= static_cast<double>(d);
            mean_gz /= static_cast<double>(d);
            const double inv = cache.inv_std[i];
            for (std::size_t k = 0; k < d; ++k) dz[k] = inv * (gz[k] - mean_g - zh[k] * mean_gz);
            std::fill(dx.begin(), dx.end(), 0.0);
            for (std::size_t k = 0; k < d; ++k) {
                g.proj_b[k] += dz[k];
                double* gw = g.proj_w.data() + k * d;
                const double* w = tw.proj_w.data() + k * d;
                for (std::size_t l = 0; l < d; ++l) {
                    gw[l] += dz[k] * x[l];
                    dx[l] += w[l] * dz[k];
                }
            }
        }
        const auto& seq = cache.seqs[i];
        const auto n = static_cast<double>(seq.size());
        for (auto tok : seq.ids) {
            auto r = g.row(static_cast<std::uint32_t>(bucket_row(cfg, tok)));
            for (std::size_t k = 0; k < d; ++k) r[k] += dx[k] / n;
        }
    }
}

/// Tokenized batch. Candidate columns are all positives (in query order) followed
/// by every query's hard negatives (in query order); every query scores every
/// candidate. Ids, when given, mask columns that repeat a query's own positive.
struct TrainBatch {
    std::vector<TokenSeq> queries;
    std::vector<TokenSeq> positives;
    std::vector<std::vector<TokenSeq>> hard_negatives;
    std::vector<PassageId> positive_ids;
    std::vector<std::vector<PassageId>> hard_negative_ids;

    [[nodiscard]] std::size_t size() const { return queries.size(); }

    [[nodiscard]] std::size_t num_hard_negatives() const {
        std::size_t n = 0;
        for (const auto& h : hard_negatives) n += h.size();
        return n;
    }

    [[nodiscard]] std::vector<TokenSeq> candidates() const {
        std::vector<TokenSeq> c(positives);
        for (const auto& h : hard_negatives) c.insert(c.end(), h.begin(), h.end());
        return c;
    }

    [[nodiscard]] std::vector<PassageId> candidate_ids() const {
        if (positive_ids.empty()) return {};
        std::vector<PassageId> c(positive_ids);
        for (const auto& h : hard_negative_ids) c.insert(c.end(), h.begin(), h.end());
        return c;
    }

    void validate() const {
        if (queries.empty()) throw UsageError("batch must contain at least one query");
        if (positives.size() != queries.size()) throw UsageError("one positive per query required");
        if (!hard_negatives.empty() && hard_negatives.size() != queries.size()) {
            throw UsageError("hard negative lists must align with queries");
        }
        if (!positive_ids.empty()) {
            if (positive_ids.size() != queries.size() || hard_negative_ids.size() != hard_negatives.size()) {
                throw UsageError("candidate ids must align with candidates");
            }
            for (std::size_t i = 0; i < hard_negatives.size(); ++i) {
                if (hard_negative_ids[i].size() != hard_negatives[i].size()) {
                    throw UsageError("candidate ids must align with candidates");
                }
            }
        }
    }
};

/// Scores and per-score gradient of the softmax NLL for a block of queries.
struct ContrastiveBlock {
    double loss_sum = 0.0;  // sum over the block's queries of -log p(positive)
    Matrix scores;          // [queries x candidates]
    Matrix d_scores;        // d(loss_sum * scale)/d(scores)
};

/// `positive_col[i]` is the candidate column holding query i's positive.
inline ContrastiveBlock contrastive_block(const Matrix& q, const Matrix& cand, std::span<const std::size_t> positive_col,
                                          std::span<const PassageId> cand_ids, double scale) {
    ContrastiveBlock out;
    out.scores = Matrix(q.rows, cand.rows);
    out.d_scores = Matrix(q.rows, cand.rows);
    std::vector<char> masked(cand.rows);
    for (std::size_t i = 0; i < q.rows; ++i) {
        const std::size_t pos = positive_col[i];
        for (std::size_t j = 0; j < cand.rows; ++j) {
            double s = dot(q.row(i), cand.row(j));
            if (!std::isfinite(s)) {
                throw NumericError("non-finite score at query " + std::to_string(i) + ", candidate " + std::to_string(j));
            }
            out.scores(i, j) = s;
            masked[j] = !cand_ids.empty() && j != pos && cand_ids[j] == cand_ids[pos];
        }
        double m = out.scores(i, pos);
        for (std::size_t j = 0; j < cand.rows; ++j) {
            if (!masked[j]) m = std::max(m, out.scores(i, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < cand.rows; ++j) {
            if (!masked[j]) z += std::exp(out.scores(i, j) - m);
        }
        const double lse = m + std::log(z);
        out.loss_sum += lse - out.scores(i, pos);
        for (std::size_t j = 0; j < cand.rows; ++j) {
            double p = masked[j] ? 0.0 : std::exp(out.scores(i, j) - lse);
            out.d_scores(i, j) = scale * (p - (j == pos ? 1.0 : 0.0));
        }
    }
    return out;
}

/// Forward state of one batch, consumed by backward().
struct ForwardState {
    double loss = 0.0;  // mean over queries
    Matrix scores;      // [B x (B + total hard negatives)]
    EncodeCache query_cache;
    EncodeCache cand_cache;
    Matrix d_scores;
};

inline ForwardState forward_loss(const EncoderParams& params, const TrainBatch& batch) {
    batch.validate();
    ForwardState st;
    st.query_cache = encode_cached(params, batch.queries, Side::query);
    st.cand_cache = encode_cached(params, batch.candidates(), Side::passage);
    const std::size_t b = batch.size();
    std::vector<std::size_t> pos(b);
    for (std::size_t i = 0; i < b; ++i) pos[i] = i;
    auto ids = batch.candidate_ids();
    auto blk = contrastive_block(st.query_cache.out, st.cand_cache.out, pos, ids, 1.0 / static_cast<double>(b));
    st.loss = blk.loss_sum / static_cast<double>(b);
    if (!std::isfinite(st.loss)) throw NumericError("non-finite loss");
    st.scores = std::move(blk.scores);
    st.d_scores = std::move(blk.d_scores);
    return st;
}

/// Analytic gradient of the mean NLL of forward_loss().
inline Gradients backward(const EncoderParams& params, const ForwardState& st) {
    const auto& q = st.query_cache.out;
    const auto& c = st.cand_cache.out;
    Matrix dq(q.rows, q.cols);
    Matrix dc(c.rows, c.cols);
    for (std::size_t i = 0; i < q.rows; ++i) {
        for (std::size_t j = 0; j < c.rows; ++j) {
            const double g = st.d_scores(i, j);
            if (g == 0.0) continue;
            axpy(g, c.row(j), dq.row(i));
            axpy(g, q.row(i), dc.row(j));
        }
    }
    Gradients grads = zero_gradients(params);
    encode_backward(params, st.query_cache, dq, grads, 0, q.rows);
    encode_backward(params, st.cand_cache, dc, grads, 0, c.rows);
    return grads;
}

}  // namespace dpr
