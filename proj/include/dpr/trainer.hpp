// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Training loops. Multi-worker data parallelism is simulated in-process: each
// worker encodes its own slice of the global batch, candidate embeddings are
// gathered across workers in rank order, and every worker scores its local
// queries against the gathered candidate set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpr/bm25.hpp"
#include "dpr/dense_index.hpp"
#include "dpr/encoder.hpp"
#include "dpr/optimizer.hpp"
#include "dpr/random.hpp"

namespace dpr {

struct WorkerBatch {
    std::size_t rank = 0;
    TrainBatch batch;
};

namespace detail {

inline std::vector<const WorkerBatch*> rank_order(std::span<const WorkerBatch> workers) {
    if (workers.empty()) throw UsageError("gather: at least one worker required");
    std::vector<const WorkerBatch*> order;
    for (const auto& w : workers) order.push_back(&w);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->rank == order[i - 1]->rank) throw UsageError("gather: duplicate worker rank");
        if (order[i]->batch.size() != order[0]->batch.size()) throw UsageError("gather: ragged local batch sizes");
    }
    return order;
}

template <typename T>
void append(std::vector<T>& dst, const std::vector<T>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace detail

/// Concatenates worker batches in ascending rank order.
inline TrainBatch gather_negatives(std::span<const WorkerBatch> workers) {
    auto order = detail::rank_order(workers);
    TrainBatch g;
    for (const auto* w : order) {
        const auto& b = w->batch;
        b.validate();
        detail::append(g.queries, b.queries);
        detail::append(g.positives, b.positives);
        if (b.hard_negatives.empty()) {
            g.hard_negatives.resize(g.hard_negatives.size() + b.size());
        } else {
            detail::append(g.hard_negatives, b.hard_negatives);
        }
        detail::append(g.positive_ids, b.positive_ids);
        if (b.hard_negative_ids.empty() && !b.positive_ids.empty()) {
            g.hard_negative_ids.resize(g.hard_negative_ids.size() + b.size());
        } else {
            detail::append(g.hard_negative_ids, b.hard_negative_ids);
        }
    }
    if (!g.positive_ids.empty() && g.positive_ids.size() != g.queries.size()) {
        throw UsageError("gather: workers disagree on candidate ids");
    }
    return g;
}

/// Splits a global batch into `workers` contiguous slices (rank r gets slice r).
inline std::vector<WorkerBatch> split_batch(const TrainBatch& global, std::size_t workers) {
    if (workers == 0 || global.size() % workers != 0) {
        throw UsageError("batch of " + std::to_string(global.size()) + " does not split over " + std::to_string(workers) +
                         " workers");
    }
    const std::size_t local = global.size() / workers;
    std::vector<WorkerBatch> out(workers);
    for (std::size_t r = 0; r < workers; ++r) {
        auto& b = out[r].batch;
        out[r].rank = r;
        auto lo = static_cast<std::ptrdiff_t>(r * local);
        auto hi = static_cast<std::ptrdiff_t>((r + 1) * local);
        b.queries.assign(global.queries.begin() + lo, global.queries.begin() + hi);
        b.positives.assign(global.positives.begin() + lo, global.positives.begin() + hi);
        if (!global.hard_negatives.empty()) {
            b.hard_negatives.assign(global.hard_negatives.begin() + lo, global.hard_negatives.begin() + hi);
        }
        if (!global.positive_ids.empty()) {
            b.positive_ids.assign(global.positive_ids.begin() + lo, global.positive_ids.begin() + hi);
            b.hard_negative_ids.assign(global.hard_negative_ids.begin() + lo, global.hard_negative_ids.begin() + hi);
        }
    }
    return out;
}

struct StepResult {
    double loss = 0.0;
    Gradients grads;
};

/// Loss and gradient of one data-parallel step. Each worker contributes the NLL
/// sum of its local queries against the gathered candidates; the global loss is
/// the sum over workers divided by the global batch size.
inline StepResult sharded_loss_and_grad(const EncoderParams& params, std::span<const WorkerBatch> workers) {
    auto order = detail::rank_order(workers);
    const std::size_t k = order.size();
    const std::size_t local = order[0]->batch.size();
    const std::size_t global = k * local;
    const std::size_t d = params.config.dim;

    std::vector<EncodeCache> q_cache(k), p_cache(k), n_cache(k);
    std::vector<std::vector<TokenSeq>> negs(k);
    std::vector<PassageId> pos_ids, neg_ids;
    bool with_ids = !order[0]->batch.positive_ids.empty();
    for (std::size_t w = 0; w < k; ++w) {
        const auto& b = order[w]->batch;
        b.validate();
        if (b.positive_ids.empty() == with_ids) throw UsageError("gather: workers disagree on candidate ids");
        for (const auto& h : b.hard_negatives) detail::append(negs[w], h);
        q_cache[w] = encode_cached(params, b.queries, Side::query);
        p_cache[w] = encode_cached(params, b.positives, Side::passage);
        n_cache[w] = encode_cached(params, negs[w], Side::passage);
        if (with_ids) {
            detail::append(pos_ids, b.positive_ids);
            for (const auto& h : b.hard_negative_ids) detail::append(neg_ids, h);
        }
    }
    // all-gather of candidate embeddings: positives of every rank, then negatives of every rank
    std::size_t total_negs = 0;
    for (const auto& n : negs) total_negs += n.size();
    Matrix cand(global + total_negs, d);
    std::vector<std::size_t> p_off(k), n_off(k);
    std::size_t row = 0;
    for (std::size_t w = 0; w < k; ++w) {
        p_off[w] = row;
        std::copy(p_cache[w].out.data.begin(), p_cache[w].out.data.end(), cand.data.begin() + static_cast<std::ptrdiff_t>(row * d));
        row += local;
    }
    for (std::size_t w = 0; w < k; ++w) {
        n_off[w] = row;
        std::copy(n_cache[w].out.data.begin(), n_cache[w].out.data.end(), cand.data.begin() + static_cast<std::ptrdiff_t>(row * d));
        row += negs[w].size();
    }
    std::vector<PassageId> cand_ids;
    if (with_ids) {
        cand_ids = pos_ids;
        detail::append(cand_ids, neg_ids);
    }

    StepResult res;
    res.grads = zero_gradients(params);
    Matrix d_cand(cand.rows, d);
    double loss_sum = 0.0;
    for (std::size_t w = 0; w < k; ++w) {
        std::vector<std::size_t> pos(local);
        std::iota(pos.begin(), pos.end(), p_off[w]);
        auto blk = contrastive_block(q_cache[w].out, cand, pos, cand_ids, 1.0 / static_cast<double>(global));
        loss_sum += blk.loss_sum;
        Matrix dq(local, d);
        for (std::size_t i = 0; i < local; ++i) {
            for (std::size_t j = 0; j < cand.rows; ++j) {
                const double g = blk.d_scores(i, j);
                if (g == 0.0) continue;
                axpy(g, cand.row(j), dq.row(i));
                axpy(g, q_cache[w].out.row(i), d_cand.row(j));
            }
        }
        encode_backward(params, q_cache[w], dq, res.grads, 0, local);
    }
    res.loss = loss_sum / static_cast<double>(global);
    if (!std::isfinite(res.loss)) throw NumericError("non-finite loss");
    // reduce-scatter: each worker backpropagates the gradient of its own candidates
    for (std::size_t w = 0; w < k; ++w) {
        Matrix dp(local, d);
        std::copy_n(d_cand.data.begin() + static_cast<std::ptrdiff_t>(p_off[w] * d), local * d, dp.data.begin());
        encode_backward(params, p_cache[w], dp, res.grads, 0, local);
        Matrix dn(negs[w].size(), d);
        std::copy_n(d_cand.data.begin() + static_cast<std::ptrdiff_t>(n_off[w] * d), negs[w].size() * d, dn.data.begin());
        encode_backward(params, n_cache[w], dn, res.grads, 0, negs[w].size());
    }
    return res;
}

/// Tokenizes pairs into a batch, keeping at most `max_negatives` negatives per pair.
inline TrainBatch make_batch(std::span<const TrainPair> pairs, const EncoderConfig& cfg, std::size_t max_negatives) {
    TrainBatch b;
    for (const auto& p : pairs) {
        b.queries.push_back(tokenize(p.query.text, cfg.max_len_query, Side::query));
        b.positives.push_back(tokenize(passage_text(p.positive), cfg.max_len_passage, Side::passage));
        b.positive_ids.push_back(p.positive.id);
        auto& hn = b.hard_negatives.emplace_back();
        auto& hi = b.hard_negative_ids.emplace_back();
        for (std::size_t k = 0; k < p.hard_negatives.size() && k < max_negatives; ++k) {
            hn.push_back(tokenize(passage_text(p.hard_negatives[k]), cfg.max_len_passage, Side::passage));
            hi.push_back(p.hard_negatives[k].id);
        }
    }
    return b;
}

/// Reduced validation pool: gold passages, up to 50 hard negatives per query, and filler.
struct ProxyCorpus {
    std::vector<Passage> passages;
    std::vector<Query> queries;
    std::vector<PassageId> gold;

    void validate() const {
        if (gold.size() != queries.size()) throw DataError("proxy corpus: one gold passage per query required");
        std::unordered_set<PassageId> ids;
        for (const auto& p : passages) {
            if (!ids.insert(p.id).second) throw DataError("proxy corpus: duplicate passage " + std::to_string(p.id));
        }
        for (auto g : gold) {
            if (!ids.contains(g)) throw DataError("proxy corpus: gold passage " + std::to_string(g) + " missing");
        }
    }
};

inline constexpr std::size_t kProxyMaxNegatives = 50;

/// Gold passages first, then each query's negatives (deduplicated, at most 50 per
/// query), then random filler from `pool` until `cap` passages.
inline ProxyCorpus build_proxy_corpus(std::span<const Query> queries, std::span<const PassageId> gold,
                                      std::span<const std::vector<PassageId>> negatives, const PassageCollection& pool,
                                      std::size_t cap, std::uint64_t seed) {
    if (gold.size() != queries.size()) throw UsageError("proxy corpus: one gold passage per query required");
    ProxyCorpus pc;
    pc.queries.assign(queries.begin(), queries.end());
    pc.gold.assign(gold.begin(), gold.end());
    std::unordered_set<PassageId> in;
    auto add = [&](PassageId id) {
        if (in.insert(id).second) pc.passages.push_back(pool.at(id));
    };
    for (auto g : gold) add(g);
    if (pc.passages.size() > cap) throw UsageError("proxy corpus: cap smaller than the gold set");
    for (const auto& negs : negatives) {
        std::size_t taken = 0;
        std::unordered_set<PassageId> local;
        for (auto id : negs) {
            if (taken == kProxyMaxNegatives || pc.passages.size() >= cap) break;
            if (!local.insert(id).second) continue;
            add(id);
            ++taken;
        }
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < order.size() && pc.passages.size() < cap; ++i) {
        std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
        add(pool[order[i]].id);
    }
    return pc;
}

/// Mean reciprocal rank of the gold passage over the whole proxy corpus.
inline double proxy_validate(const EncoderParams& params, const ProxyCorpus& proxy) {
    proxy.validate();
    if (proxy.queries.empty()) return 0.0;
    auto index = embed_corpus(params, proxy.passages);
    auto qv = encode_queries_f32(params, proxy.queries);
    const std::size_t d = params.config.dim;
    std::unordered_map<PassageId, std::size_t> row_of;
    for (std::size_t i = 0; i < index.size(); ++i) row_of[index.ids()[i]] = i;
    double sum = 0.0;
    for (std::size_t q = 0; q < proxy.queries.size(); ++q) {
        std::span<const float> v(qv.data() + q * d, d);
        const PassageId g = proxy.gold[q];
        const float gs = EmbeddingIndex::inner_product(v, index.row(row_of.at(g)));
        std::size_t rank = 1;
        for (std::size_t i = 0; i < index.size(); ++i) {
            const float s = EmbeddingIndex::inner_product(v, index.row(i));
            if (s > gs || (s == gs && index.ids()[i] < g)) ++rank;
        }
        sum += 1.0 / static_cast<double>(rank);
    }
    return sum / static_cast<double>(proxy.queries.size());
}

struct TrainConfig {
    std::size_t batch_size = 32;      // global batch, split evenly over workers
    std::size_t hard_negatives = 1;   // per query
    double peak_lr = 5e-3;
    double warmup_frac = 0.1;
    std::uint64_t total_steps = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::uint64_t validate_every = 500;
    std::size_t patience = 5;         // validations without improvement before stopping; 0 disables

    void validate() const {
        if (batch_size < 1) throw UsageError("batch size must be >= 1");
        if (workers < 1 || batch_size % workers != 0) throw UsageError("batch size must be a multiple of the worker count");
        if (total_steps < 1) throw UsageError("total steps must be >= 1");
        if (validate_every < 1) throw UsageError("validation interval must be >= 1");
        if (!(warmup_frac >= 0.0 && warmup_frac <= 1.0)) throw UsageError("warmup fraction must lie in [0, 1]");
    }
};

/// Returns proxy MRR for the current parameters; `step` is the number of updates so far.
using Validator = std::function<double(const EncoderParams&, std::uint64_t step)>;

struct ValidationRecord {
    std::uint64_t step = 0;
    double loss = 0.0;  // mean training loss since the previous record
    std::optional<double> mrr;
};

struct TrainResult {
    EncoderParams best;  // best proxy MRR if validated, else the final parameters
    std::uint64_t best_step = 0;
    std::optional<double> best_mrr;
    std::uint64_t final_step = 0;
    bool stopped_early = false;
    std::vector<double> losses;  // one per step run
    std::vector<ValidationRecord> history;
};

inline void write_metrics_line(std::ostream& os, const ValidationRecord& r) {
    os << "step=" << r.step << " loss=" << format_score(r.loss) << " proxy_mrr=";
    if (r.mrr) {
        os << format_score(*r.mrr);
    } else {
        os << "na";
    }
    os << '\n';
}

/// Position `p` of the endless, per-epoch shuffled stream over n pairs.
class EpochSampler {
  public:
    EpochSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

    std::size_t at(std::uint64_t p) {
        const std::uint64_t epoch = p / n_;
        if (epoch != epoch_ || perm_.empty()) {
            epoch_ = epoch;
            perm_.resize(n_);
            std::iota(perm_.begin(), perm_.end(), 0);
            Rng rng(mix_seed(seed_ + epoch));
            for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[uniform_index(rng, i)]);
        }
        return perm_[p % n_];
    }

  private:
    std::size_t n_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::vector<std::size_t> perm_;
};

/// Runs steps start_step+1 .. total_steps with the triangular schedule. Pairs are
/// drawn as a per-epoch shuffled stream. With a validator, the returned parameters
/// are those with the highest recorded proxy MRR (first occurrence wins ties), and
/// training stops after `patience` validations without improvement.
template <typename Pairs>
TrainResult train(const TrainConfig& cfg, EncoderParams params, const Pairs& pairs, const Validator& validator = {},
                  std::uint64_t start_step = 0, std::ostream* metrics_log = nullptr) {
    cfg.validate();
    if (pairs.size() == 0) throw UsageError("train: empty pair store");
    if (start_step > cfg.total_steps) throw UsageError("train: start step beyond total steps");
    AdamState adam = make_adam_state(params);
    adam.step = start_step;
    EpochSampler sampler(pairs.size(), cfg.seed);
    TrainResult res;
    res.best_step = start_step;
    double window_loss = 0.0;
    std::size_t window_steps = 0;
    std::size_t since_best = 0;
    std::vector<TrainPair> chunk;
    std::uint64_t step = start_step;
    while (step < cfg.total_steps) {
        chunk.clear();
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
            chunk.push_back(pairs.at(sampler.at(step * cfg.batch_size + i)));
        }
        TrainBatch batch = make_batch(chunk, params.config, cfg.hard_negatives);
        StepResult sr;
        if (cfg.workers == 1) {
            auto st = forward_loss(params, batch);
            sr.loss = st.loss;
            sr.grads = backward(params, st);
        } else {
            sr = sharded_loss_and_grad(params, split_batch(batch, cfg.workers));
        }
        if (!std::isfinite(sr.loss)) {
            throw NumericError("non-finite loss at step " + std::to_string(step + 1));
        }
        const double lr = triangular_lr(step + 1, cfg.total_steps, cfg.peak_lr, cfg.warmup_frac);
        adam_step(params, sr.grads, adam, lr);
        ++step;
        res.losses.push_back(sr.loss);
        window_loss += sr.loss;
        ++window_steps;
        if (step % cfg.validate_every == 0 || step == cfg.total_steps) {
            ValidationRecord rec{step, window_loss / static_cast<double>(window_steps), std::nullopt};
            window_loss = 0.0;
            window_steps = 0;
            if (validator) {
                rec.mrr = validator(params, step);
                if (!res.best_mrr || *rec.mrr > *res.best_mrr) {
                    res.best_mrr = rec.mrr;
                    res.best = params;
                    res.best_step = step;
                    since_best = 0;
                } else {
                    ++since_best;
                }
            }
            res.history.push_back(rec);
            if (metrics_log != nullptr) {
                write_metrics_line(*metrics_log, rec);
                metrics_log->flush();
            }
            if (validator && cfg.patience > 0 && since_best >= cfg.patience) {
                res.stopped_early = step < cfg.total_steps;
                break;
            }
        }
    }
    res.final_step = step;
    if (!validator) {
        res.best = std::move(params);
        res.best_step = step;
    }
    return res;
}

struct IterativeOptions {
    std::size_t mining_depth = 100;
};

struct IterativeResult {
    TrainResult round1;
    TrainResult round2;
    std::size_t round1_without_negatives = 0;
    std::size_t round2_without_negatives = 0;
    std::vector<TrainPair> round1_pairs;
    std::vector<TrainPair> round2_pairs;
};

/// Round 1 trains with exactly one BM25 negative per pair. Round 2 re-mines
/// negatives with the round-1 model (dense top-depth minus gold, H sampled
/// uniformly) and continues from the round-1 parameters.
template <typename Pairs>
IterativeResult iterative_train(const TrainConfig& cfg, EncoderParams init, const Pairs& pairs,
                                const InvertedIndex& bm25, const PassageCollection& passages,
                                const Validator& validator = {}, IterativeOptions opts = {}) {
    IterativeResult out;
    auto mined = mine_bm25_negatives(bm25, passages, pairs, 1);
    out.round1_without_negatives = mined.without_negatives;
    out.round1_pairs = std::move(mined.pairs);
    TrainConfig c1 = cfg;
    c1.hard_negatives = 1;
    out.round1 = train(c1, std::move(init), out.round1_pairs, validator);

    auto index = embed_corpus(out.round1.best, passages.all());
    auto remined = mine_hard_negatives(index, out.round1.best, passages, out.round1_pairs,
                                       opts.mining_depth, cfg.hard_negatives, mix_seed(cfg.seed ^ 0x2ULL));
    out.round2_without_negatives = remined.without_negatives;
    out.round2_pairs = std::move(remined.pairs);
    TrainConfig c2 = cfg;
    c2.seed = mix_seed(cfg.seed);
    out.round2 = train(c2, out.round1.best, out.round2_pairs, validator);
    return out;
}

}  // namespace dpr
