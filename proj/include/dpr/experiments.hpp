// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Pre-train then fine-tune protocol and the pre-training data-size sweep.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpr/bm25.hpp"
#include "dpr/encoder.hpp"
#include "dpr/eval.hpp"
#include "dpr/pair_store.hpp"
#include "dpr/retrieval.hpp"
#include "dpr/trainer.hpp"

namespace dpr {

/// Held-out retrieval task used to score checkpoints.
struct EvalTask {
    std::vector<Passage> passages;
    std::vector<Query> queries;
    Qrels qrels;
};

struct PretrainFinetuneResult {
    EncoderParams pretrained;
    EncoderParams finetuned;
    EvalReport zero_shot;  // pre-trained checkpoint, no fine-tuning
    EvalReport finetuned_report;
    std::uint64_t pretrain_steps = 0;
};

/// Steps for `epochs` passes over n pairs at the given batch size, at least 1.
inline std::uint64_t steps_for_epochs(std::size_t n, double epochs, std::size_t batch_size) {
    return std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(epochs * static_cast<double>(n) / static_cast<double>(batch_size))));
}

/// Initializes from `init_seed`, trains on `pretrain` (skipped when empty or
/// pretrain_cfg.total_steps is 0), evaluates zero-shot, fine-tunes on `finetune`
/// and evaluates again.
template <typename PretrainPairs, typename FinetunePairs>
PretrainFinetuneResult pretrain_finetune(const EncoderConfig& enc, std::uint64_t init_seed, const PretrainPairs& pretrain,
                                         const TrainConfig& pretrain_cfg, const FinetunePairs& finetune,
                                         const TrainConfig& finetune_cfg, const EvalTask& task) {
    PretrainFinetuneResult out;
    EncoderParams params = init_params(enc, init_seed);
    if (pretrain.size() > 0 && pretrain_cfg.total_steps > 0) {
        auto r = train(pretrain_cfg, std::move(params), pretrain);
        params = std::move(r.best);
        out.pretrain_steps = r.final_step;
    }
    out.pretrained = params;
    out.zero_shot = evaluate_dense(params, task.passages, task.queries, task.qrels);
    auto ft = train(finetune_cfg, std::move(params), finetune);
    out.finetuned = std::move(ft.best);
    out.finetuned_report = evaluate_dense(out.finetuned, task.passages, task.queries, task.qrels);
    return out;
}

struct DataSizeRow {
    std::uint64_t size = 0;
    std::vector<double> r20;  // one per seed
    double median = 0.0;
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw UsageError("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct DataSizeOptions {
    std::vector<std::uint64_t> sizes;
    std::vector<std::uint64_t> seeds;
    double pretrain_epochs = 1.0;  // pre-training steps scale with the sample size
    std::string workdir;           // downsampled stores are written here
};

/// For each size and seed: downsample the pre-training pool, pre-train
/// (size 0 = random init), fine-tune and record R@20 on the task.
template <typename FinetunePairs>
std::vector<DataSizeRow> ablate_datasize(const EncoderConfig& enc, const PairStore& pool, const TrainConfig& pretrain_cfg,
                                         const FinetunePairs& finetune, const TrainConfig& finetune_cfg,
                                         const EvalTask& task, const DataSizeOptions& opts) {
    if (opts.sizes.empty() || opts.seeds.empty()) throw UsageError("ablation: sizes and seeds must be non-empty");
    std::vector<DataSizeRow> rows;
    for (auto size : opts.sizes) {
        DataSizeRow row;
        row.size = size;
        for (auto seed : opts.seeds) {
            const std::string path =
                (std::filesystem::path(opts.workdir) / ("pretrain_" + std::to_string(size) + "_" + std::to_string(seed) + ".store"))
                    .string();
            PairStore sample = downsample(pool, size, seed, path);
            TrainConfig pc = pretrain_cfg;
            pc.seed = seed;
            pc.total_steps = size == 0 ? 0 : steps_for_epochs(size, opts.pretrain_epochs, pc.batch_size);
            TrainConfig fc = finetune_cfg;
            fc.seed = seed;
            auto r = pretrain_finetune(enc, seed, sample, pc, finetune, fc, task);
            row.r20.push_back(r.finetuned_report.mean.r20);
        }
        row.median = median(row.r20);
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Tab-separated size-vs-accuracy table, one row per size.
inline std::string format_datasize_table(const std::vector<DataSizeRow>& rows) {
    std::ostringstream os;
    os << "pretrain_size\tmedian_r20";
    if (!rows.empty()) {
        for (std::size_t s = 0; s < rows[0].r20.size(); ++s) os << "\tseed" << s << "_r20";
    }
    os << '\n';
    for (const auto& r : rows) {
        os << r.size << '\t' << format_score(r.median);
        for (double v : r.r20) os << '\t' << format_score(v);
        os << '\n';
    }
    return os.str();
}

}  // namespace dpr
