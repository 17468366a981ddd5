// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <span>
#include <vector>

#include "dpr/bm25.hpp"
#include "dpr/dense_index.hpp"
#include "dpr/eval.hpp"

namespace dpr {

inline RunFile dense_run(const EncoderParams& params, const EmbeddingIndex& index, std::span<const Query> queries,
                         std::size_t k) {
    RunFile run;
    if (queries.empty()) return run;
    auto results = index.search(encode_queries_f32(params, queries), k);
    for (std::size_t i = 0; i < queries.size(); ++i) run.add(queries[i].id, results[i]);
    return run;
}

inline RunFile bm25_run(const InvertedIndex& index, std::span<const Query> queries, std::size_t k) {
    RunFile run;
    for (const auto& q : queries) run.add(q.id, index.topk(q.text, k));
    return run;
}

/// Embeds `passages`, retrieves the top 100 for every query and evaluates.
inline EvalReport evaluate_dense(const EncoderParams& params, std::span<const Passage> passages,
                                 std::span<const Query> queries, const Qrels& qrels) {
    auto index = embed_corpus(params, passages);
    return evaluate(dense_run(params, index, queries, 100), qrels);
}

}  // namespace dpr
