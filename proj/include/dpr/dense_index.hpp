// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Exact inner-product index over passage embeddings.
//
// File layout (little-endian):
//   char[8] "DPRINDEX" | u32 version (1) | u32 dim | u64 rows N
//   u64[N]      passage id of each row
//   f32[N * d]  row-major embedding matrix

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpr/binary_io.hpp"
#include "dpr/bm25.hpp"
#include "dpr/encoder.hpp"
#include "dpr/random.hpp"

namespace dpr {

inline constexpr std::array<char, 8> kIndexMagic = {'D', 'P', 'R', 'I', 'N', 'D', 'E', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr std::size_t kIndexHeaderSize = 24;

/// One query's ranked hits: scores non-increasing, ties by ascending id.
using SearchResult = std::vector<ScoredPassage>;

class EmbeddingIndex {
  public:
    EmbeddingIndex() = default;

    static EmbeddingIndex from_memory(std::vector<PassageId> ids, std::vector<float> matrix, std::size_t dim) {
        if (dim == 0 || matrix.size() != ids.size() * dim) throw UsageError("index matrix shape mismatch");
        EmbeddingIndex ix;
        ix.dim_ = dim;
        ix.rows_ = ids.size();
        ix.owned_ids_ = std::move(ids);
        ix.owned_matrix_ = std::move(matrix);
        ix.ids_ = ix.owned_ids_;
        ix.matrix_ = ix.owned_matrix_;
        ix.check_ids();
        return ix;
    }

    /// Maps an index file; rows are read in place.
    static EmbeddingIndex open(const std::string& path) {
        EmbeddingIndex ix;
        ix.file_ = MappedFile(path);
        auto bytes = ix.file_.bytes();
        if (bytes.size() < kIndexHeaderSize || std::memcmp(bytes.data(), kIndexMagic.data(), 8) != 0) {
            throw DataError(path + ": not an embedding index");
        }
        ByteReader r(bytes.subspan(8));
        if (r.get<std::uint32_t>() != kIndexVersion) throw DataError(path + ": unsupported index version");
        ix.dim_ = r.get<std::uint32_t>();
        ix.rows_ = r.get<std::uint64_t>();
        const std::size_t expect = kIndexHeaderSize + ix.rows_ * (sizeof(std::uint64_t) + ix.dim_ * sizeof(float));
        if (ix.dim_ == 0 || bytes.size() != expect) throw DataError(path + ": index size mismatch");
        ix.ids_ = {reinterpret_cast<const PassageId*>(bytes.data() + kIndexHeaderSize), ix.rows_};
        ix.matrix_ = {reinterpret_cast<const float*>(bytes.data() + kIndexHeaderSize + ix.rows_ * sizeof(std::uint64_t)),
                      ix.rows_ * ix.dim_};
        ix.check_ids();
        return ix;
    }

    EmbeddingIndex(EmbeddingIndex&&) noexcept = default;
    EmbeddingIndex& operator=(EmbeddingIndex&&) noexcept = default;
    EmbeddingIndex(const EmbeddingIndex&) = delete;
    EmbeddingIndex& operator=(const EmbeddingIndex&) = delete;

    [[nodiscard]] std::size_t size() const { return rows_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::span<const PassageId> ids() const { return ids_; }
    [[nodiscard]] std::span<const float> row(std::size_t i) const { return matrix_.subspan(i * dim_, dim_); }
    [[nodiscard]] std::span<const float> matrix() const { return matrix_; }

    /// Exact top-k by inner product for `nq` row-major query vectors. Scores are
    /// accumulated in double and reported as float; ties go to the smaller id.
    [[nodiscard]] std::vector<SearchResult> search(std::span<const float> queries, std::size_t k) const {
        if (k < 1) throw UsageError("search: k must be >= 1");
        if (queries.size() % dim_ != 0) throw UsageError("search: query dimension mismatch");
        const std::size_t nq = queries.size() / dim_;
        std::vector<SearchResult> out(nq);
        std::vector<ScoredPassage> all(rows_);
        const std::size_t n = std::min(k, rows_);
        for (std::size_t q = 0; q < nq; ++q) {
            auto qv = queries.subspan(q * dim_, dim_);
            for (std::size_t i = 0; i < rows_; ++i) {
                all[i] = {ids_[i], static_cast<double>(inner_product(qv, row(i)))};
            }
            std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
            out[q].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
        }
        return out;
    }

    static float inner_product(std::span<const float> a, std::span<const float> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        return static_cast<float>(s);
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + path);
        write_header(out, dim_, rows_);
        out.write(reinterpret_cast<const char*>(ids_.data()), static_cast<std::streamsize>(ids_.size_bytes()));
        out.write(reinterpret_cast<const char*>(matrix_.data()), static_cast<std::streamsize>(matrix_.size_bytes()));
        out.close();
        if (!out) throw IoError("write failed: " + path);
    }

    static void write_header(std::ofstream& out, std::size_t dim, std::size_t rows) {
        ByteWriter h;
        for (char c : kIndexMagic) h.put<char>(c);
        h.put<std::uint32_t>(kIndexVersion);
        h.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
        h.put<std::uint64_t>(rows);
        write_bytes(out, h.bytes());
    }

  private:
    void check_ids() const {
        std::unordered_set<PassageId> seen;
        seen.reserve(rows_);
        for (auto id : ids_) {
            if (!seen.insert(id).second) throw DataError("duplicate passage id in index: " + std::to_string(id));
        }
    }

    std::size_t dim_ = 0;
    std::size_t rows_ = 0;
    MappedFile file_;
    std::vector<PassageId> owned_ids_;
    std::vector<float> owned_matrix_;
    std::span<const PassageId> ids_;
    std::span<const float> matrix_;
};

namespace detail {

inline void encode_rows_f32(const EncoderParams& params, std::span<const Passage> passages, std::vector<float>& out) {
    std::vector<TokenSeq> seqs;
    seqs.reserve(passages.size());
    for (const auto& p : passages) {
        seqs.push_back(tokenize(passage_text(p), params.config.max_len_passage, Side::passage));
    }
    Matrix m = encode(params, seqs, Side::passage);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (double v : m.row(i)) {
            auto f = static_cast<float>(v);
            if (!std::isfinite(f)) throw NumericError("non-finite embedding for passage " + std::to_string(passages[i].id));
            out.push_back(f);
        }
    }
}

}  // namespace detail

inline std::vector<float> to_f32(const Matrix& m) {
    std::vector<float> out(m.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(m.data[i]);
    return out;
}

/// Embeds a corpus in memory, `shard_rows` passages per encoder call.
inline EmbeddingIndex embed_corpus(const EncoderParams& params, std::span<const Passage> passages,
                                   std::size_t shard_rows = 4096) {
    if (passages.empty()) throw UsageError("embed_corpus: empty collection");
    if (shard_rows == 0) throw UsageError("embed_corpus: shard_rows must be >= 1");
    std::vector<PassageId> ids;
    std::vector<float> mat;
    ids.reserve(passages.size());
    mat.reserve(passages.size() * params.config.dim);
    for (std::size_t s = 0; s < passages.size(); s += shard_rows) {
        auto shard = passages.subspan(s, std::min(shard_rows, passages.size() - s));
        for (const auto& p : shard) ids.push_back(p.id);
        detail::encode_rows_f32(params, shard, mat);
    }
    return EmbeddingIndex::from_memory(std::move(ids), std::move(mat), params.config.dim);
}

/// Embeds a corpus shard by shard straight into an index file, then maps it.
inline EmbeddingIndex embed_corpus(const EncoderParams& params, std::span<const Passage> passages, std::size_t shard_rows,
                                   const std::string& path) {
    if (passages.empty()) throw UsageError("embed_corpus: empty collection");
    if (shard_rows == 0) throw UsageError("embed_corpus: shard_rows must be >= 1");
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + path);
        EmbeddingIndex::write_header(out, params.config.dim, passages.size());
        ByteWriter ids;
        for (const auto& p : passages) ids.put<std::uint64_t>(p.id);
        write_bytes(out, ids.bytes());
        std::vector<float> mat;
        for (std::size_t s = 0; s < passages.size(); s += shard_rows) {
            mat.clear();
            detail::encode_rows_f32(params, passages.subspan(s, std::min(shard_rows, passages.size() - s)), mat);
            out.write(reinterpret_cast<const char*>(mat.data()), static_cast<std::streamsize>(mat.size() * sizeof(float)));
        }
        out.close();
        if (!out) throw IoError("write failed: " + path);
    }
    return EmbeddingIndex::open(path);
}

/// Encodes query texts with the query tower as float rows.
inline std::vector<float> encode_queries_f32(const EncoderParams& params, std::span<const Query> queries) {
    std::vector<TokenSeq> seqs;
    seqs.reserve(queries.size());
    for (const auto& q : queries) seqs.push_back(tokenize(q.text, params.config.max_len_query, Side::query));
    return to_f32(encode(params, seqs, Side::query));
}

/// Per pair: dense top-`depth`, gold removed, then `per_pair` negatives drawn
/// uniformly without replacement (kept in rank order). Existing negatives are replaced.
template <typename Pairs>
MiningResult mine_hard_negatives(const EmbeddingIndex& index, const EncoderParams& params,
                                 const PassageCollection& passages, const Pairs& pairs, std::size_t depth,
                                 std::size_t per_pair, std::uint64_t seed) {
    if (index.dim() != params.config.dim) throw UsageError("mine_hard_negatives: index/encoder dim mismatch");
    MiningResult out;
    out.pairs.reserve(pairs.size());
    Rng rng(seed);
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
        const std::size_t end = std::min(pairs.size(), start + kChunk);
        std::vector<TrainPair> chunk;
        std::vector<Query> qs;
        for (std::size_t i = start; i < end; ++i) {
            chunk.push_back(pairs.at(i));
            qs.push_back(chunk.back().query);
        }
        auto results = index.search(encode_queries_f32(params, qs), std::max<std::size_t>(depth, 1));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            auto& pair = chunk[i];
            std::vector<PassageId> pool;
            for (std::size_t r = 0; r < results[i].size() && r < depth; ++r) {
                if (results[i][r].id != pair.positive.id) pool.push_back(results[i][r].id);
            }
            std::vector<std::size_t> picks(pool.size());
            for (std::size_t k = 0; k < picks.size(); ++k) picks[k] = k;
            const std::size_t take = std::min(per_pair, pool.size());
            for (std::size_t k = 0; k < take; ++k) {
                std::swap(picks[k], picks[k + uniform_index(rng, picks.size() - k)]);
            }
            picks.resize(take);
            std::sort(picks.begin(), picks.end());
            pair.hard_negatives.clear();
            for (auto k : picks) pair.hard_negatives.push_back(passages.at(pool[k]));
            if (pair.hard_negatives.empty()) ++out.without_negatives;
            out.pairs.push_back(std::move(pair));
        }
    }
    return out;
}

}  // namespace dpr
