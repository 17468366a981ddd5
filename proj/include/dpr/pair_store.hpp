// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// PairStore on-disk layout (all integers little-endian):
//
//   offset 0   char[8]  magic "DPRPAIRS"
//          8   u32      version (1)
//         12   u32      flags (0)
//         16   u64      pair count N
//         24   u64      offsets table position T
//         32   records, each: u32 payload length L, then L payload bytes
//          T   u64[N]   absolute file offset of each record's length prefix
//
// Record payload:
//   query    : u64 id, str text
//   positive : passage
//   u32 K    : hard negative count, then K passages
//   passage  : u64 id, u8 has_title, [str title if has_title], str text
//   str      : u32 byte length, UTF-8 bytes

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dpr/binary_io.hpp"
#include "dpr/error.hpp"
#include "dpr/random.hpp"
#include "dpr/types.hpp"

namespace dpr {

inline constexpr std::array<char, 8> kPairStoreMagic = {'D', 'P', 'R', 'P', 'A', 'I', 'R', 'S'};
inline constexpr std::uint32_t kPairStoreVersion = 1;
inline constexpr std::size_t kPairStoreHeaderSize = 32;

namespace detail {

inline void put_passage(ByteWriter& w, const Passage& p) {
    w.put<std::uint64_t>(p.id);
    w.put<std::uint8_t>(p.title ? 1 : 0);
    if (p.title) w.put_string(*p.title);
    w.put_string(p.text);
}

inline Passage get_passage(ByteReader& r) {
    Passage p;
    p.id = r.get<std::uint64_t>();
    auto has_title = r.get<std::uint8_t>();
    if (has_title > 1) throw DataError("corrupt passage record");
    if (has_title) p.title = r.get_string();
    p.text = r.get_string();
    return p;
}

inline std::vector<std::uint8_t> encode_pair(const TrainPair& pair) {
    ByteWriter w;
    w.put<std::uint64_t>(pair.query.id);
    w.put_string(pair.query.text);
    put_passage(w, pair.positive);
    if (pair.hard_negatives.size() > UINT32_MAX) throw DataError("too many hard negatives");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pair.hard_negatives.size()));
    for (const auto& n : pair.hard_negatives) put_passage(w, n);
    return w.take();
}

inline TrainPair decode_pair(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    TrainPair pair;
    pair.query.id = r.get<std::uint64_t>();
    pair.query.text = r.get_string();
    pair.positive = get_passage(r);
    auto k = r.get<std::uint32_t>();
    pair.hard_negatives.reserve(std::min<std::size_t>(k, r.remaining()));
    for (std::uint32_t i = 0; i < k; ++i) pair.hard_negatives.push_back(get_passage(r));
    if (r.remaining() != 0) throw DataError("trailing bytes in pair record");
    return pair;
}

}  // namespace detail

/// Single-writer builder. Records are streamed to disk; finish() appends the
/// offsets table and patches the header.
class PairStoreWriter {
  public:
    explicit PairStoreWriter(std::string path) : path_(std::move(path)), out_(path_, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot create " + path_);
        std::array<std::uint8_t, kPairStoreHeaderSize> zeros{};
        write_bytes(out_, zeros);
        pos_ = kPairStoreHeaderSize;
    }

    PairStoreWriter(const PairStoreWriter&) = delete;
    PairStoreWriter& operator=(const PairStoreWriter&) = delete;

    ~PairStoreWriter() {
        if (!finished_) {
            try {
                finish();
            } catch (...) {
            }
        }
    }

    void append(const TrainPair& pair) {
        if (finished_) throw UsageError("append after finish");
        auto payload = detail::encode_pair(pair);
        if (payload.size() > UINT32_MAX) throw DataError("serialized record exceeds 2^32 bytes");
        offsets_.push_back(pos_);
        ByteWriter w;
        w.put<std::uint32_t>(static_cast<std::uint32_t>(payload.size()));
        write_bytes(out_, w.bytes());
        write_bytes(out_, payload);
        pos_ += sizeof(std::uint32_t) + payload.size();
        if (!out_) throw IoError("write failed: " + path_);
    }

    std::uint64_t finish() {
        if (finished_) return offsets_.size();
        finished_ = true;
        ByteWriter table;
        table.put_array<std::uint64_t>(offsets_);
        write_bytes(out_, table.bytes());
        ByteWriter header;
        for (char c : kPairStoreMagic) header.put<char>(c);
        header.put<std::uint32_t>(kPairStoreVersion);
        header.put<std::uint32_t>(0);
        header.put<std::uint64_t>(offsets_.size());
        header.put<std::uint64_t>(pos_);
        out_.seekp(0);
        write_bytes(out_, header.bytes());
        out_.close();
        if (!out_) throw IoError("write failed: " + path_);
        return offsets_.size();
    }

    [[nodiscard]] std::uint64_t count() const { return offsets_.size(); }

  private:
    std::string path_;
    std::ofstream out_;
    std::uint64_t pos_ = 0;
    std::vector<std::uint64_t> offsets_;
    bool finished_ = false;
};

/// Immutable, memory-mapped view of a store. Safe for concurrent readers.
class PairStore {
  public:
    static PairStore open(const std::string& path) {
        PairStore s;
        s.path_ = path;
        s.file_ = MappedFile(path);
        auto bytes = s.file_.bytes();
        if (bytes.size() < kPairStoreHeaderSize) throw DataError(path + ": not a pair store");
        if (std::memcmp(bytes.data(), kPairStoreMagic.data(), kPairStoreMagic.size()) != 0) {
            throw DataError(path + ": bad pair store magic");
        }
        ByteReader r(bytes.subspan(8));
        auto version = r.get<std::uint32_t>();
        if (version != kPairStoreVersion) {
            throw DataError(path + ": unsupported pair store version " + std::to_string(version));
        }
        r.get<std::uint32_t>();
        s.count_ = r.get<std::uint64_t>();
        s.table_pos_ = r.get<std::uint64_t>();
        if (s.table_pos_ < kPairStoreHeaderSize || s.table_pos_ > bytes.size() ||
            (bytes.size() - s.table_pos_) / sizeof(std::uint64_t) < s.count_ ||
            bytes.size() - s.table_pos_ != s.count_ * sizeof(std::uint64_t)) {
            throw DataError(path + ": corrupt pair store header");
        }
        return s;
    }

    [[nodiscard]] std::uint64_t size() const { return count_; }
    [[nodiscard]] bool empty() const { return count_ == 0; }
    [[nodiscard]] const std::string& path() const { return path_; }

    /// Record i; touches only offsets[i] and the record bytes.
    [[nodiscard]] TrainPair at(std::uint64_t i) const {
        if (i >= count_) {
            throw UsageError("pair index " + std::to_string(i) + " out of range [0, " + std::to_string(count_) + ")");
        }
        auto bytes = file_.bytes();
        std::uint64_t off;
        std::memcpy(&off, bytes.data() + table_pos_ + i * sizeof(std::uint64_t), sizeof(off));
        if (off < kPairStoreHeaderSize || off + sizeof(std::uint32_t) > table_pos_) {
            throw DataError("corrupt offset for record " + std::to_string(i));
        }
        std::uint32_t len;
        std::memcpy(&len, bytes.data() + off, sizeof(len));
        if (off + sizeof(std::uint32_t) + len > table_pos_) {
            throw DataError("record " + std::to_string(i) + " overruns the offsets table");
        }
        return detail::decode_pair(bytes.subspan(off + sizeof(std::uint32_t), len));
    }

  private:
    std::string path_;
    MappedFile file_;
    std::uint64_t count_ = 0;
    std::uint64_t table_pos_ = 0;
};

inline TrainPair read_pair(const PairStore& store, std::uint64_t i) { return store.at(i); }

/// Writes every pair of a finite range and reopens the result.
template <typename Range>
PairStore build_pair_store(const Range& pairs, const std::string& path) {
    PairStoreWriter w(path);
    for (const auto& p : pairs) w.append(p);
    w.finish();
    return PairStore::open(path);
}

/// Uniform sample of n pairs without replacement, in original order
/// (selection sampling). Deterministic given seed.
inline PairStore downsample(const PairStore& store, std::uint64_t n, std::uint64_t seed, const std::string& path) {
    if (n > store.size()) {
        throw UsageError("downsample: n=" + std::to_string(n) + " exceeds store size " + std::to_string(store.size()));
    }
    Rng rng(seed);
    PairStoreWriter w(path);
    std::uint64_t needed = n;
    const std::uint64_t total = store.size();
    for (std::uint64_t i = 0; i < total && needed > 0; ++i) {
        std::uint64_t left = total - i;
        if (uniform_index(rng, left) < needed) {
            w.append(store.at(i));
            --needed;
        }
    }
    w.finish();
    return PairStore::open(path);
}

}  // namespace dpr
