// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpr/error.hpp"
#include "dpr/text.hpp"

namespace dpr {

using PassageId = std::uint64_t;
using QueryId = std::uint64_t;

struct Passage {
    PassageId id = 0;
    std::optional<std::string> title;
    std::string text;

    friend bool operator==(const Passage&, const Passage&) = default;
};

struct Query {
    QueryId id = 0;
    std::string text;

    friend bool operator==(const Query&, const Query&) = default;
};

/// One training example. Passage texts are carried inline so a pair is
/// self-contained once written to a store.
struct TrainPair {
    Query query;
    Passage positive;
    std::vector<Passage> hard_negatives;

    friend bool operator==(const TrainPair&, const TrainPair&) = default;
};

/// Text the encoder and BM25 see for a passage: title first, then body.
inline std::string passage_text(const Passage& p) {
    if (p.title && !p.title->empty()) {
        return *p.title + " " + p.text;
    }
    return p.text;
}

/// Content-derived id used when an input format carries no explicit ids.
inline PassageId content_id(const std::optional<std::string>& title, std::string_view text) {
    std::string key = title ? *title : std::string();
    key.push_back('\x1f');
    key.append(text);
    return detail::fnv1a64(key);
}

inline void check_pair(const TrainPair& pair) {
    for (const auto& n : pair.hard_negatives) {
        if (n.id == pair.positive.id) {
            throw DataError("hard negative equals positive id " + std::to_string(n.id));
        }
    }
}

/// Passages addressable by id; ids must be unique.
class PassageCollection {
  public:
    PassageCollection() = default;

    explicit PassageCollection(std::vector<Passage> passages) : passages_(std::move(passages)) {
        index_.reserve(passages_.size());
        for (std::size_t i = 0; i < passages_.size(); ++i) {
            if (!index_.emplace(passages_[i].id, i).second) {
                throw DataError("duplicate passage id " + std::to_string(passages_[i].id));
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return passages_.size(); }
    [[nodiscard]] bool empty() const { return passages_.empty(); }
    [[nodiscard]] std::span<const Passage> all() const { return passages_; }
    [[nodiscard]] const Passage& operator[](std::size_t i) const { return passages_[i]; }

    [[nodiscard]] const Passage* find(PassageId id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &passages_[it->second];
    }

    [[nodiscard]] const Passage& at(PassageId id) const {
        const Passage* p = find(id);
        if (p == nullptr) {
            throw DataError("unknown passage id " + std::to_string(id));
        }
        return *p;
    }

    [[nodiscard]] bool contains(PassageId id) const { return index_.contains(id); }

  private:
    std::vector<Passage> passages_;
    std::unordered_map<PassageId, std::size_t> index_;
};

}  // namespace dpr
