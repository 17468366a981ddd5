// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dpr/error.hpp"

namespace dpr {

/// Number of hash buckets produced by the tokenizer.
inline constexpr std::uint32_t kTokenBuckets = 1u << 20;

/// Reserved single-character token joining dialogue turns.
inline constexpr char kTurnSeparator = '\x1e';

enum class Side { query, passage };

/// Bucket ids in [0, kTokenBuckets). Always non-empty when produced by tokenize().
struct TokenSeq {
    std::vector<std::uint32_t> ids;

    [[nodiscard]] std::size_t size() const { return ids.size(); }
    [[nodiscard]] bool empty() const { return ids.empty(); }
    friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Simple case mapping for Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 32;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 32;
    if (cp >= 0x100 && cp <= 0x17F) {
        if (cp == 0x178) return 0xFF;
        bool even_upper = (cp <= 0x12F) || (cp >= 0x132 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177);
        bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
        if ((even_upper && cp % 2 == 0) || (odd_upper && cp % 2 == 1)) return cp + 1;
        return cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
    return cp;
}

// Decodes one code point at text[i]; invalid sequences decode as a single raw byte.
inline char32_t decode_utf8(std::string_view text, std::size_t& i, std::size_t& len) {
    auto b0 = static_cast<unsigned char>(text[i]);
    auto cont = [&](std::size_t k) {
        return i + k < text.size() && (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
    };
    auto byte = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(text[i + k]) & 0x3F); };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        len = 2;
        return (static_cast<char32_t>(b0 & 0x1F) << 6) | byte(1);
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        len = 3;
        return (static_cast<char32_t>(b0 & 0x0F) << 12) | (byte(1) << 6) | byte(2);
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        len = 4;
        return (static_cast<char32_t>(b0 & 0x07) << 18) | (byte(1) << 12) | (byte(2) << 6) | byte(3);
    }
    len = 1;
    return 0xFFFFFFFF;  // raw byte marker
}

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool is_ascii_punct(char c) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Unicode-aware lowercase of UTF-8 text. Bytes that are not valid UTF-8 pass through.
inline std::string lowercase(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        std::size_t len = 1;
        char32_t cp = detail::decode_utf8(text, i, len);
        if (cp == 0xFFFFFFFF) {
            out.push_back(text[i]);
        } else {
            detail::append_utf8(out, detail::to_lower(cp));
        }
        i += len;
    }
    return out;
}

/// Lowercased word tokens: maximal runs between ASCII whitespace and ASCII punctuation.
/// The turn separator is kept as a token of its own.
inline std::vector<std::string> words(std::string_view text) {
    std::string lowered = lowercase(text);
    std::vector<std::string> out;
    std::string cur;
    for (char c : lowered) {
        if (detail::is_ascii_space(c) || detail::is_ascii_punct(c) || c == kTurnSeparator) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
            if (c == kTurnSeparator) {
                out.emplace_back(1, kTurnSeparator);
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

/// 64-bit FNV-1a folded into kTokenBuckets.
inline std::uint32_t token_bucket(std::string_view token) {
    std::uint64_t h = detail::fnv1a64(token);
    h ^= (h >> 20) ^ (h >> 40);
    return static_cast<std::uint32_t>(h & (kTokenBuckets - 1));
}

/// Hashing tokenizer. Queries longer than max_len keep their last max_len tokens,
/// passages keep their first max_len tokens.
inline TokenSeq tokenize(std::string_view text, std::size_t max_len, Side side) {
    if (max_len < 1) {
        throw UsageError("tokenize: max_len must be >= 1");
    }
    auto toks = words(text);
    if (toks.empty()) {
        throw EmptyTextError("text is empty after normalization");
    }
    std::size_t begin = 0;
    std::size_t end = toks.size();
    if (toks.size() > max_len) {
        if (side == Side::query) {
            begin = toks.size() - max_len;
        } else {
            end = max_len;
        }
    }
    TokenSeq seq;
    seq.ids.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        seq.ids.push_back(token_bucket(toks[i]));
    }
    return seq;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && detail::is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && detail::is_ascii_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Splits on '.', '!' or '?' followed by whitespace. Terminal punctuation stays
/// with its sentence; surrounding whitespace is trimmed.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && detail::is_ascii_space(text[i + 1])) {
            auto s = trim(text.substr(start, i + 1 - start));
            if (!s.empty()) out.emplace_back(s);
            start = i + 1;
        }
    }
    auto tail = trim(text.substr(std::min(start, text.size())));
    if (!tail.empty()) out.emplace_back(tail);
    return out;
}

}  // namespace dpr
