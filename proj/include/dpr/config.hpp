// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Training config files: one `key = value` per line, `#` starts a comment.
//
//   dim, buckets, shared (true|false), head (none|projection_layernorm),
//   max_len_query, max_len_passage, batch_size, hard_negatives, peak_lr,
//   warmup_frac, total_steps, seed, workers, validate_every, patience

#include <charconv>
#include <fstream>
#include <map>
#include <string>

#include "dpr/encoder.hpp"
#include "dpr/error.hpp"
#include "dpr/text.hpp"
#include "dpr/trainer.hpp"

namespace dpr {

struct PipelineConfig {
    EncoderConfig encoder;
    TrainConfig train;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            out = static_cast<T>(std::stod(v, &used));
            if (used == v.size()) return out;
        } catch (const std::exception&) {
        }
    } else {
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec == std::errc() && p == v.data() + v.size()) return out;
    }
    throw UsageError("config: bad value for " + key + ": '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config: bad value for " + key + ": '" + v + "'");
}

}  // namespace detail

inline void apply_config_value(PipelineConfig& c, const std::string& key, const std::string& v) {
    using detail::parse_number;
    if (key == "dim") c.encoder.dim = parse_number<std::size_t>(key, v);
    else if (key == "buckets") c.encoder.buckets = parse_number<std::size_t>(key, v);
    else if (key == "shared") c.encoder.shared = detail::parse_bool(key, v);
    else if (key == "head") {
        if (v == "none") c.encoder.head = Head::none;
        else if (v == "projection_layernorm") c.encoder.head = Head::projection_layernorm;
        else throw UsageError("config: unknown head '" + v + "'");
    }
    else if (key == "max_len_query") c.encoder.max_len_query = parse_number<std::size_t>(key, v);
    else if (key == "max_len_passage") c.encoder.max_len_passage = parse_number<std::size_t>(key, v);
    else if (key == "batch_size") c.train.batch_size = parse_number<std::size_t>(key, v);
    else if (key == "hard_negatives") c.train.hard_negatives = parse_number<std::size_t>(key, v);
    else if (key == "peak_lr") c.train.peak_lr = parse_number<double>(key, v);
    else if (key == "warmup_frac") c.train.warmup_frac = parse_number<double>(key, v);
    else if (key == "total_steps") c.train.total_steps = parse_number<std::uint64_t>(key, v);
    else if (key == "seed") c.train.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "workers") c.train.workers = parse_number<std::size_t>(key, v);
    else if (key == "validate_every") c.train.validate_every = parse_number<std::uint64_t>(key, v);
    else if (key == "patience") c.train.patience = parse_number<std::size_t>(key, v);
    else throw UsageError("config: unknown key '" + key + "'");
}

inline void parse_config(std::istream& in, PipelineConfig& c) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::string_view s = trim(line);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string_view::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_config_value(c, std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
    }
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    PipelineConfig c;
    parse_config(in, c);
    return c;
}

}  // namespace dpr
