// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Checkpoint layout (little-endian):
//
//   char[8] "DPRCKPT1" | u32 version (1) | u32 dim | u64 buckets | u8 shared | u8 head
//   u16 reserved | u32 max_len_query | u32 max_len_passage | u32 reserved | u64 step
//
// followed by one block per tower (1 if shared, else query tower then passage tower):
//   f64[buckets * dim] embedding
//   if head: f64[dim * dim] projection (out x in), f64[dim] bias, f64[dim] ln gain, f64[dim] ln bias

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "dpr/binary_io.hpp"
#include "dpr/encoder.hpp"

namespace dpr {

inline constexpr std::array<char, 8> kCheckpointMagic = {'D', 'P', 'R', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    EncoderParams params;
    std::uint64_t step = 0;
};

inline void save_checkpoint(const std::string& path, const EncoderParams& params, std::uint64_t step) {
    const auto& c = params.config;
    ByteWriter h;
    for (char ch : kCheckpointMagic) h.put<char>(ch);
    h.put<std::uint32_t>(kCheckpointVersion);
    h.put<std::uint32_t>(static_cast<std::uint32_t>(c.dim));
    h.put<std::uint64_t>(c.buckets);
    h.put<std::uint8_t>(c.shared ? 1 : 0);
    h.put<std::uint8_t>(static_cast<std::uint8_t>(c.head));
    h.put<std::uint16_t>(0);
    h.put<std::uint32_t>(static_cast<std::uint32_t>(c.max_len_query));
    h.put<std::uint32_t>(static_cast<std::uint32_t>(c.max_len_passage));
    h.put<std::uint32_t>(0);
    h.put<std::uint64_t>(step);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);
    write_bytes(out, h.bytes());
    auto raw = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    for (const auto& t : params.towers) {
        raw(t.embedding);
        if (c.head == Head::projection_layernorm) {
            raw(t.proj_w);
            raw(t.proj_b);
            raw(t.ln_gain);
            raw(t.ln_bias);
        }
    }
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    MappedFile file(path);
    ByteReader r(file.bytes());
    std::array<char, 8> magic{};
    for (auto& ch : magic) ch = r.get<char>();
    if (magic != kCheckpointMagic) throw DataError(path + ": not a checkpoint");
    if (r.get<std::uint32_t>() != kCheckpointVersion) throw DataError(path + ": unsupported checkpoint version");
    Checkpoint ck;
    auto& c = ck.params.config;
    c.dim = r.get<std::uint32_t>();
    c.buckets = r.get<std::uint64_t>();
    auto shared = r.get<std::uint8_t>();
    auto head = r.get<std::uint8_t>();
    if (shared > 1 || head > 1) throw DataError(path + ": corrupt checkpoint header");
    c.shared = shared == 1;
    c.head = static_cast<Head>(head);
    r.get<std::uint16_t>();
    c.max_len_query = r.get<std::uint32_t>();
    c.max_len_passage = r.get<std::uint32_t>();
    r.get<std::uint32_t>();
    ck.step = r.get<std::uint64_t>();
    try {
        c.validate();
    } catch (const UsageError& e) {
        throw DataError(path + ": " + e.what());
    }
    const std::size_t d = c.dim;
    const std::size_t per_tower = c.buckets * d + (c.head == Head::projection_layernorm ? d * d + 3 * d : 0);
    const std::size_t towers = c.shared ? 1 : 2;
    if (r.remaining() != towers * per_tower * sizeof(double)) throw DataError(path + ": checkpoint size mismatch");
    ck.params.towers.resize(towers);
    for (auto& t : ck.params.towers) {
        t.embedding.resize(c.buckets * d);
        r.get_array<double>(t.embedding);
        if (c.head == Head::projection_layernorm) {
            t.proj_w.resize(d * d);
            t.proj_b.resize(d);
            t.ln_gain.resize(d);
            t.ln_bias.resize(d);
            r.get_array<double>(t.proj_w);
            r.get_array<double>(t.proj_b);
            r.get_array<double>(t.ln_gain);
            r.get_array<double>(t.ln_bias);
        }
    }
    return ck;
}

}  // namespace dpr
