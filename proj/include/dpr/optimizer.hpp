// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dpr/encoder.hpp"
#include "dpr/error.hpp"

namespace dpr {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TowerMoments {
    std::vector<double> m_embedding, v_embedding;
    std::vector<double> m_proj_w, v_proj_w;
    std::vector<double> m_proj_b, v_proj_b;
    std::vector<double> m_ln_gain, v_ln_gain;
    std::vector<double> m_ln_bias, v_ln_bias;
};

struct AdamState {
    std::vector<TowerMoments> towers;
    std::uint64_t step = 0;
    AdamOptions options;
};

inline AdamState make_adam_state(const EncoderParams& params, AdamOptions options = {}) {
    AdamState s;
    s.options = options;
    s.towers.resize(params.towers.size());
    for (std::size_t t = 0; t < params.towers.size(); ++t) {
        const auto& tw = params.towers[t];
        auto& m = s.towers[t];
        m.m_embedding.assign(tw.embedding.size(), 0.0);
        m.v_embedding.assign(tw.embedding.size(), 0.0);
        m.m_proj_w.assign(tw.proj_w.size(), 0.0);
        m.v_proj_w.assign(tw.proj_w.size(), 0.0);
        m.m_proj_b.assign(tw.proj_b.size(), 0.0);
        m.v_proj_b.assign(tw.proj_b.size(), 0.0);
        m.m_ln_gain.assign(tw.ln_gain.size(), 0.0);
        m.v_ln_gain.assign(tw.ln_gain.size(), 0.0);
        m.m_ln_bias.assign(tw.ln_bias.size(), 0.0);
        m.v_ln_bias.assign(tw.ln_bias.size(), 0.0);
    }
    return s;
}

/// Bias-corrected Adam update of one contiguous block; `t` is the 1-based step.
inline void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                        std::uint64_t t, double lr, const AdamOptions& o) {
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * grad[i];
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
}

/// One optimizer step. Embedding rows are updated only where the gradient
/// touched them (lazy sparse Adam); head parameters are updated densely.
inline void adam_step(EncoderParams& params, const Gradients& grads, AdamState& state, double lr) {
    if (grads.towers.size() != params.towers.size() || state.towers.size() != params.towers.size()) {
        throw UsageError("adam_step: parameter, gradient and state shapes differ");
    }
    const std::size_t d = params.config.dim;
    const std::uint64_t t = ++state.step;
    const auto& o = state.options;
    for (std::size_t k = 0; k < params.towers.size(); ++k) {
        auto& tw = params.towers[k];
        const auto& g = grads.towers[k];
        auto& mo = state.towers[k];
        for (std::size_t r = 0; r < g.rows.size(); ++r) {
            const std::size_t off = static_cast<std::size_t>(g.rows[r]) * d;
            adam_update({tw.embedding.data() + off, d}, {g.row_grad.data() + r * d, d}, {mo.m_embedding.data() + off, d},
                        {mo.v_embedding.data() + off, d}, t, lr, o);
        }
        if (!tw.proj_w.empty()) {
            adam_update(tw.proj_w, g.proj_w, mo.m_proj_w, mo.v_proj_w, t, lr, o);
            adam_update(tw.proj_b, g.proj_b, mo.m_proj_b, mo.v_proj_b, t, lr, o);
            adam_update(tw.ln_gain, g.ln_gain, mo.m_ln_gain, mo.v_ln_gain, t, lr, o);
            adam_update(tw.ln_bias, g.ln_bias, mo.m_ln_bias, mo.v_ln_bias, t, lr, o);
        }
    }
}

/// Linear warmup from 0 to `peak` over warmup_frac * total steps, then linear
/// decay to 0 at `total`.
inline double triangular_lr(std::uint64_t step, std::uint64_t total, double peak, double warmup_frac) {
    if (total == 0) throw UsageError("triangular_lr: total must be positive");
    if (step > total) throw UsageError("triangular_lr: step exceeds total");
    if (!(warmup_frac >= 0.0 && warmup_frac <= 1.0)) throw UsageError("triangular_lr: warmup_frac must lie in [0, 1]");
    const double s = static_cast<double>(step);
    const double warm = warmup_frac * static_cast<double>(total);
    if (s < warm) return peak * s / warm;
    if (warm >= static_cast<double>(total)) return peak;
    return peak * (static_cast<double>(total) - s) / (static_cast<double>(total) - warm);
}

}  // namespace dpr
