// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <string>

#include "aitd/error.hpp"
#include "aitd/ops.hpp"

namespace aitd::ops {

using detail::grad_sink;
using detail::make_result;

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionSpec& spec) {
    const std::size_t hq = spec.query_heads, hkv = spec.kv_heads, hd = spec.head_dim;
    if (hq == 0 || hkv == 0 || hd == 0 || hq % hkv != 0) {
        throw ConfigError("attention: query heads (" + std::to_string(hq) + ") must be a positive multiple of kv heads (" +
                          std::to_string(hkv) + ")");
    }
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
        throw ShapeError("attention: expected 2-D q/k/v, got " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()) + ", " + shape_string(v.shape()));
    }
    const std::size_t len = q.dim(0);
    if (q.dim(1) != hq * hd || k.shape() != Shape{len, hkv * hd} || v.shape() != Shape{len, hkv * hd}) {
        throw ShapeError("attention: q " + shape_string(q.shape()) + " incompatible with k " +
                         shape_string(k.shape()) + " / v " + shape_string(v.shape()));
    }
    if (!spec.key_mask.empty() && spec.key_mask.size() != len) {
        throw ShapeError("attention: key mask of length " + std::to_string(spec.key_mask.size()) +
                         " for sequence length " + std::to_string(len));
    }
    const std::size_t group = hq / hkv;
    const std::size_t qcols = hq * hd, kvcols = hkv * hd;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    std::vector<unsigned char> allowed(len, 1);
    if (!spec.key_mask.empty()) {
        allowed.assign(spec.key_mask.begin(), spec.key_mask.end());
    }
    const bool causal = spec.causal;

    const float* pq = q.data().data();
    const float* pk = k.data().data();
    const float* pv = v.data().data();
    std::vector<float> probs(hq * len * len, 0.0f);
    std::vector<float> out(len * qcols, 0.0f);
    for (std::size_t h = 0; h < hq; ++h) {
        const std::size_t kh = h / group;
        for (std::size_t i = 0; i < len; ++i) {
            float* p = &probs[(h * len + i) * len];
            const std::size_t limit = causal ? i + 1 : len;
            float mx = -std::numeric_limits<float>::infinity();
            const float* qi = pq + i * qcols + h * hd;
            for (std::size_t j = 0; j < limit; ++j) {
                if (!allowed[j]) {
                    continue;
                }
                const float* kj = pk + j * kvcols + kh * hd;
                float s = 0.0f;
                for (std::size_t t = 0; t < hd; ++t) {
                    s += qi[t] * kj[t];
                }
                p[j] = s * scale;
                mx = std::max(mx, p[j]);
            }
            if (mx == -std::numeric_limits<float>::infinity()) {
                continue; // nothing to attend: zero output row
            }
            double z = 0.0;
            for (std::size_t j = 0; j < limit; ++j) {
                if (allowed[j]) {
                    p[j] = std::exp(p[j] - mx);
                    z += p[j];
                }
            }
            const float inv = static_cast<float>(1.0 / z);
            float* oi = &out[i * qcols + h * hd];
            for (std::size_t j = 0; j < limit; ++j) {
                if (!allowed[j]) {
                    continue;
                }
                p[j] *= inv;
                const float* vj = pv + j * kvcols + kh * hd;
                for (std::size_t t = 0; t < hd; ++t) {
                    oi[t] += p[j] * vj[t];
                }
            }
        }
    }

    return make_result(
        {len, qcols}, std::move(out), {q, k, v},
        [q, k, v, probs = std::move(probs), len, hq, hd, group, qcols, kvcols, scale, causal](std::span<const float> g) {
            const float* pq = q.data().data();
            const float* pk = k.data().data();
            const float* pv = v.data().data();
            auto dq = grad_sink(q);
            auto dk = grad_sink(k);
            auto dv = grad_sink(v);
            std::vector<float> ds(len);
            for (std::size_t h = 0; h < hq; ++h) {
                const std::size_t kh = h / group;
                for (std::size_t i = 0; i < len; ++i) {
                    const float* p = &probs[(h * len + i) * len];
                    const float* gi = &g[i * qcols + h * hd];
                    const std::size_t limit = causal ? i + 1 : len;
                    // dP = dO . V, then softmax backward.
                    float dot_pg = 0.0f;
                    for (std::size_t j = 0; j < limit; ++j) {
                        if (p[j] == 0.0f) {
                            ds[j] = 0.0f;
                            continue;
                        }
                        const float* vj = pv + j * kvcols + kh * hd;
                        float s = 0.0f;
                        for (std::size_t t = 0; t < hd; ++t) {
                            s += gi[t] * vj[t];
                        }
                        ds[j] = s;
                        dot_pg += p[j] * s;
                    }
                    for (std::size_t j = 0; j < limit; ++j) {
                        if (p[j] == 0.0f) {
                            continue;
                        }
                        if (!dv.empty()) {
                            float* dvj = &dv[j * kvcols + kh * hd];
                            for (std::size_t t = 0; t < hd; ++t) {
                                dvj[t] += p[j] * gi[t];
                            }
                        }
                        const float dsc = p[j] * (ds[j] - dot_pg) * scale;
                        if (!dq.empty()) {
                            const float* kj = pk + j * kvcols + kh * hd;
                            float* dqi = &dq[i * qcols + h * hd];
                            for (std::size_t t = 0; t < hd; ++t) {
                                dqi[t] += dsc * kj[t];
                            }
                        }
                        if (!dk.empty()) {
                            const float* qi = pq + i * qcols + h * hd;
                            float* dkj = &dk[j * kvcols + kh * hd];
                            for (std::size_t t = 0; t < hd; ++t) {
                                dkj[t] += dsc * qi[t];
                            }
                        }
                    }
                }
            }
        });
}

Tensor rope(const Tensor& x, std::size_t heads, std::size_t head_dim, std::span<const std::size_t> positions,
            float base) {
    if (head_dim == 0 || head_dim % 2 != 0) {
        throw ConfigError("rope: head dimension must be even, got " + std::to_string(head_dim));
    }
    if (x.rank() != 2 || x.dim(1) != heads * head_dim) {
        throw ShapeError("rope: input " + shape_string(x.shape()) + " incompatible with " + std::to_string(heads) +
                         " heads of width " + std::to_string(head_dim));
    }
    const std::size_t len = x.dim(0), cols = x.dim(1), half = head_dim / 2;
    if (positions.size() != len) {
        throw ShapeError("rope: " + std::to_string(positions.size()) + " positions for " + std::to_string(len) + " rows");
    }
    std::vector<float> cs(len * half), sn(len * half);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t i = 0; i < half; ++i) {
            const double freq = std::pow(static_cast<double>(base), -2.0 * static_cast<double>(i) / head_dim);
            const double angle = static_cast<double>(positions[t]) * freq;
            cs[t * half + i] = static_cast<float>(std::cos(angle));
            sn[t * half + i] = static_cast<float>(std::sin(angle));
        }
    }
    auto in = x.data();
    std::vector<float> out(in.size());
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = t * cols + h * head_dim;
            for (std::size_t i = 0; i < half; ++i) {
                const float c = cs[t * half + i], s = sn[t * half + i];
                const float a = in[off + 2 * i], b = in[off + 2 * i + 1];
                out[off + 2 * i] = a * c - b * s;
                out[off + 2 * i + 1] = a * s + b * c;
            }
        }
    }
    return make_result(x.shape(), std::move(out), {x},
                       [x, cs = std::move(cs), sn = std::move(sn), len, heads, head_dim, cols,
                        half](std::span<const float> g) {
                           auto d = grad_sink(x);
                           if (d.empty()) {
                               return;
                           }
                           // Transpose of a rotation is the inverse rotation.
                           for (std::size_t t = 0; t < len; ++t) {
                               for (std::size_t h = 0; h < heads; ++h) {
                                   const std::size_t off = t * cols + h * head_dim;
                                   for (std::size_t i = 0; i < half; ++i) {
                                       const float c = cs[t * half + i], s = sn[t * half + i];
                                       const float ga = g[off + 2 * i], gb = g[off + 2 * i + 1];
                                       d[off + 2 * i] += ga * c + gb * s;
                                       d[off + 2 * i + 1] += -ga * s + gb * c;
                                   }
                               }
                           }
                       });
}

} // namespace aitd::ops
