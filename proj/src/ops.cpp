// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "aitd/error.hpp"

namespace aitd::ops {

using detail::grad_sink;
using detail::make_result;

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

// y[0..n) += alpha * x[0..n)
inline void axpy(float* y, const float* x, float alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

inline float dot(const float* a, const float* b, std::size_t n) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

template <typename F>
Tensor unary(const Tensor& x, F&& value_and_slope) {
    const std::size_t n = x.numel();
    auto in = x.data();
    std::vector<float> out(n);
    std::vector<float> slope(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [v, s] = value_and_slope(in[i]);
        out[i] = v;
        slope[i] = s;
    }
    return make_result(x.shape(), std::move(out), {x}, [x, slope = std::move(slope)](std::span<const float> g) {
        auto dx = grad_sink(x);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx[i] += g[i] * slope[i];
        }
    });
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimensions disagree for " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
    }
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    std::vector<float> out(m * n, 0.0f);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            axpy(&out[i * n], pb + p * n, pa[i * k + p], n);
        }
    }
    return make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](std::span<const float> g) {
        const float* pa = a.data().data();
        const float* pb = b.data().data();
        if (auto da = grad_sink(a); !da.empty()) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    da[i * k + p] += dot(&g[i * n], pb + p * n, n);
                }
            }
        }
        if (auto db = grad_sink(b); !db.empty()) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    axpy(&db[p * n], &g[i * n], pa[i * k + p], n);
                }
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear");
    const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    if (weight.dim(1) != in) {
        throw ShapeError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()));
    }
    if (bias.defined() && bias.shape() != Shape{out_dim}) {
        throw ShapeError("linear: bias " + shape_string(bias.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()));
    }
    // Transposed weight makes the inner loop a contiguous axpy.
    const float* pw = weight.data().data();
    std::vector<float> wt(in * out_dim);
    for (std::size_t o = 0; o < out_dim; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
            wt[i * out_dim + o] = pw[o * in + i];
        }
    }
    const float* px = x.data().data();
    std::vector<float> out(rows * out_dim, 0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
        float* orow = &out[r * out_dim];
        if (bias.defined()) {
            std::copy(bias.data().begin(), bias.data().end(), orow);
        }
        for (std::size_t i = 0; i < in; ++i) {
            axpy(orow, &wt[i * out_dim], px[r * in + i], out_dim);
        }
    }
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) {
        inputs.push_back(bias);
    }
    return make_result({rows, out_dim}, std::move(out), std::move(inputs),
                       [x, weight, bias, rows, in, out_dim](std::span<const float> g) {
                           const float* px = x.data().data();
                           const float* pw = weight.data().data();
                           if (auto dx = grad_sink(x); !dx.empty()) {
                               for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t o = 0; o < out_dim; ++o) {
                                       axpy(&dx[r * in], pw + o * in, g[r * out_dim + o], in);
                                   }
                               }
                           }
                           if (auto dw = grad_sink(weight); !dw.empty()) {
                               for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t o = 0; o < out_dim; ++o) {
                                       axpy(&dw[o * in], px + r * in, g[r * out_dim + o], in);
                                   }
                               }
                           }
                           if (bias.defined()) {
                               if (auto db = grad_sink(bias); !db.empty()) {
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       axpy(db.data(), &g[r * out_dim], 1.0f, out_dim);
                                   }
                               }
                           }
                       });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<float> out(a.data().begin(), a.data().end());
    axpy(out.data(), b.data().data(), 1.0f, out.size());
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const float> g) {
        for (const Tensor* t : {&a, &b}) {
            if (auto d = grad_sink(*t); !d.empty()) {
                axpy(d.data(), g.data(), 1.0f, d.size());
            }
        }
    });
}

Tensor add_n(std::span<const Tensor> terms) {
    if (terms.empty()) {
        throw Error("add_n: no terms");
    }
    std::vector<float> out(terms[0].data().begin(), terms[0].data().end());
    for (std::size_t t = 1; t < terms.size(); ++t) {
        require_same_shape(terms[0], terms[t], "add_n");
        axpy(out.data(), terms[t].data().data(), 1.0f, out.size());
    }
    std::vector<Tensor> inputs(terms.begin(), terms.end());
    return make_result(terms[0].shape(), std::move(out), inputs, [inputs](std::span<const float> g) {
        for (const auto& t : inputs) {
            if (auto d = grad_sink(t); !d.empty()) {
                axpy(d.data(), g.data(), 1.0f, d.size());
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const std::size_t n = a.numel();
    std::vector<float> out(n);
    auto pa = a.data();
    auto pb = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = pa[i] * pb[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const float> g) {
        auto pa = a.data();
        auto pb = b.data();
        if (auto da = grad_sink(a); !da.empty()) {
            for (std::size_t i = 0; i < da.size(); ++i) {
                da[i] += g[i] * pb[i];
            }
        }
        if (auto db = grad_sink(b); !db.empty()) {
            for (std::size_t i = 0; i < db.size(); ++i) {
                db[i] += g[i] * pa[i];
            }
        }
    });
}

Tensor scale(const Tensor& x, float factor) {
    std::vector<float> out(x.data().begin(), x.data().end());
    for (float& v : out) {
        v *= factor;
    }
    return make_result(x.shape(), std::move(out), {x}, [x, factor](std::span<const float> g) {
        if (auto d = grad_sink(x); !d.empty()) {
            axpy(d.data(), g.data(), factor, d.size());
        }
    });
}

Tensor silu(const Tensor& x) {
    return unary(x, [](float v) {
        const float s = 1.0f / (1.0f + std::exp(-v));
        return std::pair{v * s, s * (1.0f + v * (1.0f - s))};
    });
}

Tensor gelu(const Tensor& x) {
    return unary(x, [](float v) {
        constexpr float inv_sqrt2 = 0.70710678118654752f;
        const float inv_sqrt_2pi = static_cast<float>(1.0 / std::sqrt(2.0 * std::numbers::pi));
        const float cdf = 0.5f * (1.0f + std::erf(v * inv_sqrt2));
        const float pdf = inv_sqrt_2pi * std::exp(-0.5f * v * v);
        return std::pair{v * cdf, cdf + v * pdf};
    });
}

Tensor dropout(const Tensor& x, float rate, Rng& rng) {
    if (rate < 0.0f || rate >= 1.0f) {
        throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (rate == 0.0f) {
        return x;
    }
    const float keep_scale = 1.0f / (1.0f - rate);
    std::vector<float> mask(x.numel());
    for (float& m : mask) {
        m = rng.uniform() < rate ? 0.0f : keep_scale;
    }
    std::vector<float> out(x.numel());
    auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = in[i] * mask[i];
    }
    return make_result(x.shape(), std::move(out), {x}, [x, mask = std::move(mask)](std::span<const float> g) {
        if (auto d = grad_sink(x); !d.empty()) {
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] += g[i] * mask[i];
            }
        }
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (float v : x.data()) {
        s += v;
    }
    return make_result({1}, {static_cast<float>(s)}, {x}, [x](std::span<const float> g) {
        if (auto d = grad_sink(x); !d.empty()) {
            for (float& v : d) {
                v += g[0];
            }
        }
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / static_cast<float>(x.numel())); }

Tensor mean_rows(const Tensor& x) {
    require_rank(x, 2, "mean_rows");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    const float inv = 1.0f / static_cast<float>(rows);
    std::vector<float> out(cols, 0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
        axpy(out.data(), x.data().data() + r * cols, 1.0f, cols);
    }
    for (float& v : out) {
        v *= inv;
    }
    return make_result({1, cols}, std::move(out), {x}, [x, rows, cols, inv](std::span<const float> g) {
        if (auto d = grad_sink(x); !d.empty()) {
            for (std::size_t r = 0; r < rows; ++r) {
                axpy(&d[r * cols], g.data(), inv, cols);
            }
        }
    });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const Shape& shape = x.shape();
    if (axis >= shape.size()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) {
        outer *= shape[i];
    }
    for (std::size_t i = axis + 1; i < shape.size(); ++i) {
        inner *= shape[i];
    }
    const std::size_t n = shape[axis];
    auto in = x.data();
    std::vector<float> out(in.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
            const std::size_t base = o * n * inner + j;
            float mx = -std::numeric_limits<float>::infinity();
            for (std::size_t t = 0; t < n; ++t) {
                mx = std::max(mx, in[base + t * inner]);
            }
            double z = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const float e = std::exp(in[base + t * inner] - mx);
                out[base + t * inner] = e;
                z += e;
            }
            const float inv = static_cast<float>(1.0 / z);
            for (std::size_t t = 0; t < n; ++t) {
                out[base + t * inner] *= inv;
            }
        }
    }
    std::vector<float> y = out;
    return make_result(shape, std::move(out), {x},
                       [x, y = std::move(y), outer, inner, n](std::span<const float> g) {
                           auto d = grad_sink(x);
                           if (d.empty()) {
                               return;
                           }
                           for (std::size_t o = 0; o < outer; ++o) {
                               for (std::size_t j = 0; j < inner; ++j) {
                                   const std::size_t base = o * n * inner + j;
                                   float s = 0.0f;
                                   for (std::size_t t = 0; t < n; ++t) {
                                       s += g[base + t * inner] * y[base + t * inner];
                                   }
                                   for (std::size_t t = 0; t < n; ++t) {
                                       const std::size_t idx = base + t * inner;
                                       d[idx] += y[idx] * (g[idx] - s);
                                   }
                               }
                           }
                       });
}

namespace {

// Row-wise log-softmax of a [rows x n] buffer.
void log_softmax_rows(const float* in, float* out, std::size_t rows, std::size_t n) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = in + r * n;
        const float mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            z += std::exp(static_cast<double>(row[t] - mx));
        }
        const float lz = mx + static_cast<float>(std::log(z));
        for (std::size_t t = 0; t < n; ++t) {
            out[r * n + t] = row[t] - lz;
        }
    }
}

} // namespace

Tensor log_softmax(const Tensor& x) {
    if (x.rank() == 0) {
        throw ShapeError("log_softmax: scalar input");
    }
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.numel() / n;
    std::vector<float> out(x.numel());
    log_softmax_rows(x.data().data(), out.data(), rows, n);
    std::vector<float> y = out;
    return make_result(x.shape(), std::move(out), {x}, [x, y = std::move(y), rows, n](std::span<const float> g) {
        auto d = grad_sink(x);
        if (d.empty()) {
            return;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            float s = 0.0f;
            for (std::size_t t = 0; t < n; ++t) {
                s += g[r * n + t];
            }
            for (std::size_t t = 0; t < n; ++t) {
                d[r * n + t] += g[r * n + t] - std::exp(y[r * n + t]) * s;
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    require_rank(x, 2, "layer_norm");
    const std::size_t rows = x.dim(0), d = x.dim(1);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw ShapeError("layer_norm: input " + shape_string(x.shape()) + " incompatible with gain " +
                         shape_string(gamma.shape()) + " / bias " + shape_string(beta.shape()));
    }
    auto in = x.data();
    auto pg = gamma.data();
    auto pb = beta.data();
    std::vector<float> out(rows * d), xhat(rows * d), rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = &in[r * d];
        double m = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            m += row[i];
        }
        m /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double c = row[i] - m;
            var += c * c;
        }
        var /= static_cast<double>(d);
        rstd[r] = static_cast<float>(1.0 / std::sqrt(var + eps));
        for (std::size_t i = 0; i < d; ++i) {
            xhat[r * d + i] = static_cast<float>(row[i] - m) * rstd[r];
            out[r * d + i] = xhat[r * d + i] * pg[i] + pb[i];
        }
    }
    return make_result(
        x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](std::span<const float> g) {
            auto pg = gamma.data();
            auto dx = grad_sink(x);
            auto dg = grad_sink(gamma);
            auto db = grad_sink(beta);
            std::vector<float> dxhat(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const float* gr = &g[r * d];
                const float* xr = &xhat[r * d];
                if (!dg.empty()) {
                    for (std::size_t i = 0; i < d; ++i) {
                        dg[i] += gr[i] * xr[i];
                    }
                }
                if (!db.empty()) {
                    axpy(db.data(), gr, 1.0f, d);
                }
                if (dx.empty()) {
                    continue;
                }
                float m1 = 0.0f, m2 = 0.0f;
                for (std::size_t i = 0; i < d; ++i) {
                    dxhat[i] = gr[i] * pg[i];
                    m1 += dxhat[i];
                    m2 += dxhat[i] * xr[i];
                }
                m1 /= static_cast<float>(d);
                m2 /= static_cast<float>(d);
                for (std::size_t i = 0; i < d; ++i) {
                    dx[r * d + i] += rstd[r] * (dxhat[i] - m1 - xr[i] * m2);
                }
            }
        });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps) {
    require_rank(x, 2, "rms_norm");
    const std::size_t rows = x.dim(0), d = x.dim(1);
    if (gain.shape() != Shape{d}) {
        throw ShapeError("rms_norm: input " + shape_string(x.shape()) + " incompatible with gain " +
                         shape_string(gain.shape()));
    }
    auto in = x.data();
    auto pg = gain.data();
    std::vector<float> out(rows * d), rinv(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double ms = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            ms += static_cast<double>(in[r * d + i]) * in[r * d + i];
        }
        ms /= static_cast<double>(d);
        rinv[r] = static_cast<float>(1.0 / std::sqrt(ms + eps));
        for (std::size_t i = 0; i < d; ++i) {
            out[r * d + i] = in[r * d + i] * rinv[r] * pg[i];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gain},
                       [x, gain, rinv = std::move(rinv), rows, d](std::span<const float> g) {
                           auto in = x.data();
                           auto pg = gain.data();
                           auto dx = grad_sink(x);
                           auto dg = grad_sink(gain);
                           for (std::size_t r = 0; r < rows; ++r) {
                               const float* xr = &in[r * d];
                               const float* gr = &g[r * d];
                               const float ri = rinv[r];
                               if (!dg.empty()) {
                                   for (std::size_t i = 0; i < d; ++i) {
                                       dg[i] += gr[i] * xr[i] * ri;
                                   }
                               }
                               if (dx.empty()) {
                                   continue;
                               }
                               float m = 0.0f;
                               for (std::size_t i = 0; i < d; ++i) {
                                   m += gr[i] * pg[i] * xr[i];
                               }
                               m /= static_cast<float>(d);
                               for (std::size_t i = 0; i < d; ++i) {
                                   dx[r * d + i] += ri * (gr[i] * pg[i] - xr[i] * ri * ri * m);
                               }
                           }
                       });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    require_rank(table, 2, "embedding");
    const std::size_t vocab = table.dim(0), d = table.dim(1);
    if (ids.empty()) {
        throw ShapeError("embedding: empty id list");
    }
    std::vector<int> rows(ids.begin(), ids.end());
    std::vector<float> out(rows.size() * d);
    auto pt = table.data();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= vocab) {
            throw ShapeError("embedding: id " + std::to_string(rows[r]) + " out of range for table " +
                             shape_string(table.shape()));
        }
        std::copy_n(&pt[static_cast<std::size_t>(rows[r]) * d], d, &out[r * d]);
    }
    const std::size_t n = rows.size();
    return make_result({n, d}, std::move(out), {table}, [table, rows = std::move(rows), d](std::span<const float> g) {
        if (auto dt = grad_sink(table); !dt.empty()) {
            for (std::size_t r = 0; r < rows.size(); ++r) {
                axpy(&dt[static_cast<std::size_t>(rows[r]) * d], &g[r * d], 1.0f, d);
            }
        }
    });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    require_rank(x, 2, "gather_rows");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (rows.empty()) {
        throw ShapeError("gather_rows: empty row list");
    }
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    std::vector<float> out(idx.size() * d);
    auto px = x.data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= n) {
            throw ShapeError("gather_rows: row " + std::to_string(idx[r]) + " out of range for shape " +
                             shape_string(x.shape()));
        }
        std::copy_n(&px[idx[r] * d], d, &out[r * d]);
    }
    const std::size_t m = idx.size();
    return make_result({m, d}, std::move(out), {x}, [x, idx = std::move(idx), d](std::span<const float> g) {
        if (auto dx = grad_sink(x); !dx.empty()) {
            for (std::size_t r = 0; r < idx.size(); ++r) {
                axpy(&dx[idx[r] * d], &g[r * d], 1.0f, d);
            }
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t offset, std::size_t width) {
    require_rank(x, 2, "slice_cols");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (width == 0 || offset + width > cols) {
        throw ShapeError("slice_cols: columns [" + std::to_string(offset) + ", " + std::to_string(offset + width) +
                         ") out of range for shape " + shape_string(x.shape()));
    }
    std::vector<float> out(rows * width);
    auto px = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(&px[r * cols + offset], width, &out[r * width]);
    }
    return make_result({rows, width}, std::move(out), {x}, [x, rows, cols, offset, width](std::span<const float> g) {
        if (auto dx = grad_sink(x); !dx.empty()) {
            for (std::size_t r = 0; r < rows; ++r) {
                axpy(&dx[r * cols + offset], &g[r * width], 1.0f, width);
            }
        }
    });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: no parts");
    }
    const std::size_t d = parts[0].dim(1);
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_rank(p, 2, "concat_rows");
        if (p.dim(1) != d) {
            throw ShapeError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                             shape_string(p.shape()));
        }
        total += p.dim(0);
    }
    std::vector<float> out;
    out.reserve(total * d);
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return make_result({total, d}, std::move(out), inputs, [inputs](std::span<const float> g) {
        std::size_t offset = 0;
        for (const auto& p : inputs) {
            const std::size_t n = p.numel();
            if (auto dp = grad_sink(p); !dp.empty()) {
                axpy(dp.data(), &g[offset], 1.0f, n);
            }
            offset += n;
        }
    });
}

Tensor masked_cross_entropy(const Tensor& logits, std::span<const int> targets,
                            std::span<const std::size_t> selected) {
    require_rank(logits, 2, "masked_cross_entropy");
    if (selected.empty()) {
        throw Error("masked_cross_entropy: empty selection provides no supervision signal");
    }
    if (targets.size() != selected.size()) {
        throw ShapeError("masked_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(selected.size()) + " selected positions");
    }
    const std::size_t rows = logits.dim(0), v = logits.dim(1);
    for (std::size_t i = 0; i < selected.size(); ++i) {
        if (selected[i] >= rows) {
            throw ShapeError("masked_cross_entropy: position " + std::to_string(selected[i]) +
                             " out of range for logits " + shape_string(logits.shape()));
        }
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
            throw ShapeError("masked_cross_entropy: target " + std::to_string(targets[i]) +
                             " out of range for vocabulary of " + std::to_string(v));
        }
    }
    auto pl = logits.data();
    std::vector<float> logp(selected.size() * v);
    double total = 0.0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        log_softmax_rows(&pl[selected[i] * v], &logp[i * v], 1, v);
        total -= logp[i * v + static_cast<std::size_t>(targets[i])];
    }
    const float count = static_cast<float>(selected.size());
    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<std::size_t> sel(selected.begin(), selected.end());
    return make_result({1}, {static_cast<float>(total / count)}, {logits},
                       [logits, logp = std::move(logp), tgt = std::move(tgt), sel = std::move(sel), v,
                        count](std::span<const float> g) {
                           auto d = grad_sink(logits);
                           if (d.empty()) {
                               return;
                           }
                           const float w = g[0] / count;
                           for (std::size_t i = 0; i < sel.size(); ++i) {
                               float* row = &d[sel[i] * v];
                               for (std::size_t t = 0; t < v; ++t) {
                                   row[t] += w * std::exp(logp[i * v + t]);
                               }
                               row[static_cast<std::size_t>(tgt[i])] -= w;
                           }
                       });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
    require_rank(logits, 2, "cross_entropy");
    std::vector<std::size_t> all(logits.dim(0));
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return masked_cross_entropy(logits, targets, all);
}

} // namespace aitd::ops
