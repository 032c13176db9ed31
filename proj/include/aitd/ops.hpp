// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aitd/rng.hpp"
#include "aitd/tensor.hpp"

namespace aitd::ops {

// Linear algebra

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// x [n x in], weight [out x in], optional bias [out] -> x * weight^T + bias.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

// Elementwise

Tensor add(const Tensor& a, const Tensor& b);
/// Sum of same-shaped tensors.
Tensor add_n(std::span<const Tensor> terms);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
Tensor silu(const Tensor& x);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

/// Inverted dropout. Identity when rate == 0.
Tensor dropout(const Tensor& x, float rate, Rng& rng);

// Reductions and normalization

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// [n x d] -> [1 x d]
Tensor mean_rows(const Tensor& x);

/// Softmax along `axis`, max-subtracted.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Log-softmax along the last axis.
Tensor log_softmax(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps = 1e-6f);

// Indexing

/// Rows of `table` [V x d] selected by `ids` -> [ids.size() x d]. Gradient
/// scatters back into the selected rows.
Tensor embedding(const Tensor& table, std::span<const int> ids);
/// Rows of a 2-D tensor -> [rows.size() x d].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Columns [offset, offset + width) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, std::size_t offset, std::size_t width);
/// Row-wise concatenation of 2-D tensors with equal column counts.
Tensor concat_rows(std::span<const Tensor> parts);

// Losses

/// Mean negative log-likelihood of targets[i] at row selected[i] of
/// `logits` [positions x V]. Rows not listed contribute nothing.
Tensor masked_cross_entropy(const Tensor& logits, std::span<const int> targets,
                            std::span<const std::size_t> selected);
/// Mean cross-entropy over every row of `logits` [n x C].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

// Attention

struct AttentionSpec {
    std::size_t query_heads = 1;
    std::size_t kv_heads = 1;
    std::size_t head_dim = 1;
    bool causal = false;
    /// Per key position: 1 when the position may be attended. Empty means all.
    std::span<const unsigned char> key_mask;
};

/// Scaled dot-product attention with grouped key/value heads.
/// q [len x query_heads*head_dim], k and v [len x kv_heads*head_dim].
/// Query head h reads kv head h / (query_heads / kv_heads).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionSpec& spec);

/// Rotary embedding over x [len x heads*head_dim]: within each head the pair
/// (2i, 2i+1) at row t is rotated by positions[t] * base^(-2i/head_dim).
Tensor rope(const Tensor& x, std::size_t heads, std::size_t head_dim, std::span<const std::size_t> positions,
            float base = 10000.0f);

} // namespace aitd::ops
