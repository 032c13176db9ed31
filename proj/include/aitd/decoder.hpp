// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Causal decoder (RMSNorm, GQA with RoPE, SwiGLU) with LoRA adapters on
// every projection and a two-way classification head.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aitd/optim.hpp"
#include "aitd/tensor.hpp"
#include "aitd/text.hpp"

namespace aitd::decoder {

struct DecoderConfig {
    std::size_t layers = 4;
    std::size_t dim = 128;
    std::size_t query_heads = 4;
    std::size_t kv_heads = 2;
    std::size_t head_dim = 32;
    std::size_t ffn_dim = 384;
    std::size_t vocab_size = 0;
    std::size_t max_positions = 256;
    float rope_base = 10000.0f;
    /// Bias on the q/k/v projections.
    bool qkv_bias = true;

    void validate() const;
    nlohmann::json to_json() const;
    static DecoderConfig from_json(const nlohmann::json& doc);
};

enum class Pooling : std::uint8_t { kFirst, kLast, kMean };

std::string_view pooling_name(Pooling pooling);
/// first | last | mean
std::optional<Pooling> parse_pooling(std::string_view name);

/// Projections that receive adapters, in registration order.
inline constexpr std::array<std::string_view, 7> kLoraTargets{"q", "k", "v", "o", "gate", "up", "down"};

struct LoraSettings {
    std::size_t rank = 8;
    /// Zero means alpha = rank.
    float alpha = 0.0f;
    float effective_alpha() const { return alpha > 0.0f ? alpha : static_cast<float>(rank); }
    float scale() const { return effective_alpha() / static_cast<float>(rank); }
};

class DecoderModel {
public:
    DecoderModel(DecoderConfig config, std::uint64_t seed);

    DecoderModel(const DecoderModel&) = delete;
    DecoderModel& operator=(const DecoderModel&) = delete;
    DecoderModel(DecoderModel&&) = default;
    DecoderModel& operator=(DecoderModel&&) = default;

    const DecoderConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Final hidden states [len x dim]. When `layer_outputs` is given, the
    /// residual stream after every block is appended to it.
    Tensor forward(std::span<const text::TokenId> ids, std::vector<Tensor>* layer_outputs = nullptr) const;

    /// Next-token logits [len x V] through the tied embedding.
    Tensor lm_logits(const Tensor& hidden) const;

    /// Classification logits [1 x 2] from the pooled final hidden state.
    Tensor classify(std::span<const text::TokenId> ids, Pooling pooling) const;

    /// Wraps every target projection with A [r x in] ~ N(0, 0.02) and
    /// B [out x r] = 0, and freezes the backbone. The head stays trainable.
    void inject_lora(const LoraSettings& settings, std::uint64_t seed);
    bool has_adapters() const { return lora_.has_value(); }
    const std::optional<LoraSettings>& lora() const { return lora_; }

    /// Folds scale * B * A into each base weight, removes the adapters and
    /// unfreezes the backbone. Throws if no adapters are attached.
    void merge_lora();

    /// Names of the backbone parameters (everything except head and adapters).
    std::vector<std::string> backbone_parameter_names() const;

private:
    struct Projection {
        std::string name;
        Tensor weight;
        Tensor bias;
        Tensor lora_a;
        Tensor lora_b;
    };
    struct Block {
        Tensor attn_norm, ffn_norm;
        Projection q, k, v, o, gate, up, down;
    };

    Tensor project(const Tensor& x, const Projection& p) const;
    std::array<Projection*, 7> projections(Block& b);

    DecoderConfig config_;
    ParameterStore params_;
    Tensor token_embedding_;
    std::vector<Block> blocks_;
    Tensor final_norm_;
    Tensor head_weight_, head_bias_;
    std::optional<LoraSettings> lora_;
};

/// One AdamW step of mean cross-entropy over the classifier logits.
/// Throws if no adapters are attached.
float finetune_step(DecoderModel& model, std::span<const std::vector<text::TokenId>> inputs,
                    std::span<const text::Label> labels, Pooling pooling, AdamW& optimizer);

/// One AdamW step of next-token cross-entropy on the backbone (no adapters,
/// head excluded).
float pretrain_lm_step(DecoderModel& model, std::span<const std::vector<text::TokenId>> sequences, AdamW& optimizer);

/// Softmax probability of the AI class for logits [1 x 2].
double ai_probability(const Tensor& logits);

} // namespace aitd::decoder
