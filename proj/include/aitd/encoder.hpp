// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bidirectional pre-LN transformer encoder with a masked-language-model head,
// used for whole-word-masking pretraining and masked-verbalizer
// classification.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aitd/optim.hpp"
#include "aitd/rng.hpp"
#include "aitd/tensor.hpp"
#include "aitd/text.hpp"

namespace aitd::encoder {

struct EncoderConfig {
    std::size_t layers = 4;
    std::size_t dim = 128;
    std::size_t heads = 4;
    std::size_t ffn_dim = 512;
    std::size_t vocab_size = 0;
    std::size_t max_positions = 256;
    float dropout = 0.1f;
    /// Output projection shares the token embedding table.
    bool tied_head = true;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& doc);
};

/// Token ids of the two-character verbalizers, one per mask slot.
struct VerbalizerPair {
    std::array<text::TokenId, 2> human{};
    std::array<text::TokenId, 2> ai{};

    const std::array<text::TokenId, 2>& for_label(text::Label label) const {
        return label == text::Label::kAi ? ai : human;
    }
    /// Throws ConfigError if a verbalizer character is missing from vocab.
    static VerbalizerPair from_vocab(const text::Vocabulary& vocab);
};

class EncoderModel {
public:
    EncoderModel(EncoderConfig config, std::uint64_t seed);

    const EncoderConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Hidden states [len x dim]. PAD positions are excluded as attention
    /// keys. Dropout is applied only when `dropout_rng` is non-null.
    Tensor forward(std::span<const text::TokenId> ids, Rng* dropout_rng = nullptr) const;

    /// Vocabulary logits [|positions| x V] at the selected rows of `hidden`.
    Tensor mlm_logits(const Tensor& hidden, std::span<const std::size_t> positions) const;

private:
    struct Block {
        Tensor ln1_gamma, ln1_beta;
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor ln2_gamma, ln2_beta;
        Tensor w_up, b_up, w_down, b_down;
    };

    EncoderConfig config_;
    ParameterStore params_;
    Tensor token_embedding_;
    Tensor position_embedding_;
    std::vector<Block> blocks_;
    Tensor final_gamma_, final_beta_;
    Tensor head_weight_;
    Tensor head_bias_;
};

/// Masked cross-entropy over the two slot rows with the label's verbalizer
/// characters as targets.
Tensor verbalizer_loss(const Tensor& slot_logits, text::Label label, const VerbalizerPair& pair);

struct VerbalizerPrediction {
    text::Label label = text::Label::kHuman;
    /// Sum over both slots of the log-probability of each verbalizer.
    double human_score = 0.0;
    double ai_score = 0.0;
    /// P(ai) restricted to the two verbalizers.
    double p_ai = 0.5;
};

/// Argmax over the two verbalizer scores; an exact tie predicts human.
VerbalizerPrediction predict_verbalizer(const Tensor& slot_logits, const VerbalizerPair& pair);

/// Slot logits [2 x V] for a rendered prompt.
Tensor slot_logits(const EncoderModel& model, const text::EncoderPromptEncoding& prompt, Rng* dropout_rng = nullptr);

/// One AdamW step on the mean masked cross-entropy of the batch. Throws if
/// the batch has no masked positions.
float pretrain_mlm_step(EncoderModel& model, std::span<const text::MaskedBatch> batch, AdamW& optimizer,
                        Rng* dropout_rng = nullptr);

/// One AdamW step on the mean verbalizer loss over labelled prompts.
float finetune_step(EncoderModel& model, std::span<const text::EncoderPromptEncoding> prompts,
                    std::span<const text::Label> labels, const VerbalizerPair& pair, AdamW& optimizer,
                    Rng* dropout_rng = nullptr);

} // namespace aitd::encoder
