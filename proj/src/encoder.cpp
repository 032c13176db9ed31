// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/encoder.hpp"

#include <cmath>
#include <vector>

#include "aitd/error.hpp"
#include "aitd/nn.hpp"
#include "aitd/ops.hpp"

namespace aitd::encoder {

using text::TokenId;
using text::Vocabulary;

void EncoderConfig::validate() const {
    if (layers == 0 || dim == 0 || heads == 0 || ffn_dim == 0 || max_positions == 0) {
        throw ConfigError("encoder: layers, dim, heads, ffn_dim and max_positions must be positive");
    }
    if (dim % heads != 0) {
        throw ConfigError("encoder: dim " + std::to_string(dim) + " is not divisible by heads " +
                          std::to_string(heads));
    }
    if (vocab_size <= Vocabulary::kSpecialCount) {
        throw ConfigError("encoder: vocab_size must exceed the special token count");
    }
    if (!(dropout >= 0.0f && dropout < 1.0f)) {
        throw ConfigError("encoder: dropout must be in [0, 1)");
    }
}

nlohmann::json EncoderConfig::to_json() const {
    return {{"layers", layers},     {"dim", dim},
            {"heads", heads},       {"ffn_dim", ffn_dim},
            {"vocab_size", vocab_size}, {"max_positions", max_positions},
            {"dropout", dropout},   {"tied_head", tied_head}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& doc) {
    EncoderConfig c;
    nn::read_field(doc, "layers", c.layers);
    nn::read_field(doc, "dim", c.dim);
    nn::read_field(doc, "heads", c.heads);
    nn::read_field(doc, "ffn_dim", c.ffn_dim);
    nn::read_field(doc, "vocab_size", c.vocab_size);
    nn::read_field(doc, "max_positions", c.max_positions);
    nn::read_field(doc, "dropout", c.dropout);
    nn::read_field(doc, "tied_head", c.tied_head);
    c.validate();
    return c;
}

VerbalizerPair VerbalizerPair::from_vocab(const Vocabulary& vocab) {
    auto ids_of = [&](std::string_view word) {
        const auto chars = text::utf8_chars(word);
        if (chars.size() != 2) {
            throw ConfigError("verbalizer must have exactly two characters");
        }
        std::array<TokenId, 2> out{};
        for (std::size_t i = 0; i < 2; ++i) {
            const auto id = vocab.find(chars[i]);
            if (!id) {
                throw ConfigError("verbalizer character '" + chars[i] + "' missing from vocabulary");
            }
            out[i] = *id;
        }
        return out;
    };
    return VerbalizerPair{ids_of(text::kHumanVerbalizer), ids_of(text::kAiVerbalizer)};
}

EncoderModel::EncoderModel(EncoderConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const std::size_t d = config_.dim;
    auto weight = [&](const std::string& name, Shape shape) {
        return params_.add(name, nn::normal_init(std::move(shape), rng));
    };
    auto bias = [&](const std::string& name, std::size_t n) {
        return params_.add(name, Tensor::zeros({n}), DecayPolicy::kExempt);
    };
    auto gain = [&](const std::string& name, std::size_t n) {
        return params_.add(name, Tensor::full({n}, 1.0f), DecayPolicy::kExempt);
    };

    token_embedding_ = weight("embeddings.token", {config_.vocab_size, d});
    position_embedding_ = weight("embeddings.position", {config_.max_positions, d});
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "layer." + std::to_string(l) + ".";
        Block b;
        b.ln1_gamma = gain(p + "ln1.gamma", d);
        b.ln1_beta = bias(p + "ln1.beta", d);
        b.wq = weight(p + "attn.q.weight", {d, d});
        b.bq = bias(p + "attn.q.bias", d);
        b.wk = weight(p + "attn.k.weight", {d, d});
        b.bk = bias(p + "attn.k.bias", d);
        b.wv = weight(p + "attn.v.weight", {d, d});
        b.bv = bias(p + "attn.v.bias", d);
        b.wo = weight(p + "attn.o.weight", {d, d});
        b.bo = bias(p + "attn.o.bias", d);
        b.ln2_gamma = gain(p + "ln2.gamma", d);
        b.ln2_beta = bias(p + "ln2.beta", d);
        b.w_up = weight(p + "ffn.up.weight", {config_.ffn_dim, d});
        b.b_up = bias(p + "ffn.up.bias", config_.ffn_dim);
        b.w_down = weight(p + "ffn.down.weight", {d, config_.ffn_dim});
        b.b_down = bias(p + "ffn.down.bias", d);
        blocks_.push_back(std::move(b));
    }
    final_gamma_ = gain("final_ln.gamma", d);
    final_beta_ = bias("final_ln.beta", d);
    head_weight_ = config_.tied_head ? token_embedding_ : weight("mlm.weight", {config_.vocab_size, d});
    head_bias_ = bias("mlm.bias", config_.vocab_size);
}

Tensor EncoderModel::forward(std::span<const TokenId> ids, Rng* dropout_rng) const {
    if (ids.empty()) {
        throw Error("encoder: empty input");
    }
    if (ids.size() > config_.max_positions) {
        throw Error("encoder: input length " + std::to_string(ids.size()) + " exceeds max_positions " +
                    std::to_string(config_.max_positions));
    }
    const std::size_t len = ids.size();
    std::vector<std::size_t> positions(len);
    std::vector<unsigned char> key_mask(len);
    for (std::size_t i = 0; i < len; ++i) {
        positions[i] = i;
        key_mask[i] = ids[i] != Vocabulary::kPad ? 1 : 0;
    }
    auto drop = [&](const Tensor& x) {
        return dropout_rng != nullptr ? ops::dropout(x, config_.dropout, *dropout_rng) : x;
    };

    Tensor h = ops::add(ops::embedding(token_embedding_, ids), ops::gather_rows(position_embedding_, positions));
    h = drop(h);
    ops::AttentionSpec spec;
    spec.query_heads = config_.heads;
    spec.kv_heads = config_.heads;
    spec.head_dim = config_.dim / config_.heads;
    spec.causal = false;
    spec.key_mask = key_mask;
    for (const Block& b : blocks_) {
        Tensor x = ops::layer_norm(h, b.ln1_gamma, b.ln1_beta);
        Tensor att = ops::attention(ops::linear(x, b.wq, b.bq), ops::linear(x, b.wk, b.bk),
                                    ops::linear(x, b.wv, b.bv), spec);
        h = ops::add(h, drop(ops::linear(att, b.wo, b.bo)));
        x = ops::layer_norm(h, b.ln2_gamma, b.ln2_beta);
        Tensor ff = ops::linear(ops::gelu(ops::linear(x, b.w_up, b.b_up)), b.w_down, b.b_down);
        h = ops::add(h, drop(ff));
    }
    return ops::layer_norm(h, final_gamma_, final_beta_);
}

Tensor EncoderModel::mlm_logits(const Tensor& hidden, std::span<const std::size_t> positions) const {
    return ops::linear(ops::gather_rows(hidden, positions), head_weight_, head_bias_);
}

Tensor verbalizer_loss(const Tensor& slot_logits, text::Label label, const VerbalizerPair& pair) {
    if (slot_logits.rank() != 2 || slot_logits.shape()[0] != 2) {
        throw ShapeError("verbalizer_loss: expected [2 x V] slot logits, got " + shape_string(slot_logits.shape()));
    }
    const auto& target = pair.for_label(label);
    const std::size_t selected[2] = {0, 1};
    const int targets[2] = {target[0], target[1]};
    return ops::masked_cross_entropy(slot_logits, targets, selected);
}

VerbalizerPrediction predict_verbalizer(const Tensor& slot_logits, const VerbalizerPair& pair) {
    if (slot_logits.rank() != 2 || slot_logits.shape()[0] != 2) {
        throw ShapeError("predict_verbalizer: expected [2 x V] slot logits, got " +
                         shape_string(slot_logits.shape()));
    }
    const std::size_t v = slot_logits.shape()[1];
    auto logits = slot_logits.data();
    VerbalizerPrediction out;
    for (std::size_t slot = 0; slot < 2; ++slot) {
        const float* row = logits.data() + slot * v;
        double mx = row[0];
        for (std::size_t j = 1; j < v; ++j) {
            mx = std::max(mx, static_cast<double>(row[j]));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) {
            z += std::exp(static_cast<double>(row[j]) - mx);
        }
        const double log_z = mx + std::log(z);
        out.human_score += static_cast<double>(row[pair.human[slot]]) - log_z;
        out.ai_score += static_cast<double>(row[pair.ai[slot]]) - log_z;
    }
    out.label = out.ai_score > out.human_score ? text::Label::kAi : text::Label::kHuman;
    out.p_ai = 1.0 / (1.0 + std::exp(out.human_score - out.ai_score));
    return out;
}

Tensor slot_logits(const EncoderModel& model, const text::EncoderPromptEncoding& prompt, Rng* dropout_rng) {
    Tensor hidden = model.forward(prompt.ids, dropout_rng);
    return model.mlm_logits(hidden, prompt.mask_slots);
}

float pretrain_mlm_step(EncoderModel& model, std::span<const text::MaskedBatch> batch, AdamW& optimizer,
                        Rng* dropout_rng) {
    std::vector<const text::MaskedBatch*> usable;
    for (const auto& item : batch) {
        if (!item.positions.empty()) {
            usable.push_back(&item);
        }
    }
    if (usable.empty()) {
        throw Error("pretrain_mlm_step: batch has no masked positions");
    }
    return nn::accumulate_and_step(model.params(), optimizer, usable.size(), [&](std::size_t i) {
        const auto& item = *usable[i];
        Tensor hidden = model.forward(item.input_ids, dropout_rng);
        Tensor logits = model.mlm_logits(hidden, item.positions);
        std::vector<std::size_t> rows(item.positions.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            rows[r] = r;
        }
        return ops::masked_cross_entropy(logits, item.targets, rows);
    });
}

float finetune_step(EncoderModel& model, std::span<const text::EncoderPromptEncoding> prompts,
                    std::span<const text::Label> labels, const VerbalizerPair& pair, AdamW& optimizer,
                    Rng* dropout_rng) {
    if (prompts.size() != labels.size()) {
        throw Error("finetune_step: " + std::to_string(prompts.size()) + " prompts but " +
                    std::to_string(labels.size()) + " labels");
    }
    return nn::accumulate_and_step(model.params(), optimizer, prompts.size(), [&](std::size_t i) {
        return verbalizer_loss(slot_logits(model, prompts[i], dropout_rng), labels[i], pair);
    });
}

} // namespace aitd::encoder
