// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "aitd/error.hpp"
#include "aitd/nn.hpp"
#include "aitd/ops.hpp"

namespace aitd::decoder {

using text::TokenId;

void DecoderConfig::validate() const {
    if (layers == 0 || dim == 0 || query_heads == 0 || kv_heads == 0 || head_dim == 0 || ffn_dim == 0 ||
        max_positions == 0) {
        throw ConfigError("decoder: layers, dims, heads and max_positions must be positive");
    }
    if (query_heads % kv_heads != 0) {
        throw ConfigError("decoder: query_heads " + std::to_string(query_heads) + " not divisible by kv_heads " +
                          std::to_string(kv_heads));
    }
    if (head_dim % 2 != 0) {
        throw ConfigError("decoder: head_dim must be even for rotary embeddings, got " + std::to_string(head_dim));
    }
    if (vocab_size <= text::Vocabulary::kSpecialCount) {
        throw ConfigError("decoder: vocab_size must exceed the special token count");
    }
    if (!(rope_base > 1.0f)) {
        throw ConfigError("decoder: rope_base must exceed 1");
    }
}

nlohmann::json DecoderConfig::to_json() const {
    return {{"layers", layers},         {"dim", dim},
            {"query_heads", query_heads}, {"kv_heads", kv_heads},
            {"head_dim", head_dim},     {"ffn_dim", ffn_dim},
            {"vocab_size", vocab_size}, {"max_positions", max_positions},
            {"rope_base", rope_base},   {"qkv_bias", qkv_bias}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& doc) {
    DecoderConfig c;
    nn::read_field(doc, "layers", c.layers);
    nn::read_field(doc, "dim", c.dim);
    nn::read_field(doc, "query_heads", c.query_heads);
    nn::read_field(doc, "kv_heads", c.kv_heads);
    nn::read_field(doc, "head_dim", c.head_dim);
    nn::read_field(doc, "ffn_dim", c.ffn_dim);
    nn::read_field(doc, "vocab_size", c.vocab_size);
    nn::read_field(doc, "max_positions", c.max_positions);
    nn::read_field(doc, "rope_base", c.rope_base);
    nn::read_field(doc, "qkv_bias", c.qkv_bias);
    c.validate();
    return c;
}

std::string_view pooling_name(Pooling pooling) {
    switch (pooling) {
    case Pooling::kFirst:
        return "first";
    case Pooling::kLast:
        return "last";
    case Pooling::kMean:
        return "mean";
    }
    return "first";
}

std::optional<Pooling> parse_pooling(std::string_view name) {
    if (name == "first") {
        return Pooling::kFirst;
    }
    if (name == "last") {
        return Pooling::kLast;
    }
    if (name == "mean") {
        return Pooling::kMean;
    }
    return std::nullopt;
}

DecoderModel::DecoderModel(DecoderConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const std::size_t d = config_.dim;
    const std::size_t q_out = config_.query_heads * config_.head_dim;
    const std::size_t kv_out = config_.kv_heads * config_.head_dim;
    auto weight = [&](const std::string& name, Shape shape) {
        return params_.add(name, nn::normal_init(std::move(shape), rng));
    };
    auto gain = [&](const std::string& name, std::size_t n) {
        return params_.add(name, Tensor::full({n}, 1.0f), DecayPolicy::kExempt);
    };
    auto projection = [&](const std::string& prefix, const std::string& name, std::size_t out, std::size_t in,
                          bool with_bias) {
        Projection p;
        p.name = name;
        p.weight = weight(prefix + name + ".weight", {out, in});
        if (with_bias) {
            p.bias = params_.add(prefix + name + ".bias", Tensor::zeros({out}), DecayPolicy::kExempt);
        }
        return p;
    };

    token_embedding_ = weight("embed.token", {config_.vocab_size, d});
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string prefix = "layer." + std::to_string(l) + ".";
        Block b;
        b.attn_norm = gain(prefix + "attn_norm.gain", d);
        b.q = projection(prefix, "q", q_out, d, config_.qkv_bias);
        b.k = projection(prefix, "k", kv_out, d, config_.qkv_bias);
        b.v = projection(prefix, "v", kv_out, d, config_.qkv_bias);
        b.o = projection(prefix, "o", d, q_out, false);
        b.ffn_norm = gain(prefix + "ffn_norm.gain", d);
        b.gate = projection(prefix, "gate", config_.ffn_dim, d, false);
        b.up = projection(prefix, "up", config_.ffn_dim, d, false);
        b.down = projection(prefix, "down", d, config_.ffn_dim, false);
        blocks_.push_back(std::move(b));
    }
    final_norm_ = gain("final_norm.gain", d);
    head_weight_ = weight("head.weight", {2, d});
    head_bias_ = params_.add("head.bias", Tensor::zeros({2}), DecayPolicy::kExempt);
}

std::array<DecoderModel::Projection*, 7> DecoderModel::projections(Block& b) {
    return {&b.q, &b.k, &b.v, &b.o, &b.gate, &b.up, &b.down};
}

Tensor DecoderModel::project(const Tensor& x, const Projection& p) const {
    Tensor y = ops::linear(x, p.weight, p.bias);
    if (!p.lora_a.defined()) {
        return y;
    }
    Tensor delta = ops::linear(ops::linear(x, p.lora_a), p.lora_b);
    return ops::add(y, ops::scale(delta, lora_->scale()));
}

Tensor DecoderModel::forward(std::span<const TokenId> ids, std::vector<Tensor>* layer_outputs) const {
    if (ids.empty()) {
        throw Error("decoder: empty input");
    }
    if (ids.size() > config_.max_positions) {
        throw Error("decoder: input length " + std::to_string(ids.size()) + " exceeds max_positions " +
                    std::to_string(config_.max_positions));
    }
    std::vector<std::size_t> positions(ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = i;
    }
    ops::AttentionSpec spec;
    spec.query_heads = config_.query_heads;
    spec.kv_heads = config_.kv_heads;
    spec.head_dim = config_.head_dim;
    spec.causal = true;

    Tensor h = ops::embedding(token_embedding_, ids);
    for (const Block& b : blocks_) {
        Tensor x = ops::rms_norm(h, b.attn_norm);
        Tensor q = ops::rope(project(x, b.q), config_.query_heads, config_.head_dim, positions, config_.rope_base);
        Tensor k = ops::rope(project(x, b.k), config_.kv_heads, config_.head_dim, positions, config_.rope_base);
        Tensor v = project(x, b.v);
        h = ops::add(h, project(ops::attention(q, k, v, spec), b.o));
        x = ops::rms_norm(h, b.ffn_norm);
        Tensor gated = ops::mul(ops::silu(project(x, b.gate)), project(x, b.up));
        h = ops::add(h, project(gated, b.down));
        if (layer_outputs != nullptr) {
            layer_outputs->push_back(h);
        }
    }
    return ops::rms_norm(h, final_norm_);
}

Tensor DecoderModel::lm_logits(const Tensor& hidden) const { return ops::linear(hidden, token_embedding_); }

Tensor DecoderModel::classify(std::span<const TokenId> ids, Pooling pooling) const {
    Tensor hidden = forward(ids);
    Tensor pooled;
    switch (pooling) {
    case Pooling::kFirst: {
        const std::size_t row[1] = {0};
        pooled = ops::gather_rows(hidden, row);
        break;
    }
    case Pooling::kLast: {
        const std::size_t row[1] = {ids.size() - 1};
        pooled = ops::gather_rows(hidden, row);
        break;
    }
    case Pooling::kMean:
        pooled = ops::mean_rows(hidden);
        break;
    }
    return ops::linear(pooled, head_weight_, head_bias_);
}

void DecoderModel::inject_lora(const LoraSettings& settings, std::uint64_t seed) {
    if (lora_) {
        throw Error("inject_lora: adapters already attached");
    }
    if (settings.rank == 0) {
        throw ConfigError("inject_lora: rank must be at least 1");
    }
    for (Block& b : blocks_) {
        for (Projection* p : projections(b)) {
            const std::size_t out = p->weight.dim(0), in = p->weight.dim(1);
            if (settings.rank > std::min(in, out)) {
                throw ConfigError("inject_lora: rank " + std::to_string(settings.rank) + " exceeds min(in, out) = " +
                                  std::to_string(std::min(in, out)) + " for projection " + p->name);
            }
        }
    }
    for (const auto& name : backbone_parameter_names()) {
        params_.set_frozen(name, true);
    }
    Rng rng(seed);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        for (Projection* p : projections(blocks_[l])) {
            const std::string prefix = "lora." + std::to_string(l) + "." + p->name + ".";
            const std::size_t out = p->weight.dim(0), in = p->weight.dim(1);
            p->lora_a = params_.add(prefix + "A", nn::normal_init({settings.rank, in}, rng));
            p->lora_b = params_.add(prefix + "B", Tensor::zeros({out, settings.rank}));
        }
    }
    lora_ = settings;
}

void DecoderModel::merge_lora() {
    if (!lora_) {
        throw Error("merge_lora: no adapters attached");
    }
    const float scale = lora_->scale();
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        for (Projection* p : projections(blocks_[l])) {
            const std::size_t out = p->weight.dim(0), in = p->weight.dim(1), r = lora_->rank;
            auto w = p->weight.data();
            auto a = p->lora_a.data();
            auto bm = p->lora_b.data();
            for (std::size_t o = 0; o < out; ++o) {
                for (std::size_t i = 0; i < in; ++i) {
                    float delta = 0.0f;
                    for (std::size_t k = 0; k < r; ++k) {
                        delta += bm[o * r + k] * a[k * in + i];
                    }
                    w[o * in + i] += scale * delta;
                }
            }
            const std::string prefix = "lora." + std::to_string(l) + "." + p->name + ".";
            params_.remove(prefix + "A");
            params_.remove(prefix + "B");
            p->lora_a = Tensor();
            p->lora_b = Tensor();
        }
    }
    for (const auto& name : backbone_parameter_names()) {
        params_.set_frozen(name, false);
    }
    lora_.reset();
}

std::vector<std::string> DecoderModel::backbone_parameter_names() const {
    std::vector<std::string> out;
    for (const auto& p : params_.all()) {
        if (p.name.rfind("lora.", 0) != 0 && p.name.rfind("head.", 0) != 0) {
            out.push_back(p.name);
        }
    }
    return out;
}

float finetune_step(DecoderModel& model, std::span<const std::vector<TokenId>> inputs,
                    std::span<const text::Label> labels, Pooling pooling, AdamW& optimizer) {
    if (!model.has_adapters()) {
        throw Error("finetune_step: no LoRA adapters attached");
    }
    if (inputs.size() != labels.size()) {
        throw Error("finetune_step: " + std::to_string(inputs.size()) + " inputs but " +
                    std::to_string(labels.size()) + " labels");
    }
    return nn::accumulate_and_step(model.params(), optimizer, inputs.size(), [&](std::size_t i) {
        const int target[1] = {text::label_index(labels[i])};
        return ops::cross_entropy(model.classify(inputs[i], pooling), target);
    });
}

float pretrain_lm_step(DecoderModel& model, std::span<const std::vector<TokenId>> sequences, AdamW& optimizer) {
    if (model.has_adapters()) {
        throw Error("pretrain_lm_step: backbone pretraining requires a model without adapters");
    }
    std::vector<const std::vector<TokenId>*> usable;
    for (const auto& s : sequences) {
        if (s.size() >= 2) {
            usable.push_back(&s);
        }
    }
    if (usable.empty()) {
        throw Error("pretrain_lm_step: no sequence has at least two tokens");
    }
    auto& store = model.params();
    store.set_frozen("head.weight", true);
    store.set_frozen("head.bias", true);
    const float loss = nn::accumulate_and_step(store, optimizer, usable.size(), [&](std::size_t i) {
        const auto& seq = *usable[i];
        Tensor logits = model.lm_logits(model.forward(std::span(seq).first(seq.size() - 1)));
        std::vector<int> targets(seq.begin() + 1, seq.end());
        return ops::cross_entropy(logits, targets);
    });
    store.set_frozen("head.weight", false);
    store.set_frozen("head.bias", false);
    return loss;
}

double ai_probability(const Tensor& logits) {
    if (logits.numel() != 2) {
        throw ShapeError("ai_probability: expected two logits, got " + shape_string(logits.shape()));
    }
    const double diff = static_cast<double>(logits.data()[0]) - static_cast<double>(logits.data()[1]);
    return 1.0 / (1.0 + std::exp(diff));
}

} // namespace aitd::decoder
