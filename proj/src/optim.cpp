// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/optim.hpp"

#include <algorithm>
#include <cmath>

#include "aitd/error.hpp"

namespace aitd {

Tensor& ParameterStore::add(std::string name, Tensor tensor, DecayPolicy decay) {
    if (contains(name)) {
        throw ConfigError("duplicate parameter name: " + name);
    }
    tensor.set_requires_grad(true);
    params_.push_back(Parameter{std::move(name), std::move(tensor), decay, false});
    return params_.back().tensor;
}

void ParameterStore::remove(const std::string& name) {
    auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
    if (it == params_.end()) {
        throw ConfigError("unknown parameter: " + name);
    }
    params_.erase(it);
}

bool ParameterStore::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

Parameter& ParameterStore::get(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) {
            return p;
        }
    }
    throw ConfigError("unknown parameter: " + name);
}

const Parameter& ParameterStore::get(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->get(name);
}

void ParameterStore::set_frozen(const std::string& name, bool frozen) {
    auto& p = get(name);
    p.frozen = frozen;
    p.tensor.set_requires_grad(!frozen);
}

std::vector<Parameter*> ParameterStore::trainable() {
    std::vector<Parameter*> out;
    for (auto& p : params_) {
        if (!p.frozen) {
            out.push_back(&p);
        }
    }
    return out;
}

std::size_t ParameterStore::count_elements(bool trainable_only) const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        if (!trainable_only || !p.frozen) {
            n += p.tensor.numel();
        }
    }
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) {
        if (!p.frozen) {
            p.tensor.zero_grad();
        }
    }
}

AdamW::AdamW(AdamWConfig config) : config_(config) {
    groups_[static_cast<std::size_t>(DecayPolicy::kDecay)] = ParamGroup{config.lr, config.weight_decay, false};
    groups_[static_cast<std::size_t>(DecayPolicy::kExempt)] = ParamGroup{config.lr, 0.0f, true};
}

void AdamW::set_lr(float lr) {
    for (auto& g : groups_) {
        g.lr = lr;
    }
}

void AdamW::step(ParameterStore& store) {
    auto params = store.trainable();
    for (const Parameter* p : params) {
        if (!p->tensor.has_grad()) {
            throw Error("AdamW: parameter '" + p->name + "' has no gradient");
        }
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(steps_));
    const float b1 = config_.beta1, b2 = config_.beta2, eps = config_.eps;
    for (Parameter* p : params) {
        const ParamGroup& group = groups_[static_cast<std::size_t>(p->decay)];
        auto data = p->tensor.data();
        auto grad = p->tensor.grad();
        auto& m = moments_[p->name];
        if (m.first.size() != data.size()) {
            m.first.assign(data.size(), 0.0f);
            m.second.assign(data.size(), 0.0f);
        }
        const float decay = 1.0f - group.lr * group.weight_decay;
        const float step_size = static_cast<float>(group.lr / bc1);
        const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
        for (std::size_t i = 0; i < data.size(); ++i) {
            const float g = grad[i];
            m.first[i] = b1 * m.first[i] + (1.0f - b1) * g;
            m.second[i] = b2 * m.second[i] + (1.0f - b2) * g * g;
            data[i] *= decay;
            data[i] -= step_size * m.first[i] / (std::sqrt(m.second[i]) * inv_sqrt_bc2 + eps);
        }
    }
}

float linear_decay_rate(std::uint64_t step, std::uint64_t total_steps, float lr0) {
    if (total_steps == 0) {
        throw ConfigError("linear decay schedule needs total_steps > 0");
    }
    if (step > total_steps) {
        throw ConfigError("schedule step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
    }
    return lr0 * (1.0f - static_cast<float>(step) / static_cast<float>(total_steps));
}

float sgd_linear_decay_step(ParameterStore& store, std::uint64_t step, std::uint64_t total_steps, float lr0) {
    const float rate = linear_decay_rate(step, total_steps, lr0);
    for (Parameter* p : store.trainable()) {
        if (!p->tensor.has_grad()) {
            throw Error("SGD: parameter '" + p->name + "' has no gradient");
        }
        auto data = p->tensor.data();
        auto grad = p->tensor.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] -= rate * grad[i];
        }
    }
    return rate;
}

} // namespace aitd
