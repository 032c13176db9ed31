// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aitd/tensor.hpp"

namespace aitd {

/// How a parameter is treated by weight decay.
enum class DecayPolicy : std::uint8_t {
    kDecay,
    /// Biases and normalization gains.
    kExempt,
};

struct Parameter {
    std::string name;
    Tensor tensor;
    DecayPolicy decay = DecayPolicy::kDecay;
    /// Frozen parameters take part in the forward pass but never train.
    bool frozen = false;
};

/// Ordered registry of named model parameters. Registration order is the
/// checkpoint record order.
class ParameterStore {
public:
    Tensor& add(std::string name, Tensor tensor, DecayPolicy decay = DecayPolicy::kDecay);
    void remove(const std::string& name);

    bool contains(const std::string& name) const;
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;

    void set_frozen(const std::string& name, bool frozen);

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }

    std::vector<Parameter*> trainable();
    std::size_t count_elements(bool trainable_only) const;

    /// Allocates zeroed gradients on every trainable parameter.
    void zero_grad();

private:
    std::vector<Parameter> params_;
};

struct AdamWConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.01f;
};

/// Hyperparameters of one parameter group.
struct ParamGroup {
    float lr = 0.0f;
    float weight_decay = 0.0f;
    bool decay_exempt = false;
};

/// AdamW with decoupled weight decay. Parameters flagged DecayPolicy::kExempt
/// form a group whose weight decay is zero.
class AdamW {
public:
    explicit AdamW(AdamWConfig config);

    /// One update over every trainable parameter of `store`. Each must hold
    /// a gradient; a missing one is an error naming the parameter.
    void step(ParameterStore& store);

    void set_lr(float lr);
    float lr() const { return groups_[0].lr; }
    std::uint64_t step_count() const { return steps_; }
    const ParamGroup& group(DecayPolicy policy) const { return groups_[static_cast<std::size_t>(policy)]; }

    struct Moments {
        std::vector<float> first;
        std::vector<float> second;
    };
    const std::map<std::string, Moments>& moments() const { return moments_; }

private:
    AdamWConfig config_;
    ParamGroup groups_[2];
    std::uint64_t steps_ = 0;
    std::map<std::string, Moments> moments_;
};

/// lr0 * (1 - step / total_steps).
float linear_decay_rate(std::uint64_t step, std::uint64_t total_steps, float lr0);

/// Plain gradient descent at the linearly decayed rate. Returns the rate used.
float sgd_linear_decay_step(ParameterStore& store, std::uint64_t step, std::uint64_t total_steps, float lr0);

} // namespace aitd
