// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small helpers shared by the transformer models.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include <json.hpp>

#include "aitd/optim.hpp"
#include "aitd/rng.hpp"
#include "aitd/tensor.hpp"

namespace aitd::nn {

inline constexpr float kInitStddev = 0.02f;

Tensor normal_init(Shape shape, Rng& rng, float stddev = kInitStddev);

/// Reads `key` from a JSON object when present, otherwise keeps `value`.
template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& value) {
    if (auto it = doc.find(key); it != doc.end()) {
        value = it->get<T>();
    }
}

/// Averages per-example losses, backpropagates once, and steps the
/// optimizer. Returns the mean loss. `example_loss(i)` builds the loss graph
/// for example i.
float accumulate_and_step(ParameterStore& store, AdamW& optimizer, std::size_t count,
                          const std::function<Tensor(std::size_t)>& example_loss);

} // namespace aitd::nn
