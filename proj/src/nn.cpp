// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/nn.hpp"

#include <vector>

#include "aitd/error.hpp"
#include "aitd/ops.hpp"

namespace aitd::nn {

Tensor normal_init(Shape shape, Rng& rng, float stddev) {
    std::vector<float> v(shape_numel(shape));
    for (float& x : v) {
        x = rng.normal(0.0f, stddev);
    }
    return Tensor::from_data(std::move(shape), std::move(v));
}

float accumulate_and_step(ParameterStore& store, AdamW& optimizer, std::size_t count,
                          const std::function<Tensor(std::size_t)>& example_loss) {
    if (count == 0) {
        throw Error("training step on an empty batch");
    }
    store.zero_grad();
    std::vector<Tensor> losses;
    losses.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        losses.push_back(example_loss(i));
    }
    Tensor total = ops::scale(ops::add_n(losses), 1.0f / static_cast<float>(count));
    const float value = total.item();
    backward(total);
    optimizer.step(store);
    return value;
}

} // namespace aitd::nn
