// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/rng.hpp"

#include <cmath>
#include <numbers>

namespace aitd {

float Rng::normal(float mean, float stddev) {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * static_cast<float>(z);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint32_t fnv1a32(std::string_view bytes, std::uint32_t seed) {
    std::uint32_t h = 0x811c9dc5U ^ seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x01000193U;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    // splitmix64 finalizer over master ^ hash(label)
    std::uint64_t z = master ^ fnv1a64(label);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace aitd
