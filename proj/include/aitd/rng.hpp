// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace aitd {

/// Seeded random stream. The engine is std::mt19937_64; the float transforms
/// are spelled out here so streams replay identically across standard
/// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    /// Gaussian sample via Box-Muller.
    float normal(float mean, float stddev);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent seed for a named component from a master seed, so
/// adding a component never shifts another component's stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// 32-bit FNV-1a over raw bytes, starting from the standard offset basis
/// XOR `seed`.
std::uint32_t fnv1a32(std::string_view bytes, std::uint32_t seed = 0);

} // namespace aitd
