// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace evograd {

// All randomness in the project flows through explicitly seeded generators.
using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent sub-seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic sub-seed for stream `stream` of a root seed. Distinct streams
// give statistically independent generators.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t s = root ^ (0xA0761D6478BD642FULL * (stream + 1));
    std::uint64_t a = splitmix64(s);
    return splitmix64(s) ^ a;
}

}  // namespace evograd
