// Copyright 2026-present the trisampler project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Platform-stable randomness. std::mt19937_64 is bit-specified by the
// standard; the std::*_distribution adaptors are not, so the conversions
// to doubles and normals live here.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string_view>

namespace trisampler {

using Rng = std::mt19937_64;

inline std::uint64_t
splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// FNV-1a, 64 bit.
inline std::uint64_t
hash_string(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a global seed and a list of keys.
/// Used to fan a single experiment seed out to per-query / per-run streams.
inline std::uint64_t
stream_seed(std::uint64_t global, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(global);
    for (auto k : keys) {
        h = splitmix64(h ^ splitmix64(k));
    }
    return h;
}

inline std::uint64_t
stream_seed(std::uint64_t global, std::string_view key, std::uint64_t extra = 0) {
    return stream_seed(global, {hash_string(key), extra});
}

// Uniform in [0, 1) with 53 random bits.
inline double
uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Lemire-free rejection keeps it exact.
inline std::uint64_t
uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = rng();
    while (r >= limit) {
        r = rng();
    }
    return r % n;
}

// Box-Muller; consumes two words per call.
inline double
standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace trisampler
