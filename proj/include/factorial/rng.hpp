#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace factorial {

// All randomness flows from one user seed. Each consumer asks for a named
// stream; the stream seed is splitmix64(seed ^ fnv1a(name) + counter).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                                 std::uint64_t counter = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(seed ^ h) + counter);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view stream, std::uint64_t counter = 0) {
    return Rng(derive_seed(seed, stream, counter));
}

// Uniform in [0, 1) with 53 random bits; mt19937_64 output is fully specified,
// so this is reproducible across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

// Box-Muller without caching the second draw, so every call consumes
// exactly two uniforms.
inline double standard_normal(Rng& rng) {
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 == 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace factorial
