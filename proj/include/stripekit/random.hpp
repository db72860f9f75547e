#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace stripekit {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to fan one run seed out into independent streams.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix_seed(base);
    for (auto p : path) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
    return s;
}

/// Uniform double in [lo, hi) from the top 53 bits; avoids the
/// implementation-defined algorithm behind std::uniform_real_distribution.
inline double uniform(Rng& rng, double lo, double hi) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
    const auto span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<int>(rng() % span);
}

/// Standard normal via Box-Muller on our own uniforms (portable across standard libraries).
inline double standard_normal(Rng& rng) {
    double u1 = uniform(rng, 0.0, 1.0);
    while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
    const double u2 = uniform(rng, 0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace stripekit
