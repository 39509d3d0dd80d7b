#pragma once

#include <cstdint>

namespace evmchaos {

/// Minimal counter-based generator (splitmix64).  Used instead of <random>
/// engines so that initial conditions are bit-identical across platforms,
/// compilers and worker counts.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

/// Independent stream for a (seed, grid index, member index) work item.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    SplitMix64 mixer(seed);
    std::uint64_t a = mixer.next();
    SplitMix64 gi(a ^ (0x9e3779b97f4a7c15ull * (i + 1)));
    std::uint64_t b = gi.next();
    return SplitMix64(b ^ (0xc2b2ae3d27d4eb4full * (j + 1)));
}

}  // namespace evmchaos
