#pragma once

// Seeded random source with platform-independent output.
//
// std::uniform_real_distribution and std::normal_distribution are
// implementation-defined, so the variates are derived directly from the
// mt19937_64 bit stream to keep CSV output identical across toolchains.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace shadowcast {

/// SplitMix64 finalizer; maps a counter to a well-mixed 64-bit seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of the `counter`-th trial under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    return splitmix64(splitmix64(master) + counter);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the second variate is discarded so the
    /// stream position depends only on the number of calls.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace shadowcast
