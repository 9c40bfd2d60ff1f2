#pragma once

#include <cmath>
#include <cstdint>

namespace mothpose {

/// Deterministic pseudo-random generator (splitmix64 core).
///
/// The standard library distributions are implementation-defined, so the few
/// draws we need (uniform reals/ints, gaussians) are implemented here to keep
/// augmentation streams and weight initialization bit-reproducible across
/// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent stream for (seed, index) pairs. Used for per-sample
    /// augmentation seeds so generation order does not matter.
    static Rng derive(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix64(mix64(seed) ^ mix64(index + 0x9e3779b97f4a7c15ull)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix64(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64()); // full 64-bit range
        // multiply-shift; bias is < 2^-53 for the ranges used here
        const std::uint64_t x = next_u64() >> 11;
        return lo + static_cast<std::int64_t>((static_cast<unsigned __int128>(x) * span) >> 53);
    }

    /// Gaussian via Box-Muller; caches the second variate.
    double gaussian(double mean, double stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

private:
    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace mothpose
