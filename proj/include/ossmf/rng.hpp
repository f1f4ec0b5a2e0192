#pragma once

// Counter-based random stream: the SplitMix64 finalizer evaluated at
// key + (counter + 1) * 0x9E3779B97F4A7C15. A stream is fully determined by
// its 64-bit key; substream keys are derived by re-mixing (seed, tag, index).
// Uniform doubles take the top 53 bits, Gaussians use Box-Muller on two
// uniforms, so any implementation of the same recipe reproduces the streams
// bit for bit.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ossmf {

inline constexpr std::uint64_t kRngGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rng_stream_value(std::uint64_t key, std::uint64_t counter) {
    return splitmix64_mix(key + (counter + 1) * kRngGamma);
}

constexpr std::uint64_t rng_derive_key(std::uint64_t seed, std::uint64_t tag,
                                       std::uint64_t index = 0) {
    return splitmix64_mix(splitmix64_mix(seed + tag * kRngGamma) + index * kRngGamma);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    CounterRng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0)
        : key_(rng_derive_key(seed, tag, index)) {}

    std::uint64_t next_u64() { return rng_stream_value(key_, counter_++); }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_unit_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Standard normal via Box-Muller; consumes two uniforms per pair and
    /// caches the second draw.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform integer in [0, n); n must be positive. Uses rejection to stay
    /// unbiased and reproducible across platforms.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ossmf
