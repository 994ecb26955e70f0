#pragma once

#include <cmath>
#include <cstdint>

namespace driftbench {

// Stateless 64-bit mixer (splitmix64 finalizer). All randomness in the
// project is derived from a master seed through this function, so runs are
// reproducible across platforms and independent of any global generator.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives an independent child seed. Used for stream splitting: every
// consumer (stream batches, dropout masks, restoration, per-run seeds)
// owns a substream keyed by (parent seed, tag).
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag ^ 0xA5A5A5A5DEADBEEFULL));
}

// Counter-based generator: a splitmix64 walk from a mixed starting state.
// Value type; copying forks the sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : state_(mix64(substream(seed, stream))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bits of mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    bool next_bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // Guard the log; next_double can return exactly 0.
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace driftbench
