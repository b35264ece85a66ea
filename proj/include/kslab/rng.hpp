#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kslab {

/** splitmix64 finalizer; used to decorrelate seed components. */
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/** Deterministic combination of a base seed with a stream index (volume, epoch, ...). */
inline uint64_t mix_seed(uint64_t base, uint64_t stream) {
    return splitmix64(splitmix64(base) ^ (stream + 0x9e3779b97f4a7c15ull));
}

/**
 * Seeded generator with fixed output mapping.
 *
 * The engine is std::mt19937_64 (bit-exact per the standard); all conversions
 * to bounded ints, uniforms, and normals are implemented here rather than via
 * std distributions, whose outputs vary across standard libraries.
 */
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /** Unbiased integer in [0, n) by rejection. */
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    /** Uniform double in [0, 1) with 53 random bits. */
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /** Standard normal via Box-Muller; second value of each pair is cached. */
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, r2;
        do {
            u = uniform01();
            r2 = u;
        } while (r2 <= 0.0);
        const double v = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u));
        const double ang = 2.0 * 3.14159265358979323846 * v;
        spare_ = mag * std::sin(ang);
        have_spare_ = true;
        return mag * std::cos(ang);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace kslab
