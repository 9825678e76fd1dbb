#pragma once

#include <cmath>
#include <cstdint>

namespace tailrisk {

// Counter-based splittable random stream (splitmix64 output function).
// A stream is a pure function of (key, counter), so substreams derived for
// independent work units (one per sample row, back-test day, ...) produce
// identical output no matter how the units are scheduled across threads.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0,1); never returns an exact 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_exponential() { return -std::log(next_uniform()); }

    double next_gaussian();  // inverse-CDF transform, defined in special.cpp

private:
    std::uint64_t state_;
};

inline std::uint64_t mix_u64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xFF51AFD7ED558CCDULL;
    x ^= x >> 33;
    x *= 0xC4CEB9FE1A85EC53ULL;
    x ^= x >> 33;
    return x;
}

// Derives the key of an independent substream from a seed and up to two ids.
inline RngStream substream(std::uint64_t seed, std::uint64_t id0, std::uint64_t id1 = 0) {
    std::uint64_t k = mix_u64(seed + 0x632BE59BD9B4E019ULL);
    k = mix_u64(k ^ (id0 + 0x9E3779B97F4A7C15ULL));
    k = mix_u64(k ^ (id1 + 0x7F4A7C159E3779B9ULL));
    return RngStream(k);
}

}  // namespace tailrisk
