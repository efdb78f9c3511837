#pragma once

#include <cstdint>

namespace lintrain {

/// SplitMix64 step function (Vigna's reference constants). Used both as a
/// standalone mixer and to expand 64-bit seeds into xoshiro state.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// One-shot avalanche of a 64-bit value.
inline std::uint64_t mix64(std::uint64_t x) {
    return splitmix64_next(x);
}

/// Derives an independent stream seed from a base seed and a stream index
/// (used for per-epoch shuffles and similar).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    splitmix64_next(s);
    s += 0xD1B54A32D192ED03ULL * (stream + 1);
    return splitmix64_next(s);
}

/// xoshiro256** 1.0 (Blackman & Vigna reference algorithm), seeded through
/// SplitMix64. Reproducible across platforms; no standard-library engine is
/// used anywhere results must be stable.
class Xoshiro256 {
  public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on the open interval (0, 1); never returns an endpoint.
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform on the open interval (-bound, +bound).
    double next_symmetric(double bound) {
        return bound * (2.0 * next_unit_open() - 1.0);
    }

    /// Standard normal via Box-Muller; one value cached per pair of draws.
    double next_normal();

    /// Uniform integer in [0, n), n > 0.
    std::uint64_t next_below(std::uint64_t n) {
        return next_u64() % n;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

} // namespace lintrain
