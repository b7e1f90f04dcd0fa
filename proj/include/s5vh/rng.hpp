#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace s5vh {

/// Derives independent generators from one 64-bit seed, one per named
/// purpose ("masks", "init", "kmeans", "admm", ...), so that consuming
/// randomness in one stage never shifts another.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t derive(std::string_view name, std::uint64_t index = 0) const;
    std::mt19937_64 stream(std::string_view name, std::uint64_t index = 0) const {
        return std::mt19937_64(derive(name, index));
    }

private:
    std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Uniform double in [0, 1) from the top 53 bits; identical across
/// standard library implementations, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller on uniform01.
double normal(std::mt19937_64& rng);

/// Uniform integer in [0, n) by rejection.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

}  // namespace s5vh
