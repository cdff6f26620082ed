#pragma once

#include <cstdint>
#include <random>

namespace buyback {

// splitmix64 finalizer; used to decorrelate (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed namespaces so that training and reporting never share paths.
enum class SeedDomain : std::uint64_t {
    Evaluation = 0x45564131ULL,
    Training = 0x54524e31ULL,
    Optimizer = 0x4f505431ULL,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedDomain domain) noexcept {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(domain)));
}

/// Identifies one reproducible random stream: path `stream` of experiment `seed`.
struct RngKey {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    [[nodiscard]] std::mt19937_64 engine() const {
        const std::uint64_t s = mix64(mix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
        std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        return std::mt19937_64(seq);
    }
};

}  // namespace buyback
