#pragma once

// Seed derivation. Every run owns its generators; nothing is shared.
//
//   run seed    = mix64(mix64(master_seed) XOR run_index)
//   stream seed = mix64(run_seed + (stream_id + 1) * 0x9E3779B97F4A7C15)
//
// mix64 is the SplitMix64 finalizer. Pre-mixing the master seed keeps nearby
// master seeds from sharing run seeds. Separate streams for contexts, noise and
// policy randomness keep the context and noise sequences identical across
// policies that share a seed.

#include <cstdint>
#include <random>

namespace kbandit {

using Rng = std::mt19937_64;

[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

[[nodiscard]] constexpr std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run_index) noexcept {
    return mix64(mix64(master_seed) ^ run_index);
}

enum class Stream : std::uint64_t { Contexts = 0, Noise = 1, Policy = 2, Environment = 3, Folds = 4 };

[[nodiscard]] constexpr std::uint64_t stream_seed(std::uint64_t seed, Stream stream) noexcept {
    return mix64(seed + (static_cast<std::uint64_t>(stream) + 1) * 0x9E3779B97F4A7C15ULL);
}

[[nodiscard]] inline Rng make_rng(std::uint64_t seed, Stream stream) { return Rng(stream_seed(seed, stream)); }

}  // namespace kbandit
