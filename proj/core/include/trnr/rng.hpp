#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace trnr {

using Rng = std::mt19937_64;

/// SplitMix64 mix of (seed, stream). Used to give every Monte-Carlo trial,
/// worker and sub-component its own independent generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

/// Full textual generator state (as produced by operator<<), for checkpoints.
std::string rng_state(const Rng& rng);
void restore_rng_state(Rng& rng, const std::string& state);

/// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace trnr
