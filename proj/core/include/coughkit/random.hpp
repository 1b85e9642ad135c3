#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coughkit {

using Rng = std::mt19937_64;

/// Stable 64-bit seed for an item-local stream. Depends only on the global
/// seed and the key bytes, so parallel and serial runs draw identical values.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

inline Rng make_rng(std::uint64_t seed, std::string_view key) { return Rng(derive_seed(seed, key)); }

}  // namespace coughkit
