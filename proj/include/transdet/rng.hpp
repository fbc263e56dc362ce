#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace transdet {

using Rng = std::mt19937_64;

/// Expands a user-visible seed into an independent named sub-stream seed.
/// Deterministic across platforms.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t base, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

}  // namespace transdet
