#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>

namespace kcache {

// Product of u64 factors in 128-bit arithmetic; throws std::overflow_error
// if the result does not fit in 64 bits.
inline std::uint64_t checked_mul(std::initializer_list<std::uint64_t> factors) {
  unsigned __int128 acc = 1;
  for (std::uint64_t f : factors) {
    acc *= f;
    if (acc > static_cast<unsigned __int128>(UINT64_MAX)) {
      throw std::overflow_error("checked_mul: product exceeds 64 bits");
    }
  }
  return static_cast<std::uint64_t>(acc);
}

}  // namespace kcache
