#pragma once

#include <cstdint>
#include <string_view>

namespace bns {

// FNV-1a, 64-bit. The feature bins depend on this hash staying byte-for-byte
// stable across builds and platforms, so it is spelled out here instead of
// delegating to std::hash (which is unspecified).
inline constexpr std::uint64_t kFnv64Offset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnv64Prime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t state = kFnv64Offset) {
  for (char c : data) {
    state ^= static_cast<unsigned char>(c);
    state *= kFnv64Prime;
  }
  return state;
}

}  // namespace bns
