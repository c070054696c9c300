#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace wks {

/// FNV-1a 64-bit. Used for config hashes and content-derived seed streams.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(text.data(), text.size());
}

/// Folds a double's bit pattern into a running hash.
inline std::uint64_t fnv1a64_mix(std::uint64_t h, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  return fnv1a64(&bits, sizeof(bits), h);
}

inline std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t value) {
  return fnv1a64(&value, sizeof(value), h);
}

}  // namespace wks
