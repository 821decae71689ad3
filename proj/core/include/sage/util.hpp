#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace sage {

// FNV-1a 64-bit. Used for checkpoint payload integrity and parameter hashes.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

// Current time as unix seconds. Honors SOURCE_DATE_EPOCH when set, so
// artifacts that embed timestamps can be reproduced bit-exactly.
std::int64_t now_unix();

// Fixed-width decimal rendering ("%.3f" for reports, "%.17g" round-trip).
std::string format_fixed(double value, int decimals);
std::string format_full(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace sage
