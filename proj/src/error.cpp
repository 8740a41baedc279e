// SPDX-License-Identifier: Apache-2.0

#include "ced/error.hpp"

#include <cstdio>

namespace ced {

BackendError::BackendError(const std::string& what, std::uint64_t context_hash)
    : Error(what + " [context " + hash_hex(context_hash) + "]"), context_hash_(context_hash) {}

DatasetError::DatasetError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line), detail_(what) {}

std::uint64_t context_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ced
