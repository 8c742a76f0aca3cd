#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace entail {

inline constexpr std::string_view kSeparator = "[SEP]";
inline constexpr std::string_view kNullPremise = "NULL";

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Joins the two sentences of a pair dataset into one sequence.
inline std::string join_pair(std::string_view first, std::string_view second) {
  std::string out = trim(first);
  out += ' ';
  out += kSeparator;
  out += ' ';
  out += trim(second);
  return out;
}

// FNV-1a, used for config and checkpoint fingerprints.
inline std::uint64_t fnv1a(std::string_view data,
                           std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace entail
