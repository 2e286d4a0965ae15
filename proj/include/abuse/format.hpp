#pragma once

// Shortest round-trip number formatting and strict parsing.

#include <charconv>
#include <string>
#include <string_view>

#include "abuse/error.hpp"

namespace abuse {

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Fixed notation with `decimals` digits after the point.
inline std::string format_fixed(double v, int decimals) {
  char buf[128];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, ErrorKind kind = ErrorKind::ParseError) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(kind, "bad number '" + std::string(text) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view text, ErrorKind kind = ErrorKind::ParseError) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(kind, "bad integer '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace abuse
