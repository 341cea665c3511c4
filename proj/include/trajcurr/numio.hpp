#pragma once

#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace trajcurr {

/// Shortest round-trip decimal form of a double. Locale-free and
/// deterministic, so files built from it are byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw std::invalid_argument("not a number: " + s);
  return v;
}

}  // namespace trajcurr
