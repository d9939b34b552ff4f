#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace wafersim {

/// Shortest round-trip decimal form; NaN is written as an empty field.
inline void append_number(std::string& out, double x) {
  if (std::isnan(x)) return;
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, res.ptr);
}

inline std::string number(double x) {
  std::string s;
  append_number(s, x);
  return s;
}

}  // namespace wafersim
