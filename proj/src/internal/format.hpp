#pragma once

#include <cstdio>
#include <string>

namespace viap::detail {

/// Shortest-safe text form of a double: %.17g round-trips exactly.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace viap::detail
