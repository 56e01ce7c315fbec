#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "geodesy/lattice.hpp"

namespace geodesy {

/// Round-trip decimal form of a double ("inf" for infinities).
inline std::string format_real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_fixed(double x, int decimals) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

/// Coordinates joined by `sep`.
template <std::size_t D>
std::string join_coords(const Vertex<D>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < D; ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

/// "x0,x1,..." header fragment with an optional prefix.
template <std::size_t D>
std::string coord_header(const std::string& prefix = "x") {
  std::string s;
  for (std::size_t i = 0; i < D; ++i) {
    if (i) s += ',';
    s += prefix + std::to_string(i);
  }
  return s;
}

}  // namespace geodesy
