#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace geodesy {

/// Raised when a vertex or edge lies outside the box it is queried against.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <std::size_t D>
using Vertex = std::array<int, D>;

template <std::size_t D>
using RealVector = std::array<double, D>;

template <std::size_t D>
constexpr Vertex<D> origin() {
  Vertex<D> v{};
  return v;
}

template <std::size_t D>
constexpr Vertex<D> unit(int axis, int length = 1) {
  Vertex<D> v{};
  v[axis] = length;
  return v;
}

template <std::size_t D>
constexpr Vertex<D> operator+(Vertex<D> a, const Vertex<D>& b) {
  for (std::size_t i = 0; i < D; ++i) a[i] += b[i];
  return a;
}

template <std::size_t D>
constexpr Vertex<D> operator-(Vertex<D> a, const Vertex<D>& b) {
  for (std::size_t i = 0; i < D; ++i) a[i] -= b[i];
  return a;
}

template <std::size_t D>
constexpr Vertex<D> operator-(Vertex<D> a) {
  for (std::size_t i = 0; i < D; ++i) a[i] = -a[i];
  return a;
}

template <std::size_t D>
double dot(const RealVector<D>& rho, const Vertex<D>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i) s += rho[i] * v[i];
  return s;
}

template <std::size_t D>
int sup_norm(const Vertex<D>& v) {
  int m = 0;
  for (std::size_t i = 0; i < D; ++i) m = std::max(m, std::abs(v[i]));
  return m;
}

template <std::size_t D>
double euclidean_norm(const Vertex<D>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i) s += double(v[i]) * v[i];
  return std::sqrt(s);
}

template <std::size_t D>
std::string to_string(const Vertex<D>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < D; ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + ")";
}

template <std::size_t D>
struct VertexHash {
  std::size_t operator()(const Vertex<D>& v) const {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (std::size_t i = 0; i < D; ++i) h = (h ^ std::uint64_t(std::uint32_t(v[i]))) * 0x100000001B3ULL;
    return std::size_t(h ^ (h >> 29));
  }
};

/// Undirected nearest-neighbour edge {base, base + e_axis}. The base is the
/// lexicographically smaller endpoint, so every edge has exactly one id.
template <std::size_t D>
struct EdgeId {
  Vertex<D> base{};
  int axis = 0;

  Vertex<D> tip() const { return base + unit<D>(axis); }

  friend auto operator<=>(const EdgeId&, const EdgeId&) = default;
};

template <std::size_t D>
bool adjacent(const Vertex<D>& u, const Vertex<D>& v) {
  int l1 = 0;
  for (std::size_t i = 0; i < D; ++i) l1 += std::abs(u[i] - v[i]);
  return l1 == 1;
}

template <std::size_t D>
EdgeId<D> make_edge(const Vertex<D>& u, const Vertex<D>& v) {
  if (!adjacent<D>(u, v)) {
    throw std::invalid_argument("make_edge: " + to_string<D>(u) + " and " + to_string<D>(v) +
                                " are not lattice neighbours");
  }
  for (std::size_t i = 0; i < D; ++i) {
    if (u[i] != v[i]) return u[i] < v[i] ? EdgeId<D>{u, int(i)} : EdgeId<D>{v, int(i)};
  }
  return {};  // unreachable
}

/// Axis-aligned box [lo, hi] in Z^D with lexicographic vertex indexing
/// (axis 0 most significant), so index order matches vertex order.
template <std::size_t D>
class Box {
 public:
  static_assert(D >= 2, "lattice dimension must be at least 2");

  Box() : Box(origin<D>(), origin<D>()) {}

  Box(const Vertex<D>& lo, const Vertex<D>& hi) : lo_(lo), hi_(hi) {
    std::size_t count = 1;
    for (int i = int(D) - 1; i >= 0; --i) {
      if (lo[i] > hi[i]) throw std::invalid_argument("Box: lo exceeds hi on axis " + std::to_string(i));
      const std::size_t extent = std::size_t(std::int64_t(hi[i]) - lo[i] + 1);
      stride_[i] = count;
      if (extent > kMaxVertices / count) throw std::invalid_argument("Box: vertex count exceeds addressable range");
      count *= extent;
    }
    size_ = count;
  }

  /// [-radius, radius]^D
  static Box cube(int radius) {
    Vertex<D> lo, hi;
    lo.fill(-radius);
    hi.fill(radius);
    return Box(lo, hi);
  }

  const Vertex<D>& lo() const { return lo_; }
  const Vertex<D>& hi() const { return hi_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  int extent(int axis) const { return hi_[axis] - lo_[axis] + 1; }

  bool contains(const Vertex<D>& v) const {
    for (std::size_t i = 0; i < D; ++i)
      if (v[i] < lo_[i] || v[i] > hi_[i]) return false;
    return true;
  }

  bool contains(const EdgeId<D>& e) const {
    return e.axis >= 0 && e.axis < int(D) && contains(e.base) && e.base[e.axis] < hi_[e.axis];
  }

  bool contains(const Box& other) const { return contains(other.lo_) && contains(other.hi_); }

  bool on_boundary(const Vertex<D>& v) const {
    for (std::size_t i = 0; i < D; ++i)
      if (v[i] == lo_[i] || v[i] == hi_[i]) return true;
    return false;
  }

  std::size_t index(const Vertex<D>& v) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < D; ++i) idx += std::size_t(v[i] - lo_[i]) * stride_[i];
    return idx;
  }

  std::size_t checked_index(const Vertex<D>& v) const {
    if (!contains(v)) throw DomainError("vertex " + to_string<D>(v) + " lies outside the box");
    return index(v);
  }

  Vertex<D> vertex(std::size_t idx) const {
    Vertex<D> v;
    for (std::size_t i = 0; i < D; ++i) {
      v[i] = lo_[i] + int(idx / stride_[i]);
      idx %= stride_[i];
    }
    return v;
  }

  Box translated(const Vertex<D>& z) const { return Box(lo_ + z, hi_ + z); }

  friend bool operator==(const Box& a, const Box& b) { return a.lo_ == b.lo_ && a.hi_ == b.hi_; }

 private:
  static constexpr std::size_t kMaxVertices = std::size_t(1) << 40;

  Vertex<D> lo_, hi_;
  std::array<std::size_t, D> stride_{};
  std::size_t size_ = 1;
};

/// Direction codes for the 2*D neighbours of a vertex: code = 2*axis + (positive ? 1 : 0).
inline constexpr std::int8_t kNoDirection = -1;

template <std::size_t D>
constexpr Vertex<D> step(std::int8_t code) {
  return unit<D>(code / 2, (code & 1) ? 1 : -1);
}

}  // namespace geodesy
