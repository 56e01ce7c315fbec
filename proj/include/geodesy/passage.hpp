#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "geodesy/environment.hpp"
#include "geodesy/lattice.hpp"

namespace geodesy {

/// Absolute tolerance for comparing passage-time identities.
inline constexpr double kTolerance = 1e-9;

/// The target set meets no vertex of box ∩ mask.
class InfeasibleTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vertex has no path to the target inside the masked box.
class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <std::size_t D>
struct PointTarget {
  Vertex<D> vertex;
};

template <std::size_t D>
struct VertexSetTarget {
  std::vector<Vertex<D>> vertices;
};

/// {v : v . rho >= alpha}. Weights are positive, so the first entry into the
/// half-space is the passage time to the hyperplane v . rho = alpha.
template <std::size_t D>
struct HalfSpaceTarget {
  RealVector<D> rho{};
  double alpha = 0.0;
};

template <std::size_t D>
using TargetSpec = std::variant<PointTarget<D>, VertexSetTarget<D>, HalfSpaceTarget<D>>;

template <std::size_t D>
TargetSpec<D> point_target(const Vertex<D>& v) {
  return PointTarget<D>{v};
}

template <std::size_t D>
TargetSpec<D> vertex_set_target(std::vector<Vertex<D>> vs) {
  return VertexSetTarget<D>{std::move(vs)};
}

template <std::size_t D>
TargetSpec<D> half_space_target(const RealVector<D>& rho, double alpha) {
  return HalfSpaceTarget<D>{rho, alpha};
}

/// {v : v[axis] >= alpha}
template <std::size_t D>
TargetSpec<D> axis_half_space(int axis, double alpha) {
  RealVector<D> rho{};
  rho[axis] = 1.0;
  return HalfSpaceTarget<D>{rho, alpha};
}

template <std::size_t D>
void validate_target(const TargetSpec<D>& target) {
  if (const auto* s = std::get_if<VertexSetTarget<D>>(&target); s && s->vertices.empty())
    throw std::invalid_argument("vertex-set target is empty");
  if (const auto* h = std::get_if<HalfSpaceTarget<D>>(&target)) {
    bool nonzero = false;
    for (double r : h->rho) {
      if (!std::isfinite(r)) throw std::invalid_argument("half-space normal must be finite");
      nonzero = nonzero || r != 0.0;
    }
    if (!nonzero) throw std::invalid_argument("half-space normal must be nonzero");
    if (!std::isfinite(h->alpha)) throw std::invalid_argument("half-space level must be finite");
  }
}

template <std::size_t D>
bool target_contains(const TargetSpec<D>& target, const Vertex<D>& v) {
  if (const auto* p = std::get_if<PointTarget<D>>(&target)) return p->vertex == v;
  if (const auto* s = std::get_if<VertexSetTarget<D>>(&target))
    return std::find(s->vertices.begin(), s->vertices.end(), v) != s->vertices.end();
  const auto& h = std::get<HalfSpaceTarget<D>>(target);
  return dot<D>(h.rho, v) >= h.alpha;
}

struct SubgraphMask {
  enum class Kind { Full, HalfPlane };

  Kind kind = Kind::Full;
  int axis = 0;
  int threshold = 0;

  static SubgraphMask full() { return {}; }
  /// Keeps the edges whose endpoints both satisfy v[axis] >= threshold.
  static SubgraphMask half_plane(int axis = 0, int threshold = 0) { return {Kind::HalfPlane, axis, threshold}; }

  template <std::size_t D>
  bool keeps(const Vertex<D>& v) const {
    return kind == Kind::Full || v[axis] >= threshold;
  }

  friend bool operator==(const SubgraphMask&, const SubgraphMask&) = default;
};

template <std::size_t D>
struct GeodesicPath {
  std::vector<Vertex<D>> vertices;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  const Vertex<D>& front() const { return vertices.front(); }
  const Vertex<D>& back() const { return vertices.back(); }
  const Vertex<D>& operator[](std::size_t i) const { return vertices[i]; }

  friend bool operator==(const GeodesicPath&, const GeodesicPath&) = default;
};

template <std::size_t D>
class PassageEngine;

/// Result of one label-setting solve: T(., S) for every settled vertex plus
/// the predecessor forest pointing toward S.
template <std::size_t D>
class PassageMap {
 public:
  const Box<D>& box() const { return box_; }
  const TargetSpec<D>& target() const { return target_; }
  const SubgraphMask& mask() const { return mask_; }
  std::uint64_t env_fingerprint() const { return env_fingerprint_; }
  /// Relaxations whose candidate equalled the current label exactly.
  std::size_t tie_events() const { return tie_events_; }
  /// False when the solve stopped early; unsettled labels are then unknown.
  bool complete() const { return complete_; }

  bool settled(std::size_t idx) const { return settled_[idx] != 0; }
  bool settled(const Vertex<D>& v) const { return box_.contains(v) && settled(box_.index(v)); }

  /// T(v, S); nullopt when v is unreachable (or unsettled in a partial solve).
  std::optional<double> distance(const Vertex<D>& v) const {
    const auto idx = box_.checked_index(v);
    if (!settled(idx)) return std::nullopt;
    return dist_[idx];
  }

  /// Like distance() but throws Unreachable instead of returning nullopt.
  double at(const Vertex<D>& v) const {
    auto d = distance(v);
    if (!d) throw Unreachable("vertex " + to_string<D>(v) + " is not reachable from the target");
    return *d;
  }

  /// +inf for unsettled vertices.
  double raw(std::size_t idx) const { return settled(idx) ? dist_[idx] : std::numeric_limits<double>::infinity(); }

  /// Direction code (see step()) from idx toward its predecessor, or kNoDirection.
  std::int8_t pred_code(std::size_t idx) const { return settled(idx) ? pred_[idx] : kNoDirection; }

  bool is_source(const Vertex<D>& v) const {
    const auto idx = box_.checked_index(v);
    return settled(idx) && pred_[idx] == kNoDirection;
  }

  std::optional<Vertex<D>> next_toward_target(const Vertex<D>& v) const {
    const auto code = pred_code(box_.checked_index(v));
    if (code == kNoDirection) return std::nullopt;
    return v + step<D>(code);
  }

  std::optional<EdgeId<D>> pred(const Vertex<D>& v) const {
    auto n = next_toward_target(v);
    if (!n) return std::nullopt;
    return make_edge<D>(v, *n);
  }

  /// The geodesic from x to the target encoded by the predecessor forest.
  GeodesicPath<D> geodesic(const Vertex<D>& x) const {
    if (!distance(x)) throw Unreachable("no geodesic: " + to_string<D>(x) + " is not reachable from the target");
    GeodesicPath<D> path;
    Vertex<D> v = x;
    path.vertices.push_back(v);
    for (auto code = pred_code(box_.index(v)); code != kNoDirection; code = pred_code(box_.index(v))) {
      v = v + step<D>(code);
      path.vertices.push_back(v);
    }
    return path;
  }

 private:
  friend class PassageEngine<D>;

  Box<D> box_;
  TargetSpec<D> target_;
  SubgraphMask mask_;
  std::uint64_t env_fingerprint_ = 0;
  std::vector<double> dist_;
  std::vector<std::int8_t> pred_;
  std::vector<std::uint8_t> settled_;
  std::size_t tie_events_ = 0;
  bool complete_ = true;
};

/// Dijkstra with a binary heap over a materialized copy of the box weights.
/// Construct once per environment and run any number of solves; solves are
/// const and may run concurrently.
template <std::size_t D>
class PassageEngine {
 public:
  explicit PassageEngine(WeightField<D> env) : env_(std::move(env)), box_(env_.box()) {
    weights_.assign(box_.size() * D, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < box_.size(); ++i) {
      const auto v = box_.vertex(i);
      for (int a = 0; a < int(D); ++a)
        if (v[a] < box_.hi()[a]) weights_[i * D + a] = env_.weight_unchecked(EdgeId<D>{v, a});
    }
  }

  const WeightField<D>& environment() const { return env_; }
  const Box<D>& box() const { return box_; }

  double weight(const EdgeId<D>& e) const {
    if (!box_.contains(e)) throw DomainError("edge at " + to_string<D>(e.base) + " lies outside the box");
    return weights_[box_.index(e.base) * D + e.axis];
  }

  double weight(const Vertex<D>& u, const Vertex<D>& v) const { return weight(make_edge<D>(u, v)); }

  /// Sum of edge weights along consecutive vertices.
  double path_weight(const GeodesicPath<D>& path) const {
    double s = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) s += weight(path[i - 1], path[i]);
    return s;
  }

  /// Multi-source solve from every target vertex inside box ∩ mask. When
  /// `stop_after` is nonempty the solve ends as soon as all of those vertices
  /// are settled.
  PassageMap<D> solve(const TargetSpec<D>& target, const SubgraphMask& mask = SubgraphMask::full(),
                      std::span<const Vertex<D>> stop_after = {}) const {
    validate_target<D>(target);
    const std::size_t n = box_.size();
    PassageMap<D> map;
    map.box_ = box_;
    map.target_ = target;
    map.mask_ = mask;
    map.env_fingerprint_ = env_.fingerprint();
    map.dist_.assign(n, std::numeric_limits<double>::infinity());
    map.pred_.assign(n, kNoDirection);
    map.settled_.assign(n, 0);

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

    auto seed_source = [&](const Vertex<D>& v) {
      if (!box_.contains(v) || !mask.keeps<D>(v)) return;
      const auto idx = box_.index(v);
      if (map.dist_[idx] == 0.0) return;
      map.dist_[idx] = 0.0;
      heap.emplace(0.0, idx);
    };
    if (const auto* p = std::get_if<PointTarget<D>>(&target)) {
      seed_source(p->vertex);
    } else if (const auto* s = std::get_if<VertexSetTarget<D>>(&target)) {
      for (const auto& v : s->vertices) seed_source(v);
    } else {
      const auto& h = std::get<HalfSpaceTarget<D>>(target);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = box_.vertex(i);
        if (dot<D>(h.rho, v) >= h.alpha) seed_source(v);
      }
    }
    if (heap.empty()) throw InfeasibleTarget("target does not meet the masked box");

    std::vector<std::uint8_t> is_stop;
    std::size_t stops_left = 0;
    if (!stop_after.empty()) {
      is_stop.assign(n, 0);
      for (const auto& v : stop_after) {
        const auto idx = box_.checked_index(v);
        if (!is_stop[idx]) ++stops_left;
        is_stop[idx] = 1;
      }
    }

    while (!heap.empty()) {
      const auto [d, i] = heap.top();
      heap.pop();
      if (map.settled_[i] || d > map.dist_[i]) continue;
      map.settled_[i] = 1;
      if (stops_left && is_stop[i] && --stops_left == 0) {
        map.complete_ = false;
        break;
      }
      const auto v = box_.vertex(i);
      for (int a = 0; a < int(D); ++a) {
        const std::size_t stride = box_.stride(a);
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          if (sgn < 0 ? v[a] == box_.lo()[a] : v[a] == box_.hi()[a]) continue;
          if (mask.kind == SubgraphMask::Kind::HalfPlane && mask.axis == a && v[a] + sgn < mask.threshold) continue;
          const std::size_t j = sgn < 0 ? i - stride : i + stride;
          if (map.settled_[j]) continue;
          const std::size_t edge_base = std::min(i, j);
          const double cand = d + weights_[edge_base * D + a];
          // code on j pointing back at i
          const auto code = std::int8_t(2 * a + (sgn < 0 ? 1 : 0));
          if (cand < map.dist_[j]) {
            map.dist_[j] = cand;
            map.pred_[j] = code;
            heap.emplace(cand, j);
          } else if (cand == map.dist_[j]) {
            ++map.tie_events_;
            // keep the lexicographically smaller edge id (base, axis)
            const auto cur = map.pred_[j];
            const std::size_t cur_base = (cur & 1) ? j : j - box_.stride(cur / 2);
            if (std::pair{edge_base, a} < std::pair{cur_base, cur / 2}) map.pred_[j] = code;
          }
        }
      }
    }
    return map;
  }

  /// T(x, y) restricted to the masked box.
  double passage(const Vertex<D>& x, const Vertex<D>& y, const SubgraphMask& mask = SubgraphMask::full()) const {
    box_.checked_index(x);
    box_.checked_index(y);
    if (x == y) return 0.0;
    const Vertex<D> stop[] = {x};
    return solve(point_target<D>(y), mask, stop).at(x);
  }

 private:
  WeightField<D> env_;
  Box<D> box_;
  std::vector<double> weights_;  // [index * D + axis] = weight of {v, v + e_axis}
};

template <std::size_t D>
PassageMap<D> passage_map(const WeightField<D>& env, const TargetSpec<D>& target,
                          const SubgraphMask& mask = SubgraphMask::full()) {
  return PassageEngine<D>(env).solve(target, mask);
}

template <std::size_t D>
double point_passage(const WeightField<D>& env, const Vertex<D>& x, const Vertex<D>& y) {
  return PassageEngine<D>(env).passage(x, y);
}

template <std::size_t D>
GeodesicPath<D> geodesic(const WeightField<D>& env, const Vertex<D>& x, const TargetSpec<D>& target,
                         const SubgraphMask& mask = SubgraphMask::full()) {
  return passage_map<D>(env, target, mask).geodesic(x);
}

/// Rough resident size of an engine plus one solve, for memory guards.
template <std::size_t D>
std::size_t estimated_solve_bytes(const Box<D>& box) {
  return box.size() * (sizeof(double) * (D + 1) + 2 + 2 * sizeof(std::pair<double, std::size_t>));
}

}  // namespace geodesy
