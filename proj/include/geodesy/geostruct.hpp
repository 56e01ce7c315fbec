#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "geodesy/passage.hpp"

namespace geodesy {

/// A geodesic structure that should exist by construction is missing.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Geodesic tree

/// Union of the geodesics out of `root`, stored as parent pointers toward the root.
template <std::size_t D>
struct GeodesicTree {
  Vertex<D> root{};
  Box<D> box;
  std::vector<std::int8_t> parent;  // direction code toward the root, kNoDirection at root/unreached
  std::vector<double> dist;         // T(root, v); +inf when unreached
  std::uint64_t env_ref = 0;

  bool reachable(const Vertex<D>& v) const { return std::isfinite(dist[box.checked_index(v)]); }

  std::optional<Vertex<D>> parent_of(const Vertex<D>& v) const {
    const auto code = parent[box.checked_index(v)];
    if (code == kNoDirection) return std::nullopt;
    return v + step<D>(code);
  }

  std::optional<EdgeId<D>> parent_edge(const Vertex<D>& v) const {
    auto p = parent_of(v);
    if (!p) return std::nullopt;
    return make_edge<D>(v, *p);
  }

  std::size_t edge_count() const {
    return std::size_t(std::count_if(parent.begin(), parent.end(), [](auto c) { return c != kNoDirection; }));
  }

  std::size_t reachable_count() const {
    return std::size_t(std::count_if(dist.begin(), dist.end(), [](double d) { return std::isfinite(d); }));
  }

  /// (v, parent(v), ..., root). Throws StructuralError on a parent cycle or a dangling chain.
  GeodesicPath<D> path_to_root(const Vertex<D>& v) const {
    GeodesicPath<D> path;
    Vertex<D> cur = v;
    path.vertices.push_back(cur);
    while (cur != root) {
      auto p = parent_of(cur);
      if (!p) throw StructuralError("parent chain from " + to_string<D>(v) + " stops before the root");
      cur = *p;
      path.vertices.push_back(cur);
      if (path.size() > box.size()) throw StructuralError("parent chain from " + to_string<D>(v) + " cycles");
    }
    return path;
  }

  GeodesicPath<D> path_from_root(const Vertex<D>& v) const {
    auto path = path_to_root(v);
    std::reverse(path.vertices.begin(), path.vertices.end());
    return path;
  }
};

template <std::size_t D>
GeodesicTree<D> geodesic_tree(const PassageEngine<D>& engine, const Vertex<D>& root) {
  engine.box().checked_index(root);
  const auto map = engine.solve(point_target<D>(root));
  GeodesicTree<D> tree;
  tree.root = root;
  tree.box = engine.box();
  tree.env_ref = engine.environment().fingerprint();
  tree.parent.resize(tree.box.size());
  tree.dist.resize(tree.box.size());
  for (std::size_t i = 0; i < tree.box.size(); ++i) {
    tree.parent[i] = map.pred_code(i);
    tree.dist[i] = map.raw(i);
  }
  return tree;
}

template <std::size_t D>
GeodesicTree<D> geodesic_tree(const WeightField<D>& env, const Vertex<D>& root) {
  return geodesic_tree<D>(PassageEngine<D>(env), root);
}

struct TreeReport {
  bool acyclic = false;
  bool spanning = false;  // every reachable vertex chains to the root
  std::size_t edges = 0;
  std::size_t reachable = 0;
  std::size_t samples = 0;
  /// max |pathweight(root -> v) - T(root, v)| over sampled v
  double max_deviation = 0.0;
  std::size_t subpath_checks = 0;
  std::size_t subpath_violations = 0;

  bool ok(double tol = kTolerance) const {
    return acyclic && spanning && max_deviation <= tol && subpath_violations == 0;
  }
};

/// Structural checks on a tree against an independent re-solve of its environment.
/// The deviation compares the tree path weight with T(root, v) solved from v;
/// the subpath check re-solves a random terminal segment of each sampled branch.
template <std::size_t D>
TreeReport verify_tree(const GeodesicTree<D>& tree, const PassageEngine<D>& engine, std::size_t samples = 100,
                       std::uint64_t sample_seed = 0) {
  if (tree.env_ref != engine.environment().fingerprint() || !(tree.box == engine.box()))
    throw std::invalid_argument("verify_tree: tree was built from a different environment");

  TreeReport report;
  const std::size_t n = tree.box.size();
  report.edges = tree.edge_count();
  report.reachable = tree.reachable_count();

  // 0 = unknown, 1 = on the current chain, 2 = reaches root
  std::vector<std::uint8_t> state(n, 0);
  const auto root_idx = tree.box.index(tree.root);
  state[root_idx] = 2;
  report.acyclic = tree.parent[root_idx] == kNoDirection;
  report.spanning = true;
  std::vector<std::size_t> chain;
  for (std::size_t start = 0; start < n && report.acyclic; ++start) {
    if (state[start] != 0 || tree.parent[start] == kNoDirection) continue;
    chain.clear();
    std::size_t cur = start;
    bool dangling = false;
    while (state[cur] == 0) {
      state[cur] = 1;
      chain.push_back(cur);
      const auto code = tree.parent[cur];
      const auto next = tree.box.vertex(cur) + step<D>(code);
      if (code == kNoDirection || !tree.box.contains(next)) {
        dangling = true;
        break;
      }
      cur = tree.box.index(next);
    }
    if (dangling) {
      report.spanning = false;
    } else if (state[cur] == 1) {
      report.acyclic = false;
    }
    for (auto c : chain) state[c] = 2;
  }
  // n vertices, n - 1 edges, every vertex reaching the root: a spanning tree
  if (report.acyclic && report.edges + 1 != report.reachable) report.acyclic = false;
  if (!report.acyclic || !report.spanning) {
    report.max_deviation = std::numeric_limits<double>::infinity();
    return report;
  }

  std::mt19937_64 rng(sample_seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t idx;
    do idx = pick(rng);
    while (!std::isfinite(tree.dist[idx]));
    const auto v = tree.box.vertex(idx);
    const auto branch = tree.path_from_root(v);
    const double along = engine.path_weight(branch);
    const double direct = engine.passage(tree.root, v);
    report.max_deviation = std::max(report.max_deviation, std::abs(along - direct));

    std::uniform_int_distribution<std::size_t> cut(0, branch.size() - 1);
    GeodesicPath<D> tail;
    tail.vertices.assign(branch.vertices.begin() + std::ptrdiff_t(cut(rng)), branch.vertices.end());
    ++report.subpath_checks;
    if (std::abs(engine.path_weight(tail) - engine.passage(tail.front(), tail.back())) > kTolerance)
      ++report.subpath_violations;
    ++report.samples;
  }
  return report;
}

template <std::size_t D>
TreeReport verify_tree(const GeodesicTree<D>& tree, const WeightField<D>& env, std::size_t samples = 100,
                       std::uint64_t sample_seed = 0) {
  return verify_tree<D>(tree, PassageEngine<D>(env), samples, sample_seed);
}

/// Number of distinct tree branches, counted where they first leave the
/// sup-norm ball of radius r around the root, that still contain a vertex at
/// radius >= outer. A diagnostic only.
template <std::size_t D>
std::size_t surviving_branches(const GeodesicTree<D>& tree, int r, int outer) {
  const std::size_t n = tree.box.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return tree.dist[a] < tree.dist[b]; });
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> branch(n, kNone);
  std::vector<std::size_t> hits;
  for (auto idx : order) {
    if (!std::isfinite(tree.dist[idx])) break;
    const auto v = tree.box.vertex(idx);
    const int radius = sup_norm<D>(v - tree.root);
    const auto code = tree.parent[idx];
    if (code == kNoDirection) continue;
    const auto p = tree.box.index(v + step<D>(code));
    const int parent_radius = sup_norm<D>(v + step<D>(code) - tree.root);
    branch[idx] = (radius >= r && parent_radius < r) ? idx : branch[p];
    if (radius >= outer && branch[idx] != kNone) hits.push_back(branch[idx]);
  }
  std::sort(hits.begin(), hits.end());
  return std::size_t(std::unique(hits.begin(), hits.end()) - hits.begin());
}

// ---------------------------------------------------------------------------
// eta indicators and the directed graph G

/// eta((x, y)) = 1 iff T(x, H) = T(y, H) + t_{xy} (within kTolerance), from one
/// multi-source solve toward the half-space H = {v : v . rho >= alpha}.
template <std::size_t D>
class EtaField {
 public:
  const RealVector<D>& rho() const { return rho_; }
  double alpha() const { return alpha_; }
  const SubgraphMask& mask() const { return mask_; }
  const Box<D>& box() const { return box_; }
  std::uint64_t env_ref() const { return env_ref_; }

  bool in_target(const Vertex<D>& v) const { return dot<D>(rho_, v) >= alpha_; }

  /// T(v, H); +inf when v is outside the mask or disconnected.
  double distance(const Vertex<D>& v) const { return dist_[box_.checked_index(v)]; }

  bool eta(const Vertex<D>& x, const Vertex<D>& y) const {
    if (!adjacent<D>(x, y)) throw std::invalid_argument("eta: vertices are not adjacent");
    return bits_[box_.checked_index(x) * 2 * D + direction_code(x, y)] != 0;
  }

  /// Heads y of the eta = 1 edges (x, y).
  std::vector<Vertex<D>> out_neighbours(const Vertex<D>& x) const {
    std::vector<Vertex<D>> out;
    const auto idx = box_.checked_index(x);
    for (std::int8_t c = 0; c < std::int8_t(2 * D); ++c)
      if (bits_[idx * 2 * D + c]) out.push_back(x + step<D>(c));
    return out;
  }

  /// Reachable non-target vertices lacking an eta = 1 out-edge (0 when consistent).
  std::size_t dead_ends() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < box_.size(); ++i) {
      const auto v = box_.vertex(i);
      if (!std::isfinite(dist_[i]) || in_target(v)) continue;
      bool any = false;
      for (std::size_t c = 0; c < 2 * D; ++c) any = any || bits_[i * 2 * D + c];
      if (!any) ++count;
    }
    return count;
  }

 private:
  template <std::size_t E>
  friend EtaField<E> eta_field(const PassageEngine<E>&, const RealVector<E>&, double, const SubgraphMask&);

  static std::size_t direction_code(const Vertex<D>& x, const Vertex<D>& y) {
    for (std::size_t a = 0; a < D; ++a)
      if (x[a] != y[a]) return 2 * a + (y[a] > x[a] ? 1 : 0);
    return 0;
  }

  RealVector<D> rho_{};
  double alpha_ = 0.0;
  SubgraphMask mask_;
  Box<D> box_;
  std::uint64_t env_ref_ = 0;
  std::vector<double> dist_;
  std::vector<std::uint8_t> bits_;  // [index * 2D + direction code]
};

template <std::size_t D>
EtaField<D> eta_field(const PassageEngine<D>& engine, const RealVector<D>& rho, double alpha,
                      const SubgraphMask& mask = SubgraphMask::full()) {
  const auto map = engine.solve(half_space_target<D>(rho, alpha), mask);
  EtaField<D> f;
  f.rho_ = rho;
  f.alpha_ = alpha;
  f.mask_ = mask;
  f.box_ = engine.box();
  f.env_ref_ = engine.environment().fingerprint();
  const std::size_t n = f.box_.size();
  f.dist_.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.dist_[i] = map.raw(i);
  f.bits_.assign(n * 2 * D, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(f.dist_[i])) continue;
    const auto x = f.box_.vertex(i);
    for (std::int8_t c = 0; c < std::int8_t(2 * D); ++c) {
      const auto y = x + step<D>(c);
      if (!f.box_.contains(y)) continue;
      const double dy = f.dist_[f.box_.index(y)];
      if (!std::isfinite(dy)) continue;
      if (std::abs(f.dist_[i] - (dy + engine.weight(x, y))) <= kTolerance) f.bits_[i * 2 * D + c] = 1;
    }
  }
  return f;
}

template <std::size_t D>
EtaField<D> eta_field(const WeightField<D>& env, const RealVector<D>& rho, double alpha,
                      const SubgraphMask& mask = SubgraphMask::full()) {
  return eta_field<D>(PassageEngine<D>(env), rho, alpha, mask);
}

/// Follows eta = 1 out-edges from x into the half-space, taking the
/// lexicographically smallest edge id at each step. The walk's weight is
/// checked against T(x, H); a dead end or a mismatch is a StructuralError.
template <std::size_t D>
GeodesicPath<D> eta_walk(const EtaField<D>& field, const PassageEngine<D>& engine, const Vertex<D>& x) {
  if (field.env_ref() != engine.environment().fingerprint())
    throw std::invalid_argument("eta_walk: field was built from a different environment");
  const double target = field.distance(x);
  if (!std::isfinite(target)) throw Unreachable("eta_walk: " + to_string<D>(x) + " cannot reach the half-space");
  GeodesicPath<D> path;
  Vertex<D> cur = x;
  path.vertices.push_back(cur);
  while (!field.in_target(cur)) {
    const auto outs = field.out_neighbours(cur);
    if (outs.empty()) throw StructuralError("eta_walk: no eta = 1 out-edge at " + to_string<D>(cur));
    auto best = outs.front();
    for (const auto& y : outs)
      if (make_edge<D>(cur, y) < make_edge<D>(cur, best)) best = y;
    cur = best;
    path.vertices.push_back(cur);
    if (path.size() > field.box().size()) throw StructuralError("eta_walk: walk revisits vertices");
  }
  if (std::abs(engine.path_weight(path) - target) > kTolerance)
    throw StructuralError("eta_walk: walk weight differs from T(x, H)");
  return path;
}

// ---------------------------------------------------------------------------
// Coalescence

template <std::size_t D>
struct Coalescence {
  Vertex<D> vertex{};
  std::size_t index1 = 0;
  std::size_t index2 = 0;
  /// p1[index1..] == p2[index2..]; false is a violation of the single-subpath property.
  bool suffix_identical = false;
};

/// First vertex of p1 (scanning from its start) that also lies on p2.
template <std::size_t D>
std::optional<Coalescence<D>> coalescence_point(const GeodesicPath<D>& p1, const GeodesicPath<D>& p2) {
  std::unordered_map<Vertex<D>, std::size_t, VertexHash<D>> where;
  where.reserve(p2.size());
  for (std::size_t j = 0; j < p2.size(); ++j) where.emplace(p2[j], j);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    auto it = where.find(p1[i]);
    if (it == where.end()) continue;
    Coalescence<D> c{p1[i], i, it->second, false};
    c.suffix_identical = p1.size() - i == p2.size() - c.index2 &&
                         std::equal(p1.vertices.begin() + std::ptrdiff_t(i), p1.vertices.end(),
                                    p2.vertices.begin() + std::ptrdiff_t(c.index2));
    return c;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Infection / competition partition

inline constexpr int kContested = 0;
inline constexpr int kUnlabelled = -1;

/// Vertices labelled by their strictly closest seed in the T-metric.
template <std::size_t D>
struct InfectionPartition {
  std::vector<Vertex<D>> seeds;
  Box<D> box;
  std::vector<int> label;  // 1..k, kContested, or kUnlabelled (unreachable)
  std::vector<bool> boundary_reach;
  std::size_t contested = 0;
  /// Vertices whose parent toward their own seed carries a different label.
  std::size_t connectivity_violations = 0;

  int label_of(const Vertex<D>& v) const { return label[box.checked_index(v)]; }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c(seeds.size() + 1, 0);
    for (int l : label)
      if (l >= 0) ++c[std::size_t(l)];
    return c;
  }
};

template <std::size_t D>
InfectionPartition<D> infection_partition(const PassageEngine<D>& engine, const std::vector<Vertex<D>>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("infection_partition: at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    engine.box().checked_index(seeds[i]);
    for (std::size_t j = 0; j < i; ++j)
      if (seeds[i] == seeds[j]) throw std::invalid_argument("infection_partition: seeds must be distinct");
  }
  std::vector<PassageMap<D>> maps;
  maps.reserve(seeds.size());
  for (const auto& s : seeds) maps.push_back(engine.solve(point_target<D>(s)));

  InfectionPartition<D> part;
  part.seeds = seeds;
  part.box = engine.box();
  const std::size_t n = part.box.size();
  part.label.assign(n, kUnlabelled);
  part.boundary_reach.assign(seeds.size(), false);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    int arg = kUnlabelled;
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const double d = maps[k].raw(i);
      if (d < best) {
        second = best;
        best = d;
        arg = int(k) + 1;
      } else if (d < second) {
        second = d;
      }
    }
    if (!std::isfinite(best)) continue;
    if (second - best <= kTolerance) {
      part.label[i] = kContested;
      ++part.contested;
    } else {
      part.label[i] = arg;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int l = part.label[i];
    if (l <= 0) continue;
    if (part.box.on_boundary(part.box.vertex(i))) part.boundary_reach[std::size_t(l - 1)] = true;
    const auto code = maps[std::size_t(l - 1)].pred_code(i);
    if (code == kNoDirection) continue;
    const auto p = part.box.index(part.box.vertex(i) + step<D>(code));
    if (part.label[p] != l) ++part.connectivity_violations;
  }
  return part;
}

template <std::size_t D>
InfectionPartition<D> infection_partition(const WeightField<D>& env, const std::vector<Vertex<D>>& seeds) {
  return infection_partition<D>(PassageEngine<D>(env), seeds);
}

}  // namespace geodesy
