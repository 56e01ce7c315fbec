#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "geodesy/montecarlo.hpp"
#include "geodesy/passage.hpp"

namespace geodesy {

/// B_z(x, y) = T(x, z) - T(y, z), both read from one solve rooted at z.
template <std::size_t D>
double busemann_point(const PassageEngine<D>& engine, const Vertex<D>& x, const Vertex<D>& y, const Vertex<D>& z) {
  const Vertex<D> stops[] = {x, y};
  const auto map = engine.solve(point_target<D>(z), SubgraphMask::full(), stops);
  return map.at(x) - map.at(y);
}

template <std::size_t D>
double busemann_point(const WeightField<D>& env, const Vertex<D>& x, const Vertex<D>& y, const Vertex<D>& z) {
  return busemann_point<D>(PassageEngine<D>(env), x, y, z);
}

/// B(x0, x) = T(x0, S) - T(x, S) for every x of the box, from a single solve
/// toward S. All values are differences of entries of one distance array, so
/// additivity and antisymmetry hold exactly.
template <std::size_t D>
struct BusemannWindow {
  Vertex<D> origin{};
  TargetSpec<D> target;
  SubgraphMask mask;
  Box<D> box;
  std::vector<double> dist;  // T(., S), +inf when unreachable

  bool defined(const Vertex<D>& x) const { return std::isfinite(dist[box.checked_index(x)]); }

  /// B(origin, x)
  double value(const Vertex<D>& x) const { return between(origin, x); }

  /// B(x, y) = T(x, S) - T(y, S)
  double between(const Vertex<D>& x, const Vertex<D>& y) const {
    const double tx = dist[box.checked_index(x)];
    const double ty = dist[box.checked_index(y)];
    if (!std::isfinite(tx) || !std::isfinite(ty))
      throw Unreachable("Busemann value undefined: vertex cannot reach the target");
    return tx - ty;
  }

  /// Largest r such that the sup-norm ball of radius r around the origin lies in the box.
  int radius() const {
    int r = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < D; ++i) r = std::min({r, origin[i] - box.lo()[i], box.hi()[i] - origin[i]});
    return r;
  }
};

template <std::size_t D>
BusemannWindow<D> busemann_window(const PassageEngine<D>& engine, const Vertex<D>& origin, const TargetSpec<D>& target,
                                  const SubgraphMask& mask = SubgraphMask::full()) {
  const auto map = engine.solve(target, mask);
  BusemannWindow<D> w;
  w.origin = origin;
  w.target = target;
  w.mask = mask;
  w.box = engine.box();
  w.box.checked_index(origin);
  w.dist.resize(w.box.size());
  for (std::size_t i = 0; i < w.box.size(); ++i) w.dist[i] = map.raw(i);
  if (!std::isfinite(w.dist[w.box.index(origin)])) throw Unreachable("Busemann window origin cannot reach the target");
  return w;
}

template <std::size_t D>
BusemannWindow<D> busemann_window(const WeightField<D>& env, const Vertex<D>& origin, const TargetSpec<D>& target,
                                  const SubgraphMask& mask = SubgraphMask::full()) {
  return busemann_window<D>(PassageEngine<D>(env), origin, target, mask);
}

// ---------------------------------------------------------------------------
// Along-ray sequences

template <std::size_t D>
struct RaySequence {
  Vertex<D> x{};
  Vertex<D> y{};
  GeodesicPath<D> gamma;
  std::vector<std::size_t> indices;  // positions n of the sampled z_n along gamma
  std::vector<double> terms;         // T(x, z_n) - T(y, z_n)
  double passage_xy = 0.0;           // T(x, y)
  double last_term = 0.0;
  double tail_variation = 0.0;  // total variation over the second half of the terms
  bool converged = false;       // tail_variation <= 1e-6 * T(x, y)

  /// Largest increase between consecutive terms (<= 0 for a nonincreasing sequence).
  double max_increase() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < terms.size(); ++k) m = std::max(m, terms[k] - terms[k - 1]);
    return m;
  }
};

/// B^{(n)}(x, y) = T(x, z_n) - T(y, z_n) along the geodesic gamma = (z_0, z_1, ...),
/// sampled every `stride` vertices (the last vertex is always included).
template <std::size_t D>
RaySequence<D> busemann_ray(const PassageEngine<D>& engine, const Vertex<D>& x, const Vertex<D>& y,
                            const GeodesicPath<D>& gamma, std::size_t stride = 1) {
  if (stride == 0) throw std::invalid_argument("busemann_ray: stride must be >= 1");
  if (gamma.empty()) throw std::invalid_argument("busemann_ray: empty base path");
  const double along = engine.path_weight(gamma);
  if (std::abs(along - engine.passage(gamma.front(), gamma.back())) > kTolerance)
    throw std::invalid_argument("busemann_ray: base path is not a geodesic");

  RaySequence<D> seq;
  seq.x = x;
  seq.y = y;
  seq.gamma = gamma;
  seq.passage_xy = engine.passage(x, y);
  for (std::size_t n = 0; n < gamma.size(); n += stride) seq.indices.push_back(n);
  if (seq.indices.back() != gamma.size() - 1) seq.indices.push_back(gamma.size() - 1);
  for (auto n : seq.indices) {
    const Vertex<D> stops[] = {x, y};
    const auto map = engine.solve(point_target<D>(gamma[n]), SubgraphMask::full(), stops);
    seq.terms.push_back(map.at(x) - map.at(y));
  }
  seq.last_term = seq.terms.back();
  for (std::size_t k = seq.terms.size() / 2 + 1; k < seq.terms.size(); ++k)
    seq.tail_variation += std::abs(seq.terms[k] - seq.terms[k - 1]);
  seq.converged = seq.tail_variation <= 1e-6 * seq.passage_xy;
  return seq;
}

// ---------------------------------------------------------------------------
// Sublinearity of B - rho . x

struct ShellDeviation {
  int radius = 0;
  /// max over the shell of |B(origin, x) - rho . (x - origin)| / |x - origin|
  double max_deviation = 0.0;
  std::size_t count = 0;
};

/// Shells are sup-norm spheres of radius 16, 32, 64, ... that fit in the window.
template <std::size_t D>
std::vector<ShellDeviation> sublinearity_diagnostic(const BusemannWindow<D>& window, const RealVector<D>& rho_hat) {
  const int radius = window.radius();
  if (radius < 16) throw std::invalid_argument("sublinearity_diagnostic: window radius must be >= 16");
  std::vector<ShellDeviation> shells;
  for (int r = 16; r <= radius; r *= 2) shells.push_back({r, 0.0, 0});
  const double origin_dist = window.dist[window.box.index(window.origin)];
  for (std::size_t i = 0; i < window.box.size(); ++i) {
    if (!std::isfinite(window.dist[i])) continue;
    const auto x = window.box.vertex(i);
    const auto rel = x - window.origin;
    const int r = sup_norm<D>(rel);
    for (auto& s : shells) {
      if (s.radius != r) continue;
      const double b = origin_dist - window.dist[i];
      const double dev = std::abs(b - dot<D>(rho_hat, rel)) / euclidean_norm<D>(rel);
      s.max_deviation = std::max(s.max_deviation, dev);
      ++s.count;
    }
  }
  return shells;
}

// ---------------------------------------------------------------------------
// Averaging statistic over B_{K l e1}(0, l e1)

struct GmRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double mean_busemann = 0.0;  // (1/n) sum_K B_{K l e1}(0, l e1)
  double scaled_passage = 0.0;  // T(0, n l e1) / n
  double passage_ell = 0.0;     // T(0, l e1)
  std::size_t bound_violations = 0;
  bool excluded = false;  // geodesic to n l e1 touched the margin band
};

struct GmSummary {
  MeanStderr busemann;
  MeanStderr passage;
  double difference = 0.0;
  double combined_stderr = 0.0;
  std::size_t bound_violations = 0;
  std::size_t excluded = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  std::vector<GmRecord> records;

  /// |difference| < z * combined standard error
  bool consistent(double z = 3.0) const { return std::abs(difference) < z * combined_stderr; }
};

/// Monte Carlo estimate of both sides of
///   E (1/n) sum_{K=1}^n B_{K l e1}(0, l e1) = E T(0, n l e1) / n
/// on [-L, L]^D with independent environments seeded seed0 + rep.
template <std::size_t D>
GmSummary gm_statistic(const DistributionSpec& dist, int ell, int n, int L, std::size_t reps, std::uint64_t seed0,
                       unsigned workers = 1) {
  if (ell < 1 || n < 1) throw std::invalid_argument("gm_statistic: ell and n must be >= 1");
  if (reps < 1) throw std::invalid_argument("gm_statistic: reps must be >= 1");
  validate(dist);
  const MarginPolicy margin{L};
  margin.require(double(n) * ell, "gm_statistic: n * ell");
  const auto box = Box<D>::cube(L);

  auto one = [&](std::size_t rep) {
    GmRecord rec;
    rec.rep = rep;
    rec.seed = seed0 + rep;
    const PassageEngine<D> engine(make_environment<D>(rec.seed, dist, box));
    std::vector<Vertex<D>> points;
    for (int k = 1; k <= n; ++k) points.push_back(unit<D>(0, k * ell));
    const auto from_origin = engine.solve(point_target<D>(origin<D>()), SubgraphMask::full(), points);
    const auto from_ell = engine.solve(point_target<D>(unit<D>(0, ell)), SubgraphMask::full(), points);
    rec.passage_ell = from_origin.at(unit<D>(0, ell));
    double sum = 0.0;
    for (const auto& p : points) {
      const double b = from_origin.at(p) - from_ell.at(p);
      if (std::abs(b) > rec.passage_ell + kTolerance) ++rec.bound_violations;
      sum += b;
    }
    rec.mean_busemann = sum / n;
    rec.scaled_passage = from_origin.at(points.back()) / n;
    rec.excluded = margin.touches_band<D>(from_origin.geodesic(points.back()));
    return rec;
  };

  GmSummary s;
  s.reps = reps;
  s.seed0 = seed0;
  s.records = run_replications(reps, workers, one);
  std::vector<double> bs, ts;
  for (const auto& r : s.records) {
    s.bound_violations += r.bound_violations;
    if (r.excluded) {
      ++s.excluded;
      continue;
    }
    bs.push_back(r.mean_busemann);
    ts.push_back(r.scaled_passage);
  }
  s.busemann = mean_stderr(bs);
  s.passage = mean_stderr(ts);
  s.difference = s.busemann.mean - s.passage.mean;
  s.combined_stderr = std::hypot(s.busemann.stderr_, s.passage.stderr_);
  return s;
}

}  // namespace geodesy
