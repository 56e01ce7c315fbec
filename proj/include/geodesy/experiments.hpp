#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "geodesy/busemann.hpp"
#include "geodesy/geostruct.hpp"
#include "geodesy/montecarlo.hpp"

namespace geodesy {

template <std::size_t D>
Vertex<D> round_point(const RealVector<D>& theta, double scale) {
  Vertex<D> v{};
  for (std::size_t i = 0; i < D; ++i) v[i] = int(std::lround(theta[i] * scale));
  return v;
}

template <std::size_t D>
RealVector<D> unit_vector(const RealVector<D>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("direction must be a nonzero finite vector");
  RealVector<D> u{};
  for (std::size_t i = 0; i < D; ++i) u[i] = v[i] / n;
  return u;
}

template <std::size_t D>
RealVector<D> as_real(const Vertex<D>& v) {
  RealVector<D> r{};
  for (std::size_t i = 0; i < D; ++i) r[i] = double(v[i]);
  return r;
}

/// 2-d: k equally spaced angles 2 pi j / k. Higher d: the normalized nonzero
/// vectors of {-1, 0, 1}^d.
template <std::size_t D>
std::vector<RealVector<D>> default_directions(std::size_t k = 16) {
  std::vector<RealVector<D>> out;
  if constexpr (D == 2) {
    for (std::size_t j = 0; j < k; ++j) {
      const double a = 2.0 * std::numbers::pi * double(j) / double(k);
      out.push_back({std::cos(a), std::sin(a)});
    }
  } else {
    std::size_t total = 1;
    for (std::size_t i = 0; i < D; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      RealVector<D> v{};
      std::size_t c = code;
      bool nonzero = false;
      for (std::size_t i = 0; i < D; ++i, c /= 3) {
        v[i] = double(int(c % 3) - 1);
        nonzero = nonzero || v[i] != 0.0;
      }
      if (nonzero) out.push_back(unit_vector<D>(v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape

template <std::size_t D>
struct ShapeRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> passage;  // [direction][size] T(0, point)
  std::size_t subadditivity_violations = 0;
  bool excluded = false;
};

struct PairCheck {
  std::size_t i = 0;
  std::size_t j = 0;
  double difference = 0.0;
  double combined_stderr = 0.0;
  bool ok = true;
};

struct ConvexityCheck {
  std::size_t k = 0;  // middle direction of the triple
  double a = 0.0;
  double b = 0.0;
  MeanStderr slack;  // a g(k-1) + b g(k+1) - g(k), per replication
  bool ok = true;
};

template <std::size_t D>
struct ShapeEstimate {
  DistributionSpec dist;
  int L = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  std::vector<RealVector<D>> directions;
  std::vector<int> sizes;                       // ascending
  std::vector<std::vector<Vertex<D>>> points;   // [direction][size] = round(n theta)
  std::vector<std::vector<MeanStderr>> g;       // [direction][size] of T(0, v) / |v|
  std::vector<RealVector<D>> boundary;          // (v / |v|) / g at the largest size
  std::size_t subadditivity_checks = 0;
  std::size_t subadditivity_violations = 0;
  std::vector<PairCheck> symmetry;
  std::vector<ConvexityCheck> convexity;
  std::size_t excluded = 0;
  std::vector<ShapeRecord<D>> records;

  const MeanStderr& g_hat(std::size_t dir) const { return g[dir].back(); }

  std::optional<std::size_t> find_direction(const RealVector<D>& theta) const {
    for (std::size_t k = 0; k < directions.size(); ++k) {
      double err = 0.0;
      for (std::size_t i = 0; i < D; ++i) err = std::max(err, std::abs(directions[k][i] - theta[i]));
      if (err < 1e-9) return k;
    }
    return std::nullopt;
  }

  bool symmetric() const {
    return std::all_of(symmetry.begin(), symmetry.end(), [](const auto& c) { return c.ok; });
  }
  bool convex() const {
    return std::all_of(convexity.begin(), convexity.end(), [](const auto& c) { return c.ok; });
  }
};

namespace detail {

/// True when b is a or a coordinate permutation / sign flip image of a.
template <std::size_t D>
bool symmetric_image(const RealVector<D>& a, const RealVector<D>& b) {
  std::array<double, D> x{}, y{};
  for (std::size_t i = 0; i < D; ++i) {
    x[i] = std::abs(a[i]);
    y[i] = std::abs(b[i]);
  }
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  for (std::size_t i = 0; i < D; ++i)
    if (std::abs(x[i] - y[i]) > 1e-9) return false;
  return true;
}

}  // namespace detail

/// ĝ(theta) from T(0, round(n theta)) / |round(n theta)| over independent
/// environments on [-L, L]^D, plus subadditivity, symmetry and convexity checks.
template <std::size_t D>
ShapeEstimate<D> estimate_shape(const DistributionSpec& dist, std::vector<RealVector<D>> directions,
                                std::vector<int> sizes, int L, std::size_t reps, std::uint64_t seed0,
                                unsigned workers = 1) {
  validate(dist);
  if (directions.empty()) throw std::invalid_argument("estimate_shape: no directions");
  if (sizes.empty()) throw std::invalid_argument("estimate_shape: no sizes");
  if (reps < 1) throw std::invalid_argument("estimate_shape: reps must be >= 1");
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  if (sizes.front() < 2) throw std::invalid_argument("estimate_shape: sizes must be >= 2");
  for (auto& d : directions) d = unit_vector<D>(d);

  const MarginPolicy margin{L};
  ShapeEstimate<D> est;
  est.dist = dist;
  est.L = L;
  est.reps = reps;
  est.seed0 = seed0;
  est.directions = directions;
  est.sizes = sizes;
  const std::size_t nd = directions.size(), ns = sizes.size();
  est.points.assign(nd, {});
  int reach = 0;
  for (std::size_t k = 0; k < nd; ++k)
    for (int n : sizes) {
      const auto v = round_point<D>(directions[k], n);
      if (v == origin<D>()) throw std::invalid_argument("estimate_shape: a direction rounds to the origin");
      est.points[k].push_back(v);
      reach = std::max(reach, sup_norm<D>(v));
    }
  margin.require(reach, "estimate_shape: largest size times direction");
  margin.require(sizes.back(), "estimate_shape: axis subadditivity check");

  std::vector<Vertex<D>> stops;
  for (const auto& row : est.points) stops.insert(stops.end(), row.begin(), row.end());
  for (std::size_t a = 0; a < D; ++a)
    for (int n : sizes) {
      stops.push_back(unit<D>(int(a), n / 2));
      stops.push_back(unit<D>(int(a), n));
    }

  const auto box = Box<D>::cube(L);
  auto one = [&](std::size_t rep) {
    ShapeRecord<D> rec;
    rec.rep = rep;
    rec.seed = seed0 + rep;
    const PassageEngine<D> engine(make_environment<D>(rec.seed, dist, box));
    const auto map = engine.solve(point_target<D>(origin<D>()), SubgraphMask::full(), stops);
    rec.passage.assign(nd, std::vector<double>(ns));
    for (std::size_t k = 0; k < nd; ++k) {
      for (std::size_t s = 0; s < ns; ++s) rec.passage[k][s] = map.at(est.points[k][s]);
      rec.excluded = rec.excluded || margin.touches_band<D>(map.geodesic(est.points[k].back()));
    }
    for (std::size_t a = 0; a < D; ++a)
      for (int n : sizes) {
        const auto mid = unit<D>(int(a), n / 2), end = unit<D>(int(a), n);
        const Vertex<D> stop[] = {end};
        const double second = engine.solve(point_target<D>(mid), SubgraphMask::full(), stop).at(end);
        if (map.at(end) > map.at(mid) + second + kTolerance) ++rec.subadditivity_violations;
      }
    return rec;
  };
  est.records = run_replications(reps, workers, one);
  est.subadditivity_checks = reps * D * ns;

  // per-replication normalized times, kept replications only
  std::vector<std::vector<std::vector<double>>> gs(nd, std::vector<std::vector<double>>(ns));
  for (const auto& r : est.records) {
    est.subadditivity_violations += r.subadditivity_violations;
    if (r.excluded) {
      ++est.excluded;
      continue;
    }
    for (std::size_t k = 0; k < nd; ++k)
      for (std::size_t s = 0; s < ns; ++s)
        gs[k][s].push_back(r.passage[k][s] / euclidean_norm<D>(est.points[k][s]));
  }
  est.g.assign(nd, std::vector<MeanStderr>(ns));
  for (std::size_t k = 0; k < nd; ++k)
    for (std::size_t s = 0; s < ns; ++s) est.g[k][s] = mean_stderr(gs[k][s]);
  for (std::size_t k = 0; k < nd; ++k) {
    const auto& v = est.points[k].back();
    const double scale = 1.0 / (euclidean_norm<D>(v) * est.g[k].back().mean);
    RealVector<D> p{};
    for (std::size_t i = 0; i < D; ++i) p[i] = double(v[i]) * scale;
    est.boundary.push_back(p);
  }

  for (std::size_t i = 0; i < nd; ++i)
    for (std::size_t j = i + 1; j < nd; ++j) {
      if (!detail::symmetric_image<D>(directions[i], directions[j])) continue;
      PairCheck c{i, j, est.g[i].back().mean - est.g[j].back().mean,
                  std::hypot(est.g[i].back().stderr_, est.g[j].back().stderr_), true};
      c.ok = std::abs(c.difference) <= 3.0 * c.combined_stderr;
      est.symmetry.push_back(c);
    }

  if constexpr (D == 2) {
    if (nd >= 3) {
      for (std::size_t k = 0; k < nd; ++k) {
        const std::size_t p = (k + nd - 1) % nd, q = (k + 1) % nd;
        auto dir = [&](std::size_t t) {
          const auto& v = est.points[t].back();
          const double n = euclidean_norm<2>(v);
          return std::array<double, 2>{v[0] / n, v[1] / n};
        };
        const auto u = dir(k), up = dir(p), uq = dir(q);
        // u = a up + b uq
        const double det = up[0] * uq[1] - up[1] * uq[0];
        if (std::abs(det) < 1e-12) continue;
        const double a = (u[0] * uq[1] - u[1] * uq[0]) / det;
        const double b = (up[0] * u[1] - up[1] * u[0]) / det;
        if (a <= 0.0 || b <= 0.0) continue;
        std::vector<double> slack;
        for (std::size_t r = 0; r < gs[k].back().size(); ++r)
          slack.push_back(a * gs[p].back()[r] + b * gs[q].back()[r] - gs[k].back()[r]);
        ConvexityCheck c{k, a, b, mean_stderr(slack), true};
        c.ok = c.slack.mean >= -3.0 * c.slack.stderr_;
        est.convexity.push_back(c);
      }
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Competition / coexistence

template <std::size_t D>
struct CompetitionRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> counts;   // vertices per label (index 0 = contested)
  std::vector<bool> reach;           // label touches the box boundary
  std::vector<bool> inner_reach;     // label has a vertex outside the inner box
  bool all_reach = false;
  std::size_t contested = 0;
  std::size_t connectivity_violations = 0;
};

template <std::size_t D>
struct CoexistenceSummary {
  std::vector<Vertex<D>> seeds;
  int L = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  std::size_t successes = 0;
  double fraction = 0.0;
  Interval ci95;
  Interval ci99;
  std::size_t contested = 0;
  std::size_t connectivity_violations = 0;
  std::vector<CompetitionRecord<D>> records;
};

/// Fraction of environments in which every seed's infection set reaches the
/// boundary of [-L, L]^D.
template <std::size_t D>
CoexistenceSummary<D> competition_experiment(const DistributionSpec& dist, const std::vector<Vertex<D>>& seeds, int L,
                                             std::size_t reps, std::uint64_t seed0, unsigned workers = 1) {
  validate(dist);
  if (reps < 1) throw std::invalid_argument("competition_experiment: reps must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("competition_experiment: at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (seeds[i] == seeds[j]) throw std::invalid_argument("competition_experiment: seeds must be distinct");
  const MarginPolicy margin{L};
  for (const auto& s : seeds) margin.require(sup_norm<D>(s), "competition_experiment: seed");

  const auto box = Box<D>::cube(L);
  auto one = [&](std::size_t rep) {
    CompetitionRecord<D> rec;
    rec.rep = rep;
    rec.seed = seed0 + rep;
    const PassageEngine<D> engine(make_environment<D>(rec.seed, dist, box));
    const auto part = infection_partition<D>(engine, seeds);
    rec.counts = part.counts();
    rec.reach = part.boundary_reach;
    rec.inner_reach.assign(seeds.size(), false);
    for (std::size_t i = 0; i < box.size(); ++i) {
      const int l = part.label[i];
      if (l > 0 && margin.in_band<D>(box.vertex(i))) rec.inner_reach[std::size_t(l - 1)] = true;
    }
    rec.all_reach = std::all_of(rec.reach.begin(), rec.reach.end(), [](bool b) { return b; });
    rec.contested = part.contested;
    rec.connectivity_violations = part.connectivity_violations;
    return rec;
  };

  CoexistenceSummary<D> s;
  s.seeds = seeds;
  s.L = L;
  s.reps = reps;
  s.seed0 = seed0;
  s.records = run_replications(reps, workers, one);
  for (const auto& r : s.records) {
    s.successes += r.all_reach;
    s.contested += r.contested;
    s.connectivity_violations += r.connectivity_violations;
  }
  s.fraction = double(s.successes) / double(reps);
  s.ci95 = wilson_interval(s.successes, reps, kZ95);
  s.ci99 = wilson_interval(s.successes, reps, kZ99);
  return s;
}

/// Two seeds {0, ell e1}.
template <std::size_t D>
CoexistenceSummary<D> coexistence_experiment(const DistributionSpec& dist, int ell, int L, std::size_t reps,
                                             std::uint64_t seed0, unsigned workers = 1) {
  if (ell == 0) throw std::invalid_argument("coexistence_experiment: ell = 0 gives coincident seeds");
  return competition_experiment<D>(dist, {origin<D>(), unit<D>(0, ell)}, L, reps, seed0, workers);
}

/// Smallest candidate ell with mean T(0, ell e1) < 3 ell g(e1) / 2 over a pilot
/// of `reps` environments, or the largest candidate when none qualifies.
template <std::size_t D>
int pilot_ell(const DistributionSpec& dist, double g_e1, const std::vector<int>& candidates, std::size_t reps,
              std::uint64_t seed0) {
  if (candidates.empty()) throw std::invalid_argument("pilot_ell: no candidates");
  for (int ell : candidates) {
    const int L = std::max(8, 2 * ell);
    std::vector<double> ts;
    for (std::size_t r = 0; r < reps; ++r) {
      const PassageEngine<D> engine(make_environment<D>(seed0 + r, dist, Box<D>::cube(L)));
      ts.push_back(engine.passage(origin<D>(), unit<D>(0, ell)));
    }
    if (mean_stderr(ts).mean < 1.5 * ell * g_e1) return ell;
  }
  return candidates.back();
}

// ---------------------------------------------------------------------------
// Directedness

template <std::size_t D>
struct DirectionRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  Vertex<D> hit{};
  double angle = 0.0;  // relative to zeta; signed in d = 2
  std::size_t length = 0;
  bool degenerate = false;  // origin already in the half-space
  bool excluded = false;    // walk touched the margin band
};

struct AlphaSpread {
  double alpha = 0.0;
  std::size_t used = 0;
  std::size_t degenerate = 0;
  std::size_t excluded = 0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double iqr = 0.0;
  double iqr_stderr = 0.0;  // bootstrap
  double mean_abs = 0.0;
};

template <std::size_t D>
struct DirectionStats {
  RealVector<D> zeta{};
  std::vector<double> alphas;
  int L = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  std::vector<AlphaSpread> spreads;
  std::vector<DirectionRecord<D>> records;
  std::size_t excluded = 0;
};

template <std::size_t D>
double angle_from(const RealVector<D>& zeta, const Vertex<D>& v) {
  const double along = dot<D>(zeta, v);
  if constexpr (D == 2) {
    return std::atan2(zeta[0] * v[1] - zeta[1] * v[0], along);
  } else {
    return std::acos(std::clamp(along / euclidean_norm<D>(v), -1.0, 1.0));
  }
}

/// Angle of the point where the eta-walk from 0 enters {v . zeta >= alpha}.
/// alpha is measured in lattice units along the unit vector zeta.
template <std::size_t D>
DirectionStats<D> directedness_experiment(const DistributionSpec& dist, const RealVector<D>& zeta_dir,
                                          std::vector<double> alphas, int L, std::size_t reps, std::uint64_t seed0,
                                          unsigned workers = 1) {
  validate(dist);
  if (alphas.empty()) throw std::invalid_argument("directedness_experiment: no alpha values");
  if (reps < 1) throw std::invalid_argument("directedness_experiment: reps must be >= 1");
  const auto zeta = unit_vector<D>(zeta_dir);
  const MarginPolicy margin{L};
  for (double a : alphas) margin.require(a, "directedness_experiment: alpha");

  const auto box = Box<D>::cube(L);
  auto one = [&](std::size_t rep) {
    std::vector<DirectionRecord<D>> out;
    const auto seed = seed0 + rep;
    const PassageEngine<D> engine(make_environment<D>(seed, dist, box));
    for (double a : alphas) {
      DirectionRecord<D> rec;
      rec.rep = rep;
      rec.seed = seed;
      rec.alpha = a;
      if (dot<D>(zeta, origin<D>()) >= a) {
        rec.degenerate = true;
        rec.length = 1;
        out.push_back(rec);
        continue;
      }
      const auto field = eta_field<D>(engine, zeta, a);
      const auto walk = eta_walk<D>(field, engine, origin<D>());
      rec.hit = walk.back();
      rec.length = walk.size();
      rec.angle = angle_from<D>(zeta, rec.hit);
      rec.excluded = margin.touches_band<D>(walk);
      out.push_back(rec);
    }
    return out;
  };

  DirectionStats<D> st;
  st.zeta = zeta;
  st.alphas = alphas;
  st.L = L;
  st.reps = reps;
  st.seed0 = seed0;
  for (auto& batch : run_replications(reps, workers, one))
    for (auto& r : batch) st.records.push_back(r);
  for (double a : alphas) {
    AlphaSpread sp;
    sp.alpha = a;
    std::vector<double> angles;
    for (const auto& r : st.records) {
      if (r.alpha != a) continue;
      if (r.degenerate) {
        ++sp.degenerate;
      } else if (r.excluded) {
        ++sp.excluded;
      } else {
        angles.push_back(r.angle);
        sp.mean_abs += std::abs(r.angle);
      }
    }
    sp.used = angles.size();
    if (!angles.empty()) {
      sp.mean_abs /= double(angles.size());
      sp.q25 = quantile_of(angles, 0.25);
      sp.median = quantile_of(angles, 0.5);
      sp.q75 = quantile_of(angles, 0.75);
      sp.iqr = sp.q75 - sp.q25;
      sp.iqr_stderr = bootstrap_stderr(
          angles, [](const std::vector<double>& xs) { return quantile_of(xs, 0.75) - quantile_of(xs, 0.25); }, 200,
          seed0 ^ std::uint64_t(std::llround(a * 1024.0)));
    }
    st.excluded += sp.excluded;
    st.spreads.push_back(sp);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Coalescence

template <std::size_t D>
struct CoalescenceRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::size_t offset_index = 0;
  bool met = false;     // the geodesics share a vertex
  bool merged = false;  // ... and the first one lies before the half-space
  std::size_t depth = 0;  // steps from 0 to the first shared vertex
  bool suffix_identical = true;
  bool excluded = false;
};

template <std::size_t D>
struct OffsetFrequency {
  Vertex<D> offset{};
  std::size_t used = 0;
  std::size_t merged = 0;
  double frequency = 0.0;
  double stderr_ = 0.0;
  Interval ci95;
  std::vector<std::size_t> depth_histogram;  // merged records per depth bin
};

template <std::size_t D>
struct CoalescenceSummary {
  double alpha = 0.0;
  int L = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  std::size_t bin_width = 10;
  std::vector<OffsetFrequency<D>> offsets;
  std::vector<CoalescenceRecord<D>> records;
  std::size_t excluded = 0;
  std::size_t suffix_violations = 0;
};

/// Geodesics from 0 and from each offset to {v . e1 >= alpha}; a pair merges
/// when it shares a vertex before reaching the half-space.
template <std::size_t D>
CoalescenceSummary<D> coalescence_experiment(const DistributionSpec& dist, const std::vector<Vertex<D>>& offsets,
                                             double alpha, int L, std::size_t reps, std::uint64_t seed0,
                                             unsigned workers = 1, std::size_t bin_width = 10) {
  validate(dist);
  if (offsets.empty()) throw std::invalid_argument("coalescence_experiment: no offsets");
  if (reps < 1) throw std::invalid_argument("coalescence_experiment: reps must be >= 1");
  if (bin_width < 1) throw std::invalid_argument("coalescence_experiment: bin width must be >= 1");
  const MarginPolicy margin{L};
  margin.require(alpha, "coalescence_experiment: alpha");
  const auto box = Box<D>::cube(L);
  for (const auto& o : offsets) box.checked_index(o);

  auto one = [&](std::size_t rep) {
    std::vector<CoalescenceRecord<D>> out;
    const auto seed = seed0 + rep;
    const PassageEngine<D> engine(make_environment<D>(seed, dist, box));
    std::vector<Vertex<D>> stops{origin<D>()};
    stops.insert(stops.end(), offsets.begin(), offsets.end());
    const auto target = axis_half_space<D>(0, alpha);
    const auto map = engine.solve(target, SubgraphMask::full(), stops);
    const auto base = map.geodesic(origin<D>());
    const bool base_out = margin.touches_band<D>(base);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      CoalescenceRecord<D> rec;
      rec.rep = rep;
      rec.seed = seed;
      rec.offset_index = k;
      const auto other = map.geodesic(offsets[k]);
      rec.excluded = base_out || margin.touches_band<D>(other);
      if (const auto c = coalescence_point<D>(base, other)) {
        rec.met = true;
        rec.merged = !target_contains<D>(target, c->vertex);
        rec.depth = c->index1;
        rec.suffix_identical = c->suffix_identical;
      }
      out.push_back(rec);
    }
    return out;
  };

  CoalescenceSummary<D> s;
  s.alpha = alpha;
  s.L = L;
  s.reps = reps;
  s.seed0 = seed0;
  s.bin_width = bin_width;
  for (auto& batch : run_replications(reps, workers, one))
    for (auto& r : batch) s.records.push_back(r);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    OffsetFrequency<D> f;
    f.offset = offsets[k];
    for (const auto& r : s.records) {
      if (r.offset_index != k) continue;
      if (!r.suffix_identical) ++s.suffix_violations;
      if (r.excluded) {
        ++s.excluded;
        continue;
      }
      ++f.used;
      if (!r.merged) continue;
      ++f.merged;
      const std::size_t bin = r.depth / bin_width;
      if (f.depth_histogram.size() <= bin) f.depth_histogram.resize(bin + 1, 0);
      ++f.depth_histogram[bin];
    }
    if (f.used) {
      f.frequency = double(f.merged) / double(f.used);
      f.stderr_ = std::sqrt(f.frequency * (1.0 - f.frequency) / double(f.used));
    }
    f.ci95 = wilson_interval(f.merged, f.used, kZ95);
    s.offsets.push_back(f);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Half-plane crossing comparison (d = 2)

struct HalfPlaneCompare {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  Vertex<2> hit_top{};     // a: where the geodesic from the first start enters the target
  Vertex<2> hit_bottom{};  // b: the same for the second start
  double busemann_top = 0.0;     // T(x, a) - T(y, a)
  double busemann_bottom = 0.0;  // T(x, b) - T(y, b)
  double delta_proxy = 0.0;      // top - bottom
  std::optional<Vertex<2>> crossing_vertex;
  GeodesicPath<2> path_top;
  GeodesicPath<2> path_bottom;
  bool violation = false;  // crossing present and delta_proxy < -1e-9
  bool excluded = false;
};

/// One environment: geodesics from x and y to {v[0] >= alpha} inside the
/// half-plane {v[0] >= 0}, with the point-to-point times at both hitting vertices.
inline HalfPlaneCompare halfplane_instance(const PassageEngine<2>& engine, double alpha,
                                           const Vertex<2>& x = {0, 0}, const Vertex<2>& y = {0, 1}) {
  const auto mask = SubgraphMask::half_plane(0, 0);
  const auto target = axis_half_space<2>(0, alpha);
  const Vertex<2> starts[] = {x, y};
  const auto map = engine.solve(target, mask, starts);
  const auto gx = map.geodesic(x);
  const auto gy = map.geodesic(y);
  HalfPlaneCompare out;
  out.hit_top = gx.back();
  out.hit_bottom = gy.back();
  const auto from_a = engine.solve(point_target<2>(out.hit_top), mask, starts);
  const auto from_b = engine.solve(point_target<2>(out.hit_bottom), mask, starts);
  out.busemann_top = from_a.at(x) - from_a.at(y);
  out.busemann_bottom = from_b.at(x) - from_b.at(y);
  out.delta_proxy = out.busemann_top - out.busemann_bottom;
  if (const auto c = coalescence_point<2>(gx, gy)) out.crossing_vertex = c->vertex;
  out.path_top = gx;
  out.path_bottom = gy;
  out.violation = out.crossing_vertex.has_value() && out.delta_proxy < -kTolerance;
  return out;
}

struct HalfPlaneSummary {
  double alpha = 0.0;
  int L = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  std::size_t crossings = 0;
  std::size_t violations = 0;
  std::size_t excluded = 0;
  MeanStderr delta;  // over kept replications
  std::vector<HalfPlaneCompare> records;
};

template <std::size_t D>
HalfPlaneSummary halfplane_compare(const DistributionSpec& dist, double alpha, int L, std::size_t reps,
                                   std::uint64_t seed0, unsigned workers = 1) {
  if constexpr (D != 2) {
    throw std::invalid_argument("halfplane_compare is defined for d = 2 only");
  } else {
    validate(dist);
    if (reps < 1) throw std::invalid_argument("halfplane_compare: reps must be >= 1");
    if (alpha <= 0.0) throw std::invalid_argument("halfplane_compare: alpha must be positive");
    const MarginPolicy margin{L};
    margin.require(alpha, "halfplane_compare: alpha");
    const auto box = Box<2>::cube(L);
    auto one = [&](std::size_t rep) {
      const PassageEngine<2> engine(make_environment<2>(seed0 + rep, dist, box));
      auto rec = halfplane_instance(engine, alpha);
      rec.rep = rep;
      rec.seed = seed0 + rep;
      rec.excluded = margin.touches_band<2>(rec.path_top) || margin.touches_band<2>(rec.path_bottom);
      return rec;
    };
    HalfPlaneSummary s;
    s.alpha = alpha;
    s.L = L;
    s.reps = reps;
    s.seed0 = seed0;
    s.records = run_replications(reps, workers, one);
    std::vector<double> deltas;
    for (const auto& r : s.records) {
      if (r.excluded) {
        ++s.excluded;
        continue;
      }
      deltas.push_back(r.delta_proxy);
      s.crossings += r.crossing_vertex.has_value();
      s.violations += r.violation;
    }
    s.delta = mean_stderr(deltas);
    return s;
  }
}

}  // namespace geodesy
