#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "geodesy/distribution.hpp"
#include "geodesy/lattice.hpp"

namespace geodesy {

/// Every weight is a multiple of 2^-32. Passage times below 2^21 are then
/// exact sums in double precision, so differences of passage times obey
/// additivity and antisymmetry bit-for-bit.
inline constexpr double kWeightQuantum = 0x1p-32;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform variate in the open interval (0, 1) with 53 random bits.
inline double to_open_unit(std::uint64_t h) { return (double(h >> 11) + 0.5) * 0x1p-53; }

/// Round w onto the quantum grid, staying strictly inside (lo, hi) and > 0.
inline double quantize_weight(double w, double lo = 0.0, double hi = HUGE_VAL) {
  double q = std::nearbyint(w / kWeightQuantum);
  if (q * kWeightQuantum <= lo) q = std::floor(lo / kWeightQuantum) + 1.0;
  if (q * kWeightQuantum >= hi) q = std::ceil(hi / kWeightQuantum) - 1.0;
  if (q < 1.0) q = 1.0;
  return q * kWeightQuantum;
}

template <std::size_t D>
using WeightTable = std::map<EdgeId<D>, double>;

/// The configuration (t_e) restricted to a box. Weights are a pure function of
/// (seed, dist, absolute edge coordinates): two fields over overlapping boxes
/// agree edge-for-edge, and shifts and reflections are exact relabellings.
/// Immutable; safe to share across threads.
template <std::size_t D>
class WeightField {
 public:
  static WeightField hashed(std::uint64_t seed, const DistributionSpec& dist, const Box<D>& box) {
    validate(dist);
    WeightField f;
    f.seed_ = seed;
    f.dist_ = dist;
    f.box_ = box;
    f.fingerprint_ = f.compute_fingerprint();
    return f;
  }

  /// Explicit per-edge weights (absolute coordinates). Every edge of `box`
  /// must be present and strictly positive.
  static WeightField fixture(const Box<D>& box, const WeightTable<D>& table) {
    auto quantized = std::make_shared<WeightTable<D>>();
    for (const auto& [edge, w] : table) {
      if (!(std::isfinite(w) && w > 0.0))
        throw std::invalid_argument("fixture weight on edge at " + to_string<D>(edge.base) + " must be finite and > 0");
      (*quantized)[edge] = quantize_weight(w);
    }
    for (std::size_t i = 0; i < box.size(); ++i) {
      const auto v = box.vertex(i);
      for (int a = 0; a < int(D); ++a) {
        if (v[a] < box.hi()[a] && !quantized->count(EdgeId<D>{v, a}))
          throw std::invalid_argument("fixture is missing the edge " + to_string<D>(v) + " axis " + std::to_string(a));
      }
    }
    WeightField f;
    f.table_ = std::move(quantized);
    f.box_ = box;
    f.fingerprint_ = f.compute_fingerprint();
    return f;
  }

  const Box<D>& box() const { return box_; }
  std::uint64_t seed() const { return seed_; }
  const std::optional<DistributionSpec>& distribution() const { return dist_; }
  bool is_fixture() const { return table_ != nullptr; }
  /// Identifies the weight assignment (not the box); equal for equal fields.
  std::uint64_t fingerprint() const { return fingerprint_; }

  double weight(const EdgeId<D>& e) const {
    if (!box_.contains(e)) throw DomainError("edge at " + to_string<D>(e.base) + " lies outside the environment box");
    return weight_unchecked(e);
  }

  double weight(const Vertex<D>& u, const Vertex<D>& v) const { return weight(make_edge<D>(u, v)); }

  /// No box check; used by the solver on edges it already knows are inside.
  double weight_unchecked(const EdgeId<D>& e) const {
    const auto a = to_absolute(e.base);
    const auto b = to_absolute(e.tip());
    const auto abs_edge = make_edge<D>(a, b);
    if (table_) {
      auto it = table_->find(abs_edge);
      if (it == table_->end()) throw DomainError("fixture has no weight for edge at " + to_string<D>(abs_edge.base));
      return it->second;
    }
    const auto [lo, hi] = support(*dist_);
    return quantize_weight(quantile(*dist_, to_open_unit(edge_hash(abs_edge))), lo, hi);
  }

  /// theta_z: the returned field satisfies w'({x, y}) = w({x + z, y + z}); its box is box - z.
  WeightField shifted(const Vertex<D>& z) const {
    WeightField f = *this;
    for (std::size_t i = 0; i < D; ++i) f.offset_[i] += f.sign_[i] * z[i];
    f.box_ = box_.translated(-z);
    f.fingerprint_ = f.compute_fingerprint();
    return f;
  }

  /// Mirror image through the hyperplane x[axis] = 0: w'({x, y}) = w({Rx, Ry}).
  WeightField reflected(int axis) const {
    WeightField f = *this;
    f.sign_[axis] = -f.sign_[axis];
    auto lo = box_.lo();
    auto hi = box_.hi();
    lo[axis] = -box_.hi()[axis];
    hi[axis] = -box_.lo()[axis];
    f.box_ = Box<D>(lo, hi);
    f.fingerprint_ = f.compute_fingerprint();
    return f;
  }

  /// Same weights, different (sub- or super-) box. The caller is responsible
  /// for fixtures covering the new box.
  WeightField with_box(const Box<D>& box) const {
    WeightField f = *this;
    f.box_ = box;
    return f;
  }

 private:
  WeightField() {
    sign_.fill(1);
    offset_.fill(0);
  }

  Vertex<D> to_absolute(const Vertex<D>& v) const {
    Vertex<D> out;
    for (std::size_t i = 0; i < D; ++i) out[i] = sign_[i] * v[i] + offset_[i];
    return out;
  }

  std::uint64_t edge_hash(const EdgeId<D>& e) const {
    std::uint64_t h = splitmix64(seed_);
    for (std::size_t i = 0; i < D; ++i) h = splitmix64(h ^ std::uint64_t(std::uint32_t(e.base[i])));
    return splitmix64(h ^ (std::uint64_t(e.axis) + 1) * 0xD6E8FEB86659FD93ULL);
  }

  std::uint64_t compute_fingerprint() const {
    std::uint64_t h = splitmix64(0x5EEDULL);
    auto mix = [&](std::uint64_t x) { h = splitmix64(h ^ x); };
    for (std::size_t i = 0; i < D; ++i) {
      mix(std::uint64_t(std::uint32_t(sign_[i])));
      mix(std::uint64_t(std::uint32_t(offset_[i])));
    }
    if (table_) {
      for (const auto& [edge, w] : *table_) {
        for (std::size_t i = 0; i < D; ++i) mix(std::uint64_t(std::uint32_t(edge.base[i])));
        mix(std::uint64_t(edge.axis));
        mix(std::bit_cast<std::uint64_t>(w));
      }
    } else {
      mix(seed_);
      for (char c : describe(*dist_)) mix(std::uint64_t(std::uint8_t(c)));
    }
    return h;
  }

  std::uint64_t seed_ = 0;
  std::optional<DistributionSpec> dist_;
  std::shared_ptr<const WeightTable<D>> table_;
  Box<D> box_;
  Vertex<D> sign_;
  Vertex<D> offset_;
  std::uint64_t fingerprint_ = 0;
};

template <std::size_t D>
WeightField<D> make_environment(std::uint64_t seed, const DistributionSpec& dist, const Box<D>& box) {
  return WeightField<D>::hashed(seed, dist, box);
}

template <std::size_t D>
double sample_weight(const WeightField<D>& env, const EdgeId<D>& e) {
  return env.weight(e);
}

template <std::size_t D>
WeightField<D> shift_environment(const WeightField<D>& env, const Vertex<D>& z) {
  return env.shifted(z);
}

}  // namespace geodesy
