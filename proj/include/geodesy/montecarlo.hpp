#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "geodesy/passage.hpp"

namespace geodesy {

/// A requested geometry does not fit inside the box minus its safety band.
class MarginError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boxes are [-L, L]^d; the outer band of width L/8 is where box-restricted
/// passage times start to feel the boundary.
struct MarginPolicy {
  int L = 0;

  int band() const { return L / 8; }
  /// Radius of the inner (trusted) box.
  int inner_radius() const { return L - band(); }

  template <std::size_t D>
  bool in_band(const Vertex<D>& v) const {
    return sup_norm<D>(v) > inner_radius();
  }

  template <std::size_t D>
  bool touches_band(const GeodesicPath<D>& path) const {
    return std::any_of(path.vertices.begin(), path.vertices.end(), [&](const auto& v) { return in_band<D>(v); });
  }

  /// Throws MarginError unless `extent` (a sup-norm radius) fits inside the inner box.
  void require(double extent, const char* what) const {
    if (extent > inner_radius())
      throw MarginError(std::string(what) + " needs radius " + std::to_string(extent) + " but the inner box of L=" +
                        std::to_string(L) + " has radius " + std::to_string(inner_radius()));
  }
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  out.count = xs.size();
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / double(xs.size() - 1) / double(xs.size()));
  return out;
}

/// Wilson score interval for a binomial proportion.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = double(trials);
  const double p = double(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Two-sided standard normal quantiles used for confidence bounds.
inline constexpr double kZ95 = 1.959963984540054;
inline constexpr double kZ99 = 2.5758293035489004;

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile_of(std::vector<double> xs, double q) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const double pos = q * double(xs.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - double(lo)) * (xs[hi] - xs[lo]);
}

/// Bootstrap standard error of `stat` over `resamples` resamples; the index
/// stream is a splitmix64 counter keyed by `seed`.
template <class Stat>
double bootstrap_stderr(const std::vector<double>& xs, Stat stat, std::size_t resamples, std::uint64_t seed) {
  if (xs.size() < 2 || resamples < 2) return std::nan("");
  std::vector<double> values, draw(xs.size());
  std::uint64_t h = seed;
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& d : draw) {
      h = splitmix64(h + 0x9e3779b97f4a7c15ull);
      d = xs[h % xs.size()];
    }
    values.push_back(stat(draw));
  }
  // spread of the bootstrap replicates, not of their mean
  return mean_stderr(values).stderr_ * std::sqrt(double(values.size()));
}

inline unsigned resolve_workers(unsigned workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  return workers;
}

/// Runs fn(rep) for rep in [0, reps) on up to `workers` threads and returns
/// the results in rep order, independent of scheduling.
template <class Fn>
auto run_replications(std::size_t reps, unsigned workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(reps);
  workers = std::min<unsigned>(resolve_workers(workers), unsigned(std::max<std::size_t>(reps, 1)));
  if (workers <= 1) {
    for (std::size_t r = 0; r < reps; ++r) out[r] = fn(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < reps; r = next++) {
        try {
          out[r] = fn(r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace geodesy
