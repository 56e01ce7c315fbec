#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>

#include "json.hpp"

namespace geodesy {

struct Exponential {
  double rate = 1.0;
};

/// Uniform on the open interval (a, b).
struct Uniform {
  double a = 0.0;
  double b = 1.0;
};

struct ShiftedExponential {
  double shift = 0.0;
  double rate = 1.0;
};

/// Continuous edge-weight law on [0, inf). Atoms are rejected at validation.
using DistributionSpec = std::variant<Exponential, Uniform, ShiftedExponential>;

namespace detail {
template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;
}  // namespace detail

inline void validate(const DistributionSpec& dist) {
  auto positive_rate = [](double rate) {
    if (!(std::isfinite(rate) && rate > 0.0)) throw std::invalid_argument("distribution rate must be finite and > 0");
  };
  std::visit(detail::overloaded{
                 [&](const Exponential& e) { positive_rate(e.rate); },
                 [&](const Uniform& u) {
                   if (!(std::isfinite(u.a) && std::isfinite(u.b))) throw std::invalid_argument("uniform bounds must be finite");
                   if (u.a < 0.0) throw std::invalid_argument("uniform lower bound must be >= 0");
                   if (!(u.a < u.b)) throw std::invalid_argument("uniform requires a < b (a = b is an atom)");
                 },
                 [&](const ShiftedExponential& s) {
                   if (!(std::isfinite(s.shift) && s.shift >= 0.0)) throw std::invalid_argument("shift must be finite and >= 0");
                   positive_rate(s.rate);
                 },
             },
             dist);
}

/// Inverse CDF; u must lie in the open interval (0, 1).
inline double quantile(const DistributionSpec& dist, double u) {
  return std::visit(detail::overloaded{
                        [&](const Exponential& e) { return -std::log1p(-u) / e.rate; },
                        [&](const Uniform& v) { return v.a + (v.b - v.a) * u; },
                        [&](const ShiftedExponential& s) { return s.shift - std::log1p(-u) / s.rate; },
                    },
                    dist);
}

inline double cdf(const DistributionSpec& dist, double x) {
  return std::visit(detail::overloaded{
                        [&](const Exponential& e) { return x <= 0.0 ? 0.0 : -std::expm1(-e.rate * x); },
                        [&](const Uniform& v) { return x <= v.a ? 0.0 : x >= v.b ? 1.0 : (x - v.a) / (v.b - v.a); },
                        [&](const ShiftedExponential& s) {
                          return x <= s.shift ? 0.0 : -std::expm1(-s.rate * (x - s.shift));
                        },
                    },
                    dist);
}

inline double mean(const DistributionSpec& dist) {
  return std::visit(detail::overloaded{
                        [](const Exponential& e) { return 1.0 / e.rate; },
                        [](const Uniform& v) { return 0.5 * (v.a + v.b); },
                        [](const ShiftedExponential& s) { return s.shift + 1.0 / s.rate; },
                    },
                    dist);
}

/// Open support interval (lo, hi); hi is +inf for exponential laws.
inline std::pair<double, double> support(const DistributionSpec& dist) {
  return std::visit(detail::overloaded{
                        [](const Exponential&) { return std::pair{0.0, HUGE_VAL}; },
                        [](const Uniform& v) { return std::pair{v.a, v.b}; },
                        [](const ShiftedExponential& s) { return std::pair{s.shift, HUGE_VAL}; },
                    },
                    dist);
}

inline void to_json(nlohmann::json& j, const DistributionSpec& dist) {
  std::visit(detail::overloaded{
                 [&](const Exponential& e) { j = {{"kind", "exponential"}, {"rate", e.rate}}; },
                 [&](const Uniform& u) { j = {{"kind", "uniform"}, {"a", u.a}, {"b", u.b}}; },
                 [&](const ShiftedExponential& s) {
                   j = {{"kind", "shifted_exponential"}, {"shift", s.shift}, {"rate", s.rate}};
                 },
             },
             dist);
}

inline DistributionSpec distribution_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw std::invalid_argument("distribution must be an object with a string \"kind\"");
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number())
      throw std::invalid_argument(std::string("distribution field \"") + key + "\" must be a number");
    return j[key].get<double>();
  };
  const auto kind = j["kind"].get<std::string>();
  DistributionSpec dist;
  if (kind == "exponential") {
    dist = Exponential{number("rate")};
  } else if (kind == "uniform") {
    dist = Uniform{number("a"), number("b")};
  } else if (kind == "shifted_exponential" || kind == "shifted-exponential") {
    dist = ShiftedExponential{number("shift"), number("rate")};
  } else {
    throw std::invalid_argument("unknown distribution kind \"" + kind + "\"");
  }
  validate(dist);
  return dist;
}

inline std::string describe(const DistributionSpec& dist) {
  nlohmann::json j;
  to_json(j, dist);
  return j.dump();
}

}  // namespace geodesy
