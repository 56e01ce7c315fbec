#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "geodesy/busemann.hpp"
#include "geodesy/geostruct.hpp"

using namespace geodesy;

TEST_CASE("point Busemann values", "[busemann]") {
  const auto env = fixtures::square();
  const PassageEngine<2> engine(env);
  CHECK(busemann_point<2>(engine, {0, 1}, {0, 1}, {1, 1}) == 0.0);
  const double b = busemann_point<2>(engine, {0, 0}, {0, 1}, {1, 1});
  CHECK(std::abs(b - 0.8) <= 1e-9);
  CHECK(busemann_point<2>(engine, {0, 1}, {0, 0}, {1, 1}) == -b);
  CHECK(std::abs(b) <= engine.passage({0, 0}, {0, 1}));
}

TEST_CASE("window values", "[busemann][window]") {
  SECTION("hand square toward the half-space x >= 1") {
    const auto w = busemann_window<2>(fixtures::square(), {0, 0}, axis_half_space<2>(0, 1.0));
    CHECK(w.value({0, 0}) == 0.0);
    CHECK(std::abs(w.between({0, 0}, {0, 1}) - 0.1) <= 1e-9);
  }

  SECTION("additivity and antisymmetry are exact") {
    const auto env = make_environment<2>(8, Exponential{1.0}, Box<2>::cube(4));
    const PassageEngine<2> engine(env);
    const auto w = busemann_window<2>(engine, {0, 0}, axis_half_space<2>(0, 3.0));
    const auto& box = w.box;
    for (std::size_t i = 0; i < box.size(); ++i)
      for (std::size_t j = 0; j < box.size(); ++j) {
        const auto x = box.vertex(i), y = box.vertex(j);
        REQUIRE(w.between(x, y) == -w.between(y, x));
        REQUIRE(std::abs(w.between(x, y)) <= engine.passage(x, y) + 1e-9);
        for (std::size_t k = 0; k < box.size(); k += 7) {
          const auto z = box.vertex(k);
          REQUIRE(w.between(x, y) + w.between(y, z) - w.between(x, z) == 0.0);
        }
      }
  }

  SECTION("undefined outside the mask") {
    const auto env = make_environment<2>(8, Exponential{1.0}, Box<2>::cube(4));
    const auto w = busemann_window<2>(env, {1, 0}, axis_half_space<2>(0, 3.0), SubgraphMask::half_plane(0, 0));
    CHECK_FALSE(w.defined({-1, 0}));
    CHECK_THROWS_AS(w.value({-1, 0}), Unreachable);
    CHECK_THROWS_AS(busemann_window<2>(env, {-1, 0}, axis_half_space<2>(0, 3.0), SubgraphMask::half_plane(0, 0)),
                    Unreachable);
  }
}

TEST_CASE("bound |B| <= T on random triples", "[busemann][property]") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> coord(-10, 10);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const PassageEngine<2> engine(make_environment<2>(seed, Uniform{0.1, 2.0}, Box<2>::cube(10)));
    for (int k = 0; k < 25; ++k) {
      const Vertex<2> x{coord(rng), coord(rng)}, y{coord(rng), coord(rng)}, z{coord(rng), coord(rng)};
      REQUIRE(std::abs(busemann_point<2>(engine, x, y, z)) <= engine.passage(x, y) + 1e-9);
    }
  }
}

TEST_CASE("along-ray sequences", "[busemann][ray]") {
  const auto env = make_environment<2>(44, Exponential{1.0}, Box<2>::cube(20));
  const PassageEngine<2> engine(env);
  const auto gamma = engine.solve(point_target<2>({18, 3})).geodesic({-15, -2});
  REQUIRE(gamma.size() > 30);

  SECTION("y = z_1 gives a nonincreasing sequence") {
    const auto seq = busemann_ray<2>(engine, {-10, 6}, gamma[0], gamma, 1);
    CHECK(seq.max_increase() <= 1e-9);
    CHECK(seq.terms.size() == gamma.size());
    for (double t : seq.terms) REQUIRE(std::abs(t) <= seq.passage_xy + 1e-9);
  }

  SECTION("ordered ray pairs agree with T") {
    const std::size_t i = 3, j = 11;
    const auto seq = busemann_ray<2>(engine, gamma[i], gamma[j], gamma, 1);
    for (std::size_t k = 0; k < seq.indices.size(); ++k)
      if (seq.indices[k] > j) REQUIRE(std::abs(seq.terms[k] - seq.passage_xy) <= 1e-9);
    CHECK(seq.converged);
  }

  SECTION("x = y gives zeros; the last vertex is always sampled") {
    const auto seq = busemann_ray<2>(engine, {2, 2}, {2, 2}, gamma, 7);
    for (double t : seq.terms) REQUIRE(t == 0.0);
    CHECK(seq.indices.back() == gamma.size() - 1);
  }

  SECTION("a non-geodesic base path is rejected") {
    GeodesicPath<2> detour{{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}, {0, -1}}};
    CHECK_THROWS_AS(busemann_ray<2>(engine, {0, 0}, {1, 0}, detour, 1), std::invalid_argument);
    CHECK_THROWS_AS(busemann_ray<2>(engine, {0, 0}, {1, 0}, gamma, 0), std::invalid_argument);
  }

  SECTION("coalescing rays share their tails exactly") {
    const auto map = engine.solve(point_target<2>({18, 3}));
    const auto other = map.geodesic({-15, 9});
    const auto c = coalescence_point<2>(gamma, other);
    REQUIRE(c);
    const auto s1 = busemann_ray<2>(engine, {0, -5}, {1, -5}, gamma, 1);
    const auto s2 = busemann_ray<2>(engine, {0, -5}, {1, -5}, other, 1);
    for (std::size_t k = 0; c->index1 + k < gamma.size(); ++k)
      REQUIRE(s1.terms[c->index1 + k] == s2.terms[c->index2 + k]);
  }
}

TEST_CASE("sublinearity diagnostic", "[busemann][sublinear]") {
  SECTION("a linear field has zero deviation") {
    BusemannWindow<2> w;
    w.origin = {0, 0};
    w.box = Box<2>::cube(40);
    w.dist.resize(w.box.size());
    const RealVector<2> rho{0.5, -0.25};
    for (std::size_t i = 0; i < w.box.size(); ++i) w.dist[i] = 1000.0 - dot<2>(rho, w.box.vertex(i));
    const auto shells = sublinearity_diagnostic<2>(w, rho);
    REQUIRE(shells.size() == 2);
    CHECK(shells[0].radius == 16);
    CHECK(shells[1].radius == 32);
    for (const auto& s : shells) {
      CHECK(s.max_deviation == 0.0);
      CHECK(s.count == std::size_t(8 * s.radius));
    }
  }

  SECTION("a zero slope against a real field is strictly positive") {
    const auto w = busemann_window<2>(make_environment<2>(2, Exponential{1.0}, Box<2>::cube(20)), {0, 0},
                                      axis_half_space<2>(0, 20.0));
    for (const auto& s : sublinearity_diagnostic<2>(w, {0.0, 0.0})) CHECK(s.max_deviation > 0.0);
  }

  SECTION("small windows are rejected") {
    const auto w = busemann_window<2>(fixtures::square(), {0, 0}, axis_half_space<2>(0, 1.0));
    CHECK_THROWS_AS(sublinearity_diagnostic<2>(w, {0.0, 0.0}), std::invalid_argument);
  }
}

TEST_CASE("averaging statistic", "[busemann][gm]") {
  SECTION("ell = n = 1 reduces to T(0, e1) on both sides") {
    const auto s = gm_statistic<2>(Exponential{1.0}, 1, 1, 16, 8, 100);
    for (const auto& r : s.records) REQUIRE(r.mean_busemann == r.scaled_passage);
    CHECK(s.difference == 0.0);
  }

  SECTION("per-realization bound and determinism") {
    const auto a = gm_statistic<2>(Exponential{1.0}, 2, 4, 32, 6, 7);
    const auto b = gm_statistic<2>(Exponential{1.0}, 2, 4, 32, 6, 7, 3);
    CHECK(a.bound_violations == 0);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      REQUIRE(a.records[i].seed == 7 + i);
      REQUIRE(a.records[i].mean_busemann == b.records[i].mean_busemann);
    }
  }

  SECTION("margin violations are errors") {
    CHECK_THROWS_AS(gm_statistic<2>(Exponential{1.0}, 4, 16, 32, 2, 0), MarginError);
  }
}
