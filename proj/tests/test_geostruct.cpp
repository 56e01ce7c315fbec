#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "geodesy/geostruct.hpp"
#include "oracles.hpp"

using namespace geodesy;

namespace {

std::int8_t code_of(const Vertex<2>& from, const Vertex<2>& to) {
  for (int a = 0; a < 2; ++a)
    if (from[a] != to[a]) return std::int8_t(2 * a + (to[a] > from[a] ? 1 : 0));
  return kNoDirection;
}

}  // namespace

TEST_CASE("geodesic tree of the hand square", "[tree]") {
  const auto env = fixtures::square();
  const auto tree = geodesic_tree<2>(env, {0, 0});
  CHECK(tree.parent_of({0, 0}) == std::nullopt);
  CHECK(*tree.parent_of({1, 0}) == Vertex<2>{0, 0});
  CHECK(*tree.parent_of({1, 1}) == Vertex<2>{1, 0});
  CHECK(*tree.parent_of({0, 1}) == Vertex<2>{0, 0});
  CHECK(tree.edge_count() == 3);
  CHECK(tree.reachable_count() == 4);
  CHECK(tree.path_from_root({1, 1}).vertices == std::vector<Vertex<2>>{{0, 0}, {1, 0}, {1, 1}});
  CHECK(verify_tree<2>(tree, env, 10).ok());
}

TEST_CASE("single-vertex tree", "[tree]") {
  WeightTable<2> none;
  const auto env = WeightField<2>::fixture(Box<2>({0, 0}, {0, 0}), none);
  const auto tree = geodesic_tree<2>(env, {0, 0});
  CHECK(tree.edge_count() == 0);
  CHECK(tree.reachable_count() == 1);
  const auto r = verify_tree<2>(tree, env, 3);
  CHECK(r.acyclic);
  CHECK(r.ok());
}

TEST_CASE("tree invariants on random environments", "[tree][property]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto env = make_environment<2>(seed, Exponential{1.0}, Box<2>::cube(12));
    const PassageEngine<2> engine(env);
    const auto tree = geodesic_tree<2>(engine, {2, -3});
    CHECK(tree.edge_count() + 1 == tree.reachable_count());
    const auto r = verify_tree<2>(tree, engine, 40, seed);
    CHECK(r.acyclic);
    CHECK(r.spanning);
    CHECK(r.max_deviation <= 1e-9);
    CHECK(r.subpath_violations == 0);
    CHECK(surviving_branches<2>(tree, 4, 10) >= 1);
  }
}

TEST_CASE("verify_tree on 64x64, seed 7", "[tree]") {
  const auto env = make_environment<2>(7, Exponential{1.0}, Box<2>({0, 0}, {63, 63}));
  const PassageEngine<2> engine(env);
  const auto r = verify_tree<2>(geodesic_tree<2>(engine, {31, 31}), engine, 100, 7);
  CHECK(r.samples == 100);
  CHECK(r.subpath_checks == 100);
  CHECK(r.subpath_violations == 0);
  CHECK(r.ok());
}

TEST_CASE("verify_tree detects a corrupted parent pointer", "[tree][negative]") {
  const auto env = fixtures::square();
  auto tree = geodesic_tree<2>(env, {0, 0});
  // (1,1) already points at (1,0); make (1,0) point back at (1,1)
  tree.parent[tree.box.index({1, 0})] = code_of({1, 0}, {1, 1});
  CHECK_FALSE(verify_tree<2>(tree, env).acyclic);
  CHECK_THROWS_AS(tree.path_to_root({1, 1}), StructuralError);
}

TEST_CASE("verify_tree rejects a foreign environment", "[tree][errors]") {
  const auto a = make_environment<2>(1, Exponential{1.0}, Box<2>::cube(3));
  const auto b = make_environment<2>(2, Exponential{1.0}, Box<2>::cube(3));
  CHECK_THROWS_AS(verify_tree<2>(geodesic_tree<2>(a, {0, 0}), b), std::invalid_argument);
}

TEST_CASE("eta field on the hand square", "[eta]") {
  const auto env = fixtures::square();
  const PassageEngine<2> engine(env);
  const auto f = eta_field<2>(engine, {1.0, 0.0}, 1.0);
  CHECK(f.eta({0, 0}, {1, 0}));
  CHECK(f.eta({0, 1}, {1, 1}));
  CHECK_FALSE(f.eta({0, 0}, {0, 1}));
  CHECK_FALSE(f.eta({1, 0}, {1, 1}));
  // reversed edge against a decreasing gradient
  CHECK_FALSE(f.eta({1, 0}, {0, 0}));
  CHECK(f.dead_ends() == 0);

  const auto walk = eta_walk<2>(f, engine, {0, 0});
  CHECK(walk.vertices == std::vector<Vertex<2>>{{0, 0}, {1, 0}});
  CHECK(engine.path_weight(walk) == 0.5);
  CHECK(eta_walk<2>(f, engine, {1, 1}).vertices == std::vector<Vertex<2>>{{1, 1}});
}

TEST_CASE("eta walks are geodesics to the half-space", "[eta][property]") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto env = make_environment<2>(seed, Exponential{1.0}, Box<2>({0, 0}, {63, 63}));
    const PassageEngine<2> engine(env);
    const auto f = eta_field<2>(engine, {1.0, 0.0}, 50.0);
    const auto map = engine.solve(axis_half_space<2>(0, 50.0));
    CHECK(f.dead_ends() == 0);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coord(0, 63);
    for (int s = 0; s < 20; ++s) {
      const Vertex<2> x{coord(rng), coord(rng)};
      const auto walk = eta_walk<2>(f, engine, x);
      REQUIRE(std::abs(engine.path_weight(walk) - map.at(x)) <= 1e-9);
      REQUIRE(f.in_target(walk.back()));
      // the solver's own geodesic uses eta edges only
      const auto g = map.geodesic(x);
      for (std::size_t i = 1; i < g.size(); ++i) REQUIRE(f.eta(g[i - 1], g[i]));
    }
  }
}

TEST_CASE("eta walk from a disconnected vertex", "[eta][errors]") {
  const auto env = make_environment<2>(3, Exponential{1.0}, Box<2>::cube(4));
  const PassageEngine<2> engine(env);
  const auto f = eta_field<2>(engine, {1.0, 0.0}, 2.0, SubgraphMask::half_plane(0, 0));
  CHECK_THROWS_AS(eta_walk<2>(f, engine, {-2, 0}), Unreachable);
  CHECK_NOTHROW(eta_walk<2>(f, engine, {0, 4}));
}

TEST_CASE("coalescence point", "[coalescence]") {
  const GeodesicPath<2> p{{{0, 0}, {1, 0}, {2, 0}}};
  SECTION("identical paths meet at their first vertex") {
    const auto c = coalescence_point<2>(p, p);
    REQUIRE(c);
    CHECK(c->vertex == Vertex<2>{0, 0});
    CHECK(c->index1 == 0);
    CHECK(c->index2 == 0);
    CHECK(c->suffix_identical);
  }
  SECTION("disjoint paths do not meet") {
    CHECK_FALSE(coalescence_point<2>(p, GeodesicPath<2>{{{0, 1}, {1, 1}}}));
  }
  SECTION("hand square tree branches meet at the root") {
    const auto tree = geodesic_tree<2>(fixtures::square(), {0, 0});
    const auto c = coalescence_point<2>(tree.path_to_root({1, 1}), tree.path_to_root({0, 1}));
    REQUIRE(c);
    CHECK(c->vertex == Vertex<2>{0, 0});
    CHECK(c->index1 == 2);
    CHECK(c->index2 == 1);
    CHECK(c->suffix_identical);
  }
  SECTION("a crossing that separates again is flagged") {
    const GeodesicPath<2> q{{{1, -1}, {1, 0}, {1, 1}}};
    const auto c = coalescence_point<2>(p, q);
    REQUIRE(c);
    CHECK(c->vertex == Vertex<2>{1, 0});
    CHECK_FALSE(c->suffix_identical);
  }
}

TEST_CASE("geodesics to a common target intersect in a single subpath", "[coalescence][property]") {
  const auto env = make_environment<2>(31, Exponential{1.0}, Box<2>::cube(24));
  const auto map = PassageEngine<2>(env).solve(point_target<2>({20, 0}));
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> coord(-24, 24);
  std::size_t met = 0;
  for (int k = 0; k < 200; ++k) {
    const auto a = map.geodesic({coord(rng), coord(rng)});
    const auto b = map.geodesic({coord(rng), coord(rng)});
    const auto c = coalescence_point<2>(a, b);
    REQUIRE(c);
    REQUIRE(c->suffix_identical);
    ++met;
  }
  CHECK(met == 200);
}

TEST_CASE("infection partition", "[partition]") {
  SECTION("one seed labels everything") {
    const auto env = make_environment<2>(4, Exponential{1.0}, Box<2>::cube(5));
    const auto part = infection_partition<2>(env, {{1, 1}});
    for (int l : part.label) REQUIRE(l == 1);
    CHECK(part.boundary_reach[0]);
  }

  SECTION("hand square with seeds (0,0) and (1,1)") {
    const auto part = infection_partition<2>(fixtures::square(), {{0, 0}, {1, 1}});
    CHECK(part.label_of({0, 0}) == 1);
    CHECK(part.label_of({1, 0}) == 1);
    CHECK(part.label_of({0, 1}) == 2);
    CHECK(part.label_of({1, 1}) == 2);
    CHECK(part.contested == 0);
    CHECK(part.counts() == std::vector<std::size_t>{0, 2, 2});
  }

  SECTION("mirroring the environment mirrors the labels") {
    const auto env = make_environment<2>(12, Exponential{1.0}, Box<2>::cube(8));
    const auto mirror = env.reflected(0);
    const auto part = infection_partition<2>(env, {{-3, 1}, {3, 1}});
    // reflection through x = 0 swaps the roles of the seeds
    const auto flip = infection_partition<2>(mirror, {{3, 1}, {-3, 1}});
    for (std::size_t i = 0; i < part.box.size(); ++i) {
      auto v = part.box.vertex(i);
      const int l = part.label[i];
      v[0] = -v[0];
      REQUIRE(flip.label_of(v) == l);
    }
  }

  SECTION("labels are geodesically connected and never contested") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto env = make_environment<2>(seed, Exponential{1.0}, Box<2>::cube(16));
      const auto part = infection_partition<2>(env, {{0, 0}, {4, 0}});
      REQUIRE(part.contested == 0);
      REQUIRE(part.connectivity_violations == 0);
      const auto c = part.counts();
      REQUIRE(c[1] + c[2] == part.box.size());
    }
  }

  SECTION("bad seed lists") {
    const auto env = fixtures::square();
    CHECK_THROWS_AS(infection_partition<2>(env, {}), std::invalid_argument);
    CHECK_THROWS_AS(infection_partition<2>(env, {{0, 0}, {0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(infection_partition<2>(env, {{0, 0}, {5, 0}}), DomainError);
  }
}
