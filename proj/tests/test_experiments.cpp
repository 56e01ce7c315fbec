#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <algorithm>
#include <numbers>

#include "fixtures.hpp"
#include "geodesy/config.hpp"
#include "geodesy/experiments.hpp"
#include "oracles.hpp"

using namespace geodesy;

namespace {

const DistributionSpec kExp{Exponential{1.0}};

}  // namespace

TEST_CASE("direction helpers", "[experiments]") {
  CHECK(round_point<2>({0.6, 0.8}, 10) == Vertex<2>{6, 8});
  CHECK(round_point<2>({-0.6, 0.8}, 5) == Vertex<2>{-3, 4});
  const auto u = unit_vector<2>({3.0, 4.0});
  CHECK(u[0] == Catch::Approx(0.6));
  CHECK(u[1] == Catch::Approx(0.8));

  const auto d2 = default_directions<2>(16);
  REQUIRE(d2.size() == 16);
  CHECK(d2[0][0] == Catch::Approx(1.0));
  CHECK(d2[4][1] == Catch::Approx(1.0));
  for (const auto& d : d2) CHECK(std::hypot(d[0], d[1]) == Catch::Approx(1.0));

  const auto d3 = default_directions<3>();
  CHECK(d3.size() == 26);

  CHECK(angle_from<2>({1.0, 0.0}, Vertex<2>{5, 5}) == Catch::Approx(std::numbers::pi / 4));
  CHECK(angle_from<2>({1.0, 0.0}, Vertex<2>{5, -5}) == Catch::Approx(-std::numbers::pi / 4));
  CHECK(angle_from<3>({1.0, 0.0, 0.0}, Vertex<3>{0, 0, 3}) == Catch::Approx(std::numbers::pi / 2));
}

TEST_CASE("shape estimate on a small box", "[experiments][shape]") {
  const auto est = estimate_shape<2>(kExp, default_directions<2>(8), {8, 16}, 24, 12, 100);
  REQUIRE(est.directions.size() == 8);
  REQUIRE(est.sizes == std::vector<int>{8, 16});
  CHECK(est.records.size() == 12);
  CHECK(est.subadditivity_checks > 0);
  CHECK(est.subadditivity_violations == 0);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t s = 0; s < 2; ++s) {
      CHECK(est.g[k][s].mean > 0.0);
      // T <= sum of weights along a staircase, whose mean is |v|_1
      CHECK(est.g[k][s].mean < 2.0);
    }
  const auto e1 = est.find_direction({1.0, 0.0});
  const auto e2 = est.find_direction({0.0, 1.0});
  REQUIRE(e1);
  REQUIRE(e2);
  CHECK(est.g_hat(*e1).mean == est.g[*e1].back().mean);
  CHECK(!est.symmetry.empty());
  CHECK(est.convexity.size() == 8);

  SECTION("passage times in each record match a fresh solve") {
    const auto& rec = est.records[3];
    const PassageEngine<2> engine(make_environment<2>(rec.seed, kExp, Box<2>::cube(24)));
    for (std::size_t k = 0; k < 8; ++k)
      CHECK(rec.passage[k][1] == engine.passage(origin<2>(), est.points[k][1]));
  }

  SECTION("sizes beyond the margin are rejected") {
    CHECK_THROWS_AS(estimate_shape<2>(kExp, default_directions<2>(4), {32}, 24, 2, 0), MarginError);
  }
}

TEST_CASE("competition and coexistence", "[experiments][coexistence]") {
  SECTION("ell = 0 is rejected") {
    CHECK_THROWS_AS(coexistence_experiment<2>(kExp, 0, 16, 2, 0), std::invalid_argument);
  }
  SECTION("a single seed always reaches the boundary") {
    const auto s = competition_experiment<2>(kExp, {origin<2>()}, 12, 5, 3);
    CHECK(s.successes == 5);
    CHECK(s.fraction == 1.0);
    for (const auto& r : s.records) {
      CHECK(r.counts[1] == Box<2>::cube(12).size());
      CHECK(r.contested == 0);
    }
  }
  SECTION("coincident seeds are rejected") {
    CHECK_THROWS_AS(competition_experiment<2>(kExp, {{1, 1}, {1, 1}}, 12, 1, 0), std::invalid_argument);
  }
  SECTION("two seeds: labels cover the box and clusters are connected") {
    const auto s = coexistence_experiment<2>(kExp, 2, 16, 10, 40);
    CHECK(s.connectivity_violations == 0);
    const std::size_t n = Box<2>::cube(16).size();
    for (const auto& r : s.records) CHECK(r.counts[0] + r.counts[1] + r.counts[2] == n);
    CHECK(s.ci95.lo <= s.fraction);
    CHECK(s.fraction <= s.ci95.hi);
    CHECK(s.ci99.lo <= s.ci95.lo);
  }
  SECTION("3-d") {
    const auto s = coexistence_experiment<3>(kExp, 2, 6, 3, 0);
    CHECK(s.records.size() == 3);
    CHECK(s.connectivity_violations == 0);
  }
}

TEST_CASE("directedness", "[experiments][directedness]") {
  SECTION("alpha <= 0 is degenerate and counted apart") {
    const auto st = directedness_experiment<2>(kExp, {1.0, 0.0}, {0.0, 4.0}, 16, 4, 0);
    REQUIRE(st.spreads.size() == 2);
    CHECK(st.spreads[0].degenerate == 4);
    CHECK(st.spreads[0].used == 0);
    CHECK(st.spreads[1].degenerate == 0);
  }
  SECTION("hitting points lie on the boundary of the half-space") {
    const auto st = directedness_experiment<2>(kExp, {1.0, 1.0}, {6.0}, 24, 6, 11);
    const auto z = unit_vector<2>({1.0, 1.0});
    for (const auto& r : st.records) {
      CHECK(dot<2>(z, r.hit) >= 6.0);
      CHECK(dot<2>(z, r.hit) < 6.0 + std::sqrt(0.5) + 1e-12);
    }
    CHECK(st.spreads[0].q25 <= st.spreads[0].median);
    CHECK(st.spreads[0].median <= st.spreads[0].q75);
  }
  SECTION("mirroring the environment negates the angle") {
    const auto env = make_environment<2>(5, kExp, Box<2>::cube(20));
    const auto mirrored = env.reflected(1);
    const PassageEngine<2> a(env), b(mirrored);
    const auto wa = eta_walk<2>(eta_field<2>(a, {1.0, 0.0}, 9.0), a, origin<2>());
    const auto wb = eta_walk<2>(eta_field<2>(b, {1.0, 0.0}, 9.0), b, origin<2>());
    const auto ha = wa.back(), hb = wb.back();
    CHECK(hb == Vertex<2>{ha[0], -ha[1]});
    CHECK(angle_from<2>({1.0, 0.0}, hb) == -angle_from<2>({1.0, 0.0}, ha));
  }
  SECTION("alpha beyond the margin") {
    CHECK_THROWS_AS(directedness_experiment<2>(kExp, {1.0, 0.0}, {15.0}, 16, 1, 0), MarginError);
  }
}

TEST_CASE("coalescence", "[experiments][coalescence]") {
  SECTION("offset zero merges at depth zero") {
    const auto s = coalescence_experiment<2>(kExp, {{0, 0}}, 6.0, 16, 5, 0);
    REQUIRE(s.offsets.size() == 1);
    CHECK(s.offsets[0].merged == s.offsets[0].used);
    for (const auto& r : s.records) CHECK(r.depth == 0);
    REQUIRE(!s.offsets[0].depth_histogram.empty());
    CHECK(s.offsets[0].depth_histogram[0] == s.offsets[0].merged);
  }
  SECTION("records agree with the geodesics") {
    const std::vector<Vertex<2>> offsets{{0, 2}, {0, -3}};
    const auto s = coalescence_experiment<2>(kExp, offsets, 8.0, 20, 8, 7, 1, 2);
    CHECK(s.suffix_violations == 0);
    CHECK(s.records.size() == 16);
    for (const auto& r : s.records) {
      const PassageEngine<2> engine(make_environment<2>(r.seed, kExp, Box<2>::cube(20)));
      const auto target = axis_half_space<2>(0, 8.0);
      const auto g0 = engine.solve(target).geodesic(origin<2>());
      const auto g1 = engine.solve(target).geodesic(offsets[r.offset_index]);
      const auto c = coalescence_point<2>(g0, g1);
      CHECK(r.met == c.has_value());
      if (c) {
        CHECK(r.depth == c->index1);
        CHECK(r.merged == (c->vertex[0] < 8));
      }
    }
    for (const auto& f : s.offsets) {
      std::size_t total = 0;
      for (auto h : f.depth_histogram) total += h;
      CHECK(total == f.merged);
    }
  }
  SECTION("3-d") {
    const auto s = coalescence_experiment<3>(kExp, {{0, 1, 0}}, 3.0, 6, 3, 0);
    CHECK(s.records.size() == 3);
  }
}

TEST_CASE("half-plane comparison", "[experiments][halfplane]") {
  SECTION("agrees with exhaustive enumeration on small fixtures") {
    const Box<2> box({-1, 0}, {2, 1});
    const auto allowed = [](const Vertex<2>& v) { return v[0] >= 0; };
    const auto in_target = [](const Vertex<2>& v) { return v[0] >= 2; };
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto env = fixtures::random_fixture<2>(box, seed);
      const PassageEngine<2> engine(env);
      const auto rec = halfplane_instance(engine, 2.0);
      INFO("seed " << seed);
      const auto top = oracle::enumerate_paths<2>(env, {0, 0}, in_target, allowed);
      const auto bottom = oracle::enumerate_paths<2>(env, {0, 1}, in_target, allowed);
      CHECK(rec.hit_top == top.path.back());
      CHECK(rec.hit_bottom == bottom.path.back());
      const auto to = [&](const Vertex<2>& from, const Vertex<2>& to) {
        return oracle::enumerate_paths<2>(env, from, [&](const Vertex<2>& v) { return v == to; }, allowed).weight;
      };
      const double bt = to({0, 0}, rec.hit_top) - to({0, 1}, rec.hit_top);
      const double bb = to({0, 0}, rec.hit_bottom) - to({0, 1}, rec.hit_bottom);
      CHECK(std::abs(rec.busemann_top - bt) <= 1e-9);
      CHECK(std::abs(rec.busemann_bottom - bb) <= 1e-9);
      CHECK(std::abs(rec.delta_proxy - (bt - bb)) <= 1e-9);
    }
  }
  SECTION("identical starts give zero delta") {
    const PassageEngine<2> engine(make_environment<2>(2, kExp, Box<2>::cube(16)));
    const auto rec = halfplane_instance(engine, 6.0, {0, 3}, {0, 3});
    CHECK(rec.delta_proxy == 0.0);
    CHECK(rec.crossing_vertex.has_value());
    CHECK(!rec.violation);
  }
  SECTION("summary over replications") {
    const auto s = halfplane_compare<2>(kExp, 8.0, 20, 10, 0);
    CHECK(s.records.size() == 10);
    CHECK(s.violations == 0);
    for (const auto& r : s.records)
      if (r.crossing_vertex && !r.excluded) CHECK(r.delta_proxy == 0.0);
  }
  SECTION("argument checks") {
    CHECK_THROWS_AS(halfplane_compare<3>(kExp, 4.0, 16, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(halfplane_compare<2>(kExp, 0.0, 16, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(halfplane_compare<2>(kExp, 15.0, 16, 1, 0), MarginError);
  }
}

TEST_CASE("config parsing", "[experiments][config]") {
  const std::string good = R"({
  "experiment": "coalescence",
  "dist": {"kind": "uniform", "a": 0.5, "b": 1.5},
  "L": 32,
  "reps": 3,
  "seed0": 9,
  "params": {"offsets": [[0, 2]], "alpha": 10}
})";
  const auto cfg = parse_config(good);
  CHECK(cfg.experiment == "coalescence");
  CHECK(cfg.L == 32);
  CHECK(cfg.reps == 3);
  CHECK(cfg.seed0 == 9);
  CHECK(cfg.dim == 2);
  CHECK(std::holds_alternative<Uniform>(cfg.dist));

  const auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("{\n  \"experiment\": \"shape\",\n  \"dist\": {\"kind\": \"exponential\", \"rate\": 1},\n  \"L\": 16,\n  \"reps\": \"two\"\n}") == 5);
  CHECK(line_of("{\n  \"experiment\": \"nope\"\n}") == 2);
  CHECK(line_of("{\n  \"experiment\": \"gm\",\n  \"L\": 64,\n  \"reps\": 1,\n  \"bogus\": 1\n}") == 5);
  CHECK(line_of("{\n  \"experiment\": \"gm\",\n  \"dist\": {\"kind\": \"exponential\", \"rate\": 1},\n  \"L\": 64,\n  \"reps\": 1,\n  \"seed0\": 0,\n  \"params\": {\n    \"n\": 2\n  }\n}") ==
        7);
  CHECK(line_of("{\n  \"experiment\": \"halfplane\",\n  \"L\": 64,\n  \"dim\": 3,\n  \"reps\": 1,\n"
                "  \"params\": {\"alpha\": 3}\n}") > 0);
  CHECK(line_of("{\n  \"experiment\": \"gm\",\n  \"L\": 64,,\n}") == 3);

  try {
    parse_config("{\n  \"experiment\": \"shape\",\n  \"dist\": {\"kind\": \"exponential\", \"rate\": 1},\n  \"L\": 16,\n  \"reps\": \"two\"\n}");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "line 5: " + e.message());
  }
}

TEST_CASE("experiment runs are reproducible", "[experiments][determinism]") {
  for (const std::string exp : {"shape", "coexistence", "directedness", "coalescence", "halfplane", "gm"}) {
    nlohmann::json j{{"experiment", exp}, {"L", 24}, {"reps", 3}, {"seed0", 17}, {"dist", {{"kind", "exponential"}, {"rate", 1.0}}}};
    if (exp == "shape") j["params"] = {{"directions", 4}, {"sizes", {8, 16}}};
    if (exp == "directedness") j["params"] = {{"alphas", {4.0, 8.0}}};
    if (exp == "coalescence") j["params"] = {{"offsets", {{0, 2}}}, {"alpha", 8.0}};
    if (exp == "halfplane") j["params"] = {{"alpha", 8.0}};
    if (exp == "gm") j["params"] = {{"ell", 2}, {"n", 4}};
    const auto cfg = parse_config(j.dump(2));
    const auto a = run_experiment(cfg, 1);
    const auto b = run_experiment(cfg, 3);
    INFO(exp);
    CHECK(a.records_csv == b.records_csv);
    CHECK(a.summary == b.summary);
    CHECK(a.summary["experiment"] == exp);
    CHECK(a.summary.contains("estimate"));
    CHECK(a.summary.contains("stderr"));
    CHECK(a.summary.contains("excluded"));
    // header plus at least one row per replication
    CHECK(std::count(a.records_csv.begin(), a.records_csv.end(), '\n') >= 4);
  }
}
