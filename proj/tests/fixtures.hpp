// Hand-built environments shared by the unit tests.
#pragma once

#include <cstdint>

#include "geodesy/environment.hpp"

namespace fixtures {

using geodesy::Box;
using geodesy::EdgeId;
using geodesy::Vertex;
using geodesy::WeightField;
using geodesy::WeightTable;

//   (0,1) --d:0.4-- (1,1)
//     |               |
//    c:0.9           b:0.7
//     |               |
//   (0,0) --a:0.5-- (1,0)
inline WeightField<2> square() {
  WeightTable<2> t;
  t[EdgeId<2>{{0, 0}, 0}] = 0.5;  // a
  t[EdgeId<2>{{1, 0}, 1}] = 0.7;  // b
  t[EdgeId<2>{{0, 0}, 1}] = 0.9;  // c
  t[EdgeId<2>{{0, 1}, 0}] = 0.4;  // d
  return WeightField<2>::fixture(Box<2>({0, 0}, {1, 1}), t);
}

/// Random fixture with uniform(0.05, 1.05) weights drawn from `seed`, so tests
/// can exercise the fixture path on larger boxes.
template <std::size_t D>
WeightField<D> random_fixture(const Box<D>& box, std::uint64_t seed) {
  WeightTable<D> t;
  std::uint64_t s = seed;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const auto v = box.vertex(i);
    for (int a = 0; a < int(D); ++a) {
      if (v[a] == box.hi()[a]) continue;
      s = geodesy::splitmix64(s);
      t[EdgeId<D>{v, a}] = 0.05 + geodesy::to_open_unit(s);
    }
  }
  return WeightField<D>::fixture(box, t);
}

}  // namespace fixtures
