#include <doctest.h>

#include <cmath>
#include <numbers>

#include "agrohydro/grid.hpp"

using namespace agrohydro;

TEST_SUITE("grid") {
  TEST_CASE("construction and sizes") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    CHECK(g.size() == 400);
    CHECK(g.surface_count() == 40);
    CHECK(g.dr == doctest::Approx(2.0));
    CHECK(g.dtheta == doctest::Approx(2.0 * std::numbers::pi / 8));
    CHECK(g.dz == doctest::Approx(0.015));

    const auto big = build_grid(21, 60, 25, 50.0, 0.5);
    CHECK(big.size() == 31500);

    const auto one = build_grid(1, 1, 1, 1.0, 1.0);
    CHECK(one.size() == 1);
    const auto nb = neighbors(one, 0);
    CHECK(nb.at_inner);
    CHECK(nb.at_outer);
    CHECK(nb.at_surface);
    CHECK(nb.at_bottom);
    CHECK(nb.r_in == -1);
    CHECK(nb.r_out == -1);
    CHECK(nb.z_up == -1);
    CHECK(nb.z_down == -1);
    CHECK(nb.theta_prev == 0);  // periodic direction collapses to self
    CHECK(nb.theta_next == 0);

    CHECK_THROWS_AS(build_grid(0, 8, 10, 10.0, 0.15), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(5, 2, 10, 10.0, 0.15), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(5, 8, 10, -1.0, 0.15), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(5, 8, 10, 10.0, 0.0), std::invalid_argument);
  }

  TEST_CASE("index bijection round-trips") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    for (int i = 0; i < g.size(); ++i) {
      const auto [ir, it, iz] = g.coords(i);
      CHECK(g.flat(ir, it, iz) == i);
    }
  }

  TEST_CASE("azimuthal wrap-around and boundary flags") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    const int last_col = g.flat(2, 7, 3);
    CHECK(neighbors(g, last_col).theta_next == g.flat(2, 0, 3));
    CHECK(neighbors(g, g.flat(2, 0, 3)).theta_prev == last_col);

    const auto surf = neighbors(g, g.flat(2, 3, 0));
    CHECK(surf.at_surface);
    CHECK(surf.z_up == -1);
    CHECK(surf.z_down == g.flat(2, 3, 1));

    const auto bottom = neighbors(g, g.flat(2, 3, 9));
    CHECK(bottom.at_bottom);
    CHECK(bottom.z_down == -1);

    // interior node carries the full six-point stencil
    const auto mid = neighbors(g, g.flat(2, 3, 5));
    CHECK(mid.r_in >= 0);
    CHECK(mid.r_out >= 0);
    CHECK(mid.theta_prev >= 0);
    CHECK(mid.theta_next >= 0);
    CHECK(mid.z_up >= 0);
    CHECK(mid.z_down >= 0);

    CHECK_THROWS_AS(neighbors(g, 400), std::out_of_range);
    CHECK_THROWS_AS(neighbors(g, -1), std::out_of_range);
  }

  TEST_CASE("neighbor relation is symmetric") {
    const auto g = build_grid(4, 6, 5, 8.0, 0.3);
    auto contains = [&](int i, int j) {
      const auto nb = neighbors(g, i);
      return nb.r_in == j || nb.r_out == j || nb.theta_prev == j ||
             nb.theta_next == j || nb.z_up == j || nb.z_down == j;
    };
    for (int i = 0; i < g.size(); ++i) {
      const auto nb = neighbors(g, i);
      for (int j : {nb.r_in, nb.r_out, nb.theta_prev, nb.theta_next, nb.z_up,
                    nb.z_down})
        if (j >= 0) CHECK(contains(j, i));
    }
  }

  TEST_CASE("cell volumes tile the cylinder exactly") {
    for (const auto& g :
         {build_grid(5, 8, 10, 10.0, 0.15), build_grid(21, 24, 10, 50.0, 0.5),
          build_grid(3, 1, 4, 2.0, 1.0)}) {
      double total = 0.0;
      for (int i = 0; i < g.size(); ++i) total += g.cell_volume(i);
      const double exact = std::numbers::pi * g.radius * g.radius * g.depth;
      CHECK(std::abs(total - exact) / exact < 1e-9);
    }
  }

  TEST_CASE("node sets") {
    const auto g = build_grid(5, 8, 10, 10.0, 0.15);
    SensorSpec spec;
    spec.explicit_indices = {89, 185, 281};
    const auto sets = node_sets(g, spec);
    CHECK(sets.surface.indices.size() == 40);
    CHECK(sets.bottom.indices.size() == 40);
    CHECK(sets.bottom.indices.front() == 360);
    CHECK(sets.sensors.indices == std::vector<int>{89, 185, 281});

    SensorSpec rule;
    rule.by_rule = true;
    rule.depth = 0.475;
    rule.count = 20;
    const auto big = build_grid(21, 24, 10, 50.0, 0.5);
    const auto big_sets = node_sets(big, rule);
    CHECK(big_sets.sensors.indices.size() == 20);
    for (int idx : big_sets.sensors.indices)
      CHECK(big.coords(idx)[2] == 9);  // deepest layer
    for (std::size_t i = 1; i < big_sets.sensors.indices.size(); ++i)
      CHECK(big_sets.sensors.indices[i] > big_sets.sensors.indices[i - 1]);

    SensorSpec empty;
    CHECK(node_sets(g, empty).sensors.indices.empty());

    SensorSpec bad;
    bad.explicit_indices = {400};
    CHECK_THROWS_AS(node_sets(g, bad), std::out_of_range);
    SensorSpec dup;
    dup.explicit_indices = {5, 5};
    CHECK_THROWS_AS(node_sets(g, dup), std::invalid_argument);
  }
}
