#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "debulk/postprocess.hpp"
#include "debulk/wrinkle2d.hpp"

using namespace debulk;

TEST_SUITE("wrinkle2d") {
  TEST_CASE("triangle start has the requested apex and bar length") {
    const Ply2D p = Ply2D::triangle(9.3, 3.2, 40);
    CHECK(p.length() == doctest::Approx(18.6).epsilon(1e-9));
    double apex = 0.0;
    for (const Vec2& n : p.nodes) apex = std::max(apex, n.y());
    CHECK(apex == doctest::Approx(3.2));
    CHECK(p.segments() == 40);
  }

  TEST_CASE("fixed-end tent collapses into a fold near the ridge height and keeps its length") {
    const Ply2D p = Ply2D::triangle(9.3, 3.2, 60);
    const Wrinkle2DResult r = simulate_2d(p, MaterialParams{});
    REQUIRE(r.converged);
    const double expected = ridge_height(18.6, 2.0 * std::sqrt(9.3 * 9.3 - 3.2 * 3.2), 0.3);
    CHECK(std::abs(r.apex_height(p.mold) - expected) <= 0.25 * expected);
    CHECK(std::abs(chain_length(r.final_nodes()) - p.length()) <= 1e-6 * p.length());
    CHECK(r.steps.size() == 6);
    for (const auto& s : r.steps) CHECK(s.max_penetration <= 1e-9);
    CHECK(r.width_above(p.mold, 0.5 * r.apex_height(p.mold)) < 2.0);
  }

  TEST_CASE("free ends keep the chain length and stay on the mold") {
    Ply2D p = Ply2D::triangle(9.3, 3.2, 30);
    p.left = p.right = EndCondition::free;
    MaterialParams m;
    m.mu = 0.0;
    const Wrinkle2DResult r = simulate_2d(p, m, 3);
    CHECK(std::abs(chain_length(r.final_nodes()) - p.length()) <= 1e-6 * p.length());
    for (const Vec2& n : r.final_nodes()) CHECK(n.y() >= -1e-6);
  }

  TEST_CASE("chain on a convex mold stays on or above it") {
    std::vector<Vec2> pts;
    for (int k = -10; k <= 10; ++k) {
      const double x = 2.0 * k;
      pts.emplace_back(x, std::sqrt(200.0 * 200.0 - x * x) - 200.0 + 0.05 + (std::abs(k) < 3 ? 1.0 - std::abs(k) / 3.0 : 0.0));
    }
    const Ply2D p = Ply2D::from_polyline(pts, 40, EndCondition::fixed, EndCondition::fixed, MoldProfile2D{200.0});
    const Wrinkle2DResult r = simulate_2d(p, MaterialParams{}, 2);
    for (const Vec2& n : r.final_nodes()) CHECK(n.y() >= p.mold.z(n.x()) - 1e-6);
  }

  TEST_CASE("resampling and validation") {
    const Ply2D p = Ply2D::from_polyline({Vec2(0, 0), Vec2(3, 4), Vec2(6, 0)}, 10);
    for (double l : p.rest_length) CHECK(l == doctest::Approx(1.0));
    Ply2D bad = p;
    bad.nodes[3].y() = -1.0;
    CHECK_THROWS_AS(bad.check(), Error);
    CHECK(parse_end_condition("free") == EndCondition::free);
    const Wrinkle2DResult coarse = simulate_2d(Ply2D::triangle(9.3, 3.2, 10), MaterialParams{}, 1);
    CHECK(std::find(coarse.warnings.begin(), coarse.warnings.end(),
                    "segments longer than the ply thickness: folds are under-resolved") != coarse.warnings.end());
    CHECK_THROWS_AS(parse_end_condition("loose"), Error);
  }
}
