#include <doctest.h>

#include <cmath>
#include <numbers>

#include "debulk/synth.hpp"
#include "support.hpp"

using namespace debulk;

namespace {

double numeric_bell_length(double H, double R) {
  constexpr int kPieces = 200000;
  double len = 0.0;
  auto z = [&](double x) { return H * (1 + std::cos(std::numbers::pi * x / R)) / 2; };
  for (int k = 0; k < kPieces; ++k) {
    const double x0 = -R + 2 * R * k / kPieces, x1 = -R + 2 * R * (k + 1) / kPieces;
    len += std::hypot(x1 - x0, z(x1) - z(x0));
  }
  return len;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("bell arc length agrees with a polyline measurement") {
    for (auto [H, R] : {std::pair{8.0, 40.0}, std::pair{3.0, 60.0}, std::pair{14.0, 20.0}})
      CHECK(cosine_bell_arc_length(H, R) == doctest::Approx(numeric_bell_length(H, R)).epsilon(0.005));
  }

  TEST_CASE("level-set radius and truth area are analytic") {
    const PocketSpec p{Vec2(0, 0), Vec2(40, 40), 8.0, BumpProfile::cosine};
    const double r = level_set_radius(p, 2.0);
    CHECK(p.height(r * 40.0, 0.0) == doctest::Approx(2.0));
    const PocketSpec g{Vec2(0, 0), Vec2(10, 10), 6.0, BumpProfile::gaussian};
    CHECK(g.height(level_set_radius(g, 2.0) * 10.0, 0.0) == doctest::Approx(2.0));
    CHECK(level_set_radius(PocketSpec{Vec2(0, 0), Vec2(10, 10), 1.5, BumpProfile::cosine}, 2.0) == 0.0);
    const Scene s = generate(testing::one_bump(8.0, 40.0), 1);
    REQUIRE(s.truth.size() == 1);
    CHECK(s.truth[0].analytic_area);
    CHECK(s.truth[0].area_cm2 == doctest::Approx(std::numbers::pi * std::pow(r * 40.0, 2) / 100.0));
    CHECK(s.truth[0].excess_mm[0] == doctest::Approx(cosine_bell_arc_length(8.0, 40.0) - 80.0).epsilon(1e-6));
  }

  TEST_CASE("generation is deterministic for a seed") {
    SceneSpec spec = testing::one_bump(5.0, 30.0);
    spec.noise_sigma = 0.05;
    spec.outlier_fraction = 0.01;
    const Scene a = generate(spec, 42), b = generate(spec, 42), c = generate(spec, 43);
    CHECK(a.ply.points == b.ply.points);
    CHECK(a.ply.valid == b.ply.valid);
    CHECK_FALSE(a.ply.points == c.ply.points);
  }

  TEST_CASE("clean scene puts the ply exactly on mold plus bumps") {
    SceneSpec spec = testing::one_bump(5.0, 30.0);
    spec.mold = MoldKind::cylinder;
    spec.cylinder_radius = 400.0;
    const Scene s = generate(spec, 1);
    for (std::size_t i = 0; i < s.ply.points.size(); i += 97) {
      const Vec3& p = s.ply.points[i];
      CHECK(p.z() == doctest::Approx(spec.ply_z(p.x(), p.y())).epsilon(1e-12));
    }
    CHECK(spec.mold_z(0.0, 50.0) == doctest::Approx(0.0));
    CHECK(spec.mold_z(100.0, 0.0) == doctest::Approx(std::sqrt(400.0 * 400.0 - 1e4) - 400.0));
  }

  TEST_CASE("layup suite spans the intended pocket sizes") {
    const SceneSpec spec = layup_suite();
    CHECK(spec.pockets.size() == 14);
    CHECK_NOTHROW(spec.check());
    std::vector<double> areas;
    for (const auto& p : spec.pockets) {
      const double r = level_set_radius(p, spec.cut_height) * p.radii.x();
      areas.push_back(std::numbers::pi * r * r / 100.0);
    }
    CHECK(*std::max_element(areas.begin(), areas.end()) == doctest::Approx(438.0).epsilon(0.01));
    CHECK(*std::min_element(areas.begin(), areas.end()) == doctest::Approx(5.35).epsilon(0.01));
  }

  TEST_CASE("debulked scan of a low pocket is a uniform consolidated layer") {
    const Scene s = generate_debulked(testing::one_bump(3.0, 60.0), MaterialParams{}, 1);
    for (std::size_t i = 0; i < s.ply.points.size(); i += 53) {
      if (!s.ply.valid[i]) continue;
      const Vec3& p = s.ply.points[i];
      CHECK(p.z() - s.ref.eval(p.x(), p.y()) == doctest::Approx(0.25).epsilon(1e-9));
    }
  }

  TEST_CASE("names parse back") {
    for (MoldKind k : {MoldKind::flat, MoldKind::cylinder, MoldKind::doubly_curved}) CHECK(parse_mold_kind(to_string(k)) == k);
    for (BumpProfile b : {BumpProfile::cosine, BumpProfile::gaussian}) CHECK(parse_bump_profile(to_string(b)) == b);
    CHECK_THROWS_AS(parse_mold_kind("saddle"), Error);
  }
}
