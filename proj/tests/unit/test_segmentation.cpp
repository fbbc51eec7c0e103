#include <doctest.h>

#include <cmath>
#include <random>

#include "debulk/scan_prep.hpp"
#include "debulk/segmentation.hpp"
#include "debulk/synth.hpp"
#include "support.hpp"

using namespace debulk;

namespace {

// Background cells that can reach the border through 4-neighbours, by repeated sweeps.
Mask fill_by_sweeps(const Mask& m) {
  const long w = static_cast<long>(m.cols()), h = static_cast<long>(m.rows());
  Mask outside(m.cols(), m.rows(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c) {
        const auto uc = static_cast<std::size_t>(c), ur = static_cast<std::size_t>(r);
        if (m(uc, ur) || outside(uc, ur)) continue;
        bool reach = c == 0 || r == 0 || c == w - 1 || r == h - 1;
        const long nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nb)
          if (outside.contains(c + d[0], r + d[1]) &&
              outside(static_cast<std::size_t>(c + d[0]), static_cast<std::size_t>(r + d[1])))
            reach = true;
        if (reach) {
          outside(uc, ur) = 1;
          changed = true;
        }
      }
  }
  Mask out(m.cols(), m.rows(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] = outside.data()[k] ? 0 : 1;
  return out;
}

HeightMap field(std::size_t n, const std::function<double(double, double)>& f) {
  HeightMap hm(Vec2(0, 0), Vec2(1, 1), n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      hm.values(i, j) = f(static_cast<double>(i), static_cast<double>(j));
      hm.valid(i, j) = 1;
    }
  return hm;
}

}  // namespace

TEST_SUITE("segmentation") {
  TEST_CASE("threshold cut keeps valid cells strictly above the cut") {
    HeightMap hm = field(4, [](double x, double) { return x; });
    hm.valid(3, 0) = 0;
    const Mask m = threshold_cut(hm, 2.0);
    CHECK(m(3, 1) == 1);
    CHECK(m(3, 0) == 0);
    CHECK(m(2, 2) == 0);
  }

  TEST_CASE("fill_holes matches an independent flood fill on random masks") {
    std::mt19937_64 rng(11);
    std::bernoulli_distribution on(0.45);
    for (int trial = 0; trial < 20; ++trial) {
      Mask m(23, 17, 0);
      for (auto& v : m.data()) v = on(rng) ? 1 : 0;
      const Mask filled = fill_holes(m);
      CHECK(filled == fill_by_sweeps(m));
      CHECK(fill_holes(filled) == filled);
    }
  }

  TEST_CASE("a ring is filled and its boundary traced counter-clockwise") {
    Mask m(12, 12, 0);
    for (int r = 2; r <= 8; ++r)
      for (int c = 3; c <= 9; ++c)
        if (r == 2 || r == 8 || c == 3 || c == 9) m(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) = 1;
    const Mask filled = fill_holes(m);
    CHECK(filled(6, 5) == 1);
    const auto b = trace_boundaries(filled);
    REQUIRE(b.size() == 1);
    CHECK(b[0].component.size() == 49);
    CHECK(b[0].cells.size() == 24);
    Polygon poly;
    for (const Cell& c : b[0].cells) poly.emplace_back(static_cast<double>(c.col), static_cast<double>(c.row));
    CHECK(signed_area(poly) == doctest::Approx(36.0));
  }

  TEST_CASE("components are reported in raster order, diagonal contact joins") {
    Mask m(10, 10, 0);
    m(6, 1) = 1;
    m(1, 5) = 1;
    m(2, 6) = 1;
    const auto b = trace_boundaries(m);
    REQUIRE(b.size() == 2);
    CHECK(b[0].component.size() == 1);
    CHECK(b[0].component[0] == Cell{6, 1});
    CHECK(b[1].component.size() == 2);
  }

  TEST_CASE("analytic bumps recover level-set area and peak") {
    for (auto profile : {BumpProfile::cosine, BumpProfile::gaussian}) {
      const double radius = profile == BumpProfile::cosine ? 35.0 : 12.0;
      const Scene s = generate(testing::one_bump(7.0, radius, profile), 2);
      const HeightMap hm = build_heightmap(s.ply, s.ref, 1.0);
      const auto patches = segment(hm, s.ref, SegmentationSettings{}, PatchMargin{}, s.ply_outline);
      REQUIRE(patches.size() == 1);
      const double r = level_set_radius(PocketSpec{Vec2(0, 0), Vec2(radius, radius), 7.0, profile}, 2.0);
      const double area = M_PI * std::pow(r * radius, 2) / 100.0;
      CHECK(patches[0].area_cm2 == doctest::Approx(area).epsilon(0.05));
      CHECK(std::abs(patches[0].peak_mm - 7.0) < 0.1);
      CHECK(patches[0].id == 1);
    }
  }

  TEST_CASE("pockets are numbered by descending area") {
    SceneSpec spec;
    spec.pockets.push_back({Vec2(-70, 0), Vec2(20, 20), 6.0, BumpProfile::cosine});
    spec.pockets.push_back({Vec2(60, 0), Vec2(40, 40), 6.0, BumpProfile::cosine});
    const Scene s = generate(spec, 2);
    const auto patches = segment(build_heightmap(s.ply, s.ref, 1.0), s.ref, SegmentationSettings{}, PatchMargin{});
    REQUIRE(patches.size() == 2);
    CHECK(patches[0].area_cm2 > patches[1].area_cm2);
    CHECK(patches[0].boundary.front().x() > 0.0);
    CHECK(patches[1].id == 2);
  }

  TEST_CASE("small and low bumps are rejected") {
    auto count = [](const SceneSpec& spec, const SegmentationSettings& st) {
      const Scene s = generate(spec, 2);
      return segment(build_heightmap(s.ply, s.ref, 1.0), s.ref, st, PatchMargin{}).size();
    };
    CHECK(count(testing::one_bump(1.0, 40.0), SegmentationSettings{}) == 0);
    CHECK(count(testing::one_bump(4.0, 6.0), SegmentationSettings{}) == 0);
    SegmentationSettings low;
    low.cut_height = 1.0;
    low.contact_height = 0.5;
    CHECK(count(testing::one_bump(1.2, 40.0), low) == 0);
    CHECK(count(testing::one_bump(1.4, 40.0), low) == 1);
  }

  TEST_CASE("invalid cells inside flat ply count as zero, touching a pocket they flag it") {
    HeightMap hm = field(60, [](double x, double y) {
      const double r = std::hypot(x - 25, y - 30);
      return r < 18 ? 5.0 * (1 + std::cos(M_PI * r / 18)) / 2 : 0.0;
    });
    hm.valid(52, 30) = 0;
    const ReferenceSurface ref = ReferenceSurface::flat(Vec2(0, 0), Vec2(59, 59), 1.0);
    auto patches = segment(hm, ref, SegmentationSettings{}, PatchMargin{});
    REQUIRE(patches.size() == 1);
    CHECK_FALSE(patches[0].low_confidence);
    hm.valid(25, 30) = 0;
    patches = segment(hm, ref, SegmentationSettings{}, PatchMargin{});
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].low_confidence);
    CHECK(patches[0].invalid_cells == 1);
  }

  TEST_CASE("pocket near the ply outline is flagged") {
    SceneSpec spec = testing::one_bump(6.0, 30.0);
    spec.pockets[0].center = Vec2(-120.0, 0.0);
    const Scene s = generate(spec, 2);
    const auto patches = segment(build_heightmap(s.ply, s.ref, 1.0), s.ref, SegmentationSettings{}, PatchMargin{},
                                 s.ply_outline, 20.0);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].near_ply_boundary);
  }

  TEST_CASE("patch surface never dips below the reference") {
    const Scene s = generate(testing::one_bump(6.0, 30.0), 2);
    const auto patches = segment(build_heightmap(s.ply, s.ref, 1.0), s.ref, SegmentationSettings{}, PatchMargin{});
    REQUIRE(patches.size() == 1);
    const auto& p = patches[0];
    for (std::size_t j = 0; j < p.ply_surface.rows(); ++j)
      for (std::size_t i = 0; i < p.ply_surface.cols(); ++i)
        CHECK(p.surface.elevations()(i, j) >= p.ref_surface.elevations()(i, j));
  }

  TEST_CASE("margin rule") {
    PatchMargin m;
    CHECK(m.resolve(10000.0) == doctest::Approx(30.0));
    m.fixed_mm = 7.0;
    CHECK(m.resolve(10000.0) == 7.0);
    SegmentationSettings bad;
    bad.contact_height = 3.0;
    CHECK_THROWS_AS(bad.check(), Error);
  }
}
