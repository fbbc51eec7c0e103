#include <doctest.h>

#include <cmath>

#include "debulk/meshing.hpp"
#include "debulk/synth.hpp"
#include "support.hpp"

using namespace debulk;

namespace {

AirPocketPatch bump_patch(double peak, double radius, Vec2 center = Vec2(0, 0)) {
  SceneSpec spec = testing::one_bump(peak, radius);
  spec.pockets[0].center = center;
  const Scene s = generate(spec, 4);
  auto patches = segment(build_heightmap(s.ply, s.ref, 1.0), s.ref, SegmentationSettings{}, PatchMargin{}, s.ply_outline);
  REQUIRE(patches.size() == 1);
  return patches[0];
}

}  // namespace

TEST_SUITE("meshing") {
  TEST_CASE("spacing follows the area over target node count rule") {
    const AirPocketPatch p = bump_patch(8.0, 40.0);
    const double d = choose_discretization(p, 100, 0.3);
    CHECK(d == doctest::Approx(std::sqrt(p.area_cm2 * 100.0 / 100.0)));
    CHECK(choose_discretization(p, 1000000, 0.3) == doctest::Approx(0.6));
  }

  TEST_CASE("net is symmetric, lies on the surface and keeps its chords") {
    const AirPocketPatch p = bump_patch(8.0, 40.0);
    const PlyNet net = mesh_patch(p, MeshConfig{});
    CHECK_NOTHROW(net.check_topology());
    CHECK(net.max_chord_error() <= 1e-5 * net.spacing);
    for (const Vec3& x : net.nodes) CHECK(std::abs(x.z() - p.surface_z(x.x(), x.y())) < 1e-6);
    CHECK(net.count(NodeClass::fixed_boundary) > 0);
    CHECK(net.count(NodeClass::free_boundary) == 0);
    CHECK(net.count(NodeClass::interior) > 50);
    CHECK(net.patch_area_m2 > p.area_cm2 * 1e-4);
  }

  TEST_CASE("every boundary node sits on the mold and every interior node is enclosed") {
    const AirPocketPatch p = bump_patch(6.0, 30.0);
    MeshConfig mc;
    const PlyNet net = mesh_patch(p, mc);
    for (std::size_t i = 0; i < net.size(); ++i) {
      const Vec3& x = net.nodes[i];
      const auto& nb = net.neighbors[i];
      if (net.node_class[i] == NodeClass::interior) {
        for (int j : nb) CHECK(j >= 0);
        continue;
      }
      if (std::abs(x.z() - p.ref_surface.eval(x.x(), x.y())) <= mc.mold_contact_tol) continue;
      // Off the mold, a boundary node must be pinched between boundary neighbours.
      auto held = [&](int s) {
        const int j = nb[static_cast<std::size_t>(s)];
        return j >= 0 && net.node_class[static_cast<std::size_t>(j)] != NodeClass::interior;
      };
      const int count = held(0) + held(1) + held(2) + held(3);
      CHECK(((held(kFiber1Next) && held(kFiber1Prev)) || (held(kFiber2Next) && held(kFiber2Prev)) || count >= 3));
    }
  }

  TEST_CASE("rim near the ply outline becomes free") {
    const AirPocketPatch p = bump_patch(6.0, 30.0, Vec2(-120.0, 0.0));
    const PlyNet net = mesh_patch(p, MeshConfig{});
    CHECK(net.count(NodeClass::free_boundary) > 0);
  }

  TEST_CASE("bias fiber angles mesh the same pocket") {
    const AirPocketPatch p = bump_patch(8.0, 40.0);
    MeshConfig mc;
    mc.fiber_angles = {45.0, -45.0};
    const PlyNet net = mesh_patch(p, mc);
    CHECK_NOTHROW(net.check_topology());
    const Vec3 d = net.nodes[static_cast<std::size_t>(net.edges.front().second)] - net.nodes[static_cast<std::size_t>(net.edges.front().first)];
    CHECK(std::abs(std::abs(d.x()) - std::abs(d.y())) < 0.3 * net.spacing);
  }

  TEST_CASE("seed at the peak starts from the highest pocket cell") {
    const AirPocketPatch p = bump_patch(8.0, 40.0, Vec2(3.0, -2.0));
    const Vec3 c = patch_center(p, true);
    CHECK(std::abs(c.x() - 3.0) <= 1.0);
    CHECK(std::abs(c.y() + 2.0) <= 1.0);
    CHECK(c.z() == doctest::Approx(8.0).epsilon(0.02));
  }

  TEST_CASE("fiber paths run through the centre at chord spacing") {
    const AirPocketPatch p = bump_patch(8.0, 40.0);
    const double d = choose_discretization(p, 100, 0.3);
    const FiberPaths fp = seed_fiber_paths(p, {0.0, 90.0}, d);
    for (int f = 0; f < 2; ++f) {
      const auto& path = fp.paths[static_cast<std::size_t>(f)];
      CHECK(path[static_cast<std::size_t>(fp.center_index[static_cast<std::size_t>(f)])].isApprox(fp.center));
      for (std::size_t k = 1; k < path.size(); ++k) CHECK((path[k] - path[k - 1]).norm() == doctest::Approx(d).epsilon(1e-6));
    }
  }

  TEST_CASE("bad configs and broken topology are rejected") {
    MeshConfig mc;
    mc.fiber_angles = {30.0, 210.0};
    CHECK_THROWS_AS(mc.check(), Error);
    mc = MeshConfig{};
    mc.target_node_count = 4;
    CHECK_THROWS_AS(mc.check(), Error);
    PlyNet net = testing::lattice_net(3, 1.0, [](double, double) { return 0.0; });
    net.neighbors[0][kFiber1Next] = 5;
    CHECK_THROWS_AS(net.check_topology(), Error);
  }
}
