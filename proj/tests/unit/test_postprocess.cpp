#include <doctest.h>

#include <cmath>
#include <numbers>

#include "debulk/postprocess.hpp"
#include "support.hpp"

using namespace debulk;

namespace {

// Length of a section laid flat over `mold` with a ridge of height h: two walls and a half-circle cap.
double ridge_path_length(double mold, double h, double t) {
  constexpr int kArc = 20000;
  double cap = 0.0;
  for (int k = 0; k < kArc; ++k) {
    const double a0 = std::numbers::pi * k / kArc, a1 = std::numbers::pi * (k + 1) / kArc;
    cap += std::hypot(t * (std::cos(a1) - std::cos(a0)), t * (std::sin(a1) - std::sin(a0)));
  }
  return (mold - 2.0 * t) + 2.0 * (h - t) + cap;
}

HeightMap uniform(double v, std::size_t n) {
  HeightMap hm(Vec2(0, 0), Vec2(1, 1), n, n);
  for (std::size_t k = 0; k < hm.values.size(); ++k) {
    hm.values.data()[k] = v;
    hm.valid.data()[k] = 1;
  }
  return hm;
}

}  // namespace

TEST_SUITE("postprocess") {
  TEST_CASE("ridge height inverts the explicit ridge geometry") {
    for (double h : {0.3, 0.7, 2.5}) {
      const double L = ridge_path_length(20.0, h, 0.3);
      CHECK(ridge_height(L, 20.0, 0.3) == doctest::Approx(h).epsilon(1e-7));
      CHECK(ridge_perimeter(h, 0.3) == doctest::Approx(L - (20.0 - 0.6)).epsilon(1e-7));
    }
  }

  TEST_CASE("two-bar section gives the expected ridge height") {
    const double mold = 2.0 * std::sqrt(9.3 * 9.3 - 3.2 * 3.2);
    CHECK(ridge_height(18.6, mold, 0.3) == doctest::Approx(0.697).epsilon(0.002));
    RidgeModelParams p;
    CHECK(p.trigger_excess() == doctest::Approx((std::numbers::pi - 2.0) * 0.3));
    CHECK(ridge_height(20.0 + p.trigger_excess(), 20.0, 0.3) == doctest::Approx(0.3));
  }

  TEST_CASE("uniform fields classify by the RMS threshold") {
    const DebulkReport a = classify(uniform(0.25, 8), 0.3, true);
    CHECK(a.rms_mm == doctest::Approx(0.25));
    CHECK(a.verdict == Verdict::cease);
    CHECK(a.sample_count == 64);
    CHECK(classify(uniform(0.31, 8), 0.3, true).verdict == Verdict::crease);
    CHECK(classify(uniform(0.25, 8), 0.3, false).verdict == Verdict::inconclusive);
    CHECK(classify(uniform(0.3, 8), 0.3, true).verdict == Verdict::cease);
  }

  TEST_CASE("ridge-like field reaches crease") {
    HeightMap hm = uniform(0.25, 20);
    for (std::size_t j = 0; j < 20; ++j)
      for (std::size_t i = 9; i <= 10; ++i) hm.values(i, j) = 2.3;
    const DebulkReport r = classify(hm, 0.3, true);
    CHECK(r.rms_mm == doctest::Approx(std::sqrt((18 * 0.0625 + 2 * 2.3 * 2.3) / 20.0)));
    CHECK(r.verdict == Verdict::crease);
    HeightMap empty = uniform(0.25, 4);
    for (auto& v : empty.valid.data()) v = 0;
    CHECK_THROWS_AS(field_rms(empty), Error);
  }

  TEST_CASE("conforming net reads the consolidated thickness everywhere") {
    const PlyNet net = testing::lattice_net(6, 4.0, [](double, double) { return 0.0; });
    const ReferenceSurface ref = ReferenceSurface::flat(Vec2(-20, -20), Vec2(20, 20), 1.0);
    const RidgeResult rr = apply_ridges(net, to_configuration(net), ref, MaterialParams{});
    CHECK(rr.ridge_count() == 0);
    for (double h : rr.height) CHECK(h == doctest::Approx(0.25));
  }

  TEST_CASE("a tented section becomes one ridge and the pass is idempotent") {
    PlyNet net = testing::lattice_net(7, 4.0, [](double, double) { return 0.0; });
    Eigen::VectorXd X = to_configuration(net);
    // Lift the middle fiber-1 row into a tent; its length now exceeds the mold chord.
    for (std::size_t i = 0; i < net.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(3 * i);
      if (net.lattice[i][1] == 0 && std::abs(net.lattice[i][0]) <= 1) X[k + 2] = (net.lattice[i][0] == 0 ? 2.0 : 1.0) * 1e-3;
    }
    const ReferenceSurface ref = ReferenceSurface::flat(Vec2(-20, -20), Vec2(20, 20), 1.0);
    const RidgeResult a = apply_ridges(net, X, ref, MaterialParams{});
    REQUIRE(a.ridge_count() >= 1);
    const RidgeResult b = apply_ridges(net, X, ref, MaterialParams{}, &a);
    CHECK(b.height == a.height);
    for (std::size_t i = 0; i < a.height.size(); ++i) CHECK(a.height[i] >= 0.25 - 1e-12);
  }

  TEST_CASE("verdict names round trip") {
    for (Verdict v : {Verdict::cease, Verdict::crease, Verdict::inconclusive}) CHECK(parse_verdict(to_string(v)) == v);
    CHECK_THROWS_AS(parse_verdict("maybe"), Error);
  }
}
