#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "debulk/pipeline.hpp"
#include "support.hpp"

using namespace debulk;
namespace fs = std::filesystem;

namespace {

Scene two_pockets() {
  SceneSpec spec;
  spec.pockets.push_back({Vec2(-60, 0), Vec2(35, 35), 7.0, BumpProfile::cosine});
  spec.pockets.push_back({Vec2(70, 20), Vec2(30, 30), 3.0, BumpProfile::cosine});
  return generate(spec, 5);
}

PipelineConfig quiet(int workers) {
  PipelineConfig c;
  c.prep.denoise = false;
  c.prep.median_window = 0;
  c.workers = workers;
  c.derive();
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("scene without pockets ends all cease") {
    const Scene s = generate(SceneSpec{}, 1);
    const PipelineResult r = run(s.ply, s.ref, quiet(1));
    CHECK(r.reports.empty());
    CHECK(r.status() == RunStatus::all_cease);
  }

  TEST_CASE("results do not depend on the worker count") {
    const Scene s = two_pockets();
    const PipelineResult a = run(s.ply, s.ref, quiet(1));
    const PipelineResult b = run(s.ply, s.ref, quiet(2));
    REQUIRE(a.reports.size() == 2);
    REQUIRE(b.reports.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(a.reports[k].pocket_id == static_cast<int>(k) + 1);
      CHECK(a.reports[k].rms_mm == b.reports[k].rms_mm);
      CHECK(a.solves[k].X_final == b.solves[k].X_final);
    }
    CHECK(b.workers == 2);
  }

  TEST_CASE("predictions compared with themselves agree everywhere") {
    const Scene s = two_pockets();
    const PipelineResult r = run(s.ply, s.ref, quiet(1));
    const HeightMap mosaic = prediction_mosaic(r.reports);
    const Comparison c = compare(r.reports, mosaic, 0.3);
    CHECK(c.compared == 2);
    CHECK(c.agreements == 2);
    for (const auto& row : c.rows) CHECK(row.measured_rms == doctest::Approx(row.predicted_rms).epsilon(1e-12));
    CHECK(comparison_table(c).find("agreement 2/2") != std::string::npos);
  }

  TEST_CASE("status precedence") {
    PipelineResult r;
    r.reports.resize(3);
    r.reports[0].verdict = Verdict::cease;
    r.reports[1].verdict = Verdict::crease;
    r.reports[2].verdict = Verdict::cease;
    CHECK(r.status() == RunStatus::crease);
    r.reports[2].verdict = Verdict::inconclusive;
    CHECK(r.status() == RunStatus::inconclusive);
  }

  TEST_CASE("a stage failure becomes an inconclusive report") {
    const Scene s = two_pockets();
    PipelineConfig cfg = quiet(1);
    const HeightMap hm = prepare_heightmap(s.ply, s.ref, cfg.prep);
    auto patches = segment(hm, s.ref, cfg.segmentation, cfg.margin);
    REQUIRE_FALSE(patches.empty());
    AirPocketPatch p = patches[0];
    p.area_cm2 = 0.0;
    const DebulkReport rep = process_patch(p, cfg);
    CHECK(rep.verdict == Verdict::inconclusive);
    bool named = false;
    for (const auto& d : rep.diagnostics) named = named || d.rfind("mesh failed", 0) == 0;
    CHECK(named);
  }

  TEST_CASE("config derives tied fields, validates and round trips") {
    PipelineConfig c;
    c.material.t = 0.5e-3;
    c.mesh.target_node_count = 144;
    c.derive();
    CHECK(c.mesh.ply_thickness == doctest::Approx(0.5));
    CHECK(c.margin.target_nodes == 144);
    c.threshold_mm = 0.5;
    CHECK_NOTHROW(c.check());
    c.threshold_mm = 0.3;
    CHECK_THROWS_AS(c.check(), Error);
    PipelineConfig d;
    from_json(Json(PipelineConfig{}), d);
    CHECK(Json(d) == Json(PipelineConfig{}));
    CHECK_THROWS_AS(from_json(Json{{"nope", 1}}, d), Error);
  }

  TEST_CASE("outputs land on disk with a summary") {
    const Scene s = two_pockets();
    const PipelineConfig cfg = quiet(1);
    const PipelineResult r = run(s.ply, s.ref, cfg);
    const fs::path dir = fs::temp_directory_path() / ("debulk_out_" + std::to_string(::getpid()));
    write_outputs(r, cfg, dir.string());
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK(fs::exists(dir / "pocket_1_heightfield.hmap"));
    const Json j = read_json((dir / "summary.json").string());
    CHECK(j["pocket_count"] == 2);
    CHECK(summary_table(r.reports).find("rms_mm") != std::string::npos);
    fs::remove_all(dir);
  }
}
