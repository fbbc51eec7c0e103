#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "debulk/io.hpp"
#include "debulk/pipeline.hpp"
#include "debulk/synth.hpp"
#include "debulk/wrinkle2d.hpp"

using namespace debulk;
namespace fs = std::filesystem;

namespace {

// The config file is applied before the flags, so it is picked out of argv first.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

void add_config_flags(CLI::App* app, PipelineConfig& c, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file; flags override its values");

  auto* prep = app->add_option_group("scan preparation");
  prep->add_flag("!--no-denoise", c.prep.denoise, "skip statistical outlier removal");
  prep->add_option("--denoise-k", c.prep.denoise_k, "neighbours for outlier removal");
  prep->add_option("--median-window", c.prep.median_window, "median filter window in pixels (odd, 0 disables)");
  prep->add_option("--heightmap-spacing", c.prep.heightmap_spacing, "heightmap cell size, mm");

  auto* seg = app->add_option_group("segmentation");
  seg->add_option("--cut-height", c.segmentation.cut_height, "pocket cut height, mm");
  seg->add_option("--area-tol", c.segmentation.area_tol, "smallest pocket area, cm^2");
  seg->add_option("--peak-tol", c.segmentation.peak_tol, "smallest pocket peak, mm");
  seg->add_option("--margin", c.margin.fixed_mm, "fixed reference margin, mm (0 uses the node rule)");
  seg->add_option("--margin-node-factor", c.margin.node_factor, "margin in node spacings when no fixed margin");
  seg->add_option("--ply-outline", [&c](const CLI::results_t& r) {
        c.ply_outline = json_polygon(read_json(r.front()));
        return true;
      }, "JSON file with the ply outline polygon [[x, y], ...] in mm");

  auto* mesh = app->add_option_group("meshing");
  mesh->add_option("--nodes", c.mesh.target_node_count, "target node count per pocket");
  mesh->add_option("--fiber-angles", c.mesh.fiber_angles, "two fiber directions, degrees")->expected(2);
  mesh->add_option("--ply-boundary-tol", c.mesh.ply_boundary_tol, "free boundary band along the ply outline, mm");
  mesh->add_option("--mold-contact-tol", c.mesh.mold_contact_tol, "height counted as lying on the mold, mm");
  mesh->add_option("--construction-tol", c.mesh.construction_tol, "relative chord tolerance");
  mesh->add_flag("--seed-at-peak", c.mesh.seed_at_peak, "seed the fiber paths at the pocket peak");

  auto* mat = app->add_option_group("material");
  mat->add_option("--thickness", c.material.t, "ply thickness, m");
  mat->add_option("--youngs-modulus", c.material.E, "bending-equivalent Young's modulus, Pa");
  mat->add_option("--shear-modulus", c.material.G, "shear modulus, Pa");
  mat->add_option("--density", c.material.rho, "density, kg/m^3");
  mat->add_option("--friction", c.material.mu, "friction coefficient");
  mat->add_option("--bulk-factor", c.material.beta, "bulk factor");
  mat->add_option("--pressure", c.material.P, "vacuum pressure, Pa");
  mat->add_option("--gravity", c.material.g, "gravitational acceleration, m/s^2");

  auto* sol = app->add_option_group("solver");
  sol->add_option("--max-iterations", c.solver.max_iterations, "inner iteration budget");
  sol->add_option("--max-outer-iterations", c.solver.max_outer_iterations, "outer iteration limit");
  sol->add_option("--constraint-tol", c.solver.constraint_tol, "constraint tolerance, m");
  sol->add_option("--stationarity-tol", c.solver.stationarity_tol, "scaled stationarity tolerance");
  sol->add_option("--initial-penalty", c.solver.initial_penalty, "initial penalty");
  sol->add_option("--penalty-growth", c.solver.penalty_growth, "penalty growth factor");
  sol->add_option("--max-penalty", c.solver.max_penalty, "penalty cap");
  sol->add_option("--lbfgs-memory", c.solver.lbfgs_memory, "L-BFGS memory");
  sol->add_option("--load-steps", c.solver.load_steps, "load steps");

  auto* run = app->add_option_group("run");
  run->add_option("--threshold", c.threshold_mm, "RMS threshold between cease and crease, mm");
  run->add_option("-j,--workers", c.workers, "worker threads (0: DEBULK_WORKERS or all cores)");
  run->add_option("--output-dir", c.output_dir, "directory for reports and heightfields");
}

bool starts_with_line(const std::string& path, const char* magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::string line;
  std::getline(is, line);
  return line.rfind(magic, 0) == 0;
}

// Reference grid file, or a scan of the mold turned into one.
ReferenceSurface load_reference(const std::string& path, double spacing) {
  if (starts_with_line(path, "debulk-heightmap")) return read_reference(path);
  return reference_from_cloud(read_cloud(path), spacing);
}

std::vector<AirPocketPatch> load_patches(const std::string& path) {
  const Json j = read_json(path);
  std::vector<AirPocketPatch> out;
  for (const auto& p : j.at("patches")) out.push_back(p.get<AirPocketPatch>());
  return out;
}

const AirPocketPatch& pick_patch(const std::vector<AirPocketPatch>& patches, int id) {
  for (const auto& p : patches) {
    if (p.id == id) return p;
  }
  throw Error("no pocket with id " + std::to_string(id));
}

void print_patches(const std::vector<AirPocketPatch>& patches) {
  std::cout << std::fixed << std::setw(4) << "id" << std::setw(11) << "area_cm2" << std::setw(9) << "peak_mm"
            << std::setw(11) << "margin_mm" << "  flags\n";
  for (const auto& p : patches) {
    std::cout << std::setw(4) << p.id << std::setw(11) << std::setprecision(2) << p.area_cm2 << std::setw(9)
              << std::setprecision(2) << p.peak_mm << std::setw(11) << std::setprecision(1) << p.margin_mm << "  "
              << (p.near_ply_boundary ? "near-edge " : "") << (p.margin_clipped ? "clipped " : "")
              << (p.low_confidence ? "low-confidence" : "") << '\n';
  }
}

std::string cloud_ext(CloudFormat f) { return f == CloudFormat::csv ? ".csv" : ".cloud"; }

SceneSpec single_pocket_scene() {
  SceneSpec s;
  s.pockets.push_back({Vec2(0.0, 0.0), Vec2(40.0, 40.0), 8.0, BumpProfile::cosine});
  s.noise_sigma = 0.03;
  s.outlier_fraction = 0.002;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wrinkle prediction for debulked prepreg plies from 3D scans"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "debulk 1.0");

  PipelineConfig cfg;
  std::string config_path;
  try {
    const std::string pre = find_config_path(argc, argv);
    if (!pre.empty()) from_json(read_json(pre), cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  std::string ply_path, ref_path, patches_path, net_path, out_path, trace_path, heightmap_path, mosaic_path;
  int pocket_id = 1;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  std::string spec_path, preset = "single", format = "binary";
  std::uint64_t seed = 1;
  bool with_debulked = false;
  synth->add_option("--spec", spec_path, "scene spec JSON (overrides --preset)");
  synth->add_option("--preset", preset, "built-in scene")->check(CLI::IsMember({"single", "suite"}));
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--format", format, "cloud file format")->check(CLI::IsMember({"ascii", "binary", "csv"}));
  synth->add_option("-o,--out", out_path, "output directory")->required();
  synth->add_flag("--debulked", with_debulked, "also write the scan after debulking from ground truth");
  add_config_flags(synth, cfg, config_path);

  auto* seg = app.add_subcommand("segment", "Find air pockets in a ply scan");
  seg->add_option("--ply", ply_path, "ply scan (cloud file)")->required();
  seg->add_option("--reference", ref_path, "reference surface (grid file or mold scan)")->required();
  seg->add_option("-o,--out", out_path, "patches JSON")->default_val("patches.json");
  seg->add_option("--heightmap", heightmap_path, "also write the heightmap grid file");
  add_config_flags(seg, cfg, config_path);

  auto* mesh = app.add_subcommand("mesh", "Build the pin-jointed net of one pocket");
  mesh->add_option("--patches", patches_path, "patches JSON from segment")->required();
  mesh->add_option("--pocket", pocket_id, "pocket id");
  mesh->add_option("-o,--out", out_path, "net JSON")->default_val("net.json");
  add_config_flags(mesh, cfg, config_path);

  auto* solve_cmd = app.add_subcommand("solve", "Solve the debulk equilibrium of one pocket");
  solve_cmd->add_option("--patches", patches_path, "patches JSON from segment")->required();
  solve_cmd->add_option("--net", net_path, "net JSON from mesh (meshed afresh when absent)");
  solve_cmd->add_option("--pocket", pocket_id, "pocket id");
  solve_cmd->add_option("-o,--out", out_path, "result JSON")->default_val("solve.json");
  solve_cmd->add_option("--trace", trace_path, "outer iteration trace CSV");
  add_config_flags(solve_cmd, cfg, config_path);

  auto* predict = app.add_subcommand("predict", "Full pipeline: segment, mesh, solve, post-process, classify");
  predict->add_option("--ply", ply_path, "ply scan (cloud file)")->required();
  predict->add_option("--reference", ref_path, "reference surface (grid file or mold scan)")->required();
  predict->add_option("--mosaic", mosaic_path, "grid file of all predicted heightfields");
  add_config_flags(predict, cfg, config_path);
  predict->footer("Exit status: 0 all pockets cease, 2 a crease is predicted, 3 a pocket is inconclusive, 1 error.");

  auto* cmp = app.add_subcommand("compare", "Compare predictions with a scan taken after debulking");
  std::string predictions_dir;
  cmp->add_option("--predictions", predictions_dir, "output directory of predict")->required();
  cmp->add_option("--debulked", ply_path, "scan after debulking (cloud file)")->required();
  cmp->add_option("--reference", ref_path, "reference surface (grid file or mold scan)")->required();
  cmp->add_option("-o,--out", out_path, "comparison JSON");
  add_config_flags(cmp, cfg, config_path);

  auto* w2d = app.add_subcommand("wrinkle2d", "Load-stepped 2D ply section over a mold");
  int segments = 200, steps = 5;
  double apex = 3.2, leg = 9.3, mold_radius = 0.0, gap = -1.0;
  std::string left = "fixed", right = "fixed", csv_path;
  w2d->add_option("--segments", segments, "chain segments");
  w2d->add_option("--apex", apex, "initial apex height above the mold, mm");
  w2d->add_option("--leg", leg, "length of each leg of the initial triangle, mm");
  w2d->add_option("--steps", steps, "load steps");
  w2d->add_option("--left", left, "left end condition")->check(CLI::IsMember({"fixed", "free"}));
  w2d->add_option("--right", right, "right end condition")->check(CLI::IsMember({"fixed", "free"}));
  w2d->add_option("--mold-radius", mold_radius, "convex mold radius, mm (0: flat)");
  w2d->add_option("--contact-gap", gap, "self-contact gap, mm (negative: ply thickness, 0: off)");
  w2d->add_option("--csv", csv_path, "node positions per step as CSV");
  add_config_flags(w2d, cfg, config_path);

  auto* show = app.add_subcommand("config", "Print the effective configuration as JSON");
  add_config_flags(show, cfg, config_path);

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.derive();
    cfg.check();
    const auto write_or_print = [](const std::string& path, const Json& j) {
      if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
      } else {
        write_json(path, j);
      }
    };

    if (*show) {
      std::cout << Json(cfg).dump(2) << '\n';
      return 0;
    }

    if (*synth) {
      SceneSpec spec = preset == "suite" ? layup_suite() : single_pocket_scene();
      if (!spec_path.empty()) from_json(read_json(spec_path), spec);
      const Scene scene = generate(spec, seed);
      const CloudFormat fmt = parse_cloud_format(format);
      fs::create_directories(out_path);
      const fs::path dir(out_path);
      write_cloud((dir / ("ply" + cloud_ext(fmt))).string(), scene.ply, fmt);
      write_reference((dir / "reference.hmap").string(), scene.ref);
      Json truth = Json::array();
      for (const auto& t : scene.truth) {
        truth.push_back({{"members", t.members},
                         {"center", vec2_json(t.center)},
                         {"peak_mm", t.peak_mm},
                         {"area_cm2", t.area_cm2},
                         {"excess_mm", t.excess_mm},
                         {"mold_length_mm", t.mold_length_mm}});
      }
      write_json((dir / "truth.json").string(), truth);
      write_json((dir / "scene.json").string(), Json(spec));
      write_json((dir / "outline.json").string(), polygon_json(scene.ply_outline));
      if (with_debulked) {
        const Scene after = generate_debulked(spec, cfg.material, seed);
        write_cloud((dir / ("debulked" + cloud_ext(fmt))).string(), after.ply, fmt);
      }
      std::cout << "wrote " << scene.truth.size() << " pockets, " << scene.ply.width << "x" << scene.ply.height
                << " points to " << out_path << '\n';
      return 0;
    }

    if (*seg) {
      const ReferenceSurface ref = load_reference(ref_path, cfg.prep.heightmap_spacing);
      const HeightMap hm = prepare_heightmap(read_cloud(ply_path), ref, cfg.prep);
      if (!heightmap_path.empty()) write_heightmap(heightmap_path, hm);
      const auto patches =
          segment(hm, ref, cfg.segmentation, cfg.margin, cfg.ply_outline, cfg.mesh.ply_boundary_tol);
      write_or_print(out_path, Json{{"patches", patches}});
      print_patches(patches);
      return 0;
    }

    if (*mesh) {
      const auto patches = load_patches(patches_path);
      const PlyNet net = mesh_patch(pick_patch(patches, pocket_id), cfg.mesh);
      write_or_print(out_path, Json(net));
      std::cout << "pocket " << pocket_id << ": " << net.size() << " nodes, spacing " << net.spacing << " mm, "
                << net.count(NodeClass::interior) << " interior, " << net.count(NodeClass::fixed_boundary)
                << " fixed, " << net.count(NodeClass::free_boundary) << " free\n";
      return 0;
    }

    if (*solve_cmd) {
      const auto patches = load_patches(patches_path);
      const AirPocketPatch& patch = pick_patch(patches, pocket_id);
      const PlyNet net = net_path.empty() ? mesh_patch(patch, cfg.mesh) : read_json(net_path).get<PlyNet>();
      std::vector<TraceRow> rows;
      SolverConfig sc = cfg.solver;
      if (!trace_path.empty()) {
        sc.trace = [&rows](int o, double f, double e, double p, double s) { rows.push_back({o, f, e, p, s}); };
      }
      const SolveResult r = solve(net, cfg.material, patch.ref_surface, sc);
      const RidgeResult rr = apply_ridges(net, r.X_final, patch.ref_surface, cfg.material);
      const DebulkReport rep = classify(rasterize_heights(net, r.X_final, rr.height, patch), cfg.threshold_mm,
                                        r.converged);
      write_or_print(out_path, Json{{"solve", r}, {"net", net}});
      if (!trace_path.empty()) {
        std::ofstream os(trace_path);
        if (!os) throw Error("cannot write '" + trace_path + "'");
        write_trace_csv(os, rows);
      }
      std::cout << "pocket " << pocket_id << ": converged " << (r.converged ? "yes" : "no") << ", " << r.iterations
                << " iterations, " << r.function_evaluations << " evaluations, " << r.wall_time_s << " s\n"
                << "  max edge residual " << r.max_equality_residual << " m, max penetration " << r.max_penetration
                << " m\n  rms " << rep.rms_mm << " mm, " << to_string(rep.verdict) << '\n';
      for (const auto& w : r.warnings) std::cout << "  warning: " << w << '\n';
      return r.converged ? 0 : static_cast<int>(RunStatus::inconclusive);
    }

    if (*predict) {
      const ReferenceSurface ref = load_reference(ref_path, cfg.prep.heightmap_spacing);
      const PipelineResult result = run(read_cloud(ply_path), ref, cfg);
      std::cout << summary_table(result.reports);
      for (const auto& r : result.reports) {
        for (const auto& d : r.diagnostics) std::cout << "  pocket " << r.pocket_id << ": " << d << '\n';
      }
      const RunStatus st = result.status();
      std::cout << result.reports.size() << " pockets, " << result.workers << " workers, " << std::setprecision(2)
                << result.total_time_s << " s\n";
      if (!cfg.output_dir.empty()) write_outputs(result, cfg, cfg.output_dir);
      if (!mosaic_path.empty()) write_heightmap(mosaic_path, prediction_mosaic(result.reports));
      return static_cast<int>(st);
    }

    if (*cmp) {
      const fs::path dir(predictions_dir);
      const Json summary = read_json((dir / "summary.json").string());
      std::vector<DebulkReport> reports;
      for (const auto& j : summary.at("reports")) {
        DebulkReport r = j.get<DebulkReport>();
        const fs::path hf = dir / ("pocket_" + std::to_string(r.pocket_id) + "_heightfield.hmap");
        if (fs::exists(hf)) r.heightfield = read_heightmap(hf.string());
        reports.push_back(std::move(r));
      }
      const ReferenceSurface ref = load_reference(ref_path, cfg.prep.heightmap_spacing);
      const HeightMap after = prepare_heightmap(read_cloud(ply_path), ref, cfg.prep);
      const Comparison c = compare(reports, after, cfg.threshold_mm);
      std::cout << comparison_table(c);
      for (const auto& w : c.warnings) std::cout << "warning: " << w << '\n';
      if (!out_path.empty()) {
        Json rows = Json::array();
        for (const auto& r : c.rows) {
          rows.push_back({{"pocket_id", r.pocket_id},
                          {"predicted_rms_mm", r.predicted_rms},
                          {"measured_rms_mm", r.measured_rms},
                          {"predicted", to_string(r.predicted)},
                          {"measured", r.skipped ? "skipped" : to_string(r.measured)},
                          {"samples", r.samples},
                          {"agree", r.agree}});
        }
        write_json(out_path, {{"rows", rows},
                              {"compared", c.compared},
                              {"agreements", c.agreements},
                              {"warnings", c.warnings}});
      }
      return 0;
    }

    if (*w2d) {
      Ply2D ply = Ply2D::triangle(leg, apex, segments);
      ply.left = parse_end_condition(left);
      ply.right = parse_end_condition(right);
      ply.contact_gap = gap;
      if (mold_radius > 0.0) {
        const double half = std::sqrt(leg * leg - apex * apex);
        std::vector<Vec2> pts;
        const MoldProfile2D mold{mold_radius};
        pts = {{-half, mold.z(-half)}, {0.0, mold.z(0.0) + apex}, {half, mold.z(half)}};
        ply = Ply2D::from_polyline(pts, segments, ply.left, ply.right, mold);
        ply.contact_gap = gap;
      }
      // the section model keeps its own tight default tolerance unless one is given here
      SolverConfig sc = cfg.solver;
      if (w2d->count("--constraint-tol") == 0) sc.constraint_tol = 1e-10;
      const Wrinkle2DResult r = simulate_2d(ply, cfg.material, steps, &sc);
      std::cout << std::setw(5) << "step" << std::setw(12) << "pressure" << std::setw(11) << "apex_mm"
                << std::setw(11) << "converged" << std::setw(11) << "evals" << '\n';
      for (const auto& s : r.steps) {
        double top = 0.0;
        for (const auto& p : s.nodes) top = std::max(top, p.y() - ply.mold.z(p.x()));
        std::cout << std::setw(5) << s.step << std::setw(12) << std::setprecision(0) << std::fixed << s.pressure
                  << std::setw(11) << std::setprecision(4) << top << std::setw(11) << (s.converged ? "yes" : "no")
                  << std::setw(11) << s.function_evaluations << '\n';
      }
      const double L = ply.length();
      const double half = 0.5 * L;
      const double chord = 2.0 * std::sqrt(std::max(0.0, half * half - apex * apex));
      std::cout << "final apex " << r.apex_height(ply.mold) << " mm; geometric ridge "
                << ridge_height(L, chord, cfg.material.t * 1e3) << " mm; length change "
                << std::scientific << (chain_length(r.final_nodes()) - L) / L << '\n';
      for (const auto& w : r.warnings) std::cout << "warning: " << w << '\n';
      if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw Error("cannot write '" + csv_path + "'");
        write_wrinkle_csv(os, r);
      }
      return r.converged ? 0 : static_cast<int>(RunStatus::inconclusive);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(RunStatus::error);
  }
  return 0;
}
