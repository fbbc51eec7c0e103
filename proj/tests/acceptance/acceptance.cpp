// Acceptance suite: one PASS/FAIL line per criterion; exit status 0 iff criteria 1-8 pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "debulk/io.hpp"
#include "debulk/optimizer.hpp"
#include "debulk/pipeline.hpp"
#include "debulk/postprocess.hpp"
#include "debulk/synth.hpp"
#include "debulk/wrinkle2d.hpp"
#include "support.hpp"

using namespace debulk;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-5;
constexpr double kResidualTol = 1e-6;      // m
constexpr double kTwoBarApexRel = 0.01;
constexpr double kFlatTol = 1e-6;          // m
constexpr double kRidgeRel = 0.20;
constexpr double kLengthRel = 1e-6;
constexpr double kBaselineRms = 0.25;      // mm
constexpr double kBaselineTol = 0.01;      // mm
constexpr double kSpreadTol = 0.05;        // mm
constexpr double kAreaRel = 0.05;
constexpr double kPeakTol = 0.1;           // mm
constexpr double kTimeBudget = 13.5;       // s per pocket
constexpr double kDatasetRmsTol = 0.1;     // mm
constexpr int kDatasetAgreement = 13;

// Two-bar scenario: bars of 9.3 mm rising to an apex 3.2 mm above a flat mold.
constexpr double kBar = 9.3;
constexpr double kApex = 3.2;
// Wrinkle2d resolution; the apex still rises with refinement (60: 0.545, 200: 0.557 mm).
constexpr int kChainSegments = 400;

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct SolvedNet {
  std::string label;
  PlyNet net;
  SolveResult solve;
  ReferenceSurface ref;
};
std::vector<SolvedNet> solved;

void keep(const std::string& label, const PlyNet& net, const SolveResult& r, const ReferenceSurface& ref) {
  solved.push_back({label, net, r, ref});
}

PipelineConfig base_config(int target_nodes) {
  PipelineConfig cfg;
  cfg.mesh.target_node_count = target_nodes;
  cfg.workers = 1;
  cfg.derive();
  return cfg;
}

// Segments a noise-free scene and runs the single largest pocket through the pipeline stages.
DebulkReport single_pocket(const SceneSpec& spec, int target_nodes, const std::string& label) {
  const Scene scene = generate(spec, 1);
  const PipelineConfig cfg = base_config(target_nodes);
  const HeightMap hm = build_heightmap(scene.ply, scene.ref, cfg.prep.heightmap_spacing);
  const auto patches = segment(hm, scene.ref, cfg.segmentation, cfg.margin, scene.ply_outline, cfg.mesh.ply_boundary_tol);
  if (patches.empty()) throw Error("no pocket segmented");
  PlyNet net;
  SolveResult sr;
  DebulkReport rep = process_patch(patches.front(), cfg, &net, &sr);
  if (net.size() > 0) keep(label, net, sr, patches.front().ref_surface);
  return rep;
}

Outcome gradient_check() {
  std::mt19937_64 rng(20240611);
  const double R = 100.0;
  struct Case {
    std::string name;
    PlyNet net;
  };
  std::vector<Case> cases;
  cases.push_back({"flat", testing::lattice_net(9, 5.0, [](double, double) { return 0.0; }, true)});
  cases.push_back({"cylinder", testing::lattice_net(9, 5.0, [R](double x, double) {
                     return std::sqrt(R * R - x * x) - R;
                   }, true)});
  {
    const Scene scene = generate(testing::one_bump(8.0, 40.0), 1);
    const HeightMap hm = build_heightmap(scene.ply, scene.ref, 1.0);
    PatchMargin pm;
    const auto patches = segment(hm, scene.ref, SegmentationSettings{}, pm, scene.ply_outline, 20.0);
    if (patches.empty()) return {false, false, "bell pocket not segmented"};
    MeshConfig mc;
    mc.target_node_count = 64;
    PlyNet bell = mesh_patch(patches.front(), mc);
    // Free a stretch of the rim so the friction term is exercised too.
    for (std::size_t i = 0; i < bell.size(); ++i)
      if (bell.node_class[i] == NodeClass::fixed_boundary && bell.nodes[i].x() > 0) bell.node_class[i] = NodeClass::free_boundary;
    cases.push_back({"bell", bell});
  }
  double worst = 0.0;
  std::string where;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& c : cases) {
    const EnergyModel model = EnergyModel::from_net(c.net, MaterialParams{});
    const Eigen::VectorXd X0 = to_configuration(c.net);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd X = testing::perturb(c.net, X0, 0.2 * c.net.spacing * 1e-3, rng);
      const Eigen::VectorXd g = total_potential(model, X, X0).grad;
      const Eigen::VectorXd gfd = testing::fd_gradient(model, X, X0, 1e-8);
      const double rel = (g - gfd).norm() / std::max(gfd.norm(), 1e-300);
      if (rel > worst) {
        worst = rel;
        where = fmt("%s #%d", c.name.c_str(), trial);
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < kGradRelTol && secs < 60.0, false,
          fmt("worst relative error %.2e (%s), 60 configurations in %.1f s", worst, where.c_str(), secs)};
}

Outcome two_bar() {
  const double half = std::sqrt(kBar * kBar - kApex * kApex);
  auto make = [half](NodeClass ends) {
    PlyNet net;
    net.nodes = {Vec3(-half, 0, 0), Vec3(0, 0, kApex), Vec3(half, 0, 0)};
    net.neighbors = {{1, -1, -1, -1}, {2, 0, -1, -1}, {-1, 1, -1, -1}};
    net.node_class = {ends, NodeClass::interior, ends};
    net.lattice = {{-1, 0}, {0, 0}, {1, 0}};
    net.spacing = kBar;
    net.patch_area_m2 = 3.0 * std::pow(kBar * 1e-3, 2);
    net.rebuild_edges();
    return net;
  };
  const ReferenceSurface ref = ReferenceSurface::flat(Vec2(-50, -50), Vec2(50, 50), 1.0);
  // With both ends clamped the apex can only swing on the circle of radius sqrt(bar^2 - half^2).
  const double closed_form = std::sqrt(kBar * kBar - half * half);

  const PlyNet fixed = make(NodeClass::fixed_boundary);
  const SolveResult rf = solve(fixed, MaterialParams{}, ref, SolverConfig{});
  keep("two-bar fixed", fixed, rf, ref);
  const double apex = rf.X_final[5] * 1e3;
  const bool fixed_ok = rf.converged && std::abs(apex - closed_form) <= kTwoBarApexRel * closed_form;

  MaterialParams slick;
  slick.mu = 0.0;
  const PlyNet loose = make(NodeClass::free_boundary);
  const SolveResult rl = solve(loose, slick, ref, SolverConfig{});
  keep("two-bar free", loose, rl, ref);
  double zmax = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) zmax = std::max(zmax, std::abs(rl.X_final[3 * i + 2]));
  const bool free_ok = rl.converged && zmax <= kFlatTol;
  return {fixed_ok && free_ok, false,
          fmt("fixed apex %.6f mm vs %.6f mm; free ends max |z| %.2e m", apex, closed_form, zmax)};
}

Outcome ridge_agreement() {
  const Ply2D ply = Ply2D::triangle(kBar, kApex, kChainSegments);
  const Wrinkle2DResult r = simulate_2d(ply, MaterialParams{});
  const double half = std::sqrt(kBar * kBar - kApex * kApex);
  const double expected = ridge_height(2.0 * kBar, 2.0 * half, 0.3);
  const double apex = r.apex_height(ply.mold);
  const double dl = std::abs(chain_length(r.final_nodes()) - ply.length()) / ply.length();
  const double rel = std::abs(apex - expected) / expected;
  return {r.converged && rel <= kRidgeRel && dl <= kLengthRel, false,
          fmt("apex %.4f mm vs ridge model %.4f mm (%.1f%%), length change %.1e relative, %d segments", apex,
              expected, 100.0 * rel, dl, kChainSegments)};
}

Outcome conforming_baseline() {
  // A low wide pocket: its excess length stays below the ridge trigger everywhere.
  const DebulkReport rep = single_pocket(testing::one_bump(3.0, 60.0), 100, "baseline 3/60");
  double dev = 0.0;
  for (std::size_t j = 0; j < rep.heightfield.rows(); ++j)
    for (std::size_t i = 0; i < rep.heightfield.cols(); ++i)
      if (rep.heightfield.valid(i, j)) dev = std::max(dev, std::abs(rep.heightfield.values(i, j) - kBaselineRms));
  const bool ok = rep.verdict == Verdict::cease && std::abs(rep.rms_mm - kBaselineRms) <= kBaselineTol &&
                  dev <= kBaselineTol && rep.ridge_count == 0;
  return {ok, false, fmt("rms %.4f mm, max deviation from 0.25 %.2e mm, ridges %d, %s", rep.rms_mm, dev,
                         rep.ridge_count, to_string(rep.verdict))};
}

Outcome discretization() {
  std::vector<double> rms;
  std::string detail = "pocket 8/40, rms";
  for (int n : {64, 100, 144}) {
    const DebulkReport rep = single_pocket(testing::one_bump(8.0, 40.0), n, fmt("pocket 8/40 N=%d", n));
    if (!rep.converged) return {false, false, fmt("N=%d did not converge", n)};
    rms.push_back(rep.rms_mm);
    detail += fmt(" N=%d:%.4f", n, rep.rms_mm);
  }
  const double spread = *std::max_element(rms.begin(), rms.end()) - *std::min_element(rms.begin(), rms.end());
  return {spread < kSpreadTol, false, detail + fmt(", spread %.4f mm", spread)};
}

Outcome segmentation_fidelity() {
  struct Bump {
    double peak, radius;
    BumpProfile profile;
  };
  const std::vector<Bump> bumps = {{8.0, 40.0, BumpProfile::cosine},
                                   {5.0, 25.0, BumpProfile::cosine},
                                   {6.0, 15.0, BumpProfile::gaussian},
                                   {10.0, 25.0, BumpProfile::gaussian}};
  double worst_area = 0.0, worst_peak = 0.0;
  bool ok = true;
  for (const auto& b : bumps) {
    const Scene scene = generate(testing::one_bump(b.peak, b.radius, b.profile), 3);
    const HeightMap hm = build_heightmap(scene.ply, scene.ref, 1.0);
    const auto patches = segment(hm, scene.ref, SegmentationSettings{}, PatchMargin{}, scene.ply_outline, 20.0);
    if (patches.size() != 1) {
      ok = false;
      continue;
    }
    worst_area = std::max(worst_area, std::abs(patches[0].area_cm2 - scene.truth[0].area_cm2) / scene.truth[0].area_cm2);
    worst_peak = std::max(worst_peak, std::abs(patches[0].peak_mm - b.peak));
  }
  ok = ok && worst_area <= kAreaRel && worst_peak <= kPeakTol;

  auto count = [](const SceneSpec& spec, const SegmentationSettings& s) {
    const Scene scene = generate(spec, 3);
    const HeightMap hm = build_heightmap(scene.ply, scene.ref, 1.0);
    return segment(hm, scene.ref, s, PatchMargin{}, scene.ply_outline, 20.0).size();
  };
  const SegmentationSettings table;
  SegmentationSettings low_cut;
  low_cut.cut_height = 1.0;
  low_cut.contact_height = 0.5;
  const std::size_t low_peak = count(testing::one_bump(1.0, 40.0), table);
  const std::size_t tiny = count(testing::one_bump(4.0, 6.0), table);
  const std::size_t under_peak_tol = count(testing::one_bump(1.2, 40.0), low_cut);
  const std::size_t over_peak_tol = count(testing::one_bump(1.4, 40.0), low_cut);
  const bool rejections = low_peak == 0 && tiny == 0 && under_peak_tol == 0 && over_peak_tol == 1;
  return {ok && rejections, false,
          fmt("worst area error %.2f%%, worst peak error %.3f mm; rejected peak 1.0:%s area 0.28 cm2:%s "
              "peak 1.2 under cut 1.0:%s (1.4 kept:%s)",
              100.0 * worst_area, worst_peak, low_peak == 0 ? "yes" : "no", tiny == 0 ? "yes" : "no",
              under_peak_tol == 0 ? "yes" : "no", over_peak_tol == 1 ? "yes" : "no")};
}

Outcome timing() {
  const SceneSpec spec = layup_suite();
  const Scene scene = generate(spec, 7);
  PipelineConfig cfg = base_config(100);
  const PipelineResult res = run(scene.ply, scene.ref, cfg);
  if (res.reports.empty()) return {false, false, "suite produced no pockets"};
  double total = 0.0, worst = 0.0;
  int evals = 0, converged = 0, nodes = 0;
  for (std::size_t k = 0; k < res.reports.size(); ++k) {
    const auto& r = res.reports[k];
    total += r.total_time_s;
    worst = std::max(worst, r.total_time_s);
    evals += r.function_evaluations;
    nodes += r.node_count;
    converged += r.converged ? 1 : 0;
    if (res.nets[k].size() > 0) keep(fmt("suite pocket %d", r.pocket_id), res.nets[k], res.solves[k], res.patches[k].ref_surface);
  }
  const double n = static_cast<double>(res.reports.size());
  const double mean = total / n;
  return {mean <= kTimeBudget, false,
          fmt("%zu pockets, mean %.2f s (max %.2f s), mean %.0f nodes, mean %.0f function evaluations, %d converged, one worker",
              res.reports.size(), mean, worst, nodes / n, evals / n, converged)};
}

Outcome constraint_satisfaction() {
  int checked = 0;
  double eq = 0.0, pen = 0.0;
  std::string worst;
  for (const auto& s : solved) {
    if (!s.solve.converged) continue;
    const auto r = testing::recompute_residuals(s.net, s.solve.X_final, s.ref);
    ++checked;
    if (r.max_length_error > eq || r.max_penetration > pen) worst = s.label;
    eq = std::max(eq, r.max_length_error);
    pen = std::max(pen, r.max_penetration);
  }
  return {checked > 0 && eq <= kResidualTol && pen <= kResidualTol, false,
          fmt("%d converged solves, max length error %.2e m, max penetration %.2e m (worst: %s)", checked, eq, pen,
              worst.c_str())};
}

// Per-pocket RMS of the reference layup, mm.
constexpr double kReferenceRms[14] = {0.25, 0.35, 0.45, 0.40, 0.38, 0.39, 0.28, 0.30, 0.75, 0.32, 0.45, 0.25, 0.33, 0.25};

Outcome dataset() {
  const char* dir = std::getenv("DEBULK_DATASET");
  if (!dir || !*dir) return {false, true, "DEBULK_DATASET not set"};
  namespace fs = std::filesystem;
  const fs::path d(dir);
  for (const char* f : {"ply.cloud", "reference.hmap", "debulked.cloud"})
    if (!fs::exists(d / f)) return {false, false, fmt("missing %s in %s", f, dir)};
  const OrganizedPointCloud ply = read_cloud((d / "ply.cloud").string());
  const ReferenceSurface ref = read_reference((d / "reference.hmap").string());
  PipelineConfig cfg = base_config(100);
  cfg.workers = 0;
  const PipelineResult res = run(ply, ref, cfg);
  const HeightMap debulked = prepare_heightmap(read_cloud((d / "debulked.cloud").string()), ref, cfg.prep);
  const Comparison cmp = compare(res.reports, debulked, cfg.threshold_mm);
  int within = 0;
  for (const auto& r : res.reports)
    if (r.pocket_id >= 1 && r.pocket_id <= 14 && std::abs(r.rms_mm - kReferenceRms[r.pocket_id - 1]) <= kDatasetRmsTol) ++within;
  return {res.reports.size() == 14 && cmp.agreements >= kDatasetAgreement && within == 14, false,
          fmt("%zu pockets, agreement %d/%d, rms within 0.1 mm for %d", res.reports.size(), cmp.agreements,
              cmp.compared, within)};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main() {
  // Criterion 2 audits the solves produced by the others, so it runs last.
  Outcome out[10];
  out[1] = guarded(gradient_check);
  out[3] = guarded(two_bar);
  out[4] = guarded(ridge_agreement);
  out[5] = guarded(conforming_baseline);
  out[6] = guarded(discretization);
  out[7] = guarded(segmentation_fidelity);
  out[8] = guarded(timing);
  out[2] = guarded(constraint_satisfaction);
  out[9] = guarded(dataset);

  const char* names[10] = {"",
                           "gradient correctness",
                           "constraint satisfaction",
                           "two-bar apex",
                           "ridge formula agreement",
                           "conforming baseline",
                           "discretization insensitivity",
                           "segmentation fidelity",
                           "timing",
                           "reference dataset"};
  bool all = true;
  for (int k = 1; k <= 9; ++k) {
    const char* tag = out[k].skipped ? "SKIP" : out[k].pass ? "PASS" : "FAIL";
    std::printf("criterion %d %-30s %s  %s\n", k, names[k], tag, out[k].detail.c_str());
    if (k <= 8 && !out[k].pass) all = false;
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
