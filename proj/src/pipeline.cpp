#include "debulk/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace debulk {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void PrepSettings::check() const {
  if (denoise_k < 1) throw Error("prep: denoise_k must be >= 1");
  if (median_window < 0 || (median_window > 0 && median_window % 2 == 0)) {
    throw Error("prep: median_window must be 0 or odd");
  }
  if (!(heightmap_spacing > 0.0)) throw Error("prep: heightmap_spacing must be > 0");
}

void PipelineConfig::derive() {
  margin.target_nodes = mesh.target_node_count;
  mesh.ply_thickness = material.t * 1e3;
  segmentation.contact_height = mesh.mold_contact_tol;
}

void PipelineConfig::check() const {
  prep.check();
  segmentation.check();
  mesh.check();
  material.check();
  solver.check();
  if (workers < 0) throw Error("config: workers must be >= 0");
  const double consolidated = material.consolidated_thickness() * 1e3;
  if (!(threshold_mm >= consolidated)) {
    throw Error("config: threshold below the consolidated thickness t/beta");
  }
  if (margin.fixed_mm <= 0.0 && margin.target_nodes != mesh.target_node_count) {
    throw Error("config: margin node target differs from the mesh node target");
  }
  if (std::abs(mesh.ply_thickness - material.t * 1e3) > 1e-9) {
    throw Error("config: mesh ply thickness differs from the material thickness");
  }
  if (std::abs(segmentation.contact_height - mesh.mold_contact_tol) > 1e-12) {
    throw Error("config: segmentation contact height differs from the mold contact tolerance");
  }
}

int PipelineConfig::resolved_workers() const {
  if (workers > 0) return workers;
  if (const char* env = std::getenv("DEBULK_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<int>(std::min<long>(n, 256));
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void to_json(Json& j, const PrepSettings& p) {
  j = {{"denoise", p.denoise},
       {"denoise_k", p.denoise_k},
       {"median_window", p.median_window},
       {"heightmap_spacing", p.heightmap_spacing}};
}

void from_json(const Json& j, PrepSettings& p) {
  if (!j.is_object()) throw Error("prep: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "denoise") p.denoise = it->get<bool>();
    else if (k == "denoise_k") p.denoise_k = it->get<int>();
    else if (k == "median_window") p.median_window = it->get<int>();
    else if (k == "heightmap_spacing") p.heightmap_spacing = it->get<double>();
    else throw Error("prep: unknown key '" + k + "'");
  }
}

void to_json(Json& j, const PipelineConfig& c) {
  j = {{"prep", c.prep},
       {"segmentation", c.segmentation},
       {"margin", c.margin},
       {"mesh", c.mesh},
       {"material", c.material},
       {"solver", c.solver},
       {"threshold_mm", c.threshold_mm},
       {"ply_outline", polygon_json(c.ply_outline)},
       {"workers", c.workers},
       {"output_dir", c.output_dir}};
}

void from_json(const Json& j, PipelineConfig& c) {
  if (!j.is_object()) throw Error("config: expected an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      if (k == "prep") from_json(*it, c.prep);
      else if (k == "segmentation") from_json(*it, c.segmentation);
      else if (k == "margin") from_json(*it, c.margin);
      else if (k == "mesh") from_json(*it, c.mesh);
      else if (k == "material") from_json(*it, c.material);
      else if (k == "solver") from_json(*it, c.solver);
      else if (k == "threshold_mm") c.threshold_mm = it->get<double>();
      else if (k == "ply_outline") c.ply_outline = json_polygon(*it);
      else if (k == "workers") c.workers = it->get<int>();
      else if (k == "output_dir") c.output_dir = it->get<std::string>();
      else throw Error("config: unknown key '" + k + "'");
    }
  } catch (const Json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
}

RunStatus PipelineResult::status() const {
  const auto any = [&](Verdict v) {
    return std::any_of(reports.begin(), reports.end(), [v](const auto& r) { return r.verdict == v; });
  };
  if (any(Verdict::inconclusive)) return RunStatus::inconclusive;
  if (any(Verdict::crease)) return RunStatus::crease;
  return RunStatus::all_cease;
}

HeightMap prepare_heightmap(const OrganizedPointCloud& ply, const ReferenceSurface& ref, const PrepSettings& prep) {
  prep.check();
  OrganizedPointCloud c = prep.denoise ? denoise(ply, prep.denoise_k) : ply;
  if (prep.median_window > 0) c = median_filter(c, prep.median_window);
  return build_heightmap(c, ref, prep.heightmap_spacing);
}

DebulkReport process_patch(const AirPocketPatch& patch, const PipelineConfig& cfg, PlyNet* net_out,
                           SolveResult* solve_out) {
  const auto t0 = std::chrono::steady_clock::now();
  DebulkReport rep;
  const char* stage = "mesh";
  try {
    const PlyNet net = mesh_patch(patch, cfg.mesh);
    if (net_out) *net_out = net;
    stage = "solve";
    const SolveResult sr = solve(net, cfg.material, patch.ref_surface, cfg.solver);
    if (solve_out) *solve_out = sr;
    stage = "post-process";
    const RidgeResult rr = apply_ridges(net, sr.X_final, patch.ref_surface, cfg.material);
    std::size_t uncovered = 0;
    const HeightMap field = rasterize_heights(net, sr.X_final, rr.height, patch, &uncovered);
    stage = "classify";
    rep = classify(field, cfg.threshold_mm, sr.converged);
    rep.spacing_mm = net.spacing;
    rep.node_count = static_cast<int>(net.size());
    rep.ridge_count = rr.ridge_count();
    rep.raw_max_mm = *std::max_element(rr.raw_height.begin(), rr.raw_height.end());
    rep.predicted_max_mm = *std::max_element(rr.height.begin(), rr.height.end());
    rep.converged = sr.converged;
    rep.iterations = sr.iterations;
    rep.function_evaluations = sr.function_evaluations;
    rep.solve_time_s = sr.wall_time_s;
    rep.max_equality_residual = sr.max_equality_residual;
    rep.max_penetration = sr.max_penetration;
    rep.diagnostics = sr.warnings;
    if (net.frontier_count > 0) {
      rep.diagnostics.push_back("mesh: " + std::to_string(net.frontier_count) + " nodes could not be placed");
    }
    if (uncovered > 0) {
      rep.diagnostics.push_back("post-process: " + std::to_string(uncovered) +
                                " contour cells outside the net took the nearest node height");
    }
    if (rep.ridge_count > 0) rep.diagnostics.push_back("ridge sections follow the fiber with the larger excess length");
  } catch (const std::exception& e) {
    rep = DebulkReport{};
    rep.verdict = Verdict::inconclusive;
    rep.threshold_mm = cfg.threshold_mm;
    rep.diagnostics.push_back(std::string(stage) + " failed: " + e.what());
  }
  rep.pocket_id = patch.id;
  rep.area_cm2 = patch.area_cm2;
  rep.peak_mm = patch.peak_mm;
  if (patch.near_ply_boundary) rep.diagnostics.push_back("pocket touches the ply boundary");
  if (patch.margin_clipped) rep.diagnostics.push_back("reference margin clipped by the scan extent");
  if (patch.low_confidence) {
    rep.diagnostics.push_back("low confidence: " + std::to_string(patch.invalid_cells) +
                              " unscanned cells inside or next to the pocket");
  }
  rep.total_time_s = seconds_since(t0);
  return rep;
}

PipelineResult run_on_heightmap(const HeightMap& hm, const ReferenceSurface& ref, PipelineConfig cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.derive();
  cfg.check();
  PipelineResult out;
  out.heightmap = hm;
  out.patches = segment(hm, ref, cfg.segmentation, cfg.margin, cfg.ply_outline, cfg.mesh.ply_boundary_tol);
  const std::size_t n = out.patches.size();
  out.reports.resize(n);
  out.nets.resize(n);
  out.solves.resize(n);
  out.workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.resolved_workers()), std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      out.reports[k] = process_patch(out.patches[k], cfg, &out.nets[k], &out.solves[k]);
    }
  };
  if (out.workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < out.workers; ++w) pool.emplace_back(worker);
  }
  out.total_time_s = seconds_since(t0);
  return out;
}

PipelineResult run(const OrganizedPointCloud& ply, const ReferenceSurface& ref, PipelineConfig cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.derive();
  cfg.check();
  const HeightMap hm = prepare_heightmap(ply, ref, cfg.prep);
  PipelineResult out = run_on_heightmap(hm, ref, cfg);
  out.total_time_s = seconds_since(t0);
  return out;
}

std::string summary_table(const std::vector<DebulkReport>& reports) {
  std::ostringstream os;
  os << std::fixed;
  os << std::setw(4) << "id" << std::setw(10) << "area_cm2" << std::setw(9) << "disc_mm" << std::setw(7) << "nodes"
     << std::setw(9) << "rms_mm" << std::setw(14) << "verdict" << std::setw(10) << "time_s" << std::setw(11)
     << "func_eval" << std::setw(8) << "ridges" << '\n';
  for (const auto& r : reports) {
    os << std::setw(4) << r.pocket_id << std::setw(10) << std::setprecision(2) << r.area_cm2 << std::setw(9)
       << std::setprecision(2) << r.spacing_mm << std::setw(7) << r.node_count << std::setw(9) << std::setprecision(3)
       << r.rms_mm << std::setw(14) << to_string(r.verdict) << std::setw(10) << std::setprecision(2) << r.total_time_s
       << std::setw(11) << r.function_evaluations << std::setw(8) << r.ridge_count << '\n';
  }
  return os.str();
}

Json summary_json(const PipelineResult& result, const PipelineConfig& cfg) {
  const RunStatus st = result.status();
  const char* status = st == RunStatus::all_cease ? "all_cease" : st == RunStatus::crease ? "crease" : "inconclusive";
  Json reports = Json::array();
  for (const auto& r : result.reports) reports.push_back(r);
  return {{"status", status},
          {"exit_code", static_cast<int>(st)},
          {"pocket_count", result.reports.size()},
          {"workers", result.workers},
          {"total_time_s", result.total_time_s},
          {"config", cfg},
          {"reports", reports}};
}

void write_outputs(const PipelineResult& result, const PipelineConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  write_json((fs::path(dir) / "summary.json").string(), summary_json(result, cfg));
  {
    std::ofstream os(fs::path(dir) / "summary.txt");
    if (!os) throw Error("cannot write summary.txt in '" + dir + "'");
    os << summary_table(result.reports);
  }
  for (const auto& r : result.reports) {
    if (r.heightfield.values.empty()) continue;
    write_heightmap((fs::path(dir) / ("pocket_" + std::to_string(r.pocket_id) + "_heightfield.hmap")).string(),
                    r.heightfield);
  }
}

Comparison compare(const std::vector<DebulkReport>& reports, const HeightMap& debulked, double threshold_mm) {
  if (!(threshold_mm > 0.0)) throw Error("compare: threshold must be > 0");
  Comparison out;
  const Vec2& o = debulked.origin;
  const Vec2& s = debulked.spacing;
  for (const auto& rep : reports) {
    ComparisonRow row;
    row.pocket_id = rep.pocket_id;
    row.predicted_rms = rep.rms_mm;
    row.predicted = rep.verdict;
    const HeightMap& f = rep.heightfield;
    double sum = 0.0;
    bool outside = f.values.empty();
    for (std::size_t j = 0; j < f.rows() && !outside; ++j) {
      for (std::size_t i = 0; i < f.cols(); ++i) {
        if (!f.valid(i, j)) continue;
        const Vec2 p = f.node(i, j);
        const long c = std::lround((p.x() - o.x()) / s.x()), r = std::lround((p.y() - o.y()) / s.y());
        if (!debulked.values.contains(c, r)) {
          outside = true;
          break;
        }
        const auto uc = static_cast<std::size_t>(c), ur = static_cast<std::size_t>(r);
        if (!debulked.valid(uc, ur)) continue;
        sum += debulked.values(uc, ur) * debulked.values(uc, ur);
        ++row.samples;
      }
    }
    if (outside || row.samples == 0) {
      row.skipped = true;
      out.warnings.push_back("pocket " + std::to_string(rep.pocket_id) +
                             (outside ? ": contour outside the debulked scan, skipped" : ": no debulked samples, skipped"));
      out.rows.push_back(row);
      continue;
    }
    row.measured_rms = std::sqrt(sum / static_cast<double>(row.samples));
    row.measured = row.measured_rms <= threshold_mm ? Verdict::cease : Verdict::crease;
    row.agree = row.predicted == row.measured;
    ++out.compared;
    if (row.agree) ++out.agreements;
    out.rows.push_back(row);
  }
  return out;
}

HeightMap prediction_mosaic(const std::vector<DebulkReport>& reports) {
  const HeightMap* first = nullptr;
  Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
  for (const auto& r : reports) {
    if (r.heightfield.values.empty()) continue;
    if (!first) first = &r.heightfield;
    if ((r.heightfield.spacing - first->spacing).norm() > 1e-12) throw Error("mosaic: heightfields differ in spacing");
    lo = lo.cwiseMin(r.heightfield.origin);
    hi = hi.cwiseMax(r.heightfield.node(r.heightfield.cols() - 1, r.heightfield.rows() - 1));
  }
  if (!first) return {};
  const Vec2 sp = first->spacing;
  const auto cols = static_cast<std::size_t>(std::lround((hi.x() - lo.x()) / sp.x())) + 1;
  const auto rows = static_cast<std::size_t>(std::lround((hi.y() - lo.y()) / sp.y())) + 1;
  HeightMap m(lo, sp, cols, rows);
  for (const auto& r : reports) {
    const HeightMap& f = r.heightfield;
    for (std::size_t j = 0; j < f.rows(); ++j) {
      for (std::size_t i = 0; i < f.cols(); ++i) {
        if (!f.valid(i, j)) continue;
        const Vec2 p = f.node(i, j);
        const auto c = static_cast<std::size_t>(std::lround((p.x() - lo.x()) / sp.x()));
        const auto rr = static_cast<std::size_t>(std::lround((p.y() - lo.y()) / sp.y()));
        m.values(c, rr) = f.values(i, j);
        m.valid(c, rr) = 1;
      }
    }
  }
  return m;
}

std::string comparison_table(const Comparison& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::setw(4) << "id" << std::setw(12) << "pred_rms" << std::setw(12) << "meas_rms" << std::setw(14) << "predicted"
     << std::setw(14) << "measured" << std::setw(8) << "agree" << std::setw(9) << "samples" << '\n';
  for (const auto& r : c.rows) {
    os << std::setw(4) << r.pocket_id << std::setw(12) << r.predicted_rms;
    if (r.skipped) {
      os << std::setw(12) << "-" << std::setw(14) << to_string(r.predicted) << std::setw(14) << "skipped" << std::setw(8)
         << "-" << std::setw(9) << 0 << '\n';
      continue;
    }
    os << std::setw(12) << r.measured_rms << std::setw(14) << to_string(r.predicted) << std::setw(14)
       << to_string(r.measured) << std::setw(8) << (r.agree ? "yes" : "no") << std::setw(9) << r.samples << '\n';
  }
  os << "agreement " << c.agreements << "/" << c.compared << '\n';
  return os.str();
}

}  // namespace debulk
