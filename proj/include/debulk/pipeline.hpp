#pragma once

#include <string>
#include <vector>

#include "debulk/io.hpp"
#include "debulk/meshing.hpp"
#include "debulk/optimizer.hpp"
#include "debulk/postprocess.hpp"
#include "debulk/scan_prep.hpp"
#include "debulk/segmentation.hpp"

namespace debulk {

struct PrepSettings {
  bool denoise = true;
  int denoise_k = 4;
  int median_window = 5;          // 0 disables the median filter
  double heightmap_spacing = 1.0; // mm

  void check() const;
};

struct PipelineConfig {
  PrepSettings prep;
  SegmentationSettings segmentation;
  PatchMargin margin;
  MeshConfig mesh;
  MaterialParams material;
  SolverConfig solver;
  double threshold_mm = 0.3;
  Polygon ply_outline;      // empty: heightmap extent
  int workers = 0;          // 0: DEBULK_WORKERS, else the hardware thread count
  std::string output_dir;   // empty: nothing written by the CLI

  /// Copies the tied fields from their sources: the margin node target from the mesh target,
  /// the mesh thickness from the material and the segmentation contact height from the
  /// mold contact tolerance.
  void derive();
  /// Throws when a field or a cross-field rule is violated (threshold >= t / beta, tied
  /// fields consistent).
  void check() const;
  int resolved_workers() const;
};

void to_json(Json& j, const PipelineConfig& c);
/// Overlays the keys present onto `c`.
void from_json(const Json& j, PipelineConfig& c);
void to_json(Json& j, const PrepSettings& p);
void from_json(const Json& j, PrepSettings& p);

/// Process exit status of a predict run.
enum class RunStatus : int { all_cease = 0, error = 1, crease = 2, inconclusive = 3 };

struct PipelineResult {
  HeightMap heightmap;
  std::vector<AirPocketPatch> patches;
  std::vector<DebulkReport> reports;   // same order as patches
  std::vector<PlyNet> nets;            // empty net when meshing failed
  std::vector<SolveResult> solves;
  int workers = 1;
  double total_time_s = 0.0;

  /// inconclusive if any pocket is, else crease if any pocket is, else all_cease.
  RunStatus status() const;
};

HeightMap prepare_heightmap(const OrganizedPointCloud& ply, const ReferenceSurface& ref, const PrepSettings& prep);

/// Mesh, solve, post-process and classify one patch. Stage errors give an inconclusive
/// report naming the stage; they are never thrown.
DebulkReport process_patch(const AirPocketPatch& patch, const PipelineConfig& cfg, PlyNet* net_out = nullptr,
                           SolveResult* solve_out = nullptr);

PipelineResult run(const OrganizedPointCloud& ply, const ReferenceSurface& ref, PipelineConfig cfg);
PipelineResult run_on_heightmap(const HeightMap& hm, const ReferenceSurface& ref, PipelineConfig cfg);

/// Human-readable table: id, spacing, RMS, verdict, time, function evaluations.
std::string summary_table(const std::vector<DebulkReport>& reports);
Json summary_json(const PipelineResult& result, const PipelineConfig& cfg);

/// Writes summary.json, summary.txt and one heightfield grid file per pocket.
void write_outputs(const PipelineResult& result, const PipelineConfig& cfg, const std::string& dir);

struct ComparisonRow {
  int pocket_id = 0;
  double predicted_rms = 0.0;
  double measured_rms = 0.0;
  Verdict predicted = Verdict::inconclusive;
  Verdict measured = Verdict::inconclusive;
  std::size_t samples = 0;
  bool skipped = false;
  bool agree = false;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  int compared = 0;
  int agreements = 0;
  std::vector<std::string> warnings;
};

/// Measured RMS of `debulked` (ply minus reference after debulking) at the cells of each
/// report's heightfield, i.e. inside the original pocket contour. Pockets reaching outside
/// the debulked scan are skipped with a warning.
Comparison compare(const std::vector<DebulkReport>& reports, const HeightMap& debulked, double threshold_mm);

/// The reports' heightfields pasted onto one grid (they must share the spacing).
HeightMap prediction_mosaic(const std::vector<DebulkReport>& reports);

std::string comparison_table(const Comparison& c);

}  // namespace debulk
