#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "debulk/geometry.hpp"
#include "debulk/grid.hpp"
#include "debulk/scan_prep.hpp"

namespace debulk {

/// Segmentation thresholds. Defaults: CutHeight 2.0 mm, AreaTol 2.0 cm^2, PeakTol 1.25 mm.
struct SegmentationSettings {
  double cut_height = 2.0;     // mm
  double area_tol = 2.0;       // cm^2
  double peak_tol = 1.25;      // mm
  double contact_height = 1.0; // mm; ply at or below this counts as lying on the mold

  void check() const;
};

/// Integer grid coordinate (column, row) of a heightmap node.
struct Cell {
  long col = 0;
  long row = 0;
  bool operator==(const Cell&) const = default;
};

/// Ordered outer boundary of one 8-connected foreground component.
struct PixelBoundary {
  std::vector<Cell> cells;       // counter-clockwise in XY, first cell not repeated
  std::vector<Cell> component;   // every foreground cell of the component
};

/// Rule for the reference margin kept around each pocket.
struct PatchMargin {
  double fixed_mm = 0.0;      // used when > 0
  double node_factor = 3.0;   // otherwise margin = node_factor * sqrt(area / target_nodes)
  int target_nodes = 100;

  double resolve(double area_mm2) const;
};

struct AirPocketPatch {
  int id = 0;                   // 1 = largest
  Polygon boundary;             // pixel-centre polygon in mm, counter-clockwise
  std::vector<Cell> cells;      // pocket cells in the source heightmap grid
  HeightMap ply_surface;        // absolute ply elevation over the pocket bbox + margin
  Mask pocket_mask;             // same grid as ply_surface; 1 inside the pocket
  ReferenceSurface ref_surface; // same grid as ply_surface
  ReferenceSurface surface;     // max(ply, reference) where scanned, reference elsewhere; same grid
  Mask footprint_mask;          // pocket plus its surrounding lift-off above contact_height
  std::vector<Vec2> footprint_edge;  // footprint cells with a 4-neighbour outside it
  double area_cm2 = 0.0;
  double peak_mm = 0.0;
  double margin_mm = 0.0;
  Polygon ply_outline;          // ply outline used for the near-boundary test
  bool near_ply_boundary = false;
  bool margin_clipped = false;
  bool low_confidence = false;
  std::size_t invalid_cells = 0; // unscanned cells inside or beside the pocket

  /// Patch surface used by meshing.
  double surface_z(double x, double y) const { return surface.eval(x, y); }
  Vec3 surface_point(double x, double y) const { return {x, y, surface_z(x, y)}; }
  bool inside_pocket(double x, double y) const;
  bool inside_footprint(double x, double y) const;
  /// 0 inside the footprint, else the distance to its nearest edge cell.
  double outside_distance(const Vec2& p) const;
  bool in_domain(double x, double y) const { return surface.contains(x, y); }

  /// Rebuilds `surface` from ply_surface and ref_surface.
  void rebuild_surface();
};

Mask threshold_cut(const HeightMap& hm, double cut_height);

/// Sets every background region not 4-connected to the grid border to foreground.
Mask fill_holes(const Mask& mask);

/// Moore-neighbour tracing with Jacob's stopping criterion; one boundary per
/// 8-connected component, ordered by first raster appearance.
std::vector<PixelBoundary> trace_boundaries(const Mask& mask);

/// Size/peak filtering and patch assembly. `ply_outline` empty means the heightmap
/// extent rectangle stands in for the ply outline.
std::vector<AirPocketPatch> extract_patches(const HeightMap& hm, const ReferenceSurface& ref,
                                            const std::vector<PixelBoundary>& boundaries,
                                            const SegmentationSettings& settings,
                                            const PatchMargin& margin,
                                            const Polygon& ply_outline = {},
                                            double ply_boundary_tol = 20.0);

/// Full segmentation chain: cut, fill, trace, extract.
std::vector<AirPocketPatch> segment(const HeightMap& hm, const ReferenceSurface& ref,
                                    const SegmentationSettings& settings,
                                    const PatchMargin& margin, const Polygon& ply_outline = {},
                                    double ply_boundary_tol = 20.0);

}  // namespace debulk
