#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "debulk/energy.hpp"
#include "debulk/meshing.hpp"
#include "debulk/scan_prep.hpp"
#include "debulk/segmentation.hpp"

namespace debulk {

/// Geometric ridge: a 2t wide fold with a semicircular cap of radius t, sitting on a
/// ply consolidated to t / beta. Lengths in mm.
struct RidgeModelParams {
  double t = 0.3;
  double consolidated = 0.25;

  static RidgeModelParams from(const MaterialParams& mat) {
    return {mat.t * 1e3, mat.consolidated_thickness() * 1e3};
  }
  double width() const { return 2.0 * t; }
  double cap_radius() const { return t; }
  /// Excess length at which the ridge reaches one ply thickness: (pi - 2) t.
  double trigger_excess() const;
};

/// Ridge height from the ply and mold lengths of a cross-section (mm).
double ridge_height(double L_ply, double L_mold, double t);

/// Length taken by a ridge of height h on a section: 2 (h - t) + pi t.
double ridge_perimeter(double h, double t);

struct RidgeSection {
  int apex = -1;
  int fiber = 0;              // 0 or 1
  std::vector<int> nodes;     // anchors included, ordered along the fiber
  double L_ply = 0.0;         // mm
  double L_mold = 0.0;        // mm
  double excess = 0.0;        // mm
  double height = 0.0;        // mm, 0 for conforming sections
  bool ridge = false;
};

struct RidgeResult {
  std::vector<double> raw_height;     // mm above the mold at X_final
  std::vector<double> height;         // mm, post-processed
  std::vector<std::uint8_t> adjusted;
  std::vector<RidgeSection> sections; // every evaluated section, ridges and conforming
  double contact_tol = 0.0;           // mm
  double t = 0.3;                     // mm
  double consolidated = 0.25;         // mm

  int ridge_count() const;
};

/// Geometric ridge post-processing of a solved net. `X` in m, `ref` in mm. A non-null
/// `prior` carries adjusted flags and heights from an earlier pass. `contact_tol` <= 0
/// uses the consolidated thickness.
RidgeResult apply_ridges(const PlyNet& net, const Eigen::VectorXd& X, const ReferenceSurface& ref,
                         const MaterialParams& mat, const RidgeResult* prior = nullptr,
                         double contact_tol = 0.0);

/// Linear interpolation of node heights over the lattice triangles, sampled at the
/// pocket cells of `patch`. Pocket cells not covered by the lattice take the height of
/// the nearest node; their count is returned in `uncovered`.
HeightMap rasterize_heights(const PlyNet& net, const Eigen::VectorXd& X, const std::vector<double>& height,
                            const AirPocketPatch& patch, std::size_t* uncovered = nullptr);

enum class Verdict : std::uint8_t { cease, crease, inconclusive };
const char* to_string(Verdict v);
Verdict parse_verdict(const std::string& s);

struct DebulkReport {
  int pocket_id = 0;
  double rms_mm = 0.0;
  Verdict verdict = Verdict::inconclusive;
  double threshold_mm = 0.3;
  double predicted_max_mm = 0.0;
  double raw_max_mm = 0.0;
  HeightMap heightfield;              // post-processed, valid inside the pocket contour
  std::size_t sample_count = 0;
  // diagnostics
  double area_cm2 = 0.0;
  double peak_mm = 0.0;
  double spacing_mm = 0.0;
  int node_count = 0;
  int ridge_count = 0;
  bool converged = false;
  int iterations = 0;
  int function_evaluations = 0;
  double solve_time_s = 0.0;
  double total_time_s = 0.0;
  double max_equality_residual = 0.0;
  double max_penetration = 0.0;
  std::vector<std::string> diagnostics;
};

/// RMS over the valid cells of `field`; cease iff rms <= threshold and the solve converged,
/// crease when converged and above, inconclusive otherwise.
DebulkReport classify(const HeightMap& field, double threshold, bool converged);

double field_rms(const HeightMap& field, std::size_t* count = nullptr);

}  // namespace debulk
