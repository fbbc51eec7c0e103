#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "debulk/energy.hpp"
#include "debulk/geometry.hpp"
#include "debulk/scan_prep.hpp"

namespace debulk {

enum class MoldKind : std::uint8_t { flat, cylinder, doubly_curved };
enum class BumpProfile : std::uint8_t { cosine, gaussian };

const char* to_string(MoldKind k);
const char* to_string(BumpProfile p);
MoldKind parse_mold_kind(const std::string& s);
BumpProfile parse_bump_profile(const std::string& s);

/// One synthetic air pocket. For the cosine bell the radii bound the support; for the
/// Gaussian they are the standard deviations and the support is cut at 3 sigma.
struct PocketSpec {
  Vec2 center = Vec2::Zero();
  Vec2 radii{30.0, 30.0};  // mm
  double peak = 5.0;       // mm
  BumpProfile profile = BumpProfile::cosine;

  double height(double x, double y) const;
  /// Normalized support radius (1 for cosine, 3 for Gaussian).
  double support() const { return profile == BumpProfile::cosine ? 1.0 : 3.0; }
};

struct SceneSpec {
  MoldKind mold = MoldKind::flat;
  double cylinder_radius = 500.0;                 // mm, axis along y
  Vec2 curvature_radii{2000.0, 3000.0};           // mm, doubly curved mold
  std::vector<PocketSpec> pockets;
  double noise_sigma = 0.0;                       // mm, Gaussian z noise
  double outlier_fraction = 0.0;
  double outlier_magnitude = 10.0;                // mm
  std::size_t cols = 301;
  std::size_t rows = 301;
  double pitch = 1.0;                             // mm
  Vec2 origin{-150.0, -150.0};
  double reference_spacing = 1.0;                 // mm
  Polygon ply_outline;                            // empty: the grid rectangle
  double cut_height = 2.0;                        // mm, for the ground-truth level set

  void check() const;
  double mold_z(double x, double y) const;
  double ply_z(double x, double y) const;         // mold + all bumps, no noise
  Vec2 upper() const;
  Polygon outline() const;
};

struct PocketTruth {
  std::vector<int> members;          // indices into SceneSpec::pockets (several when merged)
  Vec2 center = Vec2::Zero();
  double peak_mm = 0.0;
  double area_cm2 = 0.0;             // level set at cut_height
  bool analytic_area = false;
  std::array<double, 2> excess_mm{0.0, 0.0};  // along x (0 deg) and y (90 deg) through the centre
  std::array<double, 2> mold_length_mm{0.0, 0.0};
  bool analytic_excess = false;
};

struct Scene {
  OrganizedPointCloud ply;
  ReferenceSurface ref;
  std::vector<PocketTruth> truth;    // sorted by descending area
  Polygon ply_outline;
};

/// Fourteen cosine bells on a flat mold whose cut-height areas run from 5.35 to 438 cm^2,
/// shelf-packed from the largest down with `gap` mm between supports, with light
/// scanner noise and a sparse sprinkle of outliers.
SceneSpec layup_suite(double pitch = 1.5, double gap = 15.0);

/// Deterministic for a fixed seed.
Scene generate(const SceneSpec& spec, std::uint64_t seed);

/// Arc length of the cosine bell H (1 + cos(pi x / R)) / 2 over [-R, R].
double cosine_bell_arc_length(double peak, double radius);

/// Level-set radius (normalized) at which a single bump equals `cut`; 0 when peak <= cut.
double level_set_radius(const PocketSpec& p, double cut);

/// Scan of the ply after debulking, built from ground truth: a uniform consolidated layer
/// plus, for each pocket whose excess triggers a ridge, a ridge across the fiber direction
/// with the larger excess.
Scene generate_debulked(const SceneSpec& spec, const MaterialParams& mat, std::uint64_t seed);

}  // namespace debulk
