#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "debulk/geometry.hpp"
#include "debulk/grid.hpp"

namespace debulk {

/// Rigid transform from the sensor frame into the mold frame, stored as a 3x4 [R | t].
struct RigidTransform {
  std::array<double, 12> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  Vec3 apply(const Vec3& p) const {
    return {m[0] * p.x() + m[1] * p.y() + m[2] * p.z() + m[3],
            m[4] * p.x() + m[5] * p.y() + m[6] * p.z() + m[7],
            m[8] * p.x() + m[9] * p.y() + m[10] * p.z() + m[11]};
  }
  bool is_identity() const { return *this == RigidTransform{}; }
  bool operator==(const RigidTransform&) const = default;
};

/// One 3D point per camera pixel, row-major. Coordinates in mm, mold frame.
struct OrganizedPointCloud {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;

  OrganizedPointCloud() = default;
  OrganizedPointCloud(std::size_t w, std::size_t h)
      : width(w), height(h), points(w * h, Vec3::Zero()), valid(w * h, 0) {}

  std::size_t index(std::size_t col, std::size_t row) const { return row * width + col; }
  std::size_t valid_count() const;

  /// Throws if the size or finiteness invariants are broken.
  void check() const;
  void transform(const RigidTransform& t);
};

/// Regular XY grid of ply-minus-reference heights (mm). Node (i, j) sits at
/// (origin.x + i*dx, origin.y + j*dy).
struct HeightMap {
  Vec2 origin = Vec2::Zero();
  Vec2 spacing{1.0, 1.0};
  Grid<double> values;
  Mask valid;

  HeightMap() = default;
  HeightMap(const Vec2& o, const Vec2& s, std::size_t cols, std::size_t rows)
      : origin(o), spacing(s), values(cols, rows, 0.0), valid(cols, rows, 0) {}

  std::size_t cols() const { return values.cols(); }
  std::size_t rows() const { return values.rows(); }
  Vec2 node(std::size_t i, std::size_t j) const {
    return {origin.x() + static_cast<double>(i) * spacing.x(),
            origin.y() + static_cast<double>(j) * spacing.y()};
  }
  void check() const;
  bool operator==(const HeightMap&) const = default;
};

/// Bilinear interpolant z = F_ref(x, y) over a fully populated grid.
/// Outside the grid bounding box the coordinates are clamped to the box.
class ReferenceSurface {
 public:
  struct Sample {
    double z;
    double dzdx;
    double dzdy;
  };

  ReferenceSurface() = default;
  /// Every cell of `elevations` must be finite.
  ReferenceSurface(const Vec2& origin, const Vec2& spacing, Grid<double> elevations);

  static ReferenceSurface flat(const Vec2& lo, const Vec2& hi, double spacing, double z = 0.0);

  double eval(double x, double y) const { return sample(x, y).z; }
  Sample sample(double x, double y) const;

  bool contains(double x, double y) const;
  Vec2 lower() const { return origin_; }
  Vec2 upper() const;
  const Vec2& origin() const { return origin_; }
  const Vec2& spacing() const { return spacing_; }
  const Grid<double>& elevations() const { return z_; }
  std::size_t cols() const { return z_.cols(); }
  std::size_t rows() const { return z_.rows(); }

  /// Same grid carried as a HeightMap with every cell valid (for file IO).
  HeightMap as_heightmap() const;
  static ReferenceSurface from_heightmap(const HeightMap& hm);

  /// Sub-grid covering [lo, hi] (snapped outward to grid nodes, clipped to the domain).
  ReferenceSurface crop(const Vec2& lo, const Vec2& hi) const;

 private:
  Vec2 origin_ = Vec2::Zero();
  Vec2 spacing_{1.0, 1.0};
  Grid<double> z_;
};

/// Statistical outlier removal: invalidates points whose mean distance to their k
/// nearest valid neighbours exceeds mean + 1 std of that statistic over the cloud.
OrganizedPointCloud denoise(const OrganizedPointCloud& cloud, int k = 4);

/// Per-point mean distance to the k nearest valid neighbours (NaN for invalid points).
std::vector<double> mean_neighbor_distances(const OrganizedPointCloud& cloud, int k);

/// z-only median over an odd window of valid pixels; x and y are left untouched.
OrganizedPointCloud median_filter(const OrganizedPointCloud& cloud, int window = 5);

struct RasterResult {
  Grid<double> z;
  Mask valid;
};

/// Linear interpolation of the organized surface (two triangles per pixel quad with
/// all corners valid) at the nodes of a regular grid.
RasterResult rasterize_cloud(const OrganizedPointCloud& cloud, const Vec2& origin,
                             const Vec2& spacing, std::size_t cols, std::size_t rows);

/// Heightmap of (ply z - F_ref) on a grid covering the overlap of the cloud footprint
/// and the reference domain, snapped to multiples of `spacing`.
HeightMap build_heightmap(const OrganizedPointCloud& cloud, const ReferenceSurface& ref,
                          double spacing = 1.0);

/// Reference surface from a scan of the mold (or the previous ply). Cells without
/// support are filled by repeated averaging of valid 4-neighbours.
ReferenceSurface reference_from_cloud(const OrganizedPointCloud& cloud, double spacing = 1.0);

}  // namespace debulk
