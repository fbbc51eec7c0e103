#include "debulk/scan_prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kdtree.hpp"

namespace debulk {

std::size_t OrganizedPointCloud::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

void OrganizedPointCloud::check() const {
  if (points.size() != width * height || valid.size() != width * height) {
    throw Error("organized point cloud: point count does not match width x height");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (valid[i] && !points[i].allFinite()) {
      throw Error("organized point cloud: valid point with non-finite coordinates");
    }
  }
}

void OrganizedPointCloud::transform(const RigidTransform& t) {
  if (t.is_identity()) return;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (valid[i]) points[i] = t.apply(points[i]);
  }
}

void HeightMap::check() const {
  if (!(spacing.x() > 0.0) || !(spacing.y() > 0.0)) throw Error("heightmap: spacing must be > 0");
  if (valid.cols() != values.cols() || valid.rows() != values.rows()) {
    throw Error("heightmap: mask dims differ from value dims");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid.data()[i] && !std::isfinite(values.data()[i])) {
      throw Error("heightmap: valid cell with non-finite value");
    }
  }
}

// ---------------------------------------------------------------------------
// ReferenceSurface

ReferenceSurface::ReferenceSurface(const Vec2& origin, const Vec2& spacing, Grid<double> elevations)
    : origin_(origin), spacing_(spacing), z_(std::move(elevations)) {
  if (!(spacing.x() > 0.0) || !(spacing.y() > 0.0)) throw Error("reference surface: bad spacing");
  if (z_.cols() < 2 || z_.rows() < 2) throw Error("reference surface: need at least 2x2 nodes");
  for (double v : z_.data()) {
    if (!std::isfinite(v)) throw Error("reference surface: non-finite elevation");
  }
}

ReferenceSurface ReferenceSurface::flat(const Vec2& lo, const Vec2& hi, double spacing, double z) {
  const auto cols = static_cast<std::size_t>(std::ceil((hi.x() - lo.x()) / spacing)) + 1;
  const auto rows = static_cast<std::size_t>(std::ceil((hi.y() - lo.y()) / spacing)) + 1;
  return ReferenceSurface(lo, {spacing, spacing}, Grid<double>(std::max<std::size_t>(cols, 2),
                                                               std::max<std::size_t>(rows, 2), z));
}

Vec2 ReferenceSurface::upper() const {
  return {origin_.x() + spacing_.x() * static_cast<double>(z_.cols() - 1),
          origin_.y() + spacing_.y() * static_cast<double>(z_.rows() - 1)};
}

bool ReferenceSurface::contains(double x, double y) const {
  const Vec2 hi = upper();
  return x >= origin_.x() && x <= hi.x() && y >= origin_.y() && y <= hi.y();
}

ReferenceSurface::Sample ReferenceSurface::sample(double x, double y) const {
  const double u = (x - origin_.x()) / spacing_.x();
  const double v = (y - origin_.y()) / spacing_.y();
  const double umax = static_cast<double>(z_.cols() - 1);
  const double vmax = static_cast<double>(z_.rows() - 1);
  const bool clamped_u = u < 0.0 || u > umax;
  const bool clamped_v = v < 0.0 || v > vmax;
  const double uc = std::clamp(u, 0.0, umax);
  const double vc = std::clamp(v, 0.0, vmax);
  const auto i = static_cast<std::size_t>(std::min(std::floor(uc), umax - 1.0));
  const auto j = static_cast<std::size_t>(std::min(std::floor(vc), vmax - 1.0));
  const double fu = uc - static_cast<double>(i);
  const double fv = vc - static_cast<double>(j);
  const double z00 = z_(i, j), z10 = z_(i + 1, j), z01 = z_(i, j + 1), z11 = z_(i + 1, j + 1);
  Sample s{};
  s.z = (1 - fu) * (1 - fv) * z00 + fu * (1 - fv) * z10 + (1 - fu) * fv * z01 + fu * fv * z11;
  s.dzdx = clamped_u ? 0.0 : ((1 - fv) * (z10 - z00) + fv * (z11 - z01)) / spacing_.x();
  s.dzdy = clamped_v ? 0.0 : ((1 - fu) * (z01 - z00) + fu * (z11 - z10)) / spacing_.y();
  return s;
}

HeightMap ReferenceSurface::as_heightmap() const {
  HeightMap hm(origin_, spacing_, z_.cols(), z_.rows());
  hm.values = z_;
  std::fill(hm.valid.data().begin(), hm.valid.data().end(), std::uint8_t{1});
  return hm;
}

ReferenceSurface ReferenceSurface::from_heightmap(const HeightMap& hm) {
  for (auto v : hm.valid.data()) {
    if (!v) throw Error("reference surface: heightmap has invalid cells");
  }
  return ReferenceSurface(hm.origin, hm.spacing, hm.values);
}

ReferenceSurface ReferenceSurface::crop(const Vec2& lo, const Vec2& hi) const {
  const auto clampi = [](double v, long n) { return std::clamp(static_cast<long>(v), 0L, n - 1); };
  const long nc = static_cast<long>(z_.cols());
  const long nr = static_cast<long>(z_.rows());
  const long i0 = clampi(std::floor((lo.x() - origin_.x()) / spacing_.x()), nc);
  const long j0 = clampi(std::floor((lo.y() - origin_.y()) / spacing_.y()), nr);
  long i1 = clampi(std::ceil((hi.x() - origin_.x()) / spacing_.x()), nc);
  long j1 = clampi(std::ceil((hi.y() - origin_.y()) / spacing_.y()), nr);
  if (i1 <= i0) i1 = std::min(i0 + 1, nc - 1);
  if (j1 <= j0) j1 = std::min(j0 + 1, nr - 1);
  const long lo_i = std::min(i0, i1 - 1), lo_j = std::min(j0, j1 - 1);
  Grid<double> sub(static_cast<std::size_t>(i1 - lo_i + 1), static_cast<std::size_t>(j1 - lo_j + 1));
  for (long j = lo_j; j <= j1; ++j) {
    for (long i = lo_i; i <= i1; ++i) {
      sub(static_cast<std::size_t>(i - lo_i), static_cast<std::size_t>(j - lo_j)) =
          z_(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  const Vec2 o{origin_.x() + spacing_.x() * static_cast<double>(lo_i),
               origin_.y() + spacing_.y() * static_cast<double>(lo_j)};
  return ReferenceSurface(o, spacing_, std::move(sub));
}

// ---------------------------------------------------------------------------
// Denoise

std::vector<double> mean_neighbor_distances(const OrganizedPointCloud& cloud, int k) {
  if (k < 1) throw Error("denoise: k must be >= 1");
  cloud.check();
  std::vector<Vec3> pts;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (cloud.valid[i]) {
      pts.push_back(cloud.points[i]);
      ids.push_back(i);
    }
  }
  if (pts.size() < static_cast<std::size_t>(k) + 1) {
    throw Error("denoise: fewer than k+1 valid points");
  }
  const detail::KdTree tree(pts);
  std::vector<double> out(cloud.points.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::uint32_t p = 0; p < pts.size(); ++p) {
    const auto d2 = tree.knn_sq(p, k);
    double sum = 0.0;
    for (double v : d2) sum += std::sqrt(v);
    out[ids[p]] = sum / static_cast<double>(k);
  }
  return out;
}

OrganizedPointCloud denoise(const OrganizedPointCloud& cloud, int k) {
  const auto md = mean_neighbor_distances(cloud, k);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < md.size(); ++i) {
    if (cloud.valid[i]) {
      sum += md[i];
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < md.size(); ++i) {
    if (cloud.valid[i]) var += (md[i] - mean) * (md[i] - mean);
  }
  // Population standard deviation.
  const double threshold = mean + std::sqrt(var / static_cast<double>(n));
  OrganizedPointCloud out = cloud;
  for (std::size_t i = 0; i < md.size(); ++i) {
    if (cloud.valid[i] && md[i] > threshold) out.valid[i] = 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Median filter

OrganizedPointCloud median_filter(const OrganizedPointCloud& cloud, int window) {
  if (window < 1 || window % 2 == 0) throw Error("median_filter: window must be odd and >= 1");
  cloud.check();
  OrganizedPointCloud out = cloud;
  if (window == 1) return out;
  const long half = window / 2;
  const long w = static_cast<long>(cloud.width);
  const long h = static_cast<long>(cloud.height);
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(window * window));
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      const std::size_t idx = cloud.index(static_cast<std::size_t>(c), static_cast<std::size_t>(r));
      if (!cloud.valid[idx]) continue;
      buf.clear();
      for (long rr = std::max(0L, r - half); rr <= std::min(h - 1, r + half); ++rr) {
        for (long cc = std::max(0L, c - half); cc <= std::min(w - 1, c + half); ++cc) {
          const std::size_t j = cloud.index(static_cast<std::size_t>(cc), static_cast<std::size_t>(rr));
          if (cloud.valid[j]) buf.push_back(cloud.points[j].z());
        }
      }
      const std::size_t m = buf.size() / 2;
      std::nth_element(buf.begin(), buf.begin() + static_cast<long>(m), buf.end());
      double med = buf[m];
      if (buf.size() % 2 == 0) {
        const double lower = *std::max_element(buf.begin(), buf.begin() + static_cast<long>(m));
        med = 0.5 * (med + lower);
      }
      out.points[idx].z() = med;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rasterization and heightmaps

RasterResult rasterize_cloud(const OrganizedPointCloud& cloud, const Vec2& origin,
                             const Vec2& spacing, std::size_t cols, std::size_t rows) {
  RasterResult res{Grid<double>(cols, rows, 0.0), Mask(cols, rows, 0)};
  const auto raster_tri = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-14) return;
    const double xmin = std::min({a.x(), b.x(), c.x()}), xmax = std::max({a.x(), b.x(), c.x()});
    const double ymin = std::min({a.y(), b.y(), c.y()}), ymax = std::max({a.y(), b.y(), c.y()});
    const long i0 = std::max(0L, static_cast<long>(std::ceil((xmin - origin.x()) / spacing.x())));
    const long i1 = std::min(static_cast<long>(cols) - 1,
                             static_cast<long>(std::floor((xmax - origin.x()) / spacing.x())));
    const long j0 = std::max(0L, static_cast<long>(std::ceil((ymin - origin.y()) / spacing.y())));
    const long j1 = std::min(static_cast<long>(rows) - 1,
                             static_cast<long>(std::floor((ymax - origin.y()) / spacing.y())));
    constexpr double eps = -1e-9;
    for (long j = j0; j <= j1; ++j) {
      const double y = origin.y() + spacing.y() * static_cast<double>(j);
      for (long i = i0; i <= i1; ++i) {
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        if (res.valid(ui, uj)) continue;
        const double x = origin.x() + spacing.x() * static_cast<double>(i);
        const double l1 = ((x - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (y - a.y())) / det;
        const double l2 = ((b.x() - a.x()) * (y - a.y()) - (x - a.x()) * (b.y() - a.y())) / det;
        const double l0 = 1.0 - l1 - l2;
        if (l0 < eps || l1 < eps || l2 < eps) continue;
        res.z(ui, uj) = l0 * a.z() + l1 * b.z() + l2 * c.z();
        res.valid(ui, uj) = 1;
      }
    }
  };
  for (std::size_t r = 0; r + 1 < cloud.height; ++r) {
    for (std::size_t c = 0; c + 1 < cloud.width; ++c) {
      const std::size_t i00 = cloud.index(c, r), i10 = cloud.index(c + 1, r);
      const std::size_t i01 = cloud.index(c, r + 1), i11 = cloud.index(c + 1, r + 1);
      if (cloud.valid[i00] && cloud.valid[i10] && cloud.valid[i11]) {
        raster_tri(cloud.points[i00], cloud.points[i10], cloud.points[i11]);
      }
      if (cloud.valid[i00] && cloud.valid[i11] && cloud.valid[i01]) {
        raster_tri(cloud.points[i00], cloud.points[i11], cloud.points[i01]);
      }
    }
  }
  return res;
}

namespace {

struct Box {
  Vec2 lo, hi;
};

Box cloud_footprint(const OrganizedPointCloud& cloud) {
  Box b{Vec2::Constant(std::numeric_limits<double>::infinity()),
        Vec2::Constant(-std::numeric_limits<double>::infinity())};
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i]) continue;
    b.lo = b.lo.cwiseMin(cloud.points[i].head<2>());
    b.hi = b.hi.cwiseMax(cloud.points[i].head<2>());
  }
  return b;
}

}  // namespace

HeightMap build_heightmap(const OrganizedPointCloud& cloud, const ReferenceSurface& ref,
                          double spacing) {
  if (!(spacing > 0.0)) throw Error("build_heightmap: spacing must be > 0");
  cloud.check();
  const Box fp = cloud_footprint(cloud);
  const Vec2 lo = fp.lo.cwiseMax(ref.lower());
  const Vec2 hi = fp.hi.cwiseMin(ref.upper());
  if (!(lo.x() <= hi.x()) || !(lo.y() <= hi.y())) {
    throw Error("build_heightmap: cloud footprint does not overlap the reference domain");
  }
  const Vec2 origin{std::ceil(lo.x() / spacing - 1e-9) * spacing,
                    std::ceil(lo.y() / spacing - 1e-9) * spacing};
  const auto cols = static_cast<std::size_t>(std::floor((hi.x() - origin.x()) / spacing + 1e-9)) + 1;
  const auto rows = static_cast<std::size_t>(std::floor((hi.y() - origin.y()) / spacing + 1e-9)) + 1;
  if (origin.x() > hi.x() || origin.y() > hi.y()) {
    throw Error("build_heightmap: overlap is smaller than one grid cell");
  }
  auto raster = rasterize_cloud(cloud, origin, {spacing, spacing}, cols, rows);
  HeightMap hm(origin, {spacing, spacing}, cols, rows);
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i < cols; ++i) {
      if (!raster.valid(i, j)) continue;
      const Vec2 p = hm.node(i, j);
      hm.values(i, j) = raster.z(i, j) - ref.eval(p.x(), p.y());
      hm.valid(i, j) = 1;
    }
  }
  return hm;
}

ReferenceSurface reference_from_cloud(const OrganizedPointCloud& cloud, double spacing) {
  if (!(spacing > 0.0)) throw Error("reference_from_cloud: spacing must be > 0");
  cloud.check();
  const Box fp = cloud_footprint(cloud);
  if (!(fp.lo.x() <= fp.hi.x())) throw Error("reference_from_cloud: no valid points");
  const Vec2 origin{std::floor(fp.lo.x() / spacing) * spacing, std::floor(fp.lo.y() / spacing) * spacing};
  const auto cols = static_cast<std::size_t>(std::ceil((fp.hi.x() - origin.x()) / spacing)) + 1;
  const auto rows = static_cast<std::size_t>(std::ceil((fp.hi.y() - origin.y()) / spacing)) + 1;
  auto raster = rasterize_cloud(cloud, origin, {spacing, spacing}, std::max<std::size_t>(cols, 2),
                                std::max<std::size_t>(rows, 2));
  std::size_t missing = 0;
  for (auto v : raster.valid.data()) missing += v ? 0 : 1;
  if (missing == raster.valid.size()) throw Error("reference_from_cloud: cloud covers no grid node");
  // Hole filling by layered neighbour averaging, outermost known ring first.
  while (missing > 0) {
    Mask next = raster.valid;
    Grid<double> z = raster.z;
    for (std::size_t j = 0; j < raster.z.rows(); ++j) {
      for (std::size_t i = 0; i < raster.z.cols(); ++i) {
        if (raster.valid(i, j)) continue;
        double sum = 0.0;
        int n = 0;
        const long nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nb) {
          const long ii = static_cast<long>(i) + d[0], jj = static_cast<long>(j) + d[1];
          if (raster.valid.contains(ii, jj) &&
              raster.valid(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj))) {
            sum += raster.z(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
            ++n;
          }
        }
        if (n > 0) {
          z(i, j) = sum / n;
          next(i, j) = 1;
          --missing;
        }
      }
    }
    raster.z = std::move(z);
    raster.valid = std::move(next);
  }
  return ReferenceSurface(origin, {spacing, spacing}, std::move(raster.z));
}

}  // namespace debulk
