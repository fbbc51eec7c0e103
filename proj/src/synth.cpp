#include "debulk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "debulk/postprocess.hpp"

namespace debulk {

const char* to_string(MoldKind k) {
  switch (k) {
    case MoldKind::flat: return "flat";
    case MoldKind::cylinder: return "cylinder";
    case MoldKind::doubly_curved: return "doubly_curved";
  }
  return "?";
}

const char* to_string(BumpProfile p) { return p == BumpProfile::cosine ? "cosine" : "gaussian"; }

MoldKind parse_mold_kind(const std::string& s) {
  if (s == "flat") return MoldKind::flat;
  if (s == "cylinder") return MoldKind::cylinder;
  if (s == "doubly_curved") return MoldKind::doubly_curved;
  throw Error("unknown mold kind '" + s + "'");
}

BumpProfile parse_bump_profile(const std::string& s) {
  if (s == "cosine") return BumpProfile::cosine;
  if (s == "gaussian") return BumpProfile::gaussian;
  throw Error("unknown bump profile '" + s + "'");
}

double PocketSpec::height(double x, double y) const {
  const double u = (x - center.x()) / radii.x(), v = (y - center.y()) / radii.y();
  const double r2 = u * u + v * v;
  if (profile == BumpProfile::cosine) {
    if (r2 >= 1.0) return 0.0;
    return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * std::sqrt(r2)));
  }
  if (r2 >= 9.0) return 0.0;
  return peak * std::exp(-0.5 * r2);
}

void SceneSpec::check() const {
  if (cols < 2 || rows < 2) throw Error("scene: grid needs at least 2x2 points");
  if (!(pitch > 0.0) || !(reference_spacing > 0.0)) throw Error("scene: pitch and reference spacing must be > 0");
  if (!(noise_sigma >= 0.0)) throw Error("scene: noise sigma must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) throw Error("scene: outlier fraction must be in [0, 1]");
  if (!(cut_height > 0.0)) throw Error("scene: cut height must be > 0");
  if (mold == MoldKind::cylinder) {
    const double reach = std::max(std::abs(origin.x()), std::abs(upper().x()));
    if (!(cylinder_radius > reach)) throw Error("scene: cylinder radius must exceed the scene half-width");
  }
  if (mold == MoldKind::doubly_curved && !(curvature_radii.minCoeff() > 0.0)) {
    throw Error("scene: curvature radii must be > 0");
  }
  const Polygon poly = outline();
  for (const auto& p : pockets) {
    if (!(p.peak >= 0.0)) throw Error("scene: pocket peak must be >= 0");
    if (!(p.radii.minCoeff() > 0.0)) throw Error("scene: pocket radii must be > 0");
    if (!point_in_polygon(poly, p.center)) throw Error("scene: pocket centre outside the ply outline");
  }
}

Vec2 SceneSpec::upper() const {
  return origin + pitch * Vec2(static_cast<double>(cols - 1), static_cast<double>(rows - 1));
}

Polygon SceneSpec::outline() const {
  if (!ply_outline.empty()) return ply_outline;
  const Vec2 hi = upper();
  return {origin, {hi.x(), origin.y()}, hi, {origin.x(), hi.y()}};
}

double SceneSpec::mold_z(double x, double y) const {
  switch (mold) {
    case MoldKind::flat: return 0.0;
    case MoldKind::cylinder: return std::sqrt(cylinder_radius * cylinder_radius - x * x) - cylinder_radius;
    case MoldKind::doubly_curved:
      return -(x * x / (2.0 * curvature_radii.x()) + y * y / (2.0 * curvature_radii.y()));
  }
  return 0.0;
}

double SceneSpec::ply_z(double x, double y) const {
  double z = mold_z(x, y);
  for (const auto& p : pockets) z += p.height(x, y);
  return z;
}

double cosine_bell_arc_length(double peak, double radius) {
  const double a = peak * std::numbers::pi / (2.0 * radius);
  const double s = std::sqrt(1.0 + a * a);
  return 4.0 * radius / std::numbers::pi * s * std::comp_ellint_2(a / s);
}

double level_set_radius(const PocketSpec& p, double cut) {
  if (!(p.peak > cut)) return 0.0;
  if (p.profile == BumpProfile::cosine) return std::acos(2.0 * cut / p.peak - 1.0) / std::numbers::pi;
  return std::min(3.0, std::sqrt(2.0 * std::log(p.peak / cut)));
}

SceneSpec layup_suite(double pitch, double gap) {
  if (!(pitch > 0.0) || !(gap >= 0.0)) throw Error("layup suite: pitch must be > 0 and gap >= 0");
  constexpr int n = 14;
  const double a_min = 5.35, a_max = 438.0, cut = 2.0;
  std::vector<PocketSpec> bells;
  for (int k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / (n - 1);
    const double area_mm2 = 100.0 * a_max * std::pow(a_min / a_max, u);
    const double r = std::sqrt(area_mm2 / std::numbers::pi);
    PocketSpec p;
    // alternating tall and flat bells of every size
    p.peak = k % 2 == 0 ? 14.0 - 4.0 * u : 4.5 - u;
    const double R = std::numbers::pi * r / std::acos(2.0 * cut / p.peak - 1.0);
    p.radii = Vec2(R, R);
    bells.push_back(p);
  }
  const double border = 40.0, width = 900.0;
  double x = border, y = border, row_h = 0.0, used_w = 0.0;
  for (auto& p : bells) {
    const double d = 2.0 * p.radii.x();
    if (x + d > width - border && x > border) {
      x = border;
      y += row_h + gap;
      row_h = 0.0;
    }
    p.center = Vec2(x + p.radii.x(), y + p.radii.y());
    x += d + gap;
    row_h = std::max(row_h, d);
    used_w = std::max(used_w, x - gap);
  }
  SceneSpec s;
  s.pockets = bells;
  s.pitch = pitch;
  s.reference_spacing = pitch;
  s.origin = Vec2::Zero();
  s.cols = static_cast<std::size_t>(std::ceil((used_w + border) / pitch)) + 1;
  s.rows = static_cast<std::size_t>(std::ceil((y + row_h + border) / pitch)) + 1;
  s.cut_height = cut;
  s.noise_sigma = 0.03;
  s.outlier_fraction = 0.002;
  return s;
}

namespace {

struct Footprint {
  Vec2 lo, hi;
};

Footprint footprint(const PocketSpec& p) {
  const Vec2 r = p.radii * p.support();
  return {p.center - r, p.center + r};
}

bool overlaps(const Footprint& a, const Footprint& b) {
  return a.lo.x() < b.hi.x() && b.lo.x() < a.hi.x() && a.lo.y() < b.hi.y() && b.lo.y() < a.hi.y();
}

/// Sum of member bumps (no mold).
double group_height(const SceneSpec& spec, const std::vector<int>& members, double x, double y) {
  double z = 0.0;
  for (int m : members) z += spec.pockets[static_cast<std::size_t>(m)].height(x, y);
  return z;
}

/// Ply and mold lengths along a straight line segment in XY.
std::pair<double, double> section_lengths(const SceneSpec& spec, const std::vector<int>& members, const Vec2& a,
                                          const Vec2& b) {
  constexpr int kSteps = 20000;
  double lp = 0.0, lm = 0.0;
  Vec3 pp(a.x(), a.y(), spec.mold_z(a.x(), a.y()) + group_height(spec, members, a.x(), a.y()));
  Vec3 pm(a.x(), a.y(), spec.mold_z(a.x(), a.y()));
  for (int k = 1; k <= kSteps; ++k) {
    const Vec2 q = a + (b - a) * (static_cast<double>(k) / kSteps);
    const double m = spec.mold_z(q.x(), q.y());
    const Vec3 cp(q.x(), q.y(), m + group_height(spec, members, q.x(), q.y()));
    const Vec3 cm(q.x(), q.y(), m);
    lp += (cp - pp).norm();
    lm += (cm - pm).norm();
    pp = cp;
    pm = cm;
  }
  return {lp, lm};
}

PocketTruth make_truth(const SceneSpec& spec, const std::vector<int>& members) {
  PocketTruth t;
  t.members = members;
  Footprint fp = footprint(spec.pockets[static_cast<std::size_t>(members.front())]);
  for (int m : members) {
    const Footprint f = footprint(spec.pockets[static_cast<std::size_t>(m)]);
    fp.lo = fp.lo.cwiseMin(f.lo);
    fp.hi = fp.hi.cwiseMax(f.hi);
  }
  if (members.size() == 1) {
    const PocketSpec& p = spec.pockets[static_cast<std::size_t>(members.front())];
    t.center = p.center;
    t.peak_mm = p.peak;
    const double r = level_set_radius(p, spec.cut_height);
    t.area_cm2 = std::numbers::pi * p.radii.x() * p.radii.y() * r * r / 100.0;
    t.analytic_area = true;
  } else {
    // Merged pockets: numeric peak and level-set area on a fine raster.
    const double h = 0.25 * spec.pitch;
    const auto nx = static_cast<long>(std::ceil((fp.hi.x() - fp.lo.x()) / h));
    const auto ny = static_cast<long>(std::ceil((fp.hi.y() - fp.lo.y()) / h));
    std::size_t inside = 0;
    for (long j = 0; j < ny; ++j) {
      for (long i = 0; i < nx; ++i) {
        const double x = fp.lo.x() + (static_cast<double>(i) + 0.5) * h;
        const double y = fp.lo.y() + (static_cast<double>(j) + 0.5) * h;
        const double z = group_height(spec, members, x, y);
        if (z > t.peak_mm) {
          t.peak_mm = z;
          t.center = {x, y};
        }
        if (z > spec.cut_height) ++inside;
      }
    }
    t.area_cm2 = static_cast<double>(inside) * h * h / 100.0;
  }
  // Sections through the centre along x and y, spanning the group footprint.
  const std::pair<Vec2, Vec2> lines[2] = {{{fp.lo.x(), t.center.y()}, {fp.hi.x(), t.center.y()}},
                                          {{t.center.x(), fp.lo.y()}, {t.center.x(), fp.hi.y()}}};
  const bool single_cosine_flat = members.size() == 1 && spec.mold == MoldKind::flat &&
                                  spec.pockets[static_cast<std::size_t>(members.front())].profile == BumpProfile::cosine;
  for (int f = 0; f < 2; ++f) {
    if (single_cosine_flat) {
      const PocketSpec& p = spec.pockets[static_cast<std::size_t>(members.front())];
      const double r = f == 0 ? p.radii.x() : p.radii.y();
      t.mold_length_mm[static_cast<std::size_t>(f)] = 2.0 * r;
      t.excess_mm[static_cast<std::size_t>(f)] = cosine_bell_arc_length(p.peak, r) - 2.0 * r;
    } else {
      const auto [lp, lm] = section_lengths(spec, members, lines[f].first, lines[f].second);
      t.mold_length_mm[static_cast<std::size_t>(f)] = lm;
      t.excess_mm[static_cast<std::size_t>(f)] = lp - lm;
    }
  }
  t.analytic_excess = single_cosine_flat;
  return t;
}

std::vector<std::vector<int>> merge_groups(const SceneSpec& spec) {
  const std::size_t n = spec.pockets.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (overlaps(footprint(spec.pockets[a]), footprint(spec.pockets[b]))) {
        parent[static_cast<std::size_t>(find(static_cast<int>(a)))] = find(static_cast<int>(b));
      }
    }
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = find(static_cast<int>(i));
    if (slot[static_cast<std::size_t>(r)] < 0) {
      slot[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[static_cast<std::size_t>(r)])].push_back(static_cast<int>(i));
  }
  return groups;
}

ReferenceSurface sample_reference(const SceneSpec& spec) {
  const Vec2 hi = spec.upper();
  const double s = spec.reference_spacing;
  const auto cols = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((hi.x() - spec.origin.x()) / s)) + 1);
  const auto rows = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((hi.y() - spec.origin.y()) / s)) + 1);
  Grid<double> z(cols, rows);
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i < cols; ++i) {
      z(i, j) = spec.mold_z(spec.origin.x() + static_cast<double>(i) * s, spec.origin.y() + static_cast<double>(j) * s);
    }
  }
  return ReferenceSurface(spec.origin, {s, s}, std::move(z));
}

template <class HeightFn>
OrganizedPointCloud sample_cloud(const SceneSpec& spec, std::uint64_t seed, HeightFn&& ply_height) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Polygon poly = spec.outline();
  // No outline: the ply covers the whole grid, edge rows included.
  const bool everywhere = spec.ply_outline.empty();
  OrganizedPointCloud cloud(spec.cols, spec.rows);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const double x = spec.origin.x() + static_cast<double>(c) * spec.pitch;
      const double y = spec.origin.y() + static_cast<double>(r) * spec.pitch;
      double z = spec.mold_z(x, y);
      if (everywhere || point_in_polygon(poly, {x, y})) z += ply_height(x, y);
      // Draw every variate so the stream does not depend on the parameters.
      const double n = noise(rng);
      const double u = unit(rng), s = unit(rng), m = unit(rng);
      z += spec.noise_sigma * n;
      if (u < spec.outlier_fraction) z += (s < 0.5 ? -1.0 : 1.0) * spec.outlier_magnitude * (0.5 + 0.5 * m);
      const std::size_t k = cloud.index(c, r);
      cloud.points[k] = {x, y, z};
      cloud.valid[k] = 1;
    }
  }
  return cloud;
}

}  // namespace

Scene generate(const SceneSpec& spec, std::uint64_t seed) {
  spec.check();
  Scene scene;
  scene.ply_outline = spec.outline();
  scene.ref = sample_reference(spec);
  scene.ply = sample_cloud(spec, seed, [&](double x, double y) { return spec.ply_z(x, y) - spec.mold_z(x, y); });
  for (const auto& g : merge_groups(spec)) {
    PocketTruth t = make_truth(spec, g);
    if (t.peak_mm > 0.0) scene.truth.push_back(std::move(t));
  }
  std::stable_sort(scene.truth.begin(), scene.truth.end(),
                   [](const PocketTruth& a, const PocketTruth& b) { return a.area_cm2 > b.area_cm2; });
  return scene;
}

Scene generate_debulked(const SceneSpec& spec, const MaterialParams& mat, std::uint64_t seed) {
  spec.check();
  Scene scene = generate(spec, seed);
  const RidgeModelParams rp = RidgeModelParams::from(mat);
  struct Ridge {
    Vec2 center;
    Vec2 along;       // unit, ridge line direction
    double half_len;  // mm
    double height;    // mm
  };
  std::vector<Ridge> ridges;
  for (const auto& t : scene.truth) {
    const int f = t.excess_mm[1] > t.excess_mm[0] ? 1 : 0;
    const auto uf = static_cast<std::size_t>(f);
    if (!(t.excess_mm[uf] > rp.trigger_excess()) || !(t.mold_length_mm[uf] > 2.0 * rp.t)) continue;
    const double h = ridge_height(t.mold_length_mm[uf] + t.excess_mm[uf], t.mold_length_mm[uf], rp.t);
    // The ridge runs across the section direction over the level-set chord.
    const PocketSpec& p = spec.pockets[static_cast<std::size_t>(t.members.front())];
    const double chord = level_set_radius(p, spec.cut_height) * (f == 0 ? p.radii.y() : p.radii.x());
    ridges.push_back({t.center, f == 0 ? Vec2(0.0, 1.0) : Vec2(1.0, 0.0), chord, h});
  }
  const double half_width = std::max(rp.t, spec.pitch);
  const auto debulked = [&](double x, double y) {
    double z = rp.consolidated;
    for (const auto& r : ridges) {
      const Vec2 d = Vec2(x, y) - r.center;
      const double s = d.dot(r.along), w = std::abs(d.x() * r.along.y() - d.y() * r.along.x());
      if (std::abs(s) >= r.half_len || w >= half_width) continue;
      const double taper = 1.0 - (s / r.half_len) * (s / r.half_len);
      z = std::max(z, rp.consolidated + (r.height - rp.consolidated) * taper * (1.0 - w / half_width));
    }
    return z;
  };
  scene.ply = sample_cloud(spec, seed, debulked);
  return scene;
}

}  // namespace debulk
