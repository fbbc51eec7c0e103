#include "debulk/meshing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <set>

namespace debulk {

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::interior: return "interior";
    case NodeClass::fixed_boundary: return "fixed";
    case NodeClass::free_boundary: return "free";
  }
  return "?";
}

void MeshConfig::check() const {
  if (target_node_count < 9) throw Error("mesh config: target_node_count must be >= 9");
  const double diff = std::fmod(std::abs(fiber_angles[0] - fiber_angles[1]), 180.0);
  if (diff < 1e-9 || std::abs(diff - 180.0) < 1e-9) throw Error("mesh config: fiber angles must differ");
  if (!(ply_boundary_tol >= 0.0) || !(mold_contact_tol > 0.0) || !(ply_thickness > 0.0) ||
      !(construction_tol > 0.0)) {
    throw Error("mesh config: tolerances must be positive");
  }
}

std::size_t PlyNet::count(NodeClass c) const {
  return static_cast<std::size_t>(std::count(node_class.begin(), node_class.end(), c));
}

void PlyNet::rebuild_edges() {
  edges.clear();
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (int slot : {kFiber1Next, kFiber2Next}) {
      const int j = neighbors[i][static_cast<std::size_t>(slot)];
      if (j >= 0) edges.emplace_back(std::min<int>(static_cast<int>(i), j), std::max<int>(static_cast<int>(i), j));
    }
  }
  std::sort(edges.begin(), edges.end());
}

void PlyNet::check_topology() const {
  const int n = static_cast<int>(nodes.size());
  if (neighbors.size() != nodes.size() || node_class.size() != nodes.size() ||
      lattice.size() != nodes.size()) {
    throw Error("ply net: per-node arrays differ in length");
  }
  constexpr int opposite[4] = {kFiber1Prev, kFiber1Next, kFiber2Prev, kFiber2Next};
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < 4; ++s) {
      const int j = neighbors[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      if (j < -1 || j >= n || j == i) throw Error("ply net: bad neighbour id");
      if (j >= 0 && neighbors[static_cast<std::size_t>(j)][static_cast<std::size_t>(opposite[s])] != i) {
        throw Error("ply net: asymmetric connectivity");
      }
    }
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    if (e.first >= e.second || e.first < 0 || e.second >= n) throw Error("ply net: bad edge");
    if (!seen.insert(e).second) throw Error("ply net: duplicate edge");
  }
}

double PlyNet::max_chord_error() const {
  double worst = 0.0;
  for (const auto& [a, b] : edges) {
    worst = std::max(worst, std::abs((nodes[static_cast<std::size_t>(a)] - nodes[static_cast<std::size_t>(b)]).norm() - spacing));
  }
  return worst;
}

namespace {

double outside_distance(const AirPocketPatch& patch, const Vec2& p) { return patch.outside_distance(p); }

Vec3 surface_normal(const AirPocketPatch& patch, const Vec2& p) {
  const auto s = patch.surface.sample(p.x(), p.y());
  return Vec3(-s.dzdx, -s.dzdy, 1.0).normalized();
}

/// Surface point at chord distance `spacing` from p along XY heading u.
std::optional<Vec3> chord_step(const AirPocketPatch& patch, const Vec3& p, const Vec2& u, double spacing) {
  const Vec2 far = p.head<2>() + spacing * u;
  if (!patch.in_domain(far.x(), far.y())) return std::nullopt;
  const auto f = [&](double s) {
    const Vec2 xy = p.head<2>() + s * u;
    return (patch.surface_point(xy.x(), xy.y()) - p).norm() - spacing;
  };
  double lo = 0.0, hi = spacing;
  double flo = f(lo), fhi = f(hi);
  if (fhi < 0.0) return std::nullopt;
  // Illinois regula falsi.
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * spacing; ++it) {
    const double s = (lo * fhi - hi * flo) / (fhi - flo);
    const double fs = f(s);
    if (std::abs(fs) < 1e-13 * spacing) {
      lo = hi = s;
      break;
    }
    if ((fs < 0.0) == (flo < 0.0)) {
      lo = s;
      flo = fs;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = s;
      fhi = fs;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  const Vec2 xy = p.head<2>() + 0.5 * (lo + hi) * u;
  return patch.surface_point(xy.x(), xy.y());
}

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct LatticeStore {
  int a0 = 0, b0 = 0, na = 0, nb = 0;
  std::vector<int> id;

  LatticeStore(int amin, int amax, int bmin, int bmax)
      : a0(amin), b0(bmin), na(amax - amin + 1), nb(bmax - bmin + 1),
        id(static_cast<std::size_t>(na * nb), -1) {}
  bool in(int a, int b) const { return a >= a0 && a < a0 + na && b >= b0 && b < b0 + nb; }
  int get(int a, int b) const { return in(a, b) ? id[static_cast<std::size_t>((b - b0) * na + (a - a0))] : -1; }
  void set(int a, int b, int v) { id[static_cast<std::size_t>((b - b0) * na + (a - a0))] = v; }
};

/// Point on the patch surface at chord `spacing` from both parents, Newton from `guess`.
std::optional<Vec3> intersect(const AirPocketPatch& patch, const Vec3& p1, const Vec3& p2, const Vec3& diag,
                              const Vec3& guess, double spacing, double tol) {
  Vec2 xy = guess.head<2>();
  const double d2 = spacing * spacing;
  const auto residual = [&](const Vec2& v, Vec3& q) {
    q = patch.surface_point(v.x(), v.y());
    return Vec2((q - p1).squaredNorm() - d2, (q - p2).squaredNorm() - d2);
  };
  Vec3 q;
  Vec2 r = residual(xy, q);
  for (int it = 0; it < 60; ++it) {
    if (r.cwiseAbs().maxCoeff() < 1e-12 * d2) break;
    const auto s = patch.surface.sample(xy.x(), xy.y());
    const Vec3 ex(1.0, 0.0, s.dzdx), ey(0.0, 1.0, s.dzdy);
    Eigen::Matrix2d J;
    J << 2.0 * (q - p1).dot(ex), 2.0 * (q - p1).dot(ey), 2.0 * (q - p2).dot(ex), 2.0 * (q - p2).dot(ey);
    if (std::abs(J.determinant()) < 1e-14 * d2) return std::nullopt;
    const Vec2 step = J.partialPivLu().solve(-r);
    double alpha = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      Vec3 qt;
      const Vec2 trial = xy + alpha * step;
      const Vec2 rt = residual(trial, qt);
      if (rt.norm() < r.norm()) {
        xy = trial;
        r = rt;
        q = qt;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  if (!patch.in_domain(xy.x(), xy.y())) return std::nullopt;
  const double e1 = std::abs((q - p1).norm() - spacing);
  const double e2 = std::abs((q - p2).norm() - spacing);
  if (e1 > tol * spacing || e2 > tol * spacing) return std::nullopt;
  if ((q - diag).norm() < 0.5 * spacing) return std::nullopt;  // folded back onto the diagonal
  return q;
}

}  // namespace

double choose_discretization(const AirPocketPatch& patch, int target_n, double ply_thickness) {
  if (target_n < 1) throw Error("choose_discretization: target node count must be >= 1");
  if (!(patch.area_cm2 > 0.0)) throw Error("choose_discretization: patch area must be > 0");
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& v : patch.boundary) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec2 ext = (hi - lo) + patch.ply_surface.spacing;
  const double extent = std::min(ext.x(), ext.y());
  const double floor_mm = 2.0 * ply_thickness;
  if (extent / 3.0 < floor_mm) throw Error("patch too small to mesh");
  const double raw = std::sqrt(patch.area_cm2 * 100.0 / target_n);
  return std::clamp(raw, floor_mm, extent / 3.0);
}

Vec3 patch_center(const AirPocketPatch& patch, bool at_peak) {
  const HeightMap& ply = patch.ply_surface;
  Vec2 c = area_centroid(patch.boundary);
  const bool usable = patch.inside_pocket(c.x(), c.y());
  if (at_peak || !usable) {
    // Highest pocket cell, or the pocket cell nearest the centroid.
    double best = -std::numeric_limits<double>::infinity();
    Vec2 pick = c;
    for (std::size_t j = 0; j < ply.rows(); ++j) {
      for (std::size_t i = 0; i < ply.cols(); ++i) {
        if (!patch.pocket_mask(i, j)) continue;
        const Vec2 p = ply.node(i, j);
        const double score = at_peak ? ply.values(i, j) - patch.ref_surface.eval(p.x(), p.y())
                                     : -(p - c).squaredNorm();
        if (score > best) {
          best = score;
          pick = p;
        }
      }
    }
    c = pick;
  }
  return patch.surface_point(c.x(), c.y());
}

FiberPaths seed_fiber_paths(const AirPocketPatch& patch, const std::array<double, 2>& fiber_angles,
                            double spacing, bool at_peak) {
  if (!(spacing > 0.0)) throw Error("seed_fiber_paths: spacing must be > 0");
  FiberPaths fp;
  fp.center = patch_center(patch, at_peak);
  const std::size_t cap = 4 * (patch.ply_surface.cols() + patch.ply_surface.rows()) + 16;
  for (int f = 0; f < 2; ++f) {
    std::array<std::vector<Vec3>, 2> halves;
    for (int sense = 0; sense < 2; ++sense) {
      const double ang = deg2rad(fiber_angles[static_cast<std::size_t>(f)]) + (sense ? std::numbers::pi : 0.0);
      Vec2 u(std::cos(ang), std::sin(ang));
      Vec3 p = fp.center;
      Vec3 dir;
      {
        const auto s = patch.surface.sample(p.x(), p.y());
        dir = Vec3(u.x(), u.y(), s.dzdx * u.x() + s.dzdy * u.y()).normalized();
      }
      for (std::size_t step = 0; step < cap; ++step) {
        const auto q = chord_step(patch, p, u, spacing);
        if (!q) {
          if (outside_distance(patch, p.head<2>()) <= spacing) throw Error("margin too small");
          break;
        }
        halves[static_cast<std::size_t>(sense)].push_back(*q);
        // Straight-ahead geodesic: previous chord direction projected onto the tangent plane.
        dir = (*q - p).normalized();
        const Vec3 n = surface_normal(patch, q->head<2>());
        Vec3 t = dir - dir.dot(n) * n;
        Vec2 nu = t.head<2>();
        if (nu.norm() < 1e-12) break;
        u = nu.normalized();
        p = *q;
        if (outside_distance(patch, p.head<2>()) > 2.0 * spacing) break;
      }
    }
    auto& path = fp.paths[static_cast<std::size_t>(f)];
    path.assign(halves[1].rbegin(), halves[1].rend());
    fp.center_index[static_cast<std::size_t>(f)] = static_cast<int>(path.size());
    path.push_back(fp.center);
    path.insert(path.end(), halves[0].begin(), halves[0].end());
  }
  return fp;
}

PlyNet place_nodes(const AirPocketPatch& patch, const FiberPaths& paths, double spacing,
                   double construction_tol) {
  const auto& p1 = paths.paths[0];
  const auto& p2 = paths.paths[1];
  const int c1 = paths.center_index[0], c2 = paths.center_index[1];
  const int amin = -c1, amax = static_cast<int>(p1.size()) - 1 - c1;
  const int bmin = -c2, bmax = static_cast<int>(p2.size()) - 1 - c2;
  LatticeStore store(amin, amax, bmin, bmax);

  PlyNet net;
  net.spacing = spacing;
  const auto add = [&](int a, int b, const Vec3& x) {
    store.set(a, b, static_cast<int>(net.nodes.size()));
    net.nodes.push_back(x);
    net.lattice.push_back({a, b});
  };
  add(0, 0, paths.center);
  for (int a = amin; a <= amax; ++a) {
    if (a != 0) add(a, 0, p1[static_cast<std::size_t>(a + c1)]);
  }
  for (int b = bmin; b <= bmax; ++b) {
    if (b != 0) add(0, b, p2[static_cast<std::size_t>(b + c2)]);
  }

  constexpr int quadrants[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  for (const auto& qd : quadrants) {
    const int sa = qd[0], sb = qd[1];
    const int na = sa > 0 ? amax : -amin;
    const int nb = sb > 0 ? bmax : -bmin;
    for (int j = 1; j <= nb; ++j) {
      for (int i = 1; i <= na; ++i) {
        const int a = sa * i, b = sb * j;
        const int ip1 = store.get(a - sa, b), ip2 = store.get(a, b - sb), id = store.get(a - sa, b - sb);
        if (ip1 < 0 || ip2 < 0 || id < 0) continue;
        const Vec3& x1 = net.nodes[static_cast<std::size_t>(ip1)];
        const Vec3& x2 = net.nodes[static_cast<std::size_t>(ip2)];
        const Vec3& xd = net.nodes[static_cast<std::size_t>(id)];
        const Vec3 guess = x1 + x2 - xd;
        if (!patch.in_domain(guess.x(), guess.y()) ||
            outside_distance(patch, guess.head<2>()) > 2.0 * spacing) {
          continue;
        }
        const auto q = intersect(patch, x1, x2, xd, guess, spacing, construction_tol);
        if (!q) {
          ++net.frontier_count;
          continue;
        }
        add(a, b, *q);
      }
    }
  }

  net.neighbors.assign(net.nodes.size(), {-1, -1, -1, -1});
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const int a = net.lattice[i][0], b = net.lattice[i][1];
    net.neighbors[i] = {store.get(a + 1, b), store.get(a - 1, b), store.get(a, b + 1), store.get(a, b - 1)};
  }
  net.node_class.assign(net.nodes.size(), NodeClass::interior);
  net.rebuild_edges();
  return net;
}

PlyNet classify_boundary(const PlyNet& net, const AirPocketPatch& patch, const MeshConfig& config) {
  const double spacing = net.spacing;
  const std::size_t n = net.nodes.size();
  std::vector<std::uint8_t> keep(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    keep[i] = outside_distance(patch, net.nodes[i].head<2>()) <= spacing ? 1 : 0;
  }
  // Keep only the component containing the seed node (or the largest one).
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> comp_size;
  for (std::size_t s = 0; s < n; ++s) {
    if (!keep[s] || comp[s] >= 0) continue;
    const int label = static_cast<int>(comp_size.size());
    std::size_t size = 0;
    std::deque<std::size_t> queue{s};
    comp[s] = label;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++size;
      for (int j : net.neighbors[i]) {
        if (j >= 0 && keep[static_cast<std::size_t>(j)] && comp[static_cast<std::size_t>(j)] < 0) {
          comp[static_cast<std::size_t>(j)] = label;
          queue.push_back(static_cast<std::size_t>(j));
        }
      }
    }
    comp_size.push_back(size);
  }
  if (comp_size.empty()) throw Error("open net");
  int best = static_cast<int>(std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin());
  if (keep[0]) best = comp[0];

  std::vector<int> remap(n, -1);
  PlyNet out;
  out.spacing = spacing;
  out.fiber_angles = config.fiber_angles;
  out.chord_approximation = net.chord_approximation;
  out.frontier_count = net.frontier_count;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i] && comp[i] == best) {
      remap[i] = static_cast<int>(out.nodes.size());
      out.nodes.push_back(net.nodes[i]);
      out.lattice.push_back(net.lattice[i]);
    }
  }
  out.neighbors.assign(out.nodes.size(), {-1, -1, -1, -1});
  out.node_class.assign(out.nodes.size(), NodeClass::interior);
  for (std::size_t i = 0; i < n; ++i) {
    if (remap[i] < 0) continue;
    for (std::size_t s = 0; s < 4; ++s) {
      const int j = net.neighbors[i][s];
      out.neighbors[static_cast<std::size_t>(remap[i])][s] = j >= 0 ? remap[static_cast<std::size_t>(j)] : -1;
    }
  }
  out.rebuild_edges();

  std::size_t boundary = 0;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    const Vec3& x = out.nodes[i];
    if (patch.inside_footprint(x.x(), x.y())) continue;
    if (std::abs(x.z() - patch.ref_surface.eval(x.x(), x.y())) > config.mold_contact_tol) continue;
    ++boundary;
    const Vec2 xy = x.head<2>();
    const bool near_edge = !patch.ply_outline.empty() &&
                           (!point_in_polygon(patch.ply_outline, xy) ||
                            distance_to_outline(patch.ply_outline, xy) <= config.ply_boundary_tol);
    out.node_class[i] = near_edge ? NodeClass::free_boundary : NodeClass::fixed_boundary;
  }
  if (boundary == 0) throw Error("open net");
  // Interior nodes pinched between boundary nodes join the boundary.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < out.nodes.size(); ++i) {
      if (out.node_class[i] != NodeClass::interior) continue;
      const auto& nb = out.neighbors[i];
      const auto cls = [&](int s) {
        return nb[static_cast<std::size_t>(s)] < 0 ? NodeClass::interior
                                                   : out.node_class[static_cast<std::size_t>(nb[static_cast<std::size_t>(s)])];
      };
      int held = 0;
      bool any_free = false;
      for (int s = 0; s < 4; ++s) {
        held += cls(s) != NodeClass::interior;
        any_free = any_free || cls(s) == NodeClass::free_boundary;
      }
      const bool pinched = (cls(kFiber1Next) != NodeClass::interior && cls(kFiber1Prev) != NodeClass::interior) ||
                           (cls(kFiber2Next) != NodeClass::interior && cls(kFiber2Prev) != NodeClass::interior);
      if (!pinched && held < 3) continue;
      out.node_class[i] = any_free ? NodeClass::free_boundary : NodeClass::fixed_boundary;
      changed = true;
    }
  }

  // Surface area of the ply patch from the lattice quads.
  double area_mm2 = 0.0;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    const int ia = out.neighbors[i][kFiber1Next];
    const int ib = out.neighbors[i][kFiber2Next];
    if (ia < 0 || ib < 0) continue;
    const int iab = out.neighbors[static_cast<std::size_t>(ia)][kFiber2Next];
    if (iab < 0) continue;
    const Vec3& x0 = out.nodes[i];
    const Vec3& xa = out.nodes[static_cast<std::size_t>(ia)];
    const Vec3& xb = out.nodes[static_cast<std::size_t>(ib)];
    const Vec3& xab = out.nodes[static_cast<std::size_t>(iab)];
    area_mm2 += 0.5 * (xa - x0).cross(xab - x0).norm() + 0.5 * (xab - x0).cross(xb - x0).norm();
  }
  if (area_mm2 <= 0.0) area_mm2 = static_cast<double>(out.nodes.size()) * spacing * spacing;
  out.patch_area_m2 = area_mm2 * 1e-6;
  return out;
}

PlyNet mesh_patch(const AirPocketPatch& patch, const MeshConfig& config) {
  config.check();
  const double spacing = choose_discretization(patch, config.target_node_count, config.ply_thickness);
  const FiberPaths paths = seed_fiber_paths(patch, config.fiber_angles, spacing, config.seed_at_peak);
  const PlyNet raw = place_nodes(patch, paths, spacing, config.construction_tol);
  return classify_boundary(raw, patch, config);
}

}  // namespace debulk
