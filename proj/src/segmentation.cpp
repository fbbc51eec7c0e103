#include "debulk/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>
#include <set>

namespace debulk {

void SegmentationSettings::check() const {
  if (!(cut_height > 0.0) || !(area_tol > 0.0) || !(peak_tol > 0.0) || !(contact_height > 0.0)) {
    throw Error("segmentation settings must be strictly positive");
  }
  if (contact_height > cut_height) throw Error("segmentation settings: contact height above the cut height");
}

double PatchMargin::resolve(double area_mm2) const {
  if (fixed_mm > 0.0) return fixed_mm;
  if (target_nodes < 1) throw Error("patch margin: target_nodes must be >= 1");
  return node_factor * std::sqrt(area_mm2 / target_nodes);
}

bool AirPocketPatch::inside_pocket(double x, double y) const {
  const long i = std::lround((x - ply_surface.origin.x()) / ply_surface.spacing.x());
  const long j = std::lround((y - ply_surface.origin.y()) / ply_surface.spacing.y());
  if (!pocket_mask.contains(i, j)) return false;
  return pocket_mask(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) != 0;
}

bool AirPocketPatch::inside_footprint(double x, double y) const {
  const long i = std::lround((x - ply_surface.origin.x()) / ply_surface.spacing.x());
  const long j = std::lround((y - ply_surface.origin.y()) / ply_surface.spacing.y());
  if (!footprint_mask.contains(i, j)) return false;
  return footprint_mask(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) != 0;
}

double AirPocketPatch::outside_distance(const Vec2& p) const {
  if (inside_footprint(p.x(), p.y())) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& e : footprint_edge) best = std::min(best, (e - p).squaredNorm());
  return std::sqrt(best);
}

void AirPocketPatch::rebuild_surface() {
  Grid<double> z(ply_surface.cols(), ply_surface.rows());
  for (std::size_t j = 0; j < z.rows(); ++j) {
    for (std::size_t i = 0; i < z.cols(); ++i) {
      // scan noise below the mold is clamped onto it
      const double r = ref_surface.elevations()(i, j);
      z(i, j) = ply_surface.valid(i, j) ? std::max(ply_surface.values(i, j), r) : r;
    }
  }
  surface = ReferenceSurface(ply_surface.origin, ply_surface.spacing, std::move(z));
}

Mask threshold_cut(const HeightMap& hm, double cut_height) {
  if (!(cut_height > 0.0)) throw Error("threshold_cut: cut_height must be > 0");
  Mask m(hm.cols(), hm.rows(), 0);
  for (std::size_t k = 0; k < m.size(); ++k) {
    m.data()[k] = (hm.valid.data()[k] && hm.values.data()[k] > cut_height) ? 1 : 0;
  }
  return m;
}

Mask fill_holes(const Mask& mask) {
  const long w = static_cast<long>(mask.cols());
  const long h = static_cast<long>(mask.rows());
  Mask reached(mask.cols(), mask.rows(), 0);
  std::deque<Cell> queue;
  const auto seed = [&](long c, long r) {
    const auto uc = static_cast<std::size_t>(c), ur = static_cast<std::size_t>(r);
    if (!mask(uc, ur) && !reached(uc, ur)) {
      reached(uc, ur) = 1;
      queue.push_back({c, r});
    }
  };
  for (long c = 0; c < w; ++c) {
    seed(c, 0);
    seed(c, h - 1);
  }
  for (long r = 0; r < h; ++r) {
    seed(0, r);
    seed(w - 1, r);
  }
  while (!queue.empty()) {
    const Cell p = queue.front();
    queue.pop_front();
    const long nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : nb) {
      const long c = p.col + d[0], r = p.row + d[1];
      if (mask.contains(c, r)) seed(c, r);
    }
  }
  Mask out(mask.cols(), mask.rows(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] = reached.data()[k] ? 0 : 1;
  return out;
}

namespace {

// Counter-clockwise in XY starting at east.
constexpr long kDir[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};

int dir_index(long dc, long dr) {
  for (int d = 0; d < 8; ++d) {
    if (kDir[d][0] == dc && kDir[d][1] == dr) return d;
  }
  return -1;
}

std::vector<Cell> label_component(const Mask& mask, Mask& seen, Cell start) {
  std::vector<Cell> comp;
  std::deque<Cell> queue{start};
  seen(static_cast<std::size_t>(start.col), static_cast<std::size_t>(start.row)) = 1;
  while (!queue.empty()) {
    const Cell p = queue.front();
    queue.pop_front();
    comp.push_back(p);
    for (const auto& d : kDir) {
      const long c = p.col + d[0], r = p.row + d[1];
      if (!mask.contains(c, r)) continue;
      const auto uc = static_cast<std::size_t>(c), ur = static_cast<std::size_t>(r);
      if (mask(uc, ur) && !seen(uc, ur)) {
        seen(uc, ur) = 1;
        queue.push_back({c, r});
      }
    }
  }
  return comp;
}

std::vector<Cell> moore_trace(const Mask& mask, Cell start) {
  const auto fg = [&](long c, long r) {
    return mask.contains(c, r) && mask(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) != 0;
  };
  std::vector<Cell> cells{start};
  Cell p = start;
  Cell b{start.col - 1, start.row};  // west neighbour is background by raster order
  const Cell b0 = b;
  // Hard cap guards against a malformed mask; a boundary visits each cell at most 4 times.
  const std::size_t cap = 4 * mask.size() + 8;
  for (std::size_t step = 0; step < cap; ++step) {
    const int d0 = dir_index(b.col - p.col, b.row - p.row);
    bool found = false;
    Cell c{}, nb{};
    for (int k = 1; k <= 8; ++k) {
      const int d = (d0 + k) % 8;
      const Cell q{p.col + kDir[d][0], p.row + kDir[d][1]};
      if (fg(q.col, q.row)) {
        const int dp = (d0 + k - 1) % 8;
        c = q;
        nb = {p.col + kDir[dp][0], p.row + kDir[dp][1]};
        found = true;
        break;
      }
    }
    if (!found) break;  // isolated pixel
    p = c;
    b = nb;
    if (p == start && b == b0) break;  // Jacob's stopping criterion
    cells.push_back(p);
  }
  // The loop may end on the start cell having re-entered it from another side.
  if (cells.size() > 1 && cells.back() == start) cells.pop_back();
  return cells;
}

double cell_signed_area(const std::vector<Cell>& cells) {
  double twice = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& a = cells[i];
    const Cell& b = cells[(i + 1) % cells.size()];
    twice += static_cast<double>(a.col * b.row - b.col * a.row);
  }
  return 0.5 * twice;
}

}  // namespace

std::vector<PixelBoundary> trace_boundaries(const Mask& mask) {
  std::vector<PixelBoundary> out;
  Mask seen(mask.cols(), mask.rows(), 0);
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (!mask(c, r) || seen(c, r)) continue;
      const Cell start{static_cast<long>(c), static_cast<long>(r)};
      PixelBoundary pb;
      pb.component = label_component(mask, seen, start);
      pb.cells = moore_trace(mask, start);
      if (cell_signed_area(pb.cells) < 0.0) std::reverse(pb.cells.begin() + 1, pb.cells.end());
      out.push_back(std::move(pb));
    }
  }
  return out;
}

std::vector<AirPocketPatch> extract_patches(const HeightMap& hm, const ReferenceSurface& ref,
                                            const std::vector<PixelBoundary>& boundaries,
                                            const SegmentationSettings& settings,
                                            const PatchMargin& margin, const Polygon& ply_outline,
                                            double ply_boundary_tol) {
  settings.check();
  hm.check();
  const double cell_area = hm.spacing.x() * hm.spacing.y();
  Polygon outline = ply_outline;
  if (outline.empty()) {
    const Vec2 lo = hm.node(0, 0);
    const Vec2 hi = hm.node(hm.cols() - 1, hm.rows() - 1);
    outline = {lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}};
  }

  struct Candidate {
    const PixelBoundary* pb;
    double area_mm2;
    double peak;
  };
  std::vector<Candidate> kept;
  for (const auto& pb : boundaries) {
    double peak = -std::numeric_limits<double>::infinity();
    for (const Cell& c : pb.component) {
      const auto uc = static_cast<std::size_t>(c.col), ur = static_cast<std::size_t>(c.row);
      if (hm.valid(uc, ur)) peak = std::max(peak, hm.values(uc, ur));
    }
    const double area_mm2 = static_cast<double>(pb.component.size()) * cell_area;
    if (area_mm2 / 100.0 >= settings.area_tol && peak >= settings.peak_tol) {
      kept.push_back({&pb, area_mm2, peak});
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    if (a.area_mm2 != b.area_mm2) return a.area_mm2 > b.area_mm2;
    return a.peak > b.peak;
  });

  Grid<int> owner(hm.cols(), hm.rows(), -1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    for (const Cell& c : kept[k].pb->component) {
      owner(static_cast<std::size_t>(c.col), static_cast<std::size_t>(c.row)) = static_cast<int>(k);
    }
  }
  // Footprint: the pocket grown through 4-connected cells still lifted above the contact
  // height, without entering another pocket.
  const auto grow_footprint = [&](int self, const std::vector<Cell>& seed) {
    Mask seen(hm.cols(), hm.rows(), 0);
    std::deque<Cell> queue;
    std::vector<Cell> cells;
    for (const Cell& c : seed) {
      seen(static_cast<std::size_t>(c.col), static_cast<std::size_t>(c.row)) = 1;
      queue.push_back(c);
    }
    constexpr long step[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    while (!queue.empty()) {
      const Cell c = queue.front();
      queue.pop_front();
      cells.push_back(c);
      for (const auto& d : step) {
        const long nc = c.col + d[0], nr = c.row + d[1];
        if (!hm.valid.contains(nc, nr)) continue;
        const auto unc = static_cast<std::size_t>(nc), unr = static_cast<std::size_t>(nr);
        if (seen(unc, unr) || !hm.valid(unc, unr) || !(hm.values(unc, unr) > settings.contact_height)) continue;
        if (owner(unc, unr) >= 0 && owner(unc, unr) != self) continue;
        seen(unc, unr) = 1;
        queue.push_back({nc, nr});
      }
    }
    return cells;
  };

  std::vector<AirPocketPatch> patches;
  patches.reserve(kept.size());
  int next_id = 1;
  for (const auto& cand : kept) {
    const PixelBoundary& pb = *cand.pb;
    AirPocketPatch patch;
    patch.id = next_id++;
    patch.area_cm2 = cand.area_mm2 / 100.0;
    patch.peak_mm = cand.peak;
    patch.margin_mm = margin.resolve(cand.area_mm2);
    patch.cells = pb.component;
    for (const Cell& c : pb.cells) {
      patch.boundary.push_back(hm.node(static_cast<std::size_t>(c.col), static_cast<std::size_t>(c.row)));
    }

    const std::vector<Cell> footprint = grow_footprint(next_id - 2, pb.component);
    long cmin = pb.component.front().col, cmax = cmin;
    long rmin = pb.component.front().row, rmax = rmin;
    for (const Cell& c : footprint) {
      cmin = std::min(cmin, c.col);
      cmax = std::max(cmax, c.col);
      rmin = std::min(rmin, c.row);
      rmax = std::max(rmax, c.row);
    }
    const long mc = static_cast<long>(std::ceil(patch.margin_mm / hm.spacing.x() - 1e-9));
    const long mr = static_cast<long>(std::ceil(patch.margin_mm / hm.spacing.y() - 1e-9));
    const long c0 = std::max(0L, cmin - mc), c1 = std::min(static_cast<long>(hm.cols()) - 1, cmax + mc);
    const long r0 = std::max(0L, rmin - mr), r1 = std::min(static_cast<long>(hm.rows()) - 1, rmax + mr);
    patch.margin_clipped = c0 > cmin - mc || r0 > rmin - mr || c1 < cmax + mc || r1 < rmax + mr;
    const auto sc = static_cast<std::size_t>(std::max(c1 - c0 + 1, 2L));
    const auto sr = static_cast<std::size_t>(std::max(r1 - r0 + 1, 2L));

    patch.ply_surface = HeightMap(hm.node(static_cast<std::size_t>(c0), static_cast<std::size_t>(r0)),
                                  hm.spacing, sc, sr);
    patch.pocket_mask = Mask(sc, sr, 0);
    Grid<double> refz(sc, sr);
    for (std::size_t j = 0; j < sr; ++j) {
      for (std::size_t i = 0; i < sc; ++i) {
        const Vec2 p = patch.ply_surface.node(i, j);
        refz(i, j) = ref.eval(p.x(), p.y());
        const long gc = c0 + static_cast<long>(i), gr = r0 + static_cast<long>(j);
        if (hm.valid.contains(gc, gr)) {
          const auto ugc = static_cast<std::size_t>(gc), ugr = static_cast<std::size_t>(gr);
          if (hm.valid(ugc, ugr)) {
            patch.ply_surface.values(i, j) = refz(i, j) + hm.values(ugc, ugr);
            patch.ply_surface.valid(i, j) = 1;
          }
        }
      }
    }
    std::set<std::pair<long, long>> unscanned;
    for (const Cell& c : pb.component) {
      const auto i = static_cast<std::size_t>(c.col - c0), j = static_cast<std::size_t>(c.row - r0);
      patch.pocket_mask(i, j) = 1;
      if (!patch.ply_surface.valid(i, j)) {
        // Hole filled by fill_holes over masked-out data: assume the cut level.
        patch.ply_surface.values(i, j) = refz(i, j) + settings.cut_height;
        patch.ply_surface.valid(i, j) = 1;
        unscanned.emplace(c.col, c.row);
      }
      for (const auto& d : kDir) {
        const long nc = c.col + d[0], nr = c.row + d[1];
        if (hm.valid.contains(nc, nr) &&
            !hm.valid(static_cast<std::size_t>(nc), static_cast<std::size_t>(nr))) {
          unscanned.emplace(nc, nr);
        }
      }
    }
    patch.invalid_cells = unscanned.size();
    patch.low_confidence = !unscanned.empty();
    patch.footprint_mask = Mask(sc, sr, 0);
    for (const Cell& c : footprint) {
      const long i = c.col - c0, j = c.row - r0;
      if (patch.footprint_mask.contains(i, j)) patch.footprint_mask(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 1;
    }
    for (std::size_t j = 0; j < sr; ++j) {
      for (std::size_t i = 0; i < sc; ++i) {
        if (!patch.footprint_mask(i, j)) continue;
        const long li = static_cast<long>(i), lj = static_cast<long>(j);
        const bool edge = !patch.footprint_mask.contains(li + 1, lj) || !patch.footprint_mask.contains(li - 1, lj) ||
                          !patch.footprint_mask.contains(li, lj + 1) || !patch.footprint_mask.contains(li, lj - 1) ||
                          !patch.footprint_mask(i + 1, j) || !patch.footprint_mask(i - 1, j) ||
                          !patch.footprint_mask(i, j + 1) || !patch.footprint_mask(i, j - 1);
        if (edge) patch.footprint_edge.push_back(patch.ply_surface.node(i, j));
      }
    }
    patch.ref_surface = ReferenceSurface(patch.ply_surface.origin, hm.spacing, std::move(refz));
    patch.rebuild_surface();

    patch.ply_outline = outline;
    for (const Vec2& v : patch.boundary) {
      if (!point_in_polygon(outline, v) || distance_to_outline(outline, v) <= ply_boundary_tol) {
        patch.near_ply_boundary = true;
        break;
      }
    }
    patches.push_back(std::move(patch));
  }
  return patches;
}

std::vector<AirPocketPatch> segment(const HeightMap& hm, const ReferenceSurface& ref,
                                    const SegmentationSettings& settings, const PatchMargin& margin,
                                    const Polygon& ply_outline, double ply_boundary_tol) {
  const Mask cut = threshold_cut(hm, settings.cut_height);
  const Mask filled = fill_holes(cut);
  const auto boundaries = trace_boundaries(filled);
  return extract_patches(hm, ref, boundaries, settings, margin, ply_outline, ply_boundary_tol);
}

}  // namespace debulk
