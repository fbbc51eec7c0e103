#include "debulk/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace debulk {

using Eigen::VectorXd;

double RidgeModelParams::trigger_excess() const { return (std::numbers::pi - 2.0) * t; }

double ridge_height(double L_ply, double L_mold, double t) {
  if (!(t > 0.0)) throw Error("ridge_height: thickness must be > 0");
  if (!(L_mold > 2.0 * t)) throw Error("ridge_height: degenerate section");
  const double base = (L_mold - 2.0 * t) / 2.0;
  return (L_ply - 2.0 * base - std::numbers::pi * t) / 2.0 + t;
}

double ridge_perimeter(double h, double t) { return 2.0 * (h - t) + std::numbers::pi * t; }

int RidgeResult::ridge_count() const {
  return static_cast<int>(std::count_if(sections.begin(), sections.end(), [](const auto& s) { return s.ridge; }));
}

namespace {

Vec3 node_mm(const VectorXd& X, int i) { return X.segment<3>(3 * static_cast<Eigen::Index>(i)) * 1e3; }

double mold_arc(const ReferenceSurface& ref, const Vec2& a, const Vec2& b) {
  constexpr int kPieces = 16;
  double len = 0.0;
  Vec3 prev(a.x(), a.y(), ref.eval(a.x(), a.y()));
  for (int k = 1; k <= kPieces; ++k) {
    const Vec2 p = a + (b - a) * (static_cast<double>(k) / kPieces);
    const Vec3 cur(p.x(), p.y(), ref.eval(p.x(), p.y()));
    len += (cur - prev).norm();
    prev = cur;
  }
  return len;
}

/// Consecutive above-contact nodes through `i` along a fiber, plus one anchor node at each end.
std::vector<int> fiber_run(const PlyNet& net, const std::vector<double>& raw, double tol, int i, int fiber) {
  const auto next = static_cast<std::size_t>(2 * fiber), prev = next + 1;
  std::vector<int> back, fwd;
  int k = i;
  while (true) {
    const int n = net.neighbors[static_cast<std::size_t>(k)][next];
    if (n < 0) break;
    fwd.push_back(n);
    if (!(raw[static_cast<std::size_t>(n)] > tol)) break;
    k = n;
  }
  k = i;
  while (true) {
    const int n = net.neighbors[static_cast<std::size_t>(k)][prev];
    if (n < 0) break;
    back.push_back(n);
    if (!(raw[static_cast<std::size_t>(n)] > tol)) break;
    k = n;
  }
  std::vector<int> run(back.rbegin(), back.rend());
  run.push_back(i);
  run.insert(run.end(), fwd.begin(), fwd.end());
  return run;
}

}  // namespace

RidgeResult apply_ridges(const PlyNet& net, const VectorXd& X, const ReferenceSurface& ref, const MaterialParams& mat,
                         const RidgeResult* prior, double contact_tol) {
  const std::size_t n = net.size();
  if (X.size() != 3 * static_cast<Eigen::Index>(n)) throw Error("apply_ridges: configuration length must be 3N");
  const RidgeModelParams rp = RidgeModelParams::from(mat);
  RidgeResult out;
  out.t = rp.t;
  out.consolidated = rp.consolidated;
  out.contact_tol = contact_tol > 0.0 ? contact_tol : rp.consolidated;
  out.raw_height.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = node_mm(X, static_cast<int>(i));
    out.raw_height[i] = p.z() - ref.eval(p.x(), p.y());
  }
  if (prior) {
    if (prior->adjusted.size() != n || prior->height.size() != n) throw Error("apply_ridges: prior does not match net");
    out.adjusted = prior->adjusted;
    out.height = prior->height;
    std::copy_if(prior->sections.begin(), prior->sections.end(), std::back_inserter(out.sections),
                 [](const auto& s) { return s.ridge; });
  } else {
    out.adjusted.assign(n, 0);
    out.height.assign(n, rp.consolidated);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return out.raw_height[static_cast<std::size_t>(a)] > out.raw_height[static_cast<std::size_t>(b)];
  });

  for (const int i : order) {
    const auto ui = static_cast<std::size_t>(i);
    if (!(out.raw_height[ui] > out.contact_tol)) break;
    if (out.adjusted[ui]) continue;
    RidgeSection best;
    for (int f = 0; f < 2; ++f) {
      RidgeSection s;
      s.apex = i;
      s.fiber = f;
      s.nodes = fiber_run(net, out.raw_height, out.contact_tol, i, f);
      for (std::size_t k = 1; k < s.nodes.size(); ++k) {
        const Vec3 a = node_mm(X, s.nodes[k - 1]), b = node_mm(X, s.nodes[k]);
        s.L_ply += (b - a).norm();
        s.L_mold += mold_arc(ref, a.head<2>(), b.head<2>());
      }
      s.excess = s.L_ply - s.L_mold;
      if (f == 0 || s.excess > best.excess) best = std::move(s);
    }
    if (!(best.excess > rp.trigger_excess()) || !(best.L_mold > 2.0 * rp.t)) {
      out.sections.push_back(std::move(best));
      continue;
    }
    best.ridge = true;
    best.height = ridge_height(best.L_ply, best.L_mold, rp.t);
    out.height[ui] = best.height;
    out.adjusted[ui] = 1;
    const auto flatten = [&](const std::vector<int>& run) {
      for (const int k : run) {
        const auto uk = static_cast<std::size_t>(k);
        if (out.adjusted[uk]) continue;
        out.height[uk] = rp.consolidated;
        out.adjusted[uk] = 1;
      }
    };
    flatten(best.nodes);
    flatten(fiber_run(net, out.raw_height, out.contact_tol, i, 1 - best.fiber));
    out.sections.push_back(std::move(best));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.adjusted[i]) out.height[i] = rp.consolidated;
  }
  return out;
}

HeightMap rasterize_heights(const PlyNet& net, const VectorXd& X, const std::vector<double>& height,
                            const AirPocketPatch& patch, std::size_t* uncovered) {
  if (height.size() != net.size()) throw Error("rasterize_heights: one height per node expected");
  const HeightMap& grid = patch.ply_surface;
  HeightMap out(grid.origin, grid.spacing, grid.cols(), grid.rows());
  Mask done(grid.cols(), grid.rows(), 0);
  std::vector<Vec2> xy(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) xy[i] = X.segment<2>(3 * static_cast<Eigen::Index>(i)) * 1e3;

  const auto raster_tri = [&](int a, int b, int c) {
    const Vec2 &pa = xy[static_cast<std::size_t>(a)], &pb = xy[static_cast<std::size_t>(b)],
               &pc = xy[static_cast<std::size_t>(c)];
    const double det = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
    if (std::abs(det) < 1e-12) return;
    const Vec2 lo = pa.cwiseMin(pb).cwiseMin(pc), hi = pa.cwiseMax(pb).cwiseMax(pc);
    const long i0 = std::max(0L, static_cast<long>(std::ceil((lo.x() - grid.origin.x()) / grid.spacing.x())));
    const long j0 = std::max(0L, static_cast<long>(std::ceil((lo.y() - grid.origin.y()) / grid.spacing.y())));
    const long i1 = std::min(static_cast<long>(grid.cols()) - 1,
                             static_cast<long>(std::floor((hi.x() - grid.origin.x()) / grid.spacing.x())));
    const long j1 = std::min(static_cast<long>(grid.rows()) - 1,
                             static_cast<long>(std::floor((hi.y() - grid.origin.y()) / grid.spacing.y())));
    for (long j = j0; j <= j1; ++j) {
      for (long i = i0; i <= i1; ++i) {
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        if (!patch.pocket_mask(ui, uj) || done(ui, uj)) continue;
        const Vec2 p = grid.node(ui, uj) - pa;
        const double u = (p.x() * (pc - pa).y() - p.y() * (pc - pa).x()) / det;
        const double v = ((pb - pa).x() * p.y() - (pb - pa).y() * p.x()) / det;
        constexpr double eps = 1e-9;
        if (u < -eps || v < -eps || u + v > 1.0 + eps) continue;
        out.values(ui, uj) = (1.0 - u - v) * height[static_cast<std::size_t>(a)] +
                             u * height[static_cast<std::size_t>(b)] + v * height[static_cast<std::size_t>(c)];
        out.valid(ui, uj) = 1;
        done(ui, uj) = 1;
      }
    }
  };

  for (std::size_t i = 0; i < net.size(); ++i) {
    const int n1 = net.neighbors[i][kFiber1Next];
    const int n2 = net.neighbors[i][kFiber2Next];
    if (n1 < 0 || n2 < 0) continue;
    const int n12 = net.neighbors[static_cast<std::size_t>(n1)][kFiber2Next];
    if (n12 < 0 || net.neighbors[static_cast<std::size_t>(n2)][kFiber1Next] != n12) continue;
    raster_tri(static_cast<int>(i), n1, n12);
    raster_tri(static_cast<int>(i), n12, n2);
  }

  std::size_t missing = 0;
  for (std::size_t j = 0; j < grid.rows(); ++j) {
    for (std::size_t i = 0; i < grid.cols(); ++i) {
      if (!patch.pocket_mask(i, j) || done(i, j)) continue;
      const Vec2 p = grid.node(i, j);
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < xy.size(); ++k) {
        const double d = (xy[k] - p).squaredNorm();
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (xy.empty()) continue;
      out.values(i, j) = height[best];
      out.valid(i, j) = 1;
      ++missing;
    }
  }
  if (uncovered) *uncovered = missing;
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::cease: return "cease";
    case Verdict::crease: return "crease";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict parse_verdict(const std::string& s) {
  if (s == "cease") return Verdict::cease;
  if (s == "crease") return Verdict::crease;
  if (s == "inconclusive") return Verdict::inconclusive;
  throw Error("unknown verdict '" + s + "'");
}

double field_rms(const HeightMap& field, std::size_t* count) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < field.values.size(); ++k) {
    if (!field.valid.data()[k]) continue;
    sum += field.values.data()[k] * field.values.data()[k];
    ++n;
  }
  if (count) *count = n;
  if (n == 0) throw Error("classify: empty contour sample");
  return std::sqrt(sum / static_cast<double>(n));
}

DebulkReport classify(const HeightMap& field, double threshold, bool converged) {
  if (!(threshold > 0.0)) throw Error("classify: threshold must be > 0");
  DebulkReport r;
  r.rms_mm = field_rms(field, &r.sample_count);
  r.threshold_mm = threshold;
  r.converged = converged;
  if (!converged) r.verdict = Verdict::inconclusive;
  else r.verdict = r.rms_mm <= threshold ? Verdict::cease : Verdict::crease;
  r.heightfield = field;
  return r;
}

}  // namespace debulk
