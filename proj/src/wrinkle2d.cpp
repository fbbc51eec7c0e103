#include "debulk/wrinkle2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "debulk/error.hpp"

namespace debulk {

using Eigen::VectorXd;

const char* to_string(EndCondition e) { return e == EndCondition::fixed ? "fixed" : "free"; }

EndCondition parse_end_condition(const std::string& s) {
  if (s == "fixed") return EndCondition::fixed;
  if (s == "free") return EndCondition::free;
  throw Error("unknown end condition '" + s + "'");
}

double MoldProfile2D::z(double x) const {
  if (radius <= 0.0) return 0.0;
  const double u = std::min(std::abs(x), radius);
  return std::sqrt(radius * radius - u * u) - radius;
}

double MoldProfile2D::slope(double x) const {
  if (radius <= 0.0) return 0.0;
  const double u = std::clamp(x, -0.999999 * radius, 0.999999 * radius);
  return -u / std::sqrt(radius * radius - u * u);
}

double chain_length(const std::vector<Vec2>& nodes) {
  double len = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k) len += (nodes[k] - nodes[k - 1]).norm();
  return len;
}

double Ply2D::length() const { return chain_length(nodes); }

void Ply2D::check(double tol_mm) const {
  if (nodes.size() < 3) throw Error("Ply2D: at least two segments required");
  if (rest_length.size() + 1 != nodes.size()) throw Error("Ply2D: one rest length per segment expected");
  for (const double l : rest_length) {
    if (!(l > 0.0)) throw Error("Ply2D: rest lengths must be > 0");
  }
  if (mold.radius < 0.0) throw Error("Ply2D: mold radius must be >= 0");
  for (const auto& p : nodes) {
    if (mold.z(p.x()) - p.y() > tol_mm) throw Error("Ply2D: chain below the mold");
  }
}

Ply2D Ply2D::from_polyline(const std::vector<Vec2>& points, int segments, EndCondition left, EndCondition right,
                           MoldProfile2D mold) {
  if (points.size() < 2) throw Error("Ply2D: polyline needs two points");
  if (segments < 2) throw Error("Ply2D: at least two segments required");
  std::vector<double> s(points.size(), 0.0);
  for (std::size_t k = 1; k < points.size(); ++k) s[k] = s[k - 1] + (points[k] - points[k - 1]).norm();
  const double total = s.back();
  if (!(total > 0.0)) throw Error("Ply2D: polyline has zero length");
  Ply2D ply;
  ply.left = left;
  ply.right = right;
  ply.mold = mold;
  std::size_t k = 1;
  for (int i = 0; i <= segments; ++i) {
    const double target = total * i / segments;
    while (k + 1 < points.size() && s[k] < target) ++k;
    const double f = std::clamp((target - s[k - 1]) / (s[k] - s[k - 1]), 0.0, 1.0);
    ply.nodes.push_back(points[k - 1] + f * (points[k] - points[k - 1]));
  }
  for (std::size_t i = 1; i < ply.nodes.size(); ++i) ply.rest_length.push_back((ply.nodes[i] - ply.nodes[i - 1]).norm());
  return ply;
}

Ply2D Ply2D::triangle(double spacing, double apex, int segments) {
  if (!(apex > 0.0) || !(spacing > apex)) throw Error("Ply2D: need spacing > apex > 0");
  const double half = std::sqrt(spacing * spacing - apex * apex);
  return from_polyline({Vec2(-half, 0.0), Vec2(0.0, apex), Vec2(half, 0.0)}, segments);
}

double Wrinkle2DResult::apex_height(const MoldProfile2D& mold) const {
  double h = -std::numeric_limits<double>::infinity();
  for (const auto& p : final_nodes()) h = std::max(h, p.y() - mold.z(p.x()));
  return h;
}

double Wrinkle2DResult::width_above(const MoldProfile2D& mold, double level) const {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : final_nodes()) {
    if (p.y() - mold.z(p.x()) > level) {
      lo = std::min(lo, p.x());
      hi = std::max(hi, p.x());
    }
  }
  return hi >= lo ? hi - lo : 0.0;
}

namespace {

/// One load step in scaled variables y = (X - X_start) / L, X in m.
class Chain2DProblem final : public ConstrainedProblem {
 public:
  Chain2DProblem(const Ply2D& ply, const MaterialParams& mat, std::vector<Vec2> start, double pressure)
      : ply_(ply), mat_(mat), start_(std::move(start)) {
    const std::size_t n = start_.size();
    double total = 0.0;
    for (const double l : ply.rest_length) total += l;
    length_ = 1e-3 * total / static_cast<double>(ply.segments());
    rest_.resize(ply.segments());
    for (std::size_t k = 0; k < rest_.size(); ++k) rest_[k] = 1e-3 * ply.rest_length[k];
    mass_.assign(n, 0.0);
    for (std::size_t k = 0; k < rest_.size(); ++k) {
      mass_[k] += 0.5 * mat.rho * mat.t * rest_[k];
      mass_[k + 1] += 0.5 * mat.rho * mat.t * rest_[k];
    }
    // Segment-normal pressure, half to each end, frozen for the step.
    force_.assign(n, Vec2::Zero());
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const Vec2 d = start_[k + 1] - start_[k];
      const Vec2 f = 0.5 * pressure * Vec2(d.y(), -d.x());
      force_[k] += f;
      force_[k + 1] += f;
    }
    energy_ = (mat.P * length_ + mat.rho * mat.t * length_ * mat.g) * length_;
    if (!(energy_ > 0.0)) energy_ = mat.bending_rigidity();
    floor_ = std::max(1e-6, 1e-3 * mat.bending_rigidity() / energy_);
    var_of_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const bool pinned = (i == 0 && ply.left == EndCondition::fixed) || (i + 1 == n && ply.right == EndCondition::fixed);
      if (!pinned) {
        var_of_[i] = static_cast<int>(free_.size());
        free_.push_back(static_cast<int>(i));
      }
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (var_of_[k] >= 0 || var_of_[k + 1] >= 0) segs_.push_back(static_cast<int>(k));
    }
    gap_ = 1e-3 * (ply.contact_gap < 0.0 ? 1e3 * mat.t : ply.contact_gap);
    if (gap_ > 0.0) {
      std::vector<double> arc(n, 0.0);
      for (std::size_t k = 0; k + 1 < n; ++k) arc[k + 1] = arc[k] + rest_[k];
      const double min_arc = 0.5 * std::numbers::pi * gap_;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          if (arc[j] - arc[i] < min_arc || (var_of_[i] < 0 && var_of_[j] < 0)) continue;
          pairs_.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
      }
    }
  }

  Eigen::Index num_variables() const override { return 2 * static_cast<Eigen::Index>(free_.size()); }
  Eigen::Index num_equalities() const override { return static_cast<Eigen::Index>(segs_.size()); }
  Eigen::Index num_inequalities() const override { return static_cast<Eigen::Index>(free_.size() + pairs_.size()); }
  double length_scale() const { return length_; }

  std::vector<Vec2> to_X(const VectorXd& y) const {
    std::vector<Vec2> X = start_;
    for (std::size_t v = 0; v < free_.size(); ++v) {
      X[static_cast<std::size_t>(free_[v])] += length_ * y.segment<2>(2 * static_cast<Eigen::Index>(v));
    }
    return X;
  }

  /// Potential in J/m with its gradient over all nodes.
  double potential(const std::vector<Vec2>& X, std::vector<Vec2>* g) const {
    const std::size_t n = X.size();
    if (g) g->assign(n, Vec2::Zero());
    const double D = mat_.bending_rigidity();
    double pi = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const Vec2 a = X[i] - X[i - 1], b = X[i + 1] - X[i];
      const double th = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
      pi += 0.5 * D * th * th;
      if (g) {
        const Vec2 da = -Vec2(-a.y(), a.x()) / a.squaredNorm();
        const Vec2 db = Vec2(-b.y(), b.x()) / b.squaredNorm();
        (*g)[i - 1] -= D * th * da;
        (*g)[i] += D * th * (da - db);
        (*g)[i + 1] += D * th * db;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      pi += mass_[i] * mat_.g * X[i].y() - force_[i].dot(X[i] - start_[i]);
      if (g) (*g)[i] += Vec2(0.0, mass_[i] * mat_.g) - force_[i];
    }
    return pi;
  }

  double objective(const VectorXd& y, VectorXd& grad) const override {
    const auto X = to_X(y);
    const double pi = potential(X, &g_);
    grad.resize(num_variables());
    for (std::size_t v = 0; v < free_.size(); ++v) {
      grad.segment<2>(2 * static_cast<Eigen::Index>(v)) = (length_ / energy_) * g_[static_cast<std::size_t>(free_[v])];
    }
    return pi / energy_;
  }

  void constraints(const VectorXd& y, VectorXd& eq, VectorXd& ineq) const override {
    const auto X = to_X(y);
    eq.resize(num_equalities());
    for (std::size_t e = 0; e < segs_.size(); ++e) {
      const auto k = static_cast<std::size_t>(segs_[e]);
      eq[static_cast<Eigen::Index>(e)] = ((X[k + 1] - X[k]).norm() - rest_[k]) / length_;
    }
    ineq.resize(num_inequalities());
    for (std::size_t v = 0; v < free_.size(); ++v) {
      const Vec2& p = X[static_cast<std::size_t>(free_[v])];
      ineq[static_cast<Eigen::Index>(v)] = (1e-3 * ply_.mold.z(1e3 * p.x()) - p.y()) / length_;
    }
    const auto off = static_cast<Eigen::Index>(free_.size());
    for (std::size_t q = 0; q < pairs_.size(); ++q) {
      const auto [i, j] = pairs_[q];
      ineq[off + static_cast<Eigen::Index>(q)] =
          (gap_ - (X[static_cast<std::size_t>(i)] - X[static_cast<std::size_t>(j)]).norm()) / length_;
    }
  }

  void add_jacobian_transpose(const VectorXd& y, const VectorXd& w_eq, const VectorXd& w_in,
                              VectorXd& grad) const override {
    const auto X = to_X(y);
    for (std::size_t e = 0; e < segs_.size(); ++e) {
      const double w = w_eq[static_cast<Eigen::Index>(e)];
      if (w == 0.0) continue;
      const auto k = static_cast<std::size_t>(segs_[e]);
      const Vec2 u = (X[k + 1] - X[k]).normalized();
      if (var_of_[k] >= 0) grad.segment<2>(2 * var_of_[k]) -= w * u;
      if (var_of_[k + 1] >= 0) grad.segment<2>(2 * var_of_[k + 1]) += w * u;
    }
    for (std::size_t v = 0; v < free_.size(); ++v) {
      const double w = w_in[static_cast<Eigen::Index>(v)];
      if (w == 0.0) continue;
      const Vec2& p = X[static_cast<std::size_t>(free_[v])];
      grad.segment<2>(2 * static_cast<Eigen::Index>(v)) += w * Vec2(ply_.mold.slope(1e3 * p.x()), -1.0);
    }
    const auto off = static_cast<Eigen::Index>(free_.size());
    for (std::size_t q = 0; q < pairs_.size(); ++q) {
      const double w = w_in[off + static_cast<Eigen::Index>(q)];
      if (w == 0.0) continue;
      const auto [i, j] = pairs_[q];
      const Vec2 u = pair_direction(X, i, j);
      if (var_of_[static_cast<std::size_t>(i)] >= 0) grad.segment<2>(2 * var_of_[static_cast<std::size_t>(i)]) -= w * u;
      if (var_of_[static_cast<std::size_t>(j)] >= 0) grad.segment<2>(2 * var_of_[static_cast<std::size_t>(j)]) += w * u;
    }
  }

  bool jacobian(const VectorXd& y, Eigen::SparseMatrix<double>& je, Eigen::SparseMatrix<double>& ji) const override {
    const auto X = to_X(y);
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t e = 0; e < segs_.size(); ++e) {
      const auto k = static_cast<std::size_t>(segs_[e]);
      const Vec2 u = (X[k + 1] - X[k]).normalized();
      for (int c = 0; c < 2; ++c) {
        if (var_of_[k] >= 0) t.emplace_back(static_cast<int>(e), 2 * var_of_[k] + c, -u[c]);
        if (var_of_[k + 1] >= 0) t.emplace_back(static_cast<int>(e), 2 * var_of_[k + 1] + c, u[c]);
      }
    }
    je.resize(num_equalities(), num_variables());
    je.setFromTriplets(t.begin(), t.end());
    t.clear();
    for (std::size_t v = 0; v < free_.size(); ++v) {
      const Vec2& p = X[static_cast<std::size_t>(free_[v])];
      t.emplace_back(static_cast<int>(v), 2 * static_cast<int>(v), ply_.mold.slope(1e3 * p.x()));
      t.emplace_back(static_cast<int>(v), 2 * static_cast<int>(v) + 1, -1.0);
    }
    for (std::size_t q = 0; q < pairs_.size(); ++q) {
      const auto [i, j] = pairs_[q];
      const Vec2 u = pair_direction(X, i, j);
      const int row = static_cast<int>(free_.size() + q);
      const int vi = var_of_[static_cast<std::size_t>(i)], vj = var_of_[static_cast<std::size_t>(j)];
      for (int c = 0; c < 2; ++c) {
        if (vi >= 0) t.emplace_back(row, 2 * vi + c, -u[c]);
        if (vj >= 0) t.emplace_back(row, 2 * vj + c, u[c]);
      }
    }
    ji.resize(num_inequalities(), num_variables());
    ji.setFromTriplets(t.begin(), t.end());
    return true;
  }

  void add_curvature(const VectorXd& y, const VectorXd& w_eq, std::vector<Eigen::Triplet<double>>& out) const override {
    const auto X = to_X(y);
    const auto add_block = [&](std::size_t a, std::size_t b, const Eigen::Matrix2d& h) {
      const int va = var_of_[a], vb = var_of_[b];
      if (va < 0 || vb < 0) return;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) out.emplace_back(2 * va + r, 2 * vb + c, h(r, c));
      }
    };
    for (std::size_t e = 0; e < segs_.size(); ++e) {
      const double w = w_eq[static_cast<Eigen::Index>(e)];
      if (!(w > 0.0)) continue;
      const auto k = static_cast<std::size_t>(segs_[e]);
      const Vec2 d = (X[k + 1] - X[k]) / length_;
      const double len = d.norm();
      const Eigen::Matrix2d h = w / len * (Eigen::Matrix2d::Identity() - d * d.transpose() / (len * len));
      add_block(k, k, h);
      add_block(k + 1, k + 1, h);
      add_block(k, k + 1, -h);
      add_block(k + 1, k, -h);
    }
    // Gauss-Newton bending.
    const double s = mat_.bending_rigidity() * length_ * length_ / energy_;
    for (std::size_t i = 1; i + 1 < X.size(); ++i) {
      const Vec2 a = X[i] - X[i - 1], b = X[i + 1] - X[i];
      const Vec2 da = -Vec2(-a.y(), a.x()) / a.squaredNorm();
      const Vec2 db = Vec2(-b.y(), b.x()) / b.squaredNorm();
      const std::size_t idx[3] = {i - 1, i, i + 1};
      const Vec2 gr[3] = {-da, da - db, db};
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) add_block(idx[r], idx[c], s * gr[r] * gr[c].transpose());
      }
    }
  }

  double curvature_floor() const override { return floor_; }

  double max_length_residual(const std::vector<Vec2>& X) const {
    double r = 0.0;
    for (const int k : segs_) {
      const auto uk = static_cast<std::size_t>(k);
      r = std::max(r, std::abs((X[uk + 1] - X[uk]).norm() - rest_[uk]));
    }
    return r;
  }

  double max_penetration(const std::vector<Vec2>& X) const {
    double r = 0.0;
    for (const int i : free_) {
      const Vec2& p = X[static_cast<std::size_t>(i)];
      r = std::max(r, 1e-3 * ply_.mold.z(1e3 * p.x()) - p.y());
    }
    return r;
  }

  /// Largest self-contact overlap, m.
  double max_overlap(const std::vector<Vec2>& X) const {
    double r = 0.0;
    for (const auto& [i, j] : pairs_) {
      r = std::max(r, gap_ - (X[static_cast<std::size_t>(i)] - X[static_cast<std::size_t>(j)]).norm());
    }
    return r;
  }

 private:
  const Ply2D& ply_;
  const MaterialParams& mat_;
  std::vector<Vec2> start_;
  std::vector<double> rest_;
  std::vector<double> mass_;
  std::vector<Vec2> force_;
  double length_ = 1.0;
  double energy_ = 1.0;
  double floor_ = 1.0;
  std::vector<int> var_of_;
  std::vector<int> free_;
  std::vector<int> segs_;
  double gap_ = 0.0;
  std::vector<std::pair<int, int>> pairs_;
  mutable std::vector<Vec2> g_;

  static Vec2 pair_direction(const std::vector<Vec2>& X, int i, int j) {
    const Vec2 d = X[static_cast<std::size_t>(i)] - X[static_cast<std::size_t>(j)];
    const double len = d.norm();
    return len > 0.0 ? Vec2(d / len) : Vec2(0.0, 1.0);
  }
};

std::vector<Vec2> scaled(const std::vector<Vec2>& v, double s) {
  std::vector<Vec2> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [s](const Vec2& p) { return Vec2(p * s); });
  return out;
}

bool reverses(const std::vector<Vec2>& X) {
  for (std::size_t k = 1; k < X.size(); ++k) {
    if (X[k].x() <= X[k - 1].x()) return true;
  }
  return false;
}

}  // namespace

Wrinkle2DResult simulate_2d(const Ply2D& ply, const MaterialParams& mat, int steps, const SolverConfig* user_cfg) {
  if (steps < 1) throw Error("simulate_2d: steps must be >= 1");
  mat.check();
  SolverConfig cfg;
  cfg.constraint_tol = 1e-10;
  if (user_cfg) cfg = *user_cfg;
  cfg.check();
  ply.check(1e3 * cfg.constraint_tol + 1e-9);

  Wrinkle2DResult out;
  const double longest = *std::max_element(ply.rest_length.begin(), ply.rest_length.end());
  if (longest > 1e3 * mat.t) out.warnings.push_back("segments longer than the ply thickness: folds are under-resolved");
  Wrinkle2DStep s0;
  s0.nodes = ply.nodes;
  s0.converged = true;
  out.steps.push_back(s0);
  std::vector<Vec2> X = scaled(ply.nodes, 1e-3);
  for (int s = 1; s <= steps; ++s) {
    const double p = mat.P * s / steps;
    const Chain2DProblem problem(ply, mat, X, p);
    const VectorXd y0 = VectorXd::Zero(problem.num_variables());
    const auto al = minimize_augmented_lagrangian(problem, y0, cfg, 0.1 * cfg.constraint_tol / problem.length_scale());
    Wrinkle2DStep st;
    st.step = s;
    st.pressure = p;
    st.energy_at_start = problem.potential(X, nullptr);
    std::vector<Vec2> Xs = problem.to_X(al.y);
    st.energy = problem.potential(Xs, nullptr);
    const bool start_ok = problem.max_length_residual(X) <= cfg.constraint_tol &&
                          problem.max_penetration(X) <= cfg.constraint_tol &&
                          problem.max_overlap(X) <= cfg.constraint_tol;
    if (st.energy > st.energy_at_start && start_ok) {
      Xs = X;
      st.energy = st.energy_at_start;
    }
    st.iterations = al.inner_iterations;
    st.function_evaluations = al.function_evaluations;
    st.max_length_residual = problem.max_length_residual(Xs);
    st.max_penetration = problem.max_penetration(Xs);
    st.max_overlap = problem.max_overlap(Xs);
    st.converged = al.converged && st.max_length_residual <= cfg.constraint_tol &&
                   st.max_penetration <= cfg.constraint_tol && st.max_overlap <= cfg.constraint_tol;
    st.nodes = scaled(Xs, 1e3);
    X = std::move(Xs);
    if (!st.converged) {
      out.converged = false;
      out.warnings.push_back("load step " + std::to_string(s) + " did not converge");
    }
    if (reverses(X)) out.folded = true;
    out.steps.push_back(std::move(st));
    if (!out.converged) break;
  }
  if (out.folded) out.warnings.push_back("chain folded past vertical tangency");
  return out;
}

}  // namespace debulk
