#include "debulk/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace debulk {

using Eigen::VectorXd;

void MaterialParams::check() const {
  if (!(t > 0.0) || !(E > 0.0) || !(G > 0.0) || !(rho > 0.0)) {
    throw Error("material: t, E, G and rho must be positive");
  }
  if (!(mu >= 0.0) || !(P >= 0.0) || !(g >= 0.0)) throw Error("material: mu, P and g must be >= 0");
  if (!(beta >= 1.0)) throw Error("material: bulk factor must be >= 1");
}

EnergyModel EnergyModel::from_net(const PlyNet& net, const MaterialParams& mat) {
  mat.check();
  if (net.nodes.empty()) throw Error("energy model: empty net");
  EnergyModel m;
  m.neighbors = net.neighbors;
  m.node_class = net.node_class;
  m.edges = net.edges;
  m.spacing = net.spacing * 1e-3;
  m.area = net.patch_area_m2;
  m.mat = mat;
  return m;
}

VectorXd to_configuration(const PlyNet& net) {
  VectorXd X(3 * static_cast<Eigen::Index>(net.nodes.size()));
  for (std::size_t i = 0; i < net.nodes.size(); ++i) X.segment<3>(3 * static_cast<Eigen::Index>(i)) = net.nodes[i] * 1e-3;
  return X;
}

namespace {

inline Vec3 node(const VectorXd& X, int i) { return X.segment<3>(3 * static_cast<Eigen::Index>(i)); }
inline void add(VectorXd& g, int i, const Vec3& v) { g.segment<3>(3 * static_cast<Eigen::Index>(i)) += v; }

struct AngleGrad {
  double angle;
  Vec3 du;  // d angle / d u
  Vec3 dv;  // d angle / d v
  double inv_sin;
};

/// Angle between u and v with its gradient; `inv_sin` is the 1/sin factor used by
/// callers that cancel the singularity at zero angle.
AngleGrad angle_between(const Vec3& u, const Vec3& v, double min_len) {
  const double lu = u.norm(), lv = v.norm();
  if (lu < min_len || lv < min_len) throw Error("degenerate segment");
  const Vec3 uh = u / lu, vh = v / lv;
  const double c = std::clamp(uh.dot(vh), -1.0, 1.0);
  const double s = uh.cross(vh).norm();
  AngleGrad ag{};
  ag.angle = std::atan2(s, c);
  ag.inv_sin = 1.0 / std::max(s, 1e-300);
  // d angle = -(1/sin) dc, dc/du = (vh - c uh) / lu.
  ag.du = -(vh - c * uh) / lu;
  ag.dv = -(uh - c * vh) / lv;
  return ag;
}

/// theta / sin(theta), finite at zero.
inline double theta_over_sin(double theta) {
  return theta < 1e-4 ? 1.0 + theta * theta / 6.0 : theta / std::sin(theta);
}

double bend_accumulate(const EnergyModel& m, const VectorXd& X, VectorXd* grad, std::vector<NodeEnergy>* rows) {
  const double coef = 0.5 * m.mat.bending_rigidity();
  const double min_len = 1e-12 * std::max(m.spacing, 1e-12);
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& nb = m.neighbors[i];
    for (int fam = 0; fam < 2; ++fam) {
      const int next = nb[static_cast<std::size_t>(2 * fam)];
      const int prev = nb[static_cast<std::size_t>(2 * fam + 1)];
      if (next < 0 || prev < 0) continue;
      const Vec3 xi = node(X, static_cast<int>(i));
      const Vec3 a = xi - node(X, prev);
      const Vec3 b = node(X, next) - xi;
      const AngleGrad ag = angle_between(a, b, min_len);
      // (2 psi)^2 = theta^2
      const double e = coef * ag.angle * ag.angle;
      total += e;
      if (rows) (*rows)[i].bend += e;
      if (grad) {
        // d(theta^2) = 2 (theta / sin theta) * du, finite at theta = 0.
        const double k = 2.0 * coef * theta_over_sin(ag.angle);
        const Vec3 ga = k * ag.du;
        const Vec3 gb = k * ag.dv;
        add(*grad, prev, -ga);
        add(*grad, static_cast<int>(i), ga - gb);
        add(*grad, next, gb);
      }
    }
  }
  return total;
}

double shear_accumulate(const EnergyModel& m, const VectorXd& X, VectorXd* grad, std::vector<NodeEnergy>* rows) {
  const double half = 0.5 * m.spacing;
  const double coef = 0.5 * m.mat.G * half * half * m.mat.t;
  const double min_len = 1e-12 * std::max(m.spacing, 1e-12);
  constexpr int corners[4][2] = {{kFiber1Next, kFiber2Next},
                                 {kFiber2Next, kFiber1Prev},
                                 {kFiber1Prev, kFiber2Prev},
                                 {kFiber2Prev, kFiber1Next}};
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& nb = m.neighbors[i];
    const Vec3 xi = node(X, static_cast<int>(i));
    for (const auto& cn : corners) {
      const int j1 = nb[static_cast<std::size_t>(cn[0])];
      const int j2 = nb[static_cast<std::size_t>(cn[1])];
      if (j1 < 0 || j2 < 0) continue;
      const Vec3 e1 = node(X, j1) - xi;
      const Vec3 e2 = node(X, j2) - xi;
      const AngleGrad ag = angle_between(e1, e2, min_len);
      const double gamma = 0.5 * std::numbers::pi - ag.angle;
      const double e = coef * gamma * gamma;
      total += e;
      if (rows) (*rows)[i].shear += e;
      if (grad) {
        // d(gamma^2) = -2 gamma dphi, dphi = inv_sin * du . de
        const double k = -2.0 * coef * gamma * ag.inv_sin;
        const Vec3 g1 = k * ag.du;
        const Vec3 g2 = k * ag.dv;
        add(*grad, j1, g1);
        add(*grad, j2, g2);
        add(*grad, static_cast<int>(i), -g1 - g2);
      }
    }
  }
  return total;
}

struct ExternalSums {
  double gravity = 0.0, vacuum = 0.0, friction = 0.0;
};

/// Gradients are written per term when the pointers are non-null.
ExternalSums external_accumulate(const EnergyModel& m, const VectorXd& X, const VectorXd& X0,
                                 VectorXd* ggrav, VectorXd* gvac, VectorXd* gfric,
                                 std::vector<NodeEnergy>* rows) {
  const double fg = m.nodal_mass() * m.mat.g;
  const double fp = m.nodal_pressure_force();
  const double ff = m.mat.mu * fp;
  const double eps = m.friction_eps;
  ExternalSums s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.node_class[i] == NodeClass::fixed_boundary) continue;
    const auto k = 3 * static_cast<Eigen::Index>(i);
    const double drop = X0[k + 2] - X[k + 2];
    s.gravity += fg * drop;
    s.vacuum += fp * drop;
    if (ggrav) (*ggrav)[k + 2] -= fg;
    if (gvac) (*gvac)[k + 2] -= fp;
    if (rows) {
      (*rows)[i].gravity = fg * drop;
      (*rows)[i].vacuum = fp * drop;
    }
    if (m.node_class[i] == NodeClass::free_boundary && ff > 0.0) {
      const Vec3 d = X.segment<3>(k) - X0.segment<3>(k);
      const double r = std::sqrt(d.squaredNorm() + eps * eps);
      const double e = ff * (r - eps);
      s.friction += e;
      if (rows) (*rows)[i].friction = e;
      if (gfric) gfric->segment<3>(k) += ff * d / r;
    }
  }
  return s;
}

void zero_fixed(const EnergyModel& m, VectorXd& g) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.node_class[i] == NodeClass::fixed_boundary) g.segment<3>(3 * static_cast<Eigen::Index>(i)).setZero();
  }
}

void check_sizes(const EnergyModel& m, const VectorXd& X) {
  if (X.size() != 3 * static_cast<Eigen::Index>(m.size())) throw Error("configuration length must be 3N");
}

}  // namespace

EnergyGrad bend_energy(const EnergyModel& model, const VectorXd& X) {
  check_sizes(model, X);
  EnergyGrad r{0.0, VectorXd::Zero(X.size())};
  r.value = bend_accumulate(model, X, &r.grad, nullptr);
  return r;
}

EnergyGrad shear_energy(const EnergyModel& model, const VectorXd& X) {
  check_sizes(model, X);
  EnergyGrad r{0.0, VectorXd::Zero(X.size())};
  r.value = shear_accumulate(model, X, &r.grad, nullptr);
  return r;
}

ExternalEnergies external_energies(const EnergyModel& model, const VectorXd& X, const VectorXd& X_ini) {
  check_sizes(model, X);
  check_sizes(model, X_ini);
  ExternalEnergies e;
  e.gravity.grad = VectorXd::Zero(X.size());
  e.vacuum.grad = VectorXd::Zero(X.size());
  e.friction.grad = VectorXd::Zero(X.size());
  const auto s = external_accumulate(model, X, X_ini, &e.gravity.grad, &e.vacuum.grad, &e.friction.grad, nullptr);
  e.gravity.value = s.gravity;
  e.vacuum.value = s.vacuum;
  e.friction.value = s.friction;
  return e;
}

double total_potential(const EnergyModel& model, const VectorXd& X, const VectorXd& X_ini, VectorXd& grad) {
  check_sizes(model, X);
  check_sizes(model, X_ini);
  grad.setZero(X.size());
  VectorXd gext = VectorXd::Zero(X.size());
  double pi = bend_accumulate(model, X, &grad, nullptr);
  pi += shear_accumulate(model, X, &grad, nullptr);
  // The external terms enter with a minus sign, friction with a plus sign; the
  // friction gradient is accumulated directly and the load gradients subtracted.
  const auto s = external_accumulate(model, X, X_ini, &gext, &gext, &grad, nullptr);
  pi += s.friction - s.gravity - s.vacuum;
  grad -= gext;
  zero_fixed(model, grad);
  return pi;
}

EnergyGrad total_potential(const EnergyModel& model, const VectorXd& X, const VectorXd& X_ini) {
  EnergyGrad r;
  r.value = total_potential(model, X, X_ini, r.grad);
  return r;
}

std::vector<NodeEnergy> energy_breakdown(const EnergyModel& model, const VectorXd& X, const VectorXd& X_ini) {
  check_sizes(model, X);
  std::vector<NodeEnergy> rows(model.size());
  bend_accumulate(model, X, nullptr, &rows);
  shear_accumulate(model, X, nullptr, &rows);
  external_accumulate(model, X, X_ini, nullptr, nullptr, nullptr, &rows);
  return rows;
}

void write_energy_table(std::ostream& os, const std::vector<NodeEnergy>& rows) {
  os << "node,bend,shear,gravity,vacuum,friction,total\n";
  os.precision(10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i << ',' << r.bend << ',' << r.shear << ',' << r.gravity << ',' << r.vacuum << ','
       << r.friction << ',' << r.total() << '\n';
  }
}

}  // namespace debulk
