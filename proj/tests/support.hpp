#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "debulk/energy.hpp"
#include "debulk/meshing.hpp"
#include "debulk/scan_prep.hpp"
#include "debulk/synth.hpp"

namespace testing {

using debulk::NodeClass;
using debulk::PlyNet;
using debulk::Vec3;

// n x n lattice centred on the origin with nodes lifted onto z(x, y), all mm.
// The outer ring is fixed; with free_edge the +x column is free instead.
inline PlyNet lattice_net(int n, double spacing, const std::function<double(double, double)>& z,
                          bool free_edge = false) {
  PlyNet net;
  const double c = 0.5 * (n - 1);
  auto id = [n](int a, int b) { return (a < 0 || b < 0 || a >= n || b >= n) ? -1 : b * n + a; };
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      const double x = (a - c) * spacing, y = (b - c) * spacing;
      net.nodes.emplace_back(x, y, z(x, y));
      net.neighbors.push_back({id(a + 1, b), id(a - 1, b), id(a, b + 1), id(a, b - 1)});
      net.lattice.push_back({a - n / 2, b - n / 2});
      const bool rim = a == 0 || b == 0 || a == n - 1 || b == n - 1;
      NodeClass cls = rim ? NodeClass::fixed_boundary : NodeClass::interior;
      if (free_edge && a == n - 1 && b > 0 && b < n - 1) cls = NodeClass::free_boundary;
      net.node_class.push_back(cls);
    }
  }
  net.spacing = spacing;
  net.patch_area_m2 = std::pow((n - 1) * spacing * 1e-3, 2);
  net.rebuild_edges();
  return net;
}

// Central differences of total_potential over the non-fixed coordinates.
inline Eigen::VectorXd fd_gradient(const debulk::EnergyModel& model, const Eigen::VectorXd& X,
                                   const Eigen::VectorXd& X_ini, double h) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(X.size());
  Eigen::VectorXd Y = X;
  for (Eigen::Index k = 0; k < X.size(); ++k) {
    if (model.node_class[static_cast<std::size_t>(k / 3)] == NodeClass::fixed_boundary) continue;
    Y[k] = X[k] + h;
    const double fp = debulk::total_potential(model, Y, X_ini).value;
    Y[k] = X[k] - h;
    const double fm = debulk::total_potential(model, Y, X_ini).value;
    Y[k] = X[k];
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Perturbs every non-fixed node by up to `amp` metres per axis.
inline Eigen::VectorXd perturb(const PlyNet& net, const Eigen::VectorXd& X, double amp, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd Y = X;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.node_class[i] == NodeClass::fixed_boundary) continue;
    for (int d = 0; d < 3; ++d) Y[static_cast<Eigen::Index>(3 * i) + d] += u(rng);
  }
  return Y;
}

struct Recomputed {
  double max_length_error = 0.0;  // m
  double max_penetration = 0.0;   // m
};

// Edge lengths from the neighbour table and heights against the mold, straight from X.
inline Recomputed recompute_residuals(const PlyNet& net, const Eigen::VectorXd& X, const debulk::ReferenceSurface& ref) {
  Recomputed r;
  const double L = net.spacing * 1e-3;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Vec3 p = X.segment<3>(static_cast<Eigen::Index>(3 * i));
    for (int s : {debulk::kFiber1Next, debulk::kFiber2Next}) {
      const int j = net.neighbors[i][static_cast<std::size_t>(s)];
      if (j < 0) continue;
      if (net.node_class[i] == NodeClass::fixed_boundary &&
          net.node_class[static_cast<std::size_t>(j)] == NodeClass::fixed_boundary)
        continue;
      const Vec3 q = X.segment<3>(3 * static_cast<Eigen::Index>(j));
      r.max_length_error = std::max(r.max_length_error, std::abs((p - q).norm() - L));
    }
    if (net.node_class[i] == NodeClass::fixed_boundary) continue;
    const double floor = ref.eval(p.x() * 1e3, p.y() * 1e3) * 1e-3;
    r.max_penetration = std::max(r.max_penetration, floor - p.z());
  }
  return r;
}

inline debulk::SceneSpec one_bump(double peak, double radius,
                                  debulk::BumpProfile profile = debulk::BumpProfile::cosine) {
  debulk::SceneSpec s;
  s.pockets.push_back({debulk::Vec2(0.0, 0.0), debulk::Vec2(radius, radius), peak, profile});
  return s;
}

}  // namespace testing
