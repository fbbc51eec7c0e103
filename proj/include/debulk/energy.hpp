#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <vector>

#include "debulk/meshing.hpp"

namespace debulk {

/// Prepreg and load parameters, SI units.
struct MaterialParams {
  double t = 0.3e-3;     // ply thickness, m
  double E = 3.6e8;      // bending-equivalent Young's modulus, Pa
  double G = 4.0e7;      // shear modulus, Pa
  double rho = 1048.0;   // density, kg/m^3
  double mu = 0.4;       // friction coefficient
  double beta = 1.2;     // bulk factor
  double P = 1.0e5;      // vacuum pressure, Pa
  double g = 9.81;       // m/s^2

  /// Zero friction, pressure and gravity are accepted; the rest must be positive.
  void check() const;
  double bending_rigidity() const { return E * t * t * t / 12.0; }
  double consolidated_thickness() const { return t / beta; }
};

/// The net in SI units together with the data the energy terms need.
struct EnergyModel {
  std::vector<std::array<int, 4>> neighbors;
  std::vector<NodeClass> node_class;
  std::vector<std::pair<int, int>> edges;
  double spacing = 0.0;   // m
  double area = 0.0;      // A_patch,ply, m^2
  MaterialParams mat;
  double friction_eps = 1e-6;  // m, smoothing of |delta| in the friction term

  static EnergyModel from_net(const PlyNet& net, const MaterialParams& mat);

  std::size_t size() const { return neighbors.size(); }
  double nodal_mass() const { return area * mat.t * mat.rho / static_cast<double>(size()); }
  double nodal_pressure_force() const { return mat.P * area / static_cast<double>(size()); }
};

/// Flat coordinate vector [x1 y1 z1 ... xN yN zN] in metres from net nodes in mm.
Eigen::VectorXd to_configuration(const PlyNet& net);

struct EnergyGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

struct ExternalEnergies {
  EnergyGrad gravity;
  EnergyGrad vacuum;
  EnergyGrad friction;
};

/// Out-of-plane bending, per node 1/2 (E t^3 / 12) [(2 psi1)^2 + (2 psi2)^2].
EnergyGrad bend_energy(const EnergyModel& model, const Eigen::VectorXd& X);

/// In-plane shear, per node 1/2 G (spacing / 2)^2 t sum_j (pi/2 - phi_j)^2.
EnergyGrad shear_energy(const EnergyModel& model, const Eigen::VectorXd& X);

/// Gravity and vacuum work on non-fixed nodes for downward movement z_ini - z, and
/// the sliding friction of free boundary nodes.
ExternalEnergies external_energies(const EnergyModel& model, const Eigen::VectorXd& X,
                                   const Eigen::VectorXd& X_ini);

/// Pi = bend + shear + friction - gravity - vacuum. Gradient entries of fixed nodes are zero.
EnergyGrad total_potential(const EnergyModel& model, const Eigen::VectorXd& X,
                           const Eigen::VectorXd& X_ini);

/// Allocation-light variant used by the optimizer; returns Pi and writes the gradient.
double total_potential(const EnergyModel& model, const Eigen::VectorXd& X,
                       const Eigen::VectorXd& X_ini, Eigen::VectorXd& grad);

struct NodeEnergy {
  double bend = 0.0, shear = 0.0, gravity = 0.0, vacuum = 0.0, friction = 0.0;
  double total() const { return bend + shear + friction - gravity - vacuum; }
};

/// Per-node breakdown (debug dump).
std::vector<NodeEnergy> energy_breakdown(const EnergyModel& model, const Eigen::VectorXd& X,
                                         const Eigen::VectorXd& X_ini);
void write_energy_table(std::ostream& os, const std::vector<NodeEnergy>& rows);

}  // namespace debulk
