#include <doctest.h>

#include <cmath>

#include "debulk/optimizer.hpp"
#include "support.hpp"

using namespace debulk;
using Eigen::VectorXd;

namespace {

// min (x - 2)^2 + (y - 1)^2  s.t.  x + y = 2,  x - 0.5 <= 0
struct Toy : ConstrainedProblem {
  Eigen::Index num_variables() const override { return 2; }
  Eigen::Index num_equalities() const override { return 1; }
  Eigen::Index num_inequalities() const override { return 1; }
  double objective(const VectorXd& y, VectorXd& g) const override {
    g = VectorXd(2);
    g << 2 * (y[0] - 2), 2 * (y[1] - 1);
    return (y[0] - 2) * (y[0] - 2) + (y[1] - 1) * (y[1] - 1);
  }
  void constraints(const VectorXd& y, VectorXd& eq, VectorXd& in) const override {
    eq = VectorXd::Constant(1, y[0] + y[1] - 2);
    in = VectorXd::Constant(1, y[0] - 0.5);
  }
  void add_jacobian_transpose(const VectorXd&, const VectorXd& we, const VectorXd& wi, VectorXd& g) const override {
    g[0] += we[0] + wi[0];
    g[1] += we[0];
  }
};

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("L-BFGS finds the Rosenbrock minimum") {
    auto rosen = [](const VectorXd& x, VectorXd& g) {
      g = VectorXd(2);
      g << -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] * x[0]), 200 * (x[1] - x[0] * x[0]);
      return (1 - x[0]) * (1 - x[0]) + 100 * std::pow(x[1] - x[0] * x[0], 2);
    };
    VectorXd x0(2);
    x0 << -1.2, 1.0;
    const UnconstrainedResult r = minimize_lbfgs(rosen, x0, 1e-10, 500);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.grad_inf <= 1e-8);
  }

  TEST_CASE("augmented Lagrangian meets the KKT point of a toy problem") {
    // Active inequality: x = 0.5, y = 1.5; multipliers from stationarity.
    SolverConfig cfg;
    cfg.stationarity_tol = 1e-9;
    const AugLagResult r = minimize_augmented_lagrangian(Toy{}, VectorXd::Zero(2), cfg, 1e-10);
    REQUIRE(r.converged);
    CHECK(r.y[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(r.y[1] == doctest::Approx(1.5).epsilon(1e-7));
    CHECK(r.eq_multipliers[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(r.ineq_multipliers[0] == doctest::Approx(4.0).epsilon(1e-5));
  }

  TEST_CASE("pocket net solve is feasible, lowers the potential and is deterministic") {
    const PlyNet net = testing::lattice_net(7, 5.0, [](double x, double y) {
      const double r = std::hypot(x, y);
      return r < 15.0 ? 2.0 * (1 + std::cos(M_PI * r / 15.0)) / 2.0 : 0.0;
    });
    const ReferenceSurface ref = ReferenceSurface::flat(Vec2(-40, -40), Vec2(40, 40), 1.0);
    int traced = 0;
    SolverConfig cfg;
    cfg.trace = [&](int, double, double, double, double) { ++traced; };
    const SolveResult a = solve(net, MaterialParams{}, ref, cfg);
    REQUIRE(a.converged);
    CHECK(traced > 0);
    CHECK(a.pi_final <= a.pi_initial);
    const Residuals r = constraint_residuals(net, a.X_final, ref);
    const auto t = testing::recompute_residuals(net, a.X_final, ref);
    CHECK(r.max_equality == doctest::Approx(t.max_length_error));
    CHECK(t.max_length_error <= 1e-6);
    CHECK(t.max_penetration <= 1e-6);
    const SolveResult b = solve(net, MaterialParams{}, ref, SolverConfig{});
    CHECK(a.X_final == b.X_final);
  }

  TEST_CASE("nodes under the mold are lifted before solving") {
    PlyNet net = testing::lattice_net(5, 5.0, [](double, double) { return 0.0; });
    net.nodes[12].z() = -0.5;
    const ReferenceSurface ref = ReferenceSurface::flat(Vec2(-20, -20), Vec2(20, 20), 1.0);
    const SolveResult r = solve(net, MaterialParams{}, ref, SolverConfig{});
    CHECK(r.X_initial[3 * 12 + 2] == doctest::Approx(0.0));
    CHECK_FALSE(r.warnings.empty());
  }

  TEST_CASE("solver config validation") {
    SolverConfig c;
    c.penalty_growth = 1.0;
    CHECK_THROWS_AS(c.check(), Error);
    c = SolverConfig{};
    c.constraint_tol = 0.0;
    CHECK_THROWS_AS(c.check(), Error);
    c = SolverConfig{};
    c.load_steps = 0;
    CHECK_THROWS_AS(c.check(), Error);
  }
}
