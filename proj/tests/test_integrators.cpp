#include <gtest/gtest.h>

#include "beamvi/integrators.hpp"
#include "test_util.hpp"

namespace beamvi {
namespace {

using testing::Sampler;

BeamParams free_beam() { return build_params(1e3, 0.01, 1.0, 5e3, 0.35, Vec3::Zero(), 0.0005, 0.1, 3.0); }
BeamParams scenario_a() { return build_params(1e3, 0.01, 0.8, 5e4, 0.35, Vec3::Zero(), 0.05, 0.05, 10.0); }

AlgebraVector av(double a, double b, double c, double d, double e, double f) {
  return AlgebraVector(Vec6((Vec6() << a, b, c, d, e, f).finished()));
}

std::pair<std::vector<GroupElement>, std::vector<GroupElement>> free_beam_rows(const BeamParams& p) {
  const int A = p.last_node();
  const std::vector<AlgebraVector> e0(A, av(1, 1.5, 1, 0, 0, 1)), e1(A, av(1.004, 1.52, 1.005, -0.01, 0, 1));
  return build_from_boundary_time(GroupElement::identity(), {Rotation::identity(), Vec3(0, 0, p.dt)}, e0, e1, p.ds);
}

std::pair<std::vector<GroupElement>, std::vector<GroupElement>> scenario_a_columns(const BeamParams& p) {
  const int N = p.N_steps;
  const std::vector<AlgebraVector> x0(N, av(0, -2, 0, 0, -0.1, 0)),
      x1(N, av(0.007, -1.998, -0.007, -0.08, -0.1, 0));
  return build_from_boundary_space(GroupElement::identity(), {Rotation::identity(), Vec3(0, 0, p.ds)}, x0, x1, p.dt);
}

std::vector<GroupElement> straight(int n, double ds) {
  std::vector<GroupElement> out;
  for (int a = 0; a < n; ++a) out.push_back({Rotation::identity(), Vec3(0, 0, ds * a)});
  return out;
}

// ---------------------------------------------------------------------------

TEST(LegendreJacobian, DerivativeOfDualMatchesDifferences) {
  Sampler s;
  const double h = 1e-6;
  for (int i = 0; i < 300; ++i) {
    const AlgebraVector y = s.algebra(2.0, 2.0);
    const CoAlgebraVector v = s.coalgebra();
    const Mat6 analytic = detail::dtau_inv_star_derivative(y, v);
    for (int k = 0; k < 6; ++k) {
      const AlgebraVector d(Vec6(h * Vec6::Unit(k)));
      const Vec6 fd = (dtau_inv_star(y + d, v).v - dtau_inv_star(y - d, v).v) / (2 * h);
      EXPECT_LT((analytic.col(k) - fd).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(LegendreTime, ZeroMomentumGivesZeroVelocity) {
  const BeamParams p = free_beam();
  EXPECT_LT(legendre_solve_time(CoAlgebraVector::zero(), p, av(0.1, 0, 0, 0, 0.2, 0)).v.norm(), 1e-14);
}

TEST(LegendreTime, RoundTripAndIterationCount) {
  for (const BeamParams& p : {free_beam(), scenario_a()}) {
    Sampler s;
    NewtonStats stats;
    for (int i = 0; i < 1000; ++i) {
      const AlgebraVector xi = s.algebra(5.0, 3.0);
      const CoAlgebraVector mu = legendre_forward_time(xi, p);
      const AlgebraVector solved = legendre_solve_time(mu, p, AlgebraVector::zero(), {}, &stats);
      ASSERT_LT((solved.v - xi.v).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_LE(stats.max_iterations, 10);
    EXPECT_EQ(stats.solves, 1000);
  }
}

TEST(LegendreTime, SmallStepLimitIsInverseInertia) {
  BeamParams p = free_beam();
  p.dt = 1e-9;
  const CoAlgebraVector mu(Vec6((Vec6() << 1e-6, -2e-6, 3e-6, 0.01, -0.02, 0.05).finished()));
  const AlgebraVector xi = legendre_solve_time(mu, p, AlgebraVector::zero());
  const Vec6 expected = mu.v.cwiseQuotient(p.inertia_diag());
  EXPECT_LT((xi.v - expected).cwiseAbs().maxCoeff() / expected.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LegendreSpace, ZeroStressGivesReferenceStrain) {
  const BeamParams p = free_beam();
  EXPECT_LT((legendre_solve_space(CoAlgebraVector::zero(), p, av(0.5, 0, 0, 0, 0, 1.2)).v - kE6.v).norm(), 1e-14);
}

TEST(LegendreSpace, RoundTripAndIterationCount) {
  for (const BeamParams& p : {free_beam(), scenario_a()}) {
    Sampler s(7);
    NewtonStats stats;
    for (int i = 0; i < 1000; ++i) {
      const AlgebraVector eta = kE6 + s.algebra(3.0, 0.5);
      const CoAlgebraVector lambda = legendre_forward_space(eta, p);
      const AlgebraVector solved = legendre_solve_space(lambda, p, kE6, {}, &stats);
      ASSERT_LT((solved.v - eta.v).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_LE(stats.max_iterations, 10);
  }
}

TEST(LegendreSpace, SmallStepLimitIsInverseStiffness) {
  BeamParams p = free_beam();
  p.ds = 1e-13;
  const CoAlgebraVector lambda(Vec6((Vec6() << 1e-8, 2e-8, -1e-8, 1e-3, 2e-3, -3e-3).finished()));
  const AlgebraVector eta = legendre_solve_space(lambda, p, kE6);
  const Vec6 expected = kE6.v + lambda.v.cwiseQuotient(p.stiffness_diag());
  EXPECT_LT((eta.v - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Legendre, FiniteDifferenceJacobianAgrees) {
  const BeamParams p = free_beam();
  Sampler s(3);
  NewtonOptions fd;
  fd.fd_jacobian = true;
  for (int i = 0; i < 100; ++i) {
    const AlgebraVector xi = s.algebra(4.0, 2.0);
    const CoAlgebraVector mu = legendre_forward_time(xi, p);
    const AlgebraVector a = legendre_solve_time(mu, p, AlgebraVector::zero());
    const AlgebraVector b = legendre_solve_time(mu, p, AlgebraVector::zero(), fd);
    EXPECT_LT((a.v - b.v).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Legendre, DivergenceIsReported) {
  const BeamParams p = free_beam();
  NewtonOptions tight;
  tight.max_iter = 1;
  const CoAlgebraVector mu = legendre_forward_time(av(3, -2, 1, 0.5, 0.2, 0.1), p);
  EXPECT_THROW(legendre_solve_time(mu, p, AlgebraVector::zero(), tight), NewtonDivergence);
}

// ---------------------------------------------------------------------------

TEST(TimeMarch, EquilibriumIsFixedPoint) {
  const BeamParams p = free_beam();
  const auto row = straight(p.A_nodes, p.ds);
  const RunResult r = run_time(row, row, p, 200);
  for (int j = 0; j < r.field.rows(); ++j)
    for (int a = 0; a < r.field.cols(); ++a) {
      EXPECT_EQ(r.field(j, a).rot.matrix(), Mat3::Identity());
      EXPECT_LT((r.field(j, a).pos - row[a].pos).norm(), 1e-15);
    }
}

TEST(TimeMarch, SingleNodeIsFreeRigidBody) {
  // One free node: no stress enters, so the spatial momentum Ad*_{g^-1} mu is
  // carried unchanged from step to step.
  const BeamParams p = free_beam();
  std::vector<GroupElement> r0{GroupElement::identity(), GroupElement::identity()};
  std::vector<GroupElement> r1{tau_se3(p.dt * av(3, -1, 2, 0.4, 0.1, -0.2)), GroupElement::identity()};
  const RunResult r = run_time(r0, r1, p, 2000);
  const auto spatial = [&](int j) {
    return Ad_star_inv(r.field(j, 0), legendre_forward_time(xi_at(r.field, j, 0), p)).v;
  };
  const Vec6 m0 = spatial(0);
  for (int j = 1; j < 2000; ++j) ASSERT_LT((spatial(j) - m0).cwiseAbs().maxCoeff(), 1e-12 * m0.norm());
}

TEST(TimeMarch, StepReproducesSolvedVelocity) {
  const BeamParams p = free_beam();
  const auto [r0, r1] = free_beam_rows(p);
  DiscreteField f(3, p.A_nodes, p.dt, p.ds);
  f.set_row(0, r0);
  f.set_row(1, r1);
  const int last = p.last_node();
  for (int j : {0, 1}) f(j, last) = compose(f(j, last - 1), tau_se3(p.ds * kE6));
  StepWorkspace ws;
  ws.mu.resize(p.A_nodes);
  ws.xi_prev.resize(p.A_nodes);
  for (int a = 0; a < p.A_nodes; ++a) {
    ws.xi_prev[a] = xi_at(f, 0, a);
    ws.mu[a] = legendre_forward_time(ws.xi_prev[a], p);
  }
  step_time(f, 1, p, ws);
  for (int a = 0; a < last; ++a) {
    EXPECT_LT((xi_at(f, 1, a).v - ws.xi_prev[a].v).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ws.xi_prev[a].v.norm()));
    EXPECT_LT((legendre_forward_time(ws.xi_prev[a], p).v - ws.mu[a].v).cwiseAbs().maxCoeff(), 1e-15);
  }
  // Ghost column carries zero stress.
  EXPECT_LT(legendre_forward_space(eta_at(f, 2, last - 1), p).v.norm(), 1e-13);
  EXPECT_THROW(step_time(f, 2, p, ws), IndexOutOfRange);
}

TEST(TimeMarch, FreeBeamSatisfiesStencilEverywhere) {
  const BeamParams p = free_beam();
  const auto [r0, r1] = free_beam_rows(p);
  const RunResult r = run_time(r0, r1, p, 400);
  EXPECT_LE(r.newton.max_iterations, 10);
  const DiscreteField& f = r.field;
  double interior = 0, edge = 0;
  for (int j = 1; j + 2 <= f.rows(); ++j) {
    for (int a = 1; a + 2 <= f.cols(); ++a) interior = std::max(interior, dcel_stencil(f, p, {}, j, a).scaled());
    edge = std::max(edge, boundary_stencil_first_column(f, p, {}, j).scaled());
    EXPECT_LT(legendre_forward_space(eta_at(f, j, f.cols() - 2), p).v.lpNorm<Eigen::Infinity>(), 1e-13);
  }
  EXPECT_LT(interior, 1e-12);
  EXPECT_LT(edge, 1e-12);
}

TEST(TimeMarch, ForcesEnterStencilAndMarchConsistently) {
  const BeamParams p = free_beam();
  const auto [r0, r1] = free_beam_rows(p);
  const ForceField push = [](const ForceContext& c) {
    const double damp = c.xi_prev ? -0.01 * c.xi_prev->v[3] : 0.0;
    return CoAlgebraVector(Vec3(0, 1e-4 * c.a, 0), Vec3(damp, 0.05 * c.g.pos.z(), -0.02));
  };
  const RunResult r = run_time(r0, r1, p, 100, push);
  double with = 0, without = 0;
  for (int j = 1; j + 2 <= r.field.rows(); ++j)
    for (int a = 1; a + 2 <= r.field.cols(); ++a) {
      with = std::max(with, dcel_stencil(r.field, p, push, j, a).scaled());
      without = std::max(without, dcel_stencil(r.field, p, {}, j, a).scaled());
    }
  EXPECT_LT(with, 1e-12);
  EXPECT_GT(without, 1e-6);
}

TEST(TimeMarch, GravityEntersThroughPotential) {
  // Pi = <q, r>, so q = +M g e_z pulls the beam towards -z.
  const BeamParams p = build_params(1e3, 0.01, 1.0, 5e3, 0.35, Vec3(0, 0, 0.981), 0.0005, 0.1, 3.0);
  const auto row = straight(p.A_nodes, p.ds);
  const RunResult r = run_time(row, row, p, 100);
  // Discrete free fall from rest: the velocity after k steps is k g dt, so
  // row 99 has dropped g dt^2 (1 + ... + 98).
  EXPECT_NEAR(r.field(99, 3).pos.z(), row[3].pos.z() - 9.81 * p.dt * p.dt * 98 * 99 / 2, 1e-12);
  double worst = 0;
  for (int j = 1; j + 2 <= r.field.rows(); ++j)
    for (int a = 1; a + 2 <= r.field.cols(); ++a) worst = std::max(worst, dcel_stencil(r.field, p, {}, j, a).scaled());
  // Starting from rest the per-step displacements are ~1e-6 of the positions,
  // so recomputed velocities carry a relative rounding error far above 1e-12.
  EXPECT_LT(worst, 1e-10);
}

// ---------------------------------------------------------------------------

TEST(SpaceMarch, EquilibriumIsFixedPoint) {
  const BeamParams p = scenario_a();
  std::vector<GroupElement> c0(101, GroupElement::identity()), c1(101, {Rotation::identity(), Vec3(0, 0, p.ds)});
  const RunResult r = run_space(c0, c1, p, 16);
  for (int j = 0; j < r.field.rows(); ++j)
    for (int a = 0; a < r.field.cols(); ++a) {
      EXPECT_EQ(r.field(j, a).rot.matrix(), Mat3::Identity());
      EXPECT_LT((r.field(j, a).pos - Vec3(0, 0, p.ds * a)).norm(), 1e-15);
    }
}

TEST(SpaceMarch, ScenarioAOpeningColumnsSatisfyStencil) {
  // Further out the boundary rows drive elements to within 1e-11 of a half
  // turn and the recomputed strains lose their digits.
  const BeamParams p = scenario_a();
  const auto [c0, c1] = scenario_a_columns(p);
  const RunResult r = run_space(c0, c1, p, 4);
  const DiscreteField& f = r.field;
  double interior = 0, edge = 0;
  for (int a = 1; a + 2 <= f.cols(); ++a) {
    for (int j = 1; j + 2 <= f.rows(); ++j) interior = std::max(interior, dcel_stencil(f, p, {}, j, a).scaled());
    edge = std::max(edge, boundary_stencil_first_row(f, p, {}, a).scaled());
    EXPECT_EQ(f(f.rows() - 1, a).matrix(), f(f.rows() - 2, a).matrix());
  }
  EXPECT_LT(interior, 1e-12);
  EXPECT_LT(edge, 1e-12);
}

TEST(SpaceMarch, StepReproducesSolvedStrain) {
  const BeamParams p = scenario_a();
  const auto [c0, c1] = scenario_a_columns(p);
  const RunResult r = run_space(c0, c1, p, 3);
  StepWorkspace ws;
  ws.lambda.resize(r.field.rows());
  ws.eta_prev.resize(r.field.rows());
  for (int j = 0; j < r.field.rows(); ++j) {
    ws.eta_prev[j] = eta_at(r.field, j, 0);
    ws.lambda[j] = legendre_forward_space(ws.eta_prev[j], p);
  }
  DiscreteField copy = r.field;
  step_space(copy, 1, p, ws);
  for (int j = 0; j + 1 < copy.rows(); ++j)
    EXPECT_LT((eta_at(copy, j, 1).v - ws.eta_prev[j].v).cwiseAbs().maxCoeff(), 1e-12 * ws.eta_prev[j].v.norm());
  for (int j = 0; j < copy.rows(); ++j) EXPECT_EQ(copy(j, 2).matrix(), r.field(j, 2).matrix());
}

// ---------------------------------------------------------------------------

TEST(CrossMarch, SpaceReMarchReproducesNextColumnOfTimeRun) {
  const BeamParams p = free_beam();
  const auto [r0, r1] = free_beam_rows(p);
  const RunResult t = run_time(r0, r1, p, 300);
  const DiscreteField& f = t.field;
  PrescribedEdges edges{std::vector<GroupElement>(f.row(0).begin(), f.row(0).begin() + 3),
                        std::vector<GroupElement>(f.row(f.rows() - 1).begin(), f.row(f.rows() - 1).begin() + 3)};
  const RunResult s = run_space(f.column(0).to_vector(), f.column(1).to_vector(), p, 2, {}, {},
                                SpaceBoundary::Prescribed, &edges);
  double worst = 0;
  for (int j = 0; j < f.rows(); ++j) worst = std::max(worst, (s.field(j, 2).pos - f(j, 2).pos).lpNorm<Eigen::Infinity>());
  EXPECT_LT(worst, 10 * 1e-12);
}

TEST(CrossMarch, TimeReMarchReproducesNextRowOfSpaceRun) {
  // Four columns, while the Scenario A strains are still moderate.
  const BeamParams p = scenario_a();
  const auto [c0, c1] = scenario_a_columns(p);
  const RunResult s = run_space(c0, c1, p, 3);
  const DiscreteField& f = s.field;
  auto first3 = [&](int a) {
    auto col = f.column(a).to_vector();
    col.resize(3);
    return col;
  };
  PrescribedEdges edges{first3(0), first3(f.cols() - 1)};
  const RunResult t = run_time(f.row(0), f.row(1), p, 2, {}, {}, TimeBoundary::Prescribed, &edges);
  double worst = 0, size = 1;
  for (int a = 0; a < f.cols(); ++a) {
    worst = std::max(worst, (t.field(2, a).pos - f(2, a).pos).lpNorm<Eigen::Infinity>());
    size = std::max(size, f(2, a).pos.lpNorm<Eigen::Infinity>());
  }
  EXPECT_LT(worst, 10 * 1e-12 * size);
}

// ---------------------------------------------------------------------------

TEST(Residual, EquilibriumIsExactlyZero) {
  // ds = 1/8 keeps every node position exactly representable.
  const BeamParams p = build_params(1e3, 0.01, 1.0, 5e3, 0.35, Vec3::Zero(), 0.0005, 0.125, 3.0);
  const auto row = straight(p.A_nodes, p.ds);
  DiscreteField f(4, p.A_nodes, p.dt, p.ds);
  for (int j = 0; j < 4; ++j) f.set_row(j, row);
  for (int j = 1; j <= 2; ++j)
    for (int a = 1; a + 2 <= f.cols(); ++a) EXPECT_EQ(dcel_residual(f, p, {}, j, a).v, Vec6::Zero());
  EXPECT_THROW(dcel_residual(f, p, {}, 0, 1), IndexOutOfRange);
  EXPECT_THROW(dcel_residual(f, p, {}, 1, f.cols() - 1), IndexOutOfRange);
}

TEST(Residual, FirstOrderSensitivityToNodePerturbation) {
  const BeamParams p = free_beam();
  const auto [r0, r1] = free_beam_rows(p);
  const RunResult r = run_time(r0, r1, p, 10);
  Sampler s;
  const AlgebraVector delta = s.algebra();
  const int j = 5, a = 4;
  std::vector<double> change;
  for (double eps : {1e-5, 2e-5}) {
    DiscreteField f = r.field;
    f(j, a) = compose(f(j, a), tau_se3(eps * delta));
    change.push_back(dcel_residual(f, p, {}, j, a).v.norm());
  }
  EXPECT_GT(change[0], 1e-6);
  EXPECT_NEAR(change[1] / change[0], 2.0, 1e-3);
}

TEST(Cfl, FreeBeamMaterial) {
  const BeamParams p = free_beam();
  const double nu = 0.35, e = 5e3;
  const double lame = e * nu / ((1 + nu) * (1 - 2 * nu)), mu = e / (2 * (1 + nu));
  const double c = std::sqrt((lame + 2 * mu) / 1e3);
  EXPECT_NEAR(dilational_wave_speed(p), c, 1e-14);
  EXPECT_NEAR(cfl_suggested_dt(p), 0.1 / (10 * c), 1e-15);
  EXPECT_GT(cfl_suggested_dt(p), p.dt);
}

TEST(Cfl, MonotoneInStiffnessAndDensity) {
  double prev = 1e300;
  for (double e : {1e3, 5e3, 5e4, 1e6}) {
    const double dt = cfl_suggested_dt(build_params(1e3, 0.01, 1, e, 0.35, Vec3::Zero(), 1e-3, 0.1, 1));
    EXPECT_LT(dt, prev);
    prev = dt;
  }
  prev = 0;
  for (double rho : {1e2, 1e4, 1e8, 1e12}) {
    const double dt = cfl_suggested_dt(build_params(rho, 0.01, 1, 5e3, 0.35, Vec3::Zero(), 1e-3, 0.1, 1));
    EXPECT_GT(dt, prev);
    prev = dt;
  }
  EXPECT_GT(prev, 1e2);
}

}  // namespace
}  // namespace beamvi
