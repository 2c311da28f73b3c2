#include <gtest/gtest.h>

#include <cmath>

#include "pathdens/delay_lift.hpp"
#include "pathdens/errors.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/hormander.hpp"

using namespace pathdens;

namespace {

const MeasureSpec kUnit{1.0, {}};

DelayDynamics scalar_delay(std::vector<double> delays, double noise) {
  std::vector<Eigen::MatrixXd> drift{Eigen::MatrixXd::Constant(1, 1, -0.4)};
  std::vector<Eigen::MatrixXd> diff{Eigen::MatrixXd::Constant(1, 1, 0.3 * noise)};
  for (std::size_t i = 0; i < delays.size(); ++i) {
    drift.push_back(Eigen::MatrixXd::Constant(1, 1, i == 0 ? -1.2 : 0.5));
    diff.push_back(Eigen::MatrixXd::Constant(1, 1, 0.2 * noise));
  }
  return linear_delay_dynamics(std::move(delays), drift, diff, Eigen::MatrixXd::Constant(1, 1, 0.5 * noise));
}

// Nonlinear two-dimensional dynamics with two lags.
DelayDynamics planar_delay() {
  DelayDynamics dyn;
  dyn.n = 2;
  dyn.d = 2;
  dyn.delays = {0.25, 0.375};
  dyn.drift = [](double t, const std::vector<Eigen::VectorXd>& a) -> Eigen::VectorXd {
    return Eigen::Vector2d(-a[0](0) + std::sin(a[1](1)) + 0.1 * t, -0.5 * a[0](1) + a[2](0) * a[1](0));
  };
  dyn.sigma = [](double, const std::vector<Eigen::VectorXd>& a) -> Eigen::MatrixXd {
    Eigen::MatrixXd s(2, 2);
    s << 0.3, 0.1 * std::cos(a[2](1)), 0.0, 0.2 + 0.1 * std::tanh(a[1](0));
    return s;
  };
  return dyn;
}

}  // namespace

TEST(BuildLift, BlockCounts) {
  EXPECT_EQ(build_lift({}, 1.0, 2).blocks(), 1u);
  const auto one = build_lift({0.6}, 1.0, 2);
  EXPECT_EQ(one.blocks(), 2u);
  EXPECT_EQ(one.dim(), 4);
  EXPECT_EQ(one.wiring[0][0], 1);
  EXPECT_EQ(one.wiring[1][0], -1);

  const auto third = build_lift({1.0 / 3.0}, 1.0, 1);
  ASSERT_EQ(third.blocks(), 3u);
  ASSERT_EQ(third.composite_delays.size(), 1u);
  EXPECT_NEAR(third.composite_delays[0], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(third.wiring[1][0], 2);
  EXPECT_EQ(third.wiring[2][0], -1);
}

TEST(BuildLift, CompositeClosureOfTwoDelays) {
  const auto sys = build_lift({0.25, 0.375}, 1.0, 1);
  // Sums below 1: 0.5, 0.625, 0.75, 0.875 (and 0.75 = 2 * 0.375 deduplicated).
  const std::vector<double> expect{0.5, 0.625, 0.75, 0.875};
  ASSERT_EQ(sys.composite_delays.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(sys.composite_delays[i], expect[i], 1e-15);
  for (std::size_t l = 0; l < sys.blocks(); ++l)
    for (std::size_t i = 0; i < 2; ++i) {
      const double u = sys.shifts[l] + sys.base_delays[i];
      const int w = sys.wiring[l][i];
      if (u >= 1.0)
        EXPECT_EQ(w, -1);
      else
        EXPECT_NEAR(sys.shifts[static_cast<std::size_t>(w)], u, 1e-15);
    }
}

TEST(BuildLift, RejectsBadDelays) {
  EXPECT_THROW(build_lift({0.0}, 1.0, 1), DomainError);
  EXPECT_THROW(build_lift({1.0}, 1.0, 1), DomainError);
  EXPECT_THROW(build_lift({0.5, 0.25}, 1.0, 1), DomainError);
  EXPECT_THROW(build_lift({0.5, 0.5}, 1.0, 1), DomainError);
  EXPECT_THROW(build_lift({0.5}, 0.0, 1), DomainError);
}

TEST(ShiftedBrownian, ZeroBeforeShiftAndExactAfter) {
  const TimeGrid g = build_grid(kUnit, 64);
  const Eigen::MatrixXd B = sample_brownian(g, 2, 3, 0);
  EXPECT_EQ((shifted_brownian(g, B, 0.0) - B).norm(), 0.0);
  const Eigen::MatrixXd S = shifted_brownian(g, B, 0.25);
  for (std::size_t j = 0; j <= 16; ++j) EXPECT_EQ(S.col(static_cast<Eigen::Index>(j)).norm(), 0.0);
  for (std::size_t j = 16; j < g.size(); ++j)
    EXPECT_EQ((S.col(static_cast<Eigen::Index>(j)) - B.col(static_cast<Eigen::Index>(j - 16))).norm(), 0.0);
  EXPECT_THROW(shifted_brownian(g, B, 0.3), DomainError);
}

TEST(ShiftedBrownian, NonUniformGridMustBeShiftInvariant) {
  const TimeGrid g = build_grid(kUnit, 8, {0.3});
  EXPECT_THROW(shift_index(g, 0.3), DomainError);
}

TEST(DelayedArea, ZeroShiftMatchesLiftArea) {
  const TimeGrid g = build_grid(kUnit, 256);
  const Eigen::MatrixXd B = sample_brownian(g, 2, 4, 0);
  const RoughPath rp = lift(g, B, 1);
  const auto a = delayed_cross_area(g, B, 0.0, 0.25, 0.75);
  EXPECT_LE((a.upper - rp.second_level(64, 192)).norm(), 1e-12);
}

TEST(DelayedArea, VanishesBeforeShift) {
  const TimeGrid g = build_grid(kUnit, 256);
  const Eigen::MatrixXd B = sample_brownian(g, 2, 4, 1);
  const auto a = delayed_cross_area(g, B, 0.5, 0.125, 0.5);
  EXPECT_EQ(a.upper.norm(), 0.0);
  EXPECT_EQ(a.companion_direct.norm(), 0.0);
  EXPECT_EQ(a.companion.norm(), 0.0);
}

TEST(DelayedArea, CompanionMatchesDirectUpToCovariation) {
  const TimeGrid g = build_grid(kUnit, 4096);
  const Eigen::MatrixXd B = sample_brownian(g, 2, 4, 2);
  for (double h : {0.0, 0.25}) {
    const auto a = delayed_cross_area(g, B, h, 0.375, 1.0);
    const Eigen::MatrixXd S = shifted_brownian(g, B, h);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    for (std::size_t r = g.index_of(0.375); r < g.steps(); ++r) {
      const Eigen::Index rr = static_cast<Eigen::Index>(r);
      cov += (B.col(rr + 1) - B.col(rr)) * (S.col(rr + 1) - S.col(rr)).transpose();
    }
    Eigen::MatrixXd expect = a.companion - cov;
    if (h == 0.0) expect.diagonal().array() += 0.625;
    EXPECT_LE((a.companion_direct - expect).norm(), 1e-12);
    // The covariation correction is small for h > 0 and close to (t - s) I for h = 0.
    EXPECT_LE((a.companion_direct - a.companion).norm(), 0.1);
  }
}

TEST(ExtendedLift, ChenRelationHolds) {
  const auto sys = build_lift({0.25}, 1.0, 1);
  const TimeGrid fine = build_grid(kUnit, 1024);
  const Eigen::MatrixXd B = sample_brownian(fine, 2, 6, 0);
  const RoughPath rp = extended_lift(sys, fine, B, 8);
  EXPECT_EQ(rp.dim(), 2 * static_cast<int>(sys.blocks()));
  EXPECT_LE(max_chen_defect(rp), 1e-12);
}

TEST(SolveLifted, NoDelayIsPlainEuler) {
  const auto dyn = scalar_delay({}, 1.0);
  const auto sys = build_lift({}, 1.0, 1);
  const TimeGrid g = build_grid(kUnit, 128);
  const Eigen::MatrixXd noise = sample_increments(g, 1, 9, 0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.8);
  const Eigen::MatrixXd L = solve_lifted(sys, dyn, x0, noise, g);
  const SolutionBundle b = solve_sde(discrete_delay(dyn), x0, noise, g);
  EXPECT_EQ((L - b.X).norm(), 0.0);
}

TEST(SolveLifted, BlocksEqualLaggedDirectSimulation) {
  const auto dyn = planar_delay();
  const auto sys = build_lift(dyn.delays, 1.0, 2);
  const TimeGrid g = build_grid(kUnit, 256);
  const Eigen::MatrixXd noise = sample_increments(g, 2, 10, 0);
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.4, -0.3);
  const Eigen::MatrixXd L = solve_lifted(sys, dyn, x0, noise, g);
  const SolutionBundle b = solve_sde(discrete_delay(dyn), x0, noise, g);
  EXPECT_EQ((L.topRows(2) - b.X).norm(), 0.0);
  for (std::size_t l = 1; l < sys.blocks(); ++l) {
    const std::size_t k = shift_index(g, sys.shifts[l]);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const Eigen::VectorXd expect = j < k ? x0 : Eigen::VectorXd(b.X.col(static_cast<Eigen::Index>(j - k)));
      EXPECT_EQ((L.block(static_cast<Eigen::Index>(l) * 2, static_cast<Eigen::Index>(j), 2, 1) - expect).norm(), 0.0);
    }
  }
}

TEST(SolveLifted, LiftedFieldReproducesBlockSolve) {
  const auto dyn = planar_delay();
  const auto sys = build_lift(dyn.delays, 1.0, 2);
  const TimeGrid g = build_grid(kUnit, 128);
  const Eigen::MatrixXd noise = sample_increments(g, 2, 11, 0);
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.4, -0.3);
  const Eigen::MatrixXd L = solve_lifted(sys, dyn, x0, noise, g);
  const CoefficientField f = lifted_field(sys, dyn, x0);
  const SolutionBundle b = solve_sde(f, L.col(0), extended_noise(sys, noise, g), g);
  EXPECT_LE((b.X - L).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(SolveLifted, MismatchedDynamicsAreConfigurationErrors) {
  const auto dyn = planar_delay();
  const TimeGrid g = build_grid(kUnit, 64);
  const Eigen::MatrixXd noise = sample_increments(g, 2, 1, 0);
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.4, -0.3);
  auto sys = build_lift(dyn.delays, 1.0, 2);
  sys.wiring[1][0] = static_cast<int>(sys.blocks());
  EXPECT_THROW(solve_lifted(sys, dyn, x0, noise, g), ConfigurationError);
  EXPECT_THROW(solve_lifted(build_lift({0.25}, 1.0, 2), dyn, x0, noise, g), ConfigurationError);
  EXPECT_THROW(solve_lifted(build_lift(dyn.delays, 1.0, 3), dyn, Eigen::Vector3d::Zero(), noise, g),
               ConfigurationError);
}

TEST(SolveLifted, DeterministicCaseConvergesToMethodOfSteps) {
  const auto dyn = scalar_delay({0.25, 0.5}, 0.0);
  const auto sys = build_lift(dyn.delays, 1.0, 1);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 1.0);
  double prev = 0.0;
  for (std::size_t N : {64u, 128u, 256u, 512u}) {
    const TimeGrid g = build_grid(kUnit, N);
    const Eigen::MatrixXd L = solve_lifted(sys, dyn, x0, Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(N)), g);
    const Eigen::MatrixXd ref = method_of_steps(dyn, x0, g);
    const double err = (L.topRows(1) - ref).lpNorm<Eigen::Infinity>();
    EXPECT_LE(err, 2.0 / static_cast<double>(N));
    if (prev > 0.0) EXPECT_NEAR(prev / err, 2.0, 0.3);
    prev = err;
  }
}

TEST(MethodOfSteps, ExactForPiecewiseLinearSolution) {
  // x' = -x(t - 1/2) with x = 1 on [-1/2, 0] gives x = 1 - t on [0, 1/2].
  DelayDynamics dyn;
  dyn.delays = {0.5};
  dyn.drift = [](double, const std::vector<Eigen::VectorXd>& a) -> Eigen::VectorXd { return -a[1]; };
  dyn.sigma = [](double, const std::vector<Eigen::VectorXd>&) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Zero(1, 1);
  };
  const TimeGrid g = build_grid(kUnit, 64);
  const Eigen::MatrixXd X = method_of_steps(dyn, Eigen::VectorXd::Constant(1, 1.0), g);
  EXPECT_NEAR(X(0, 32), 0.5, 1e-14);
  // On [1/2, 1]: x = 1/2 - (t - 1/2) + (t - 1/2)^2 / 2, integrated exactly by the trapezoid rule up to O(dt^2).
  EXPECT_NEAR(X(0, 64), 0.125, 1e-3);
}

TEST(LiftedField, BlocksBeforeTheirShiftAreFrozenInSpanCheck) {
  const auto dyn = planar_delay();
  const auto sys = build_lift({0.625}, 1.0, 2);
  ASSERT_EQ(sys.blocks(), 2u);
  DelayDynamics one = dyn;
  one.delays = {0.625};
  one.drift = [](double, const std::vector<Eigen::VectorXd>& a) -> Eigen::VectorXd { return -a[0] + 0.5 * a[1]; };
  one.sigma = [](double, const std::vector<Eigen::VectorXd>& a) -> Eigen::MatrixXd {
    Eigen::MatrixXd s(2, 2);
    s << 0.3, 0.0, 0.1 * a[1](0), 0.2;
    return s;
  };
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.4, -0.3);
  const CoefficientField f = lifted_field(sys, one, x0);
  const TimeGrid g = build_grid(kUnit, 64);
  const Eigen::MatrixXd path = Eigen::MatrixXd::Zero(4, 65);
  const Eigen::VectorXd y = Eigen::Vector4d(0.1, 0.2, 0.4, -0.3);
  // Before the delay only block 0 moves, so the lifted system cannot span R^4.
  const auto early = span_check(f, State{g, 0.125, path, y}, 2);
  EXPECT_FALSE(early.spanning_depth.has_value());
  const auto late = span_check(f, State{g, 0.75, path, y}, 2);
  ASSERT_TRUE(late.spanning_depth.has_value());
  EXPECT_EQ(*late.spanning_depth, 0);
}

TEST(LiftedField, FlowOperatorsRunOnTheLiftedSystem) {
  const auto dyn = planar_delay();
  const auto sys = build_lift(dyn.delays, 1.0, 2);
  const TimeGrid g = build_grid(kUnit, 64);
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.4, -0.3);
  const CoefficientField f = lifted_field(sys, dyn, x0);
  const Eigen::MatrixXd L = solve_lifted(sys, dyn, x0, sample_increments(g, 2, 12, 0), g);
  const SolutionBundle b = solve_sde(f, L.col(0), extended_noise(sys, sample_increments(g, 2, 12, 0), g), g);
  const FlowOperators ops(f, b);
  const Eigen::MatrixXd Y = ops.projected_Y(g.steps());
  EXPECT_TRUE(Y.allFinite());
  EXPECT_EQ(Y.rows(), sys.dim());
}
