#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pathdens/errors.hpp"
#include "pathdens/families.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/roughpath.hpp"

using namespace pathdens;

namespace {

TimeGrid grid_for(const CoefficientField& f, std::size_t n, double T) {
  return build_grid(MeasureSpec{T, {}}, n, f.metadata.required_points);
}

SolutionBundle run(const CoefficientField& f, const TimeGrid& g, std::uint64_t seed, Eigen::VectorXd x0 = {}) {
  if (x0.size() == 0) x0 = Eigen::VectorXd::Constant(f.n, 0.3);
  return solve_sde(f, x0, sample_increments(g, f.d, seed, 0), g);
}

// Dense oracle for U_j: R^n -> lift space, unit blocks at slots > j and at the point.
Eigen::MatrixXd dense_U(const LiftLayout& layout, std::size_t j) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.dim()), layout.n);
  for (std::size_t r = j + 1; r < layout.slots; ++r)
    u.block(static_cast<Eigen::Index>(layout.slot(r)), 0, layout.n, layout.n).setIdentity();
  u.bottomRows(layout.n).setIdentity();
  return u;
}

struct DenseFlow {
  std::vector<Eigen::MatrixXd> Y, Z;
};

DenseFlow dense_oracle(const FlowOperators& ops) {
  const LiftLayout& L = ops.layout();
  const Eigen::Index D = static_cast<Eigen::Index>(L.dim());
  DenseFlow out;
  out.Y.push_back(Eigen::MatrixXd::Identity(D, D));
  out.Z.push_back(Eigen::MatrixXd::Identity(D, D));
  for (std::size_t j = 0; j < ops.steps(); ++j) {
    const Eigen::MatrixXd U = dense_U(L, j);
    const Eigen::MatrixXd K = Eigen::MatrixXd(ops.factor(j).K);
    const Eigen::MatrixXd H = Eigen::MatrixXd(ops.factor(j).H);
    out.Y.push_back((Eigen::MatrixXd::Identity(D, D) + U * K) * out.Y.back());
    out.Z.push_back(out.Z.back() * (Eigen::MatrixXd::Identity(D, D) - U * H));
  }
  return out;
}

std::vector<std::pair<const char*, CoefficientField>> small_families() {
  std::vector<std::pair<const char*, CoefficientField>> out;
  out.emplace_back("integral", integral_coefficient(2, 0.5, 0.8, Nonlinearity::Sine, 0.4));
  out.emplace_back("continuous_delay", continuous_delay(1, 0.5, 0.8, Nonlinearity::Tanh, 0.5));
  out.emplace_back("hormander", hormander_example_3d());
  Eigen::MatrixXd S(2, 2);
  S << 0.2, -0.1, 0.3, 0.1;
  out.emplace_back("linear", linear_field((Eigen::MatrixXd(2, 2) << -0.5, 1, -1, -0.2).finished(), {S, -S},
                                          Eigen::MatrixXd::Identity(2, 2)));
  out.emplace_back("intro", intro_example(0.5));
  return out;
}

}  // namespace

TEST(SolveSde, TrivialCases) {
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 100);
  const Eigen::Vector2d x0(1.0, -2.0);
  const SolutionBundle still = run(constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Zero(2, 2)), g, 1, x0);
  for (Eigen::Index j = 0; j < still.X.cols(); ++j) EXPECT_EQ(still.X.col(j), Eigen::VectorXd(x0));
  const SolutionBundle bm = run(constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2)), g, 1, x0);
  const Eigen::VectorXd sum = bm.noise.rowwise().sum();
  EXPECT_TRUE((bm.X.col(100) - x0).isApprox(sum, 1e-14));
}

TEST(SolveSde, ExponentialDecay) {
  for (std::size_t n : {100u, 1000u}) {
    const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, n);
    const CoefficientField f = linear_field(-Eigen::MatrixXd::Identity(1, 1), {}, Eigen::MatrixXd::Zero(1, 1));
    const SolutionBundle b = run(f, g, 0, Eigen::VectorXd::Ones(1));
    EXPECT_LE(std::abs(b.X(0, static_cast<Eigen::Index>(n)) - std::exp(-1.0)), 2.0 / static_cast<double>(n));
  }
}

TEST(SolveSde, DivergenceNamesStep) {
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 50);
  const CoefficientField f = user_field(
      1, 1, [](const State& s) -> Eigen::VectorXd { return s.value.array().square() * 1e3; },
      [](const State&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); });
  try {
    run(f, g, 0, Eigen::VectorXd::Constant(1, 10.0));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 0u);
    EXPECT_LE(e.step(), 50u);
  }
}

TEST(Lift, SolutionAndDirectSolveAgreeExactly) {
  for (const auto& [name, f] : small_families()) {
    const TimeGrid g = grid_for(f, 40, 1.0);
    const SolutionBundle b = run(f, g, 3);
    const Eigen::MatrixXd a = lift_solution(b);
    const Eigen::MatrixXd c = direct_lifted_solve(f, b.x0, b.noise, g);
    EXPECT_EQ((a - c).cwiseAbs().maxCoeff(), 0.0) << name;
    const LiftLayout L = b.layout();
    for (std::size_t j = 0; j < g.size(); ++j) {
      const Eigen::VectorXd s = lifted_state(b, j);
      for (std::size_t r = 0; r < g.size(); ++r) {
        const Eigen::VectorXd want = b.X.col(static_cast<Eigen::Index>(std::min(r, j)));
        ASSERT_EQ(s.segment(static_cast<Eigen::Index>(L.slot(r)), f.n), want) << name;
      }
      ASSERT_EQ(s.tail(f.n), b.X.col(static_cast<Eigen::Index>(j)));
    }
  }
}

TEST(FlowOperators, MatrixFreeMatchesDense) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  for (InverseScheme scheme : {InverseScheme::Euler, InverseScheme::Discrete}) {
    for (const auto& [name, f] : small_families()) {
      const TimeGrid g = grid_for(f, 12, 1.0);
      const SolutionBundle b = run(f, g, 7);
      FlowOptions opts;
      opts.scheme = scheme;
      const FlowOperators ops(f, b, opts);
      const DenseFlow dense = dense_oracle(ops);
      const Eigen::Index D = static_cast<Eigen::Index>(ops.dim());
      Eigen::VectorXd v(D);
      for (Eigen::Index i = 0; i < D; ++i) v(i) = nd(gen);
      Eigen::MatrixXd rho(2, D);
      for (Eigen::Index i = 0; i < rho.size(); ++i) rho.data()[i] = nd(gen);
      for (std::size_t j : {std::size_t{0}, std::size_t{5}, ops.steps()}) {
        const double tol = 1e-12 * std::max(1.0, dense.Y[j].cwiseAbs().maxCoeff()) *
                           std::max(1.0, dense.Z[j].cwiseAbs().maxCoeff()) * 10;
        EXPECT_LE((ops.apply_Y(j, v) - dense.Y[j] * v).cwiseAbs().maxCoeff(), tol) << name;
        EXPECT_LE((ops.apply_Z(j, v) - dense.Z[j] * v).cwiseAbs().maxCoeff(), tol) << name;
        EXPECT_LE((ops.left_Y(j, rho) - rho * dense.Y[j]).cwiseAbs().maxCoeff(), tol) << name;
        EXPECT_LE((ops.left_Z(j, rho) - rho * dense.Z[j]).cwiseAbs().maxCoeff(), tol) << name;
        EXPECT_LE((ops.dense_Y(j) - dense.Y[j]).cwiseAbs().maxCoeff(), tol) << name;
        EXPECT_LE((ops.dense_Z(j) - dense.Z[j]).cwiseAbs().maxCoeff(), tol) << name;
        EXPECT_LE((ops.projected_Y(j) - dense.Y[j].bottomRows(f.n)).cwiseAbs().maxCoeff(), tol) << name;
      }
      const Eigen::MatrixXd pp = ops.projected_path(v);
      for (std::size_t j = 0; j <= ops.steps(); ++j)
        EXPECT_LE((pp.col(static_cast<Eigen::Index>(j)) - (dense.Y[j] * v).tail(f.n)).cwiseAbs().maxCoeff(), 1e-11)
            << name;
      if (scheme == InverseScheme::Discrete) {
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D, D);
        EXPECT_LE((dense.Z.back() * dense.Y.back() - I).cwiseAbs().maxCoeff(), 1e-10) << name;
        EXPECT_LE((dense.Y.back() * dense.Z.back() - I).cwiseAbs().maxCoeff(), 1e-10) << name;
      }
    }
  }
}

TEST(FlowOperators, JacobianSweepMatchesDense) {
  for (const auto& [name, f] : small_families()) {
    const TimeGrid g = grid_for(f, 12, 1.0);
    const SolutionBundle b = run(f, g, 9);
    FlowOptions opts;
    opts.scheme = InverseScheme::Discrete;
    const FlowOperators ops(f, b, opts);
    const DenseFlow dense = dense_oracle(ops);
    const std::size_t tau = 9;
    JacobianSweep sweep(ops, tau);
    const Eigen::MatrixXd piY = dense.Y[tau].bottomRows(f.n);
    const LiftLayout& L = ops.layout();
    for (std::size_t s = 0; s <= tau; ++s) {
      sweep.advance_to(s);
      const Eigen::MatrixXd rows = piY * dense.Z[s];
      EXPECT_LE((sweep.rows() - rows).cwiseAbs().maxCoeff(), 1e-11) << name << " s=" << s;
      for (std::size_t from = s; from < g.size(); from += 3) {
        Eigen::MatrixXd want = Eigen::MatrixXd::Zero(f.n, f.n);
        for (int i = 0; i < f.n; ++i) want.col(i) = rows * lift_flat(Eigen::VectorXd::Unit(f.n, i), g.time(from), g);
        EXPECT_LE((sweep.lifted(from) - want).cwiseAbs().maxCoeff(), 1e-11) << name;
      }
      for (std::size_t r = 0; r < g.size(); r += 4)
        EXPECT_LE((sweep.slot(r) - rows.middleCols(static_cast<Eigen::Index>(L.slot(r)), f.n)).cwiseAbs().maxCoeff(),
                  1e-11);
    }
    EXPECT_THROW(sweep.advance_to(2), ContractError);
  }
}

TEST(FlowOperators, ConstantCoefficientsGiveIdentity) {
  const CoefficientField f = constant_field(Eigen::Vector2d(1, 2), Eigen::MatrixXd::Identity(2, 2));
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 20);
  const SolutionBundle b = run(f, g, 1);
  const FlowOperators ops(f, b);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(static_cast<Eigen::Index>(ops.dim()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(gen);
  EXPECT_EQ(ops.apply_Y(20, v), v);
  EXPECT_EQ(ops.apply_Z(20, v), v);
  const LiftedVector lv = lift(Eigen::Vector2d(1, -1), 0.4, g);
  EXPECT_EQ(j_tau_s(ops, 1.0, 0.4, lv), lv.point_part);
}

TEST(FlowOperators, IntroJacobianVanishesAtTwo) {
  const CoefficientField f = intro_example();
  const TimeGrid g = grid_for(f, 2000, 2.0);
  const SolutionBundle b = run(f, g, 12, Eigen::VectorXd::Ones(1));
  const FlowOperators ops(f, b);
  const Eigen::MatrixXd path = ops.projected_path(lift_flat(Eigen::VectorXd::Ones(1), 0.0, g));
  double err = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double t = g.time(j);
    const double want = t <= 1.0 ? std::exp(-t) : std::exp(-1.0) * (2.0 - t);
    err = std::max(err, std::abs(path(0, static_cast<Eigen::Index>(j)) - want));
  }
  EXPECT_LE(err, 0.05);
  EXPECT_LE(std::abs(path(0, 2000)), 0.02);
  // The lift-space inverse stays well defined while the projected Jacobian vanishes.
  FlowOptions exact;
  exact.scheme = InverseScheme::Discrete;
  EXPECT_LE(check_inverse(FlowOperators(f, b, exact), 2000).zy, 1e-10);
  EXPECT_LE(check_inverse(ops, 2000).zy, 2e-3);
}

TEST(FlowOperators, LinearOdeFlowIsMatrixExponential) {
  Eigen::Matrix2d A;
  A << 0, 1, -1, 0;
  const CoefficientField f = linear_field(A, {}, Eigen::MatrixXd::Zero(2, 1));
  std::vector<double> errs;
  for (std::size_t n : {200u, 400u}) {
    const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, n);
    const SolutionBundle b = run(f, g, 0);
    const FlowOperators ops(f, b);
    const Eigen::MatrixXd py = ops.projected_Y(n);
    Eigen::Matrix2d block = py.rightCols(2);
    for (std::size_t r = 0; r < g.size(); ++r) block += py.middleCols(static_cast<Eigen::Index>(2 * r), 2);
    // A direction (e_i, e_i) at time 0 lifts to every slot and the point.
    Eigen::Matrix2d rot;
    rot << std::cos(1.0), std::sin(1.0), -std::sin(1.0), std::cos(1.0);
    errs.push_back((block - rot).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(errs[0], 2.0 / 200);
  EXPECT_NEAR(errs[0] / errs[1], 2.0, 0.1);
}

TEST(FlowOperators, GeometricInverseIsReciprocal) {
  const CoefficientField f = geometric_field(0.1, 0.3);
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 4096);
  const SolutionBundle b = run(f, g, 5, Eigen::VectorXd::Ones(1));
  const FlowOperators ops(f, b);
  const LiftLayout& L = ops.layout();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.dim()));
  e(static_cast<Eigen::Index>(L.point())) = 1.0;
  const double y = ops.apply_Y(4096, e)(static_cast<Eigen::Index>(L.point()));
  const double z = ops.left_Z(4096, e.transpose())(0, static_cast<Eigen::Index>(L.point()));
  EXPECT_NEAR(y, b.X(0, 4096), 1e-12);
  EXPECT_NEAR(z * y, 1.0, 0.01);
}

TEST(FlowOperators, MissingOracleWithoutFdIsConfigurationError) {
  const CoefficientField f = user_field(
      1, 1, [](const State& s) -> Eigen::VectorXd { return -s.value; },
      [](const State&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Ones(1, 1); });
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 10);
  const SolutionBundle b = run(f, g, 0);
  FlowOptions opts;
  opts.allow_fd = false;
  EXPECT_THROW(FlowOperators(f, b, opts), ConfigurationError);
  EXPECT_NO_THROW(FlowOperators(f, b));
}

TEST(FlowOperators, AnticipatingGradientIsRejected) {
  CoefficientField f = intro_example(0.5);
  f.gradient = [](const State& s, Which w, Triplets& out) {
    if (w.is_drift()) out.emplace_back(0, static_cast<int>(s.grid.size() - 1), 1.0);
  };
  const TimeGrid g = grid_for(f, 10, 1.0);
  const SolutionBundle b = run(f, g, 0);
  EXPECT_THROW(FlowOperators(f, b), ContractError);
}

TEST(PropagateVariation, TrivialCases) {
  const CoefficientField f = constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2));
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 20);
  const SolutionBundle b = run(f, g, 1);
  const Eigen::MatrixXd p = propagate_variation(f, b, 5, Eigen::Vector2d(1, 2));
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_TRUE(p.col(j).isZero(0.0));
  for (Eigen::Index j = 5; j <= 20; ++j) EXPECT_EQ(p.col(j), Eigen::Vector2d(1, 2));
  const CoefficientField h = hormander_example_3d();
  const TimeGrid gh = grid_for(h, 20, 1.0);
  EXPECT_TRUE(propagate_variation(h, run(h, gh, 1), 3, Eigen::Vector3d::Zero()).isZero(0.0));
}

TEST(PropagateVariation, MatchesOperatorRouteUnderExactInverse) {
  for (const auto& [name, f] : small_families()) {
    const TimeGrid g = grid_for(f, 64, 1.0);
    const SolutionBundle b = run(f, g, 21);
    FlowOptions opts;
    opts.scheme = InverseScheme::Discrete;
    const FlowOperators ops(f, b, opts);
    for (std::size_t s : {0u, 17u, 40u}) {
      const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(f.n, 0.5, -0.7);
      const Eigen::MatrixXd p = propagate_variation(f, b, s, v);
      for (std::size_t tau : {s, std::size_t{50}, std::size_t{64}}) {
        if (tau < s) continue;
        const Eigen::VectorXd a = j_tau_s(ops, g.time(tau), g.time(s), lift(v, g.time(s), g));
        const Eigen::VectorXd c = p.col(static_cast<Eigen::Index>(tau));
        EXPECT_LE((a - c).norm(), 1e-8 * std::max(1.0, c.norm())) << name << " s=" << s << " tau=" << tau;
      }
    }
    // The finite-difference route agrees too.
    FdOptions fd;
    fd.prefer_oracle = false;
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(f.n);
    const Eigen::MatrixXd po = propagate_variation(f, b, 10, v);
    const Eigen::MatrixXd pf = propagate_variation(f, b, 10, v, fd);
    EXPECT_LE((po - pf).cwiseAbs().maxCoeff(), 1e-6) << name;
  }
}

TEST(JTauS, SameTimeIsProjection) {
  const CoefficientField f = integral_coefficient(2, 0.5, 0.8, Nonlinearity::Sine, 0.4);
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 32);
  const SolutionBundle b = run(f, g, 2);
  FlowOptions opts;
  opts.scheme = InverseScheme::Discrete;
  const FlowOperators ops(f, b, opts);
  const LiftedVector lv = lift(Eigen::Vector2d(0.3, -1.0), 0.5, g);
  EXPECT_LE((j_tau_s(ops, 0.5, 0.5, lv) - lv.point_part).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(j_tau_s(ops, 0.5, 0.51, lv), DomainError);
}

TEST(CheckInverse, EulerResidualShrinksUnderRefinement) {
  const CoefficientField f = linear_field((Eigen::MatrixXd(2, 2) << -0.5, 1, -1, -0.2).finished(),
                                          {(Eigen::MatrixXd(2, 2) << 0.4, -0.2, 0.3, 0.1).finished()},
                                          Eigen::MatrixXd::Zero(2, 1));
  const TimeGrid base = build_grid(MeasureSpec{1.0, {}}, 32);
  std::vector<double> res(2, 0.0);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const BrownianTree tree(base, 1, seed, 0);
    for (unsigned lvl : {0u, 4u}) {
      const TimeGrid g = tree.grid(lvl);
      const SolutionBundle b = solve_sde(f, Eigen::Vector2d(1, 0.5), increments_of(tree.values(lvl)), g);
      const FlowOperators ops(f, b);
      res[lvl == 0 ? 0 : 1] += check_inverse(ops, ops.steps()).zy;
    }
  }
  EXPECT_LT(res[1], 0.5 * res[0]);
}
