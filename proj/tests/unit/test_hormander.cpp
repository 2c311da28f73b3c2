#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pathdens/errors.hpp"
#include "pathdens/families.hpp"
#include "pathdens/hormander.hpp"
#include "pathdens/malliavin.hpp"

using namespace pathdens;

namespace {

struct Fixture {
  TimeGrid grid = build_grid(MeasureSpec{1.0, {}}, 16, {0.25});
  Eigen::MatrixXd path;
  Eigen::VectorXd value;
  Fixture(int n, Eigen::VectorXd v) : path(Eigen::MatrixXd::Zero(n, 17)), value(std::move(v)) {}
  State at(double t) const { return State{grid, t, path, value}; }
};

CoefficientField frozen_3d(double a) {
  Hormander3DParams p;
  p.frozen_a = a;
  return hormander_example_3d(p);
}

// Field with closures only, so brackets go through finite differences.
CoefficientField without_oracle(CoefficientField f) {
  f.gradient = nullptr;
  return f;
}

// Polynomial state-dependent fields on R^2.
CoefficientField poly_pair(const Eigen::VectorXd& c) {
  return user_field(
      2, 2, [](const State&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(2); },
      [c](const State& s) -> Eigen::MatrixXd {
        const double x = s.value(0), y = s.value(1);
        Eigen::MatrixXd m(2, 2);
        m(0, 0) = c(0) + c(1) * x * y;
        m(1, 0) = c(2) * x * x;
        m(0, 1) = c(3) * y * y * y;
        m(1, 1) = c(4) + c(5) * x;
        return m;
      });
}

// Classical bracket DV1 V2 - DV2 V1 with plain FD in the value only.
Eigen::VectorXd classical(const CoefficientField& f, int k1, int k2, const Eigen::VectorXd& x) {
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, 4);
  const Eigen::MatrixXd path = Eigen::MatrixXd::Zero(2, 5);
  auto col = [&](int k, const Eigen::VectorXd& y) { return Eigen::VectorXd(eval_sigma(f, State{g, 1.0, path, y}).col(k)); };
  auto jac = [&](int k) {
    Eigen::MatrixXd J(2, 2);
    for (int i = 0; i < 2; ++i) {
      const double h = 1e-6;
      J.col(i) = (col(k, x + h * Eigen::VectorXd::Unit(2, i)) - col(k, x - h * Eigen::VectorXd::Unit(2, i))) / (2 * h);
    }
    return J;
  };
  return jac(k1) * col(k2, x) - jac(k2) * col(k1, x);
}

}  // namespace

TEST(LieBracket, ThreeDimensionalExample) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = 2.0 + std::abs(u(gen));
    const Fixture fx(3, Eigen::Vector3d(u(gen), u(gen), u(gen)));
    const CoefficientField f = frozen_3d(a);
    const Eigen::VectorXd exact = lie_bracket(diffusion_column(f, 0), diffusion_column(f, 1), fx.at(0.5));
    EXPECT_EQ(exact, Eigen::Vector3d(0, 0, -1));
    const CoefficientField g = without_oracle(f);
    const Eigen::VectorXd fd = lie_bracket(diffusion_column(g, 0), diffusion_column(g, 1), fx.at(0.5));
    EXPECT_LE((fd - Eigen::Vector3d(0, 0, -1)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(LieBracket, PathDependentParameterDoesNotEnter) {
  const CoefficientField f = hormander_example_3d();
  Fixture fx(3, Eigen::Vector3d(0.3, 1.0, 2.0));
  fx.path.row(0).setConstant(0.7);
  const Eigen::VectorXd b = lie_bracket(diffusion_column(f, 0), diffusion_column(f, 1), fx.at(0.8));
  EXPECT_TRUE(b.isApprox(Eigen::Vector3d(0, 0, -1), 1e-15));
  const CoefficientField g = without_oracle(f);
  EXPECT_LE((lie_bracket(diffusion_column(g, 0), diffusion_column(g, 1), fx.at(0.8)) - Eigen::Vector3d(0, 0, -1))
                .cwiseAbs()
                .maxCoeff(),
            1e-6);
}

TEST(LieBracket, TrivialCases) {
  const CoefficientField f = frozen_3d(2.5);
  const Fixture fx(3, Eigen::Vector3d(0.1, 0.2, 0.3));
  EXPECT_TRUE(lie_bracket(diffusion_column(f, 1), diffusion_column(f, 1), fx.at(0.5)).isZero(0.0));
  const CoefficientField c = constant_field(Eigen::Vector3d::Zero(), Eigen::MatrixXd::Random(3, 2));
  EXPECT_TRUE(lie_bracket(diffusion_column(c, 0), diffusion_column(c, 1), fx.at(0.5)).isZero(0.0));
}

TEST(LieBracket, AntisymmetricAndBilinear) {
  Eigen::VectorXd c(6);
  c << 0.5, 1.2, -0.7, 0.3, 1.0, -0.4;
  const CoefficientField f = poly_pair(c);
  const Fixture fx(2, Eigen::Vector2d(0.4, -0.9));
  const State s = fx.at(0.5);
  const VectorFieldEval v1 = diffusion_column(f, 0), v2 = diffusion_column(f, 1);
  const Eigen::VectorXd ab = lie_bracket(v1, v2, s), ba = lie_bracket(v2, v1, s);
  EXPECT_LE((ab + ba).cwiseAbs().maxCoeff(), 1e-10);
  VectorFieldEval scaled = v2;
  scaled.value = [v2](const State& st) { return Eigen::VectorXd(3.0 * v2.value(st)); };
  EXPECT_LE((lie_bracket(v1, scaled, s) - 3.0 * ab).cwiseAbs().maxCoeff(), 1e-8);
  VectorFieldEval sum = v2;
  sum.value = [v1, v2](const State& st) { return Eigen::VectorXd(v1.value(st) + v2.value(st)); };
  EXPECT_LE((lie_bracket(v1, sum, s) - ab).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LieBracket, MatchesClassicalBracketForStateFields) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd c(6);
    for (int i = 0; i < 6; ++i) c(i) = u(gen);
    const CoefficientField f = poly_pair(c);
    const Fixture fx(2, Eigen::Vector2d(u(gen), u(gen)));
    const Eigen::VectorXd ours = lie_bracket(diffusion_column(f, 0), diffusion_column(f, 1), fx.at(0.5));
    EXPECT_LE((ours - classical(f, 0, 1, fx.value)).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(SigmaSets, Counting) {
  const CoefficientField one = constant_field(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  const auto s1 = generate_sigma_sets(one, 2);
  ASSERT_EQ(s1.size(), 3u);
  for (const auto& layer : s1) EXPECT_EQ(layer.size(), 1u);
  const CoefficientField f = frozen_3d(2.0);
  const auto s2 = generate_sigma_sets(f, 2);
  EXPECT_EQ(s2[0].size(), 2u);
  EXPECT_EQ(s2[1].size(), 4u);
  EXPECT_EQ(s2[2].size(), 8u);
  EXPECT_EQ(s2[1][0]->label(), "[s1,s1]");
  EXPECT_EQ(s2[1][1]->label(), "[s1,s2]");
  EXPECT_EQ(s2[1][2]->label(), "[s2,s1]");
  EXPECT_EQ(s2[1][3]->label(), "[s2,s2]");
  EXPECT_EQ(s2[2][0]->depth, 2);
  const Fixture fx(3, Eigen::Vector3d(0.5, 0.5, 0.5));
  EXPECT_TRUE(evaluator(s2[1][0], f).value(fx.at(0.5)).isZero(0.0));
  EXPECT_THROW(generate_sigma_sets(f, 13), ResourceError);
}

TEST(SpanCheck, EllipticHormanderDegenerate) {
  const CoefficientField id = constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2));
  const Fixture f2(2, Eigen::Vector2d(0.3, 0.1));
  const HormanderReport e = span_check(id, f2.at(0.5));
  ASSERT_TRUE(e.spanning_depth.has_value());
  EXPECT_EQ(*e.spanning_depth, 0);
  EXPECT_NEAR(e.lambda_by_depth[0], 1.0, 1e-15);

  const Fixture f3(3, Eigen::Vector3d(0.3, 0.1, -0.4));
  const HormanderReport h = span_check(hormander_example_3d(), f3.at(0.5));
  ASSERT_TRUE(h.spanning_depth.has_value());
  EXPECT_EQ(*h.spanning_depth, 1);
  EXPECT_LE(h.lambda_by_depth[0], 1e-12);
  for (std::size_t j = 1; j < h.lambda_by_depth.size(); ++j) EXPECT_GE(h.lambda_by_depth[j], h.lambda_by_depth[j - 1]);

  const HormanderReport d = span_check(degenerate_pair(), f2.at(0.5));
  EXPECT_FALSE(d.spanning_depth.has_value());
  for (double l : d.lambda_by_depth) EXPECT_LE(l, 1e-12);
}

TEST(SpanCheck, RestrictedGramReproducesClosedForm) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = 2.0 + std::abs(u(gen));
    const Eigen::Vector3d y(u(gen), u(gen), u(gen));
    const CoefficientField f = frozen_3d(a);
    const Fixture fx(3, y);
    const std::vector<BracketPtr> nodes{leaf_node(0), leaf_node(1), bracket_node(leaf_node(0), leaf_node(1))};
    const Example3D ex = example_3d_closed_form(a, y);
    const double num = smallest_eigenvalue(bracket_gram(nodes, f, fx.at(0.5)));
    EXPECT_NEAR(num, ex.lambda_min, 1e-8);
    EXPECT_NEAR(example_3d_lambda_numeric(a, y), ex.lambda_min, 1e-12);
    EXPECT_LE(ex.lambda_min, 1.0);
    Eigen::Matrix3d m;
    for (int k = 0; k < 3; ++k) m.col(k) = evaluator(nodes[static_cast<std::size_t>(k)], f).value(fx.at(0.5));
    EXPECT_NEAR(m.determinant(), ex.det, 1e-12);
    EXPECT_EQ(m.col(2), ex.bracket);
  }
}

TEST(Example3DClosedForm, Substitution) {
  const Example3D ex = example_3d_closed_form(2.0, Eigen::Vector3d::Zero());
  EXPECT_EQ(ex.det, -2.0);
  EXPECT_EQ(ex.bracket, Eigen::Vector3d(0, 0, -1));
  EXPECT_THROW(example_3d_closed_form(1.9, Eigen::Vector3d::Zero()), DomainError);
}

TEST(A5Certificate, EllipticHormanderDegenerate) {
  Config c;
  c.steps = 64;
  c.seed = 3;
  const CoefficientField id = constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2));
  const A5Certificate e = a5_certificate(id, Eigen::Vector2d::Zero(), MeasureSpec{}, c, 20, 2);
  EXPECT_TRUE(e.passed);
  EXPECT_EQ(e.lambda_min, e.lambda_median);
  const A5Certificate h = a5_certificate(hormander_example_3d(), Eigen::Vector3d::Zero(), MeasureSpec{}, c, 200, 1);
  EXPECT_TRUE(h.passed);
  EXPECT_TRUE(std::isfinite(h.inverse_moments[2]));
  const A5Certificate h2 = a5_certificate(hormander_example_3d(), Eigen::Vector3d::Zero(), MeasureSpec{}, c, 400, 1);
  EXPECT_NEAR(h2.inverse_moments[2] / h.inverse_moments[2], 1.0, 0.5);
  const A5Certificate d = a5_certificate(degenerate_pair(), Eigen::Vector2d::Zero(), MeasureSpec{}, c, 20, 2);
  EXPECT_FALSE(d.passed);
}
