#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pathdens/density.hpp"
#include "pathdens/errors.hpp"
#include "pathdens/families.hpp"
#include "pathdens/rng.hpp"

using namespace pathdens;

namespace {

const MeasureSpec kUnit{1.0, {}};

Config config(std::size_t steps, std::uint64_t seed = 7) {
  Config c;
  c.steps = steps;
  c.seed = seed;
  return c;
}

Eigen::MatrixXd gaussian_samples(int n, std::size_t m, double sd, std::uint64_t seed) {
  const CounterRng rng(seed, 0);
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) out(i, static_cast<Eigen::Index>(j)) = sd * rng.normal(j * n + i);
  return out;
}

}  // namespace

TEST(SampleTerminal, BrownianMeanWithinClt) {
  const auto f = constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2));
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.5, -1.0);
  const std::size_t M = 4000;
  const Eigen::MatrixXd X = sample_terminal(f, x0, kUnit, config(32), M, 1);
  const Eigen::VectorXd mean = X.rowwise().mean();
  for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(mean(i) - x0(i)), 3.0 * std::sqrt(1.0 / M));
}

TEST(SampleTerminal, DeterministicAndReproducible) {
  const auto zero = constant_field(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Zero(2, 2));
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.5, -1.0);
  const Eigen::MatrixXd one = sample_terminal(zero, x0, kUnit, config(16), 1, 1);
  EXPECT_EQ((one.col(0) - x0).norm(), 0.0);

  const auto g = hormander_example_3d();
  const Eigen::VectorXd y0 = Eigen::Vector3d(0.1, 0.2, 0.3);
  const Eigen::MatrixXd a = sample_terminal(g, y0, kUnit, config(32), 50, 1);
  const Eigen::MatrixXd b = sample_terminal(g, y0, kUnit, config(32), 50, 3);
  EXPECT_EQ((a - b).norm(), 0.0);
  const Eigen::MatrixXd c = sample_terminal(g, y0, kUnit, config(32, 8), 50, 1);
  EXPECT_GT((a - c).norm(), 0.0);
}

TEST(SampleTerminal, StopsAtTau) {
  const auto f = constant_field(Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Zero(1, 1));
  Config c = config(16);
  c.tau = 0.5;
  const Eigen::MatrixXd X = sample_terminal(f, Eigen::VectorXd::Zero(1), kUnit, c, 3, 1);
  EXPECT_NEAR(X(0, 2), 1.0, 1e-14);
}

TEST(Kde, GaussianOracle) {
  const Eigen::MatrixXd X = gaussian_samples(1, 100000, 1.0, 3).array() + 0.5;
  const Lattice lat = covering_lattice(X, 6.0, 241);
  const Eigen::VectorXd v = kde(X, {}, lat);
  double sup = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double x = lat.point(i)(0) - 0.5;
    sup = std::max(sup, std::abs(v(static_cast<Eigen::Index>(i)) - std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi)));
  }
  EXPECT_LE(sup, 0.02);
  EXPECT_NEAR(lattice_mass(v, lat), 1.0, 1e-3);
  EXPECT_TRUE((v.array() >= 0.0).all());
}

TEST(Kde, MassOnCoveringLatticeIn2D) {
  Eigen::MatrixXd X = gaussian_samples(2, 5000, 1.0, 4);
  X.row(1) = 0.5 * X.row(0) + 0.3 * X.row(1);
  const Lattice lat = covering_lattice(X, 6.0, 64);
  EXPECT_NEAR(lattice_mass(kde(X, {}, lat), lat), 1.0, 1e-3);
}

TEST(Kde, MassOnCoveringLatticeIn3D) {
  const Eigen::MatrixXd X = gaussian_samples(3, 2000, 0.7, 5);
  const Lattice lat = covering_lattice(X, 6.0, 24);
  const Eigen::VectorXd v = kde(X, {}, lat);
  EXPECT_NEAR(lattice_mass(v, lat), 1.0, 1e-3);
  // Spot check one node against the direct sum.
  const Eigen::VectorXd h = silverman_bandwidth(X);
  const std::size_t flat = 24 * 24 * 11 + 24 * 13 + 7;
  const Eigen::VectorXd p = lat.point(flat);
  double direct = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double k = 1.0;
    for (int i = 0; i < 3; ++i) {
      const double z = (p(i) - X(i, j)) / h(i);
      k *= std::exp(-0.5 * z * z) / (h(i) * std::sqrt(2 * std::numbers::pi));
    }
    direct += k;
  }
  EXPECT_NEAR(v(static_cast<Eigen::Index>(flat)), direct / static_cast<double>(X.cols()), 1e-12);
}

TEST(Kde, TranslationMovesTheLattice) {
  const Eigen::MatrixXd X = gaussian_samples(2, 500, 1.0, 6);
  const Lattice lat = covering_lattice(X, 4.0, 16);
  Lattice moved = lat;
  moved.axes[0].array() += 2.0;
  moved.axes[1].array() -= 1.0;
  Eigen::MatrixXd Y = X;
  Y.row(0).array() += 2.0;
  Y.row(1).array() -= 1.0;
  const Eigen::VectorXd h = silverman_bandwidth(X);
  EXPECT_LE((kde(X, h, lat) - kde(Y, h, moved)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Kde, SymmetricFieldGivesSymmetricEstimate) {
  Eigen::MatrixXd sig(1, 1);
  sig << 1.0;
  const auto odd = constant_field(Eigen::VectorXd::Zero(1), sig);
  const Eigen::MatrixXd X = sample_terminal(odd, Eigen::VectorXd::Zero(1), kUnit, config(16), 20000, 1);
  Lattice lat;
  lat.axes.push_back(Eigen::VectorXd::LinSpaced(61, -3.0, 3.0));
  const Eigen::VectorXd v = kde(X, {}, lat);
  const Eigen::VectorXd h = silverman_bandwidth(X);
  // Pointwise Monte Carlo sd of the estimate is about sqrt(f R(K) / (M h)).
  const double band = 4.0 * std::sqrt(0.4 * 0.2821 / (20000.0 * h(0)));
  for (Eigen::Index i = 0; i < 30; ++i) EXPECT_LE(std::abs(v(i) - v(60 - i)), band);
}

TEST(Kde, RejectsTooFewSamples) {
  Lattice lat;
  lat.axes.push_back(Eigen::VectorXd::LinSpaced(5, -1.0, 1.0));
  EXPECT_THROW(kde(Eigen::MatrixXd::Zero(1, 1), {}, lat), DomainError);
  EXPECT_THROW(silverman_bandwidth(Eigen::MatrixXd::Zero(1, 10)), DomainError);
}

TEST(Charfn, GaussianSlopeIsTwo) {
  const Eigen::MatrixXd X = gaussian_samples(1, 100000, 1.0, 7);
  const auto rep = charfn_decay(X, default_frequencies(X));
  ASSERT_EQ(rep.rays.size(), 1u);
  EXPECT_GE(rep.rays[0].fitted_points, 5u);
  EXPECT_NEAR(rep.rays[0].slope, 2.0, 0.1);
  EXPECT_TRUE(rep.all_decay());
  EXPECT_DOUBLE_EQ(charfn_modulus(X, Eigen::VectorXd::Zero(1)), 1.0);
}

TEST(Charfn, HyperplaneSupportHasNonDecayingNormal) {
  Eigen::MatrixXd X = gaussian_samples(2, 10000, 1.0, 8);
  X.row(1).setConstant(0.7);
  const auto rep = charfn_decay(X, default_frequencies(X));
  ASSERT_EQ(rep.non_decaying.size(), 1u);
  EXPECT_EQ(rep.non_decaying[0], 1);
  for (double m : rep.rays[1].modulus) EXPECT_GE(m, 0.5);
}

TEST(Charfn, DichotomyOnProvidedFamilies) {
  const Eigen::MatrixXd D =
      sample_terminal(degenerate_pair(), Eigen::Vector2d(0.2, 0.4), kUnit, config(64), 2000, 1);
  const auto dr = charfn_decay(D, default_frequencies(D));
  ASSERT_EQ(dr.non_decaying.size(), 1u);
  EXPECT_EQ(dr.non_decaying[0], 1);

  const Eigen::MatrixXd H =
      sample_terminal(hormander_example_3d(), Eigen::Vector3d(0.1, 0.2, 0.3), kUnit, config(64), 2000, 1);
  EXPECT_TRUE(charfn_decay(H, default_frequencies(H)).all_decay());
}

TEST(DensityReport, SkipsKdeForDegenerateSamples) {
  Eigen::MatrixXd X = gaussian_samples(2, 1000, 1.0, 9);
  X.row(1).setZero();
  const auto rep = density_report(X, 32);
  EXPECT_EQ(rep.kde.size(), 0);
  EXPECT_TRUE(std::isnan(rep.mass));
  EXPECT_FALSE(rep.charfn.all_decay());

  const auto ok = density_report(gaussian_samples(2, 1000, 1.0, 10), 32);
  EXPECT_NEAR(ok.mass, 1.0, 1e-3);
  EXPECT_EQ(ok.samples, 1000u);
}
