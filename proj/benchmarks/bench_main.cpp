#include <benchmark/benchmark.h>

#include <cmath>

#include "pathdens/coeffs.hpp"
#include "pathdens/density.hpp"
#include "pathdens/families.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/rng.hpp"
#include "pathdens/roughpath.hpp"
#include "pathdens/timegrid.hpp"

namespace {

using namespace pathdens;

void BM_SolveHormander(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const CoefficientField f = hormander_example_3d();
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, n, f.metadata.required_points);
  const Eigen::MatrixXd noise = sample_increments(g, f.d, 7, 0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(f.n);
  for (auto _ : st) benchmark::DoNotOptimize(solve_sde(f, x0, noise, g));
}
BENCHMARK(BM_SolveHormander)->RangeMultiplier(4)->Range(64, 4096);

void BM_SolveIntegralCoefficient(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const CoefficientField f = integral_coefficient(2, 1.0, 0.5, Nonlinearity::Tanh, 0.3);
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, n, f.metadata.required_points);
  const Eigen::MatrixXd noise = sample_increments(g, f.d, 7, 0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(f.n);
  for (auto _ : st) benchmark::DoNotOptimize(solve_sde(f, x0, noise, g));
}
BENCHMARK(BM_SolveIntegralCoefficient)->RangeMultiplier(4)->Range(64, 1024);

void BM_FlowOperators(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const CoefficientField f = integral_coefficient(2, 1.0, 0.5, Nonlinearity::Tanh, 0.3);
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, n, f.metadata.required_points);
  const SolutionBundle b = solve_sde(f, Eigen::VectorXd::Ones(f.n), sample_increments(g, f.d, 7, 0), g);
  const Eigen::VectorXd e = lift_flat(Eigen::VectorXd::Unit(f.n, 0), 0.0, g);
  for (auto _ : st) {
    const FlowOperators ops(f, b);
    benchmark::DoNotOptimize(ops.projected_path(e));
  }
}
BENCHMARK(BM_FlowOperators)->RangeMultiplier(2)->Range(32, 256);

void BM_Lift(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const TimeGrid fine = build_grid(MeasureSpec{1.0, {}}, n * 8);
  const Eigen::MatrixXd w = sample_brownian(fine, 2, 11, 0);
  for (auto _ : st) benchmark::DoNotOptimize(lift(fine, w, 8));
}
BENCHMARK(BM_Lift)->RangeMultiplier(4)->Range(16, 256);

void BM_Kde2d(benchmark::State& st) {
  const auto m = static_cast<Eigen::Index>(st.range(0));
  const TimeGrid g = build_grid(MeasureSpec{1.0, {}}, static_cast<std::size_t>(m));
  const Eigen::MatrixXd samples = sample_increments(g, 2, 3, 0) * std::sqrt(static_cast<double>(m));
  const Lattice lat = covering_lattice(samples, 6.0, 64);
  const Eigen::VectorXd h = silverman_bandwidth(samples);
  for (auto _ : st) benchmark::DoNotOptimize(kde(samples, h, lat));
}
BENCHMARK(BM_Kde2d)->RangeMultiplier(4)->Range(1 << 10, 1 << 14);

}  // namespace

BENCHMARK_MAIN();
