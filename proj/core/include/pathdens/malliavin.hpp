#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pathdens/coeffs.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens {

struct MalliavinOptions {
  // Number of Malliavin times used for the covariance quadrature.
  std::size_t subgrid = 64;
  FlowOptions flow;
};

// Malliavin times on [0, tau): roughly `count` grid indices, always containing 0 and
// window_start. weight[i] is the Lebesgue length up to the next time (or tau).
struct MalliavinTimes {
  std::vector<std::size_t> index;
  std::vector<double> weight;
};
MalliavinTimes malliavin_times(const TimeGrid& grid, std::size_t tau, std::size_t window_start, std::size_t count);

// D_r X(tau), n x d, column i from propagate_variation started at r with sigma_i(r, X_r).
// Zero for r > tau.
Eigen::MatrixXd malliavin_derivative(const CoefficientField& field, const SolutionBundle& bundle, double r,
                                     double tau, const FdOptions& fd = {});
// Same quantity from the grid operators: Pi_n Y_tau Z_r lift(sigma_i(r, X_r)).
Eigen::MatrixXd malliavin_derivative_operator(const FlowOperators& ops, const CoefficientField& field,
                                              const SolutionBundle& bundle, double r, double tau);
// D_r X(tau) for every requested r <= tau from a single backward sweep.
std::vector<Eigen::MatrixXd> malliavin_derivatives(const CoefficientField& field, const SolutionBundle& bundle,
                                                   std::size_t tau, const std::vector<std::size_t>& times,
                                                   const FlowOptions& opts = {});

struct MalliavinReport {
  std::size_t tau = 0;
  std::size_t window_start = 0;
  MalliavinTimes times;
  std::vector<Eigen::MatrixXd> derivative;  // per Malliavin time, n x d
  Eigen::MatrixXd gamma;                    // over [0, tau]
  Eigen::MatrixXd gamma0;                   // over [window_start, tau]
  double lambda_min = 0.0;
  double lambda_min0 = 0.0;
};

// gamma = sum_i w_i D_{r_i} D_{r_i}^T. gamma0 keeps the terms with r_i >= tau0, so
// gamma - gamma0 is a sum of PSD terms.
MalliavinReport covariance(const CoefficientField& field, const SolutionBundle& bundle, double tau, double tau0,
                           const MalliavinOptions& opts = {});

double smallest_eigenvalue(const Eigen::MatrixXd& sym);

struct TailOptions {
  std::size_t samples = 10000;
  std::vector<double> epsilons;  // empty: 9 log-spaced values in [1e-6, 1e-2]
  std::size_t bootstrap = 200;
  std::size_t workers = 0;
  MalliavinOptions malliavin;
};

struct TailReport {
  std::vector<double> epsilons;
  std::vector<std::size_t> counts;
  std::vector<double> probability;
  // Log-log least squares of probability against epsilon over the nonzero entries.
  double slope = 0.0;
  double slope_lower = 0.0;  // 2.5% bootstrap quantile
  double slope_upper = 0.0;  // 97.5% bootstrap quantile
  std::size_t fitted_points = 0;
  std::vector<double> lambda_min0;  // per sample
};

// Monte Carlo over independent noise streams (sample i uses stream i of config.seed).
TailReport tail_estimate(const CoefficientField& field, const Eigen::VectorXd& x0, const MeasureSpec& measure,
                         const Config& config, const TailOptions& opts = {});
// Slope and bootstrap band for given samples; exposed for tests.
TailReport tail_fit(std::vector<double> lambdas, std::vector<double> epsilons, std::size_t bootstrap,
                    std::uint64_t seed);

struct FdConsistency {
  Eigen::VectorXd bump;       // (X^eps(tau) - X(tau)) / eps
  Eigen::VectorXd malliavin;  // D^i_{t_j} X(tau)
  double gap = 0.0;           // |bump - malliavin| / |malliavin|
};
// Bumps the increment of noise component i on interval j by eps and re-solves.
FdConsistency fd_consistency(const CoefficientField& field, const SolutionBundle& bundle, std::size_t j, int i,
                             double eps, std::size_t tau);

}  // namespace pathdens
