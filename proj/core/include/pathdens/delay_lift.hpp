#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pathdens/coeffs.hpp"
#include "pathdens/families.hpp"
#include "pathdens/roughpath.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens {

// Finite-dimensional lift of a discrete-delay SDE: block l carries X(t - shift_l).
struct DelaySystem {
  double horizon = 1.0;
  int n = 1;
  std::vector<double> base_delays;       // h_1 < ... < h_m
  std::vector<double> composite_delays;  // sums of base delays below the horizon, sorted
  std::vector<double> shifts;            // 0, base delays, composite delays
  // wiring[l][i] is the block holding X(t - shift_l - h_i), or -1 when that time
  // never exceeds 0 on [0, T] and the argument stays at x0.
  std::vector<std::vector<int>> wiring;

  std::size_t blocks() const { return shifts.size(); }
  int dim() const { return n * static_cast<int>(shifts.size()); }
};

// Breadth-first closure of delay sums below T. DomainError for delays outside (0, T)
// or not strictly increasing.
DelaySystem build_lift(const std::vector<double>& delays, double horizon, int n);

// Grid points at which the lifted system is evaluated: every shift and every shift difference.
std::vector<double> lift_required_points(const DelaySystem& system);

// Index k with t_k = h, checking that t_j - h = t_{j-k} for all j >= k. DomainError otherwise.
std::size_t shift_index(const TimeGrid& grid, double h);

// B^h_t = B_{t-h} for t >= h and 0 before; d x (N+1) values.
Eigen::MatrixXd shifted_brownian(const TimeGrid& grid, const Eigen::MatrixXd& values, double h);

struct DelayedArea {
  Eigen::MatrixXd upper;             // (i, j): int_s^t (B^i_{r-h} - B^i_{s-h}) dB^j_r
  Eigen::MatrixXd companion;         // (j, i): integration by parts, with -delta_ij delta_{0,h} (t - s)
  Eigen::MatrixXd companion_direct;  // (j, i): int_s^t (B^j_r - B^j_s) dB^i_{r-h}, left-point sum
};
// Left-point Ito sums over the grid between grid times s < t.
DelayedArea delayed_cross_area(const TimeGrid& grid, const Eigen::MatrixXd& values, double h, double s, double t);

// Ito lift of (B, B^{shift_1}, ..., B^{shift_{L-1}}) on the k-coarsened grid, dimension d L.
RoughPath extended_lift(const DelaySystem& system, const TimeGrid& fine_grid, const Eigen::MatrixXd& fine_values,
                        std::size_t k = 16);

// Shifted increments stacked per block, (d L) x N: block l column j is noise column
// j - k_l once j >= k_l, zero before.
Eigen::MatrixXd extended_noise(const DelaySystem& system, const Eigen::MatrixXd& noise, const TimeGrid& grid);

// Block-wise Euler on R^{nL}: block l stays at x0 before its shift and afterwards
// steps with time t_{j - k_l}, mesh dt_{j - k_l} and noise column j - k_l.
// ConfigurationError when the dynamics and the system disagree or the wiring
// names a missing block. Returns (n L) x (N+1).
Eigen::MatrixXd solve_lifted(const DelaySystem& system, const DelayDynamics& dynamics, const Eigen::VectorXd& x0,
                             const Eigen::MatrixXd& noise, const TimeGrid& grid);

// The lifted system as a state-dependent field on R^{nL} driven by extended_noise,
// for reuse of the flow machinery. The grid passed in states must be shift-aligned.
CoefficientField lifted_field(const DelaySystem& system, const DelayDynamics& dynamics, const Eigen::VectorXd& x0);

// Deterministic part only: Heun steps on a uniform shift-aligned grid, advanced one
// smallest-delay interval at a time with the lagged values already computed. n x (N+1).
Eigen::MatrixXd method_of_steps(const DelayDynamics& dynamics, const Eigen::VectorXd& x0, const TimeGrid& grid);

}  // namespace pathdens
