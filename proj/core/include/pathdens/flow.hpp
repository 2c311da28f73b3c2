#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pathdens/coeffs.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens {

struct SolutionBundle {
  TimeGrid grid;
  Eigen::VectorXd x0;
  Eigen::MatrixXd noise;  // d x N increments
  Eigen::MatrixXd X;      // n x (N+1)

  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(noise.rows()); }
  LiftLayout layout() const { return LiftLayout(n(), grid); }
};

// Left-point Euler-Maruyama. DivergenceError names the first non-finite step.
SolutionBundle solve_sde(const CoefficientField& field, const Eigen::VectorXd& x0, const Eigen::MatrixXd& noise,
                         const TimeGrid& grid);

// Lifted state (X^{t_j}, X(t_j)) as a D-vector.
Eigen::VectorXd lifted_state(const SolutionBundle& bundle, std::size_t j);
// All lifted states, D x (N+1).
Eigen::MatrixXd lift_solution(const SolutionBundle& bundle);
// Euler scheme for the lifted equation run directly in the D-dimensional space;
// each increment is added to the slots after the current time and to the point.
Eigen::MatrixXd direct_lifted_solve(const CoefficientField& field, const Eigen::VectorXd& x0,
                                    const Eigen::MatrixXd& noise, const TimeGrid& grid);

enum class InverseScheme {
  // Z_{j+1} = Z_j - Z_j varsigma dt - sum_k Z_j d sigma_k dB^k.
  Euler,
  // Z_{j+1} = Z_j (I + step_j)^{-1}, the exact inverse of each Jacobian step.
  Discrete,
};

struct FlowOptions {
  InverseScheme scheme = InverseScheme::Euler;
  // Finite-difference gradients for fields without an oracle.
  bool allow_fd = true;
  FdOptions fd;
};

// One Euler step of the linearized flow: Y_{j+1} = (I + U_j K_j) Y_j and
// Z_{j+1} = Z_j (I - U_j H_j), where U_j embeds R^n into the slots after t_j
// and the point. K_j and H_j are n x D and only touch slots <= j and the point.
struct StepFactor {
  Gradient K;
  Gradient H;
};

// K_j alone, for sweeps that do not need the inverse.
Gradient step_jacobian(const CoefficientField& field, const SolutionBundle& bundle, std::size_t j,
                       const FlowOptions& opts = {});
StepFactor step_factor(const CoefficientField& field, const SolutionBundle& bundle, std::size_t j,
                       const FlowOptions& opts = {});

// Jacobian and inverse flow on the discretized lift space, stored as step
// factors and applied matrix-free.
class FlowOperators {
 public:
  FlowOperators(const CoefficientField& field, const SolutionBundle& bundle, const FlowOptions& opts = {});

  const TimeGrid& grid() const { return grid_; }
  const LiftLayout& layout() const { return layout_; }
  std::size_t dim() const { return layout_.dim(); }
  std::size_t steps() const { return factors_.size(); }
  InverseScheme scheme() const { return scheme_; }
  const StepFactor& factor(std::size_t j) const { return factors_[j]; }

  Eigen::VectorXd apply_Y(std::size_t j, const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_Z(std::size_t j, const Eigen::VectorXd& v) const;
  // Row-vector applications rho Y_j and rho Z_j for m x D blocks of rows.
  Eigen::MatrixXd left_Y(std::size_t j, const Eigen::MatrixXd& rho) const;
  Eigen::MatrixXd left_Z(std::size_t j, const Eigen::MatrixXd& rho) const;
  // Pi_n Y_j as an n x D matrix.
  Eigen::MatrixXd projected_Y(std::size_t j) const;
  // Point parts of Y_j v for every j, n x (N+1).
  Eigen::MatrixXd projected_path(const Eigen::VectorXd& v) const;

  // Dense D x D matrices, for small grids only.
  Eigen::MatrixXd dense_Y(std::size_t j) const;
  Eigen::MatrixXd dense_Z(std::size_t j) const;

 private:
  TimeGrid grid_;
  LiftLayout layout_;
  InverseScheme scheme_;
  std::vector<StepFactor> factors_;
};

FlowOperators jacobian_grid(const CoefficientField& field, const SolutionBundle& bundle, const FlowOptions& opts = {});
FlowOperators inverse_grid(const CoefficientField& field, const SolutionBundle& bundle, const FlowOptions& opts = {});

// Backward sweep of rows rho through Y_{tau <- r} = (I + U_{tau-1} K_{tau-1}) ... (I + U_r K_r).
// For every r from tau down to `stop`, `visit(r, coef)` receives the m x n matrix
// with (rho Y_{tau <- r}) lift(w, t_r) = coef w.
void backward_lifted_sweep(const std::function<const Gradient&(std::size_t)>& K, const LiftLayout& layout,
                           std::size_t tau, std::size_t stop, Eigen::MatrixXd rho,
                           const std::function<void(std::size_t, const Eigen::MatrixXd&)>& visit);

// Linearized Euler scheme started at t_s with value v, driven by the same noise.
// Returns n x (N+1), zero before s.
Eigen::MatrixXd propagate_variation(const CoefficientField& field, const SolutionBundle& bundle, std::size_t s,
                                    const Eigen::VectorXd& v, const FdOptions& opts = {});

// Pi_n Y_tau Z_s v for grid times tau and s.
Eigen::VectorXd j_tau_s(const FlowOperators& ops, double tau, double s, const LiftedVector& v);

// Ascending sweep rho_s = (Pi_n Y_tau) Z_s over s = 0, 1, ..., giving J_{tau,s} applied to
// lifted directions in O(1) per evaluation after an O(nnz) advance.
class JacobianSweep {
 public:
  JacobianSweep(const FlowOperators& ops, std::size_t tau);

  std::size_t position() const { return pos_; }
  void advance_to(std::size_t s);
  // n x n matrix M with J_{tau,s} (vector equal to w on slots >= from and the point) = M w.
  // Requires from >= position().
  Eigen::MatrixXd lifted(std::size_t from) const;
  // J_{tau,s} applied to the slot-r block alone (n x n).
  Eigen::MatrixXd slot(std::size_t r) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  const Eigen::MatrixXd& rows() const { return rho_; }

 private:
  const FlowOperators& ops_;
  std::size_t pos_ = 0;
  Eigen::MatrixXd rho_;                 // n x D
  std::vector<Eigen::MatrixXd> suffix_;  // suffix_[r] = sum_{r' >= r} ell[slot r'], n x n
};

struct InverseResidual {
  double zy = 0.0;  // max over probes of |Z Y v - v| / |v| (sup norms)
  double yz = 0.0;
};
// Probes: lift(e_i, t_r) at `anchors` evenly spaced grid times plus point-only e_i.
InverseResidual check_inverse(const FlowOperators& ops, std::size_t j, int anchors = 16);

}  // namespace pathdens
