#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <vector>

#include "pathdens/timegrid.hpp"

namespace pathdens {

// Argument of a non-anticipative functional: time t, the stopped path on the
// grid and the current value. Only path columns with grid time <= t may be
// read; later columns can hold stale data during a solve.
struct State {
  const TimeGrid& grid;
  double t;
  const Eigen::MatrixXd& path;  // n x (N+1)
  const Eigen::VectorXd& value;

  // Largest grid index with time <= t.
  std::size_t index() const { return grid.index_at(t); }
  int n() const { return static_cast<int>(value.size()); }
};

// Selects the drift b or the diffusion column sigma_k of a field.
struct Which {
  enum class Kind { Drift, Sigma };
  Kind kind = Kind::Drift;
  int k = 0;

  static Which drift() { return {Kind::Drift, 0}; }
  static Which sigma(int k) { return {Kind::Sigma, k}; }
  bool is_drift() const { return kind == Kind::Drift; }
};

// Derivative with respect to the lifted state: n x D with D = n(N+1) + n,
// laid out as in LiftLayout.
using Gradient = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct FieldMetadata {
  std::string family = "user";
  // Declared polynomial growth exponents for the coefficients and their
  // derivatives. Carried for reporting only.
  std::vector<double> growth_exponents;
  bool smooth_in_time = true;
  // Depends on (t, current value) only.
  bool state_only = false;
  // Grid points the field reads from (switch times, sampling times, lags).
  std::vector<double> required_points;
};

struct CoefficientField {
  using DriftFn = std::function<Eigen::VectorXd(const State&)>;
  using SigmaFn = std::function<Eigen::MatrixXd(const State&)>;
  // Appends the nonzero entries of the gradient (rows 0..n-1, lifted coordinates).
  using GradientFn = std::function<void(const State&, Which, Triplets&)>;
  // Partial derivative in t at fixed (path, value), for b or one sigma column.
  using TimeFn = std::function<Eigen::VectorXd(const State&, Which)>;

  int n = 1;
  int d = 1;
  DriftFn drift;
  SigmaFn sigma;
  GradientFn gradient;
  TimeFn time_derivative;
  FieldMetadata metadata;

  bool has_gradient() const { return static_cast<bool>(gradient); }
  bool has_time_derivative() const { return static_cast<bool>(time_derivative); }
};

// Field with only drift and diffusion closures; derivatives fall back to finite differences.
CoefficientField user_field(int n, int d, CoefficientField::DriftFn drift, CoefficientField::SigmaFn sigma,
                            FieldMetadata metadata = {});

struct FdOptions {
  bool prefer_oracle = true;
  // Central difference step is rel_step * max(1, |state|).
  double rel_step = 1e-5;
};

Eigen::VectorXd eval_b(const CoefficientField& field, const State& state);
Eigen::MatrixXd eval_sigma(const CoefficientField& field, const State& state);
Eigen::VectorXd eval(const CoefficientField& field, Which which, const State& state);

// Full lifted gradient, from the oracle or by finite differences over the
// coordinates a non-anticipative field can see.
Gradient gradient(const CoefficientField& field, Which which, const State& state, const FdOptions& opts = {});

// n x n matrix; column i is the derivative along (1_{[t,T]} e_i, e_i).
Eigen::MatrixXd vertical_derivative(const CoefficientField& field, Which which, const State& state,
                                    const FdOptions& opts = {});
// Derivative along the lifted direction (dpath, dvalue).
Eigen::VectorXd directional_derivative(const CoefficientField& field, Which which, const State& state,
                                       const Eigen::MatrixXd& dpath, const Eigen::VectorXd& dvalue,
                                       const FdOptions& opts = {});
// All sigma columns at once: n x d.
Eigen::MatrixXd directional_derivative_sigma(const CoefficientField& field, const State& state,
                                             const Eigen::MatrixXd& dpath, const Eigen::VectorXd& dvalue,
                                             const FdOptions& opts = {});

struct TimeDerivative {
  Eigen::VectorXd value;
  bool one_sided = false;
};
// Central difference at +-step/2 (step defaults to the local mesh) with the
// path and value frozen; one-sided at 0 and T.
TimeDerivative time_derivative(const CoefficientField& field, Which which, const State& state, double step = 0.0,
                               const FdOptions& opts = {});

// Element (1_{[t,T]} V, V) of the discretized lift space.
struct LiftedVector {
  Eigen::MatrixXd path_part;  // n x (N+1)
  Eigen::VectorXd point_part;

  Eigen::VectorXd flatten() const;
  static LiftedVector unflatten(const Eigen::VectorXd& v, const LiftLayout& layout);
};

// Path part r -> 1_{[t,T]}(t_r) v, point part v.
LiftedVector lift(const Eigen::VectorXd& v, double t, const TimeGrid& grid);
Eigen::VectorXd lift_flat(const Eigen::VectorXd& v, double t, const TimeGrid& grid);
// First grid index with time >= t.
std::size_t first_index_from(const TimeGrid& grid, double t);

}  // namespace pathdens
