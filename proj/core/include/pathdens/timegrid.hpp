#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace pathdens {

struct Atom {
  double time = 0.0;
  double weight = 0.0;
};

// mu = Lebesgue on [0, T] plus finitely many point masses.
struct MeasureSpec {
  double horizon = 1.0;
  std::vector<Atom> atoms;

  void validate() const;
  double total_mass() const;
  // mu of the half-open interval [a, b).
  double mass(double a, double b) const;
};

// Sorted grid 0 = t_0 < ... < t_N = T with left-endpoint quadrature weights:
// weight_j = (t_{j+1} - t_j) + atom mass at t_j, and weight_N = atom mass at T.
// mu[t_a, t_b) is then exactly the sum of weights a..b-1.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(MeasureSpec measure, std::vector<double> points);

  std::size_t size() const { return points_.size(); }
  std::size_t steps() const { return points_.empty() ? 0 : points_.size() - 1; }
  double horizon() const { return measure_.horizon; }
  double time(std::size_t j) const { return points_[j]; }
  double dt(std::size_t j) const { return lebesgue_[j]; }
  double weight(std::size_t j) const { return weights_[j]; }
  double lebesgue_weight(std::size_t j) const { return lebesgue_[j]; }
  double atom_weight(std::size_t j) const { return weights_[j] - (j < lebesgue_.size() ? lebesgue_[j] : 0.0); }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  const MeasureSpec& measure() const { return measure_; }

  std::optional<std::size_t> find(double t) const;
  // Index of a grid point; DomainError when t is not on the grid.
  std::size_t index_of(double t) const;
  // Largest j with t_j <= t (t clamped into [0, T]).
  std::size_t index_at(double t) const;

  // mu[t_a, t_b) for a <= b.
  double mass_between(std::size_t a, std::size_t b) const;
  // mu[t_a, T].
  double mass_from(std::size_t a) const;
  double total_mass() const { return mass_from(0); }

  bool uniform(double rel_tol = 1e-12) const;

 private:
  MeasureSpec measure_;
  std::vector<double> points_;
  std::vector<double> weights_;
  std::vector<double> lebesgue_;  // t_{j+1} - t_j, size N
  std::vector<double> suffix_;    // suffix_[a] = mu[t_a, T]
};

struct Config {
  double p = 1.4;
  double tau = 1.0;
  double tau0 = 0.0;
  std::uint64_t seed = 0;
  std::size_t steps = 256;

  double alpha() const { return 1.0 / (2.0 * p); }
  // Checks p, tau, tau0 and that [tau0, tau) carries no atom; ConfigurationError otherwise.
  void validate(const MeasureSpec& measure) const;
};

TimeGrid build_grid(const MeasureSpec& measure, std::size_t n_steps, const std::vector<double>& required_points = {});
TimeGrid build_grid(const MeasureSpec& measure, const Config& config, const std::vector<double>& extra_points = {});
// Splits every interval into 2^levels equal parts (midpoint insertion).
TimeGrid refine(const TimeGrid& grid, unsigned levels);
// Keeps every k-th point; the grid must have a multiple of k intervals.
TimeGrid coarsen(const TimeGrid& grid, std::size_t k);

// Grid paths are n x (N+1) matrices, column j holding x(t_j).
double lp_norm(const Eigen::MatrixXd& path, const TimeGrid& grid, double p);
double lifted_norm(const Eigen::MatrixXd& path, const Eigen::VectorXd& point, const TimeGrid& grid, double p);
// mu[t, t + dt)^{1/p}; both endpoints must be grid points.
double indicator_distance(double t, double dt, const TimeGrid& grid, double p);
// n (mu[t, T] + 1), the squared Hilbert-Schmidt norm of the lift embedding at t.
double hs_norm_S(double t, const TimeGrid& grid, int n);
// max over grid pairs s < t in [a, b] of |v_t - v_s| / (t - s)^alpha; columns of `values` are the samples.
double holder_seminorm(const Eigen::MatrixXd& values, const TimeGrid& grid, double alpha, double a, double b);
double holder_seminorm_indices(const Eigen::MatrixXd& values, const TimeGrid& grid, double alpha, std::size_t ia,
                               std::size_t ib);

// Coordinates of the discretized lift space R^{n(N+1)} (+) R^n: slot r occupies
// [r n, r n + n), the point part the last n entries.
struct LiftLayout {
  int n = 1;
  std::size_t slots = 1;

  LiftLayout() = default;
  LiftLayout(int n_, std::size_t slots_) : n(n_), slots(slots_) {}
  LiftLayout(int n_, const TimeGrid& grid) : n(n_), slots(grid.size()) {}

  std::size_t dim() const { return static_cast<std::size_t>(n) * slots + static_cast<std::size_t>(n); }
  std::size_t slot(std::size_t r) const { return r * static_cast<std::size_t>(n); }
  std::size_t point() const { return static_cast<std::size_t>(n) * slots; }
  std::size_t slot_of(std::size_t coord) const { return coord / static_cast<std::size_t>(n); }
  bool is_point(std::size_t coord) const { return coord >= point(); }
};

// Norm of a D-vector in the discretized lift space.
double lift_space_norm(const Eigen::VectorXd& v, const LiftLayout& layout, const TimeGrid& grid, double p);

}  // namespace pathdens
