#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pathdens/timegrid.hpp"

namespace pathdens {

enum class Convention { Ito, Stratonovich };

// Brownian increments with per-interval second level. The Ito area is stored;
// the Stratonovich view adds (t - s)/2 on the diagonal when read, which keeps
// conversions exactly reversible.
class RoughPath {
 public:
  RoughPath() = default;
  RoughPath(TimeGrid grid, Eigen::MatrixXd increments, std::vector<Eigen::MatrixXd> ito_area,
            Convention convention = Convention::Ito);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return static_cast<int>(increments_.rows()); }
  Convention convention() const { return convention_; }
  const Eigen::MatrixXd& increments() const { return increments_; }
  // Path values B_{t_j} with B_0 = 0, d x (N+1).
  Eigen::MatrixXd values() const;

  Eigen::VectorXd increment(std::size_t a, std::size_t b) const;
  // Second level over one grid interval [t_j, t_{j+1}].
  Eigen::MatrixXd area(std::size_t j) const;
  // Second level over [t_a, t_b], composed from adjacent intervals by Chen's relation.
  Eigen::MatrixXd second_level(std::size_t a, std::size_t b) const;
  // Overwrite the stored per-interval area (for fault-injection tests).
  void set_area(std::size_t j, const Eigen::MatrixXd& area);

  RoughPath with_convention(Convention c) const;

 private:
  TimeGrid grid_;
  Eigen::MatrixXd increments_;
  std::vector<Eigen::MatrixXd> ito_area_;
  Convention convention_ = Convention::Ito;
};

// Independent Gaussian increments keyed by (seed, stream, interval, component); d x N.
Eigen::MatrixXd sample_increments(const TimeGrid& grid, int d, std::uint64_t seed, std::uint64_t stream);
// Path values (d x (N+1)) with B_0 = 0.
Eigen::MatrixXd sample_brownian(const TimeGrid& grid, int d, std::uint64_t seed, std::uint64_t stream);
Eigen::MatrixXd increments_of(const Eigen::MatrixXd& values);
Eigen::MatrixXd values_of(const Eigen::MatrixXd& increments);

// Brownian path on refinements of a base grid built by midpoint (bridge)
// insertion, so that the path at level L restricted to level L-1 points is the
// level L-1 path exactly.
class BrownianTree {
 public:
  BrownianTree(TimeGrid base, int d, std::uint64_t seed, std::uint64_t stream);

  const TimeGrid& base() const { return base_; }
  TimeGrid grid(unsigned level) const { return refine(base_, level); }
  // d x (N_L + 1) values on refine(base, level).
  Eigen::MatrixXd values(unsigned level) const;

 private:
  TimeGrid base_;
  int d_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  mutable std::vector<Eigen::MatrixXd> cache_;
};

// Ito lift on the k-coarsened grid: per coarse interval, the left-point
// Riemann sum of (B_r - B_s) (x) dB_r over its k fine sub-intervals.
RoughPath lift(const TimeGrid& fine_grid, const Eigen::MatrixXd& fine_values, std::size_t k = 16);

RoughPath strat_from_ito(const RoughPath& rp);
RoughPath ito_from_strat(const RoughPath& rp);

// B_{s,t} - B_{s,u} - B_{u,t} - dB_{s,u} (x) dB_{u,t}.
Eigen::MatrixXd chen_defect(const RoughPath& rp, double s, double u, double t);
Eigen::MatrixXd chen_defect_indices(const RoughPath& rp, std::size_t s, std::size_t u, std::size_t t);
// Largest relative Chen defect over all grid triples.
double max_chen_defect(const RoughPath& rp);
// 2 Sym(B_{t_j,t_{j+1}}) - dB (x) dB per interval; RMS of the Frobenius norms.
double geometric_defect_rms(const RoughPath& rp);

// Controlled path (U, U'): U_t in R^m stored as columns, U'_t as an m x d matrix.
struct ControlledPath {
  Eigen::MatrixXd values;                  // m x (N+1)
  std::vector<Eigen::MatrixXd> gubinelli;  // N+1 matrices m x d
};

// Compensated Riemann sums of U dB + U' dB2. The integrand values are
// linear maps R^d -> R^out stored column-major, so m = out * d and
// U'_t is (out * d) x d. Returns out x (N+1), zero before the window start.
Eigen::MatrixXd rough_integral(const ControlledPath& integrand, int out_dim, const RoughPath& rp, double a, double b);

// Left-point Riemann sums of f dg: f scalar path (1 x (N+1)), g in R^m (m x (N+1)).
Eigen::MatrixXd young_integral(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g, std::size_t ia, std::size_t ib);
// Young integral of f (n x (N+1)) against the indicator path s -> 1_{[s,T]} on
// the grid from ia up to it. Returns the grid path r -> -f(r) 1_{[t_ia, t_it)}(r).
Eigen::MatrixXd young_indicator_integral(const Eigen::MatrixXd& f, std::size_t ia, std::size_t it);

// max over grid pairs in the window of |dU - U'_s dB| / (t-s)^{2 alpha}.
double controlled_remainder(const ControlledPath& u, const RoughPath& rp, double alpha, double a, double b);

struct RoughnessReport {
  double theta = 0.0;
  double L_theta = 0.0;
  std::vector<double> epsilon_set;
  int direction_samples = 0;
};

// Estimator of the modulus of theta-Hölder roughness: min over anchors s,
// unit directions phi and scales eps of max_{|t-s| <= eps} |<phi, B_t - B_s>| / eps^theta.
// Directions are `probes` random unit vectors, each also taken orthogonal to the
// largest increment in the window. Empty `scales` is a domain error.
RoughnessReport holder_roughness(const TimeGrid& grid, const Eigen::MatrixXd& values, double theta, int probes,
                                 const std::vector<double>& scales, std::uint64_t seed = 0x5eed);
// Same with the default scales {4, 8, 16, 32} x mean mesh and 64 probes.
RoughnessReport holder_roughness(const TimeGrid& grid, const Eigen::MatrixXd& values, double theta);
std::vector<double> default_roughness_scales(const TimeGrid& grid);

// Hölder norms of a rough path on [t_a, t_b]: ||B||_alpha + ||BB||_{2 alpha}.
double rough_path_norm(const RoughPath& rp, double alpha, std::size_t ia, std::size_t ib);

}  // namespace pathdens
