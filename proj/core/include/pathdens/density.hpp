#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "pathdens/coeffs.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens {

// X(tau) for M independent noise draws, n x M. Sample i uses stream i of config.seed,
// so the result does not depend on the worker count.
Eigen::MatrixXd sample_terminal(const CoefficientField& field, const Eigen::VectorXd& x0, const MeasureSpec& measure,
                                const Config& config, std::size_t samples, std::size_t workers = 0);

// Product lattice: one sorted coordinate axis per dimension, first axis varying fastest.
struct Lattice {
  std::vector<Eigen::VectorXd> axes;

  std::size_t size() const;
  int dim() const { return static_cast<int>(axes.size()); }
  Eigen::VectorXd point(std::size_t flat) const;
  // Trapezoid weight of the lattice point (product of per-axis weights).
  double cell(std::size_t flat) const;
};
// mean +- width * sd per coordinate with `points` nodes per axis.
Lattice covering_lattice(const Eigen::MatrixXd& samples, double width = 6.0, std::size_t points = 64);

// (4 / (n + 2))^{1 / (n + 4)} sd_i M^{-1 / (n + 4)}; DomainError for a zero-spread coordinate.
Eigen::VectorXd silverman_bandwidth(const Eigen::MatrixXd& samples);

// Gaussian product kernel. An empty bandwidth means Silverman. DomainError for M < 2.
Eigen::VectorXd kde(const Eigen::MatrixXd& samples, const Eigen::VectorXd& bandwidth, const Lattice& lattice);
double lattice_mass(const Eigen::VectorXd& values, const Lattice& lattice);

struct RayDecay {
  Eigen::VectorXd direction;
  std::vector<double> modulus;  // |phi| at each frequency
  double slope = 0.0;           // slope of log(-log|phi|) against log|xi|; NaN with < 2 usable points
  std::size_t fitted_points = 0;
  bool decays = true;           // false when |phi| >= 0.5 at every frequency
};
struct DecayReport {
  std::vector<double> frequencies;
  double noise_floor = 0.0;  // 3 M^{-1/2}
  std::vector<RayDecay> rays;
  std::vector<int> non_decaying;  // indices into rays

  bool all_decay() const { return non_decaying.empty(); }
};
// |M^{-1} sum_j exp(i <xi, X_j>)|.
double charfn_modulus(const Eigen::MatrixXd& samples, const Eigen::VectorXd& xi);
// Coordinate rays unless `directions` (unit columns) is given. Slope fits use
// frequencies with noise_floor <= |phi| <= 0.9.
DecayReport charfn_decay(const Eigen::MatrixXd& samples, const std::vector<double>& frequencies,
                         const Eigen::MatrixXd& directions = {});
// Geometric lattice from 0.05 / s to 12 / s, s the largest coordinate sd (1 if all vanish).
std::vector<double> default_frequencies(const Eigen::MatrixXd& samples, std::size_t count = 64);

struct DensityReport {
  std::size_t samples = 0;
  Lattice lattice;
  Eigen::VectorXd kde;
  Eigen::VectorXd bandwidth;
  double mass = 0.0;
  DecayReport charfn;
};
// KDE on the covering lattice (skipped for n > 3) and the decay report.
DensityReport density_report(const Eigen::MatrixXd& samples, std::size_t lattice_points = 64);

}  // namespace pathdens
