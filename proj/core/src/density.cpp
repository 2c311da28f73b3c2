#include "pathdens/density.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "pathdens/errors.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/parallel.hpp"
#include "pathdens/roughpath.hpp"

namespace pathdens {

namespace {

Eigen::VectorXd coordinate_sd(const Eigen::MatrixXd& samples) {
  const double m = static_cast<double>(samples.cols());
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::MatrixXd c = samples.colwise() - mean;
  return (c.array().square().rowwise().sum() / std::max(1.0, m - 1.0)).sqrt().matrix();
}

// Kernel values of one axis, points x samples.
Eigen::MatrixXd axis_kernel(const Eigen::VectorXd& axis, const Eigen::RowVectorXd& coord, double h) {
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  Eigen::MatrixXd out(axis.size(), coord.size());
  for (Eigen::Index j = 0; j < coord.size(); ++j)
    out.col(j) = (-0.5 * ((axis.array() - coord(j)) / h).square()).exp() * norm;
  return out;
}

}  // namespace

Eigen::MatrixXd sample_terminal(const CoefficientField& field, const Eigen::VectorXd& x0, const MeasureSpec& measure,
                                const Config& config, std::size_t samples, std::size_t workers) {
  config.validate(measure);
  if (x0.size() != field.n) throw DomainError("initial value does not match the field dimension");
  std::vector<double> req = field.metadata.required_points;
  req.push_back(config.tau);
  const TimeGrid grid = build_grid(measure, config, req);
  const std::size_t j = grid.index_of(config.tau);
  const auto cols = parallel_map<Eigen::VectorXd>(samples, resolve_workers(workers), [&](std::size_t i) {
    const SolutionBundle b = solve_sde(field, x0, sample_increments(grid, field.d, config.seed, i), grid);
    return Eigen::VectorXd(b.X.col(static_cast<Eigen::Index>(j)));
  });
  Eigen::MatrixXd out(field.n, static_cast<Eigen::Index>(samples));
  for (std::size_t i = 0; i < samples; ++i) out.col(static_cast<Eigen::Index>(i)) = cols[i];
  return out;
}

std::size_t Lattice::size() const {
  std::size_t s = 1;
  for (const auto& a : axes) s *= static_cast<std::size_t>(a.size());
  return axes.empty() ? 0 : s;
}

Eigen::VectorXd Lattice::point(std::size_t flat) const {
  Eigen::VectorXd p(dim());
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const std::size_t len = static_cast<std::size_t>(axes[a].size());
    p(static_cast<Eigen::Index>(a)) = axes[a](static_cast<Eigen::Index>(flat % len));
    flat /= len;
  }
  return p;
}

double Lattice::cell(std::size_t flat) const {
  double w = 1.0;
  for (const auto& ax : axes) {
    const Eigen::Index len = ax.size();
    const Eigen::Index i = static_cast<Eigen::Index>(flat % static_cast<std::size_t>(len));
    flat /= static_cast<std::size_t>(len);
    if (len < 2) continue;
    const double left = i > 0 ? ax(i) - ax(i - 1) : 0.0;
    const double right = i + 1 < len ? ax(i + 1) - ax(i) : 0.0;
    w *= 0.5 * (left + right);
  }
  return w;
}

Lattice covering_lattice(const Eigen::MatrixXd& samples, double width, std::size_t points) {
  if (samples.cols() < 1) throw DomainError("lattice needs samples");
  if (points < 2) throw DomainError("lattice needs at least two points per axis");
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::VectorXd sd = coordinate_sd(samples);
  Lattice lat;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double half = width * (sd(i) > 0.0 ? sd(i) : 1.0);
    lat.axes.push_back(
        Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(points), mean(i) - half, mean(i) + half));
  }
  return lat;
}

Eigen::VectorXd silverman_bandwidth(const Eigen::MatrixXd& samples) {
  if (samples.cols() < 2) throw DomainError("bandwidth needs at least two samples");
  const double n = static_cast<double>(samples.rows());
  const double m = static_cast<double>(samples.cols());
  const double factor = std::pow(4.0 / (n + 2.0), 1.0 / (n + 4.0)) * std::pow(m, -1.0 / (n + 4.0));
  Eigen::VectorXd h = coordinate_sd(samples) * factor;
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (!(h(i) > 0.0)) throw DomainError("coordinate " + std::to_string(i) + " has zero spread");
  return h;
}

Eigen::VectorXd kde(const Eigen::MatrixXd& samples, const Eigen::VectorXd& bandwidth, const Lattice& lattice) {
  if (samples.cols() < 2) throw DomainError("kde needs at least two samples");
  if (lattice.dim() != samples.rows()) throw DomainError("lattice dimension does not match the samples");
  const Eigen::VectorXd h = bandwidth.size() == 0 ? silverman_bandwidth(samples) : bandwidth;
  if (h.size() != samples.rows() || !(h.array() > 0.0).all()) throw DomainError("bandwidth must be positive per coordinate");
  const double m = static_cast<double>(samples.cols());
  const int n = lattice.dim();
  std::vector<Eigen::MatrixXd> K;
  for (int a = 0; a < n; ++a) K.push_back(axis_kernel(lattice.axes[static_cast<std::size_t>(a)], samples.row(a), h(a)));

  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lattice.size()));
  if (n == 1) {
    out = K[0].rowwise().sum() / m;
  } else if (n == 2) {
    const Eigen::MatrixXd P = K[0] * K[1].transpose() / m;
    out = Eigen::Map<const Eigen::VectorXd>(P.data(), P.size());
  } else {
    // Accumulate one slab of the first two axes per index of the remaining axes.
    const Eigen::Index slab = K[0].rows() * K[1].rows();
    const std::size_t rest = lattice.size() / static_cast<std::size_t>(slab);
    for (std::size_t r = 0; r < rest; ++r) {
      Eigen::RowVectorXd w = Eigen::RowVectorXd::Ones(samples.cols());
      std::size_t idx = r;
      for (int a = 2; a < n; ++a) {
        const std::size_t len = static_cast<std::size_t>(K[static_cast<std::size_t>(a)].rows());
        w.array() *= K[static_cast<std::size_t>(a)].row(static_cast<Eigen::Index>(idx % len)).array();
        idx /= len;
      }
      const Eigen::MatrixXd P = (K[0] * w.asDiagonal()) * K[1].transpose() / m;
      out.segment(static_cast<Eigen::Index>(r) * slab, slab) = Eigen::Map<const Eigen::VectorXd>(P.data(), P.size());
    }
  }
  return out;
}

double lattice_mass(const Eigen::VectorXd& values, const Lattice& lattice) {
  if (static_cast<std::size_t>(values.size()) != lattice.size()) throw DomainError("values do not match the lattice");
  double mass = 0.0;
  for (std::size_t i = 0; i < lattice.size(); ++i) mass += values(static_cast<Eigen::Index>(i)) * lattice.cell(i);
  return mass;
}

double charfn_modulus(const Eigen::MatrixXd& samples, const Eigen::VectorXd& xi) {
  if (xi.size() != samples.rows()) throw DomainError("frequency dimension does not match the samples");
  if (samples.cols() == 0) return 0.0;
  const Eigen::ArrayXd phase = (xi.transpose() * samples).transpose().array();
  const double m = static_cast<double>(samples.cols());
  return std::hypot(phase.cos().sum() / m, phase.sin().sum() / m);
}

DecayReport charfn_decay(const Eigen::MatrixXd& samples, const std::vector<double>& frequencies,
                         const Eigen::MatrixXd& directions) {
  const Eigen::MatrixXd dirs =
      directions.size() == 0 ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(samples.rows(), samples.rows())) : directions;
  if (dirs.rows() != samples.rows()) throw DomainError("directions do not match the sample dimension");
  DecayReport rep;
  rep.frequencies = frequencies;
  rep.noise_floor = samples.cols() > 0 ? 3.0 / std::sqrt(static_cast<double>(samples.cols())) : 1.0;
  for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
    RayDecay ray;
    ray.direction = dirs.col(c).normalized();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (double r : frequencies) {
      const double mod = charfn_modulus(samples, r * ray.direction);
      ray.modulus.push_back(mod);
      lowest = std::min(lowest, mod);
      if (r > 0.0 && mod >= rep.noise_floor && mod <= 0.9) {
        const double x = std::log(r);
        const double y = std::log(-std::log(mod));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++ray.fitted_points;
      }
    }
    const double k = static_cast<double>(ray.fitted_points);
    const double den = k * sxx - sx * sx;
    ray.slope = ray.fitted_points >= 2 && den > 0.0 ? (k * sxy - sx * sy) / den
                                                    : std::numeric_limits<double>::quiet_NaN();
    ray.decays = !frequencies.empty() && lowest < 0.5;
    if (!ray.decays) rep.non_decaying.push_back(static_cast<int>(c));
    rep.rays.push_back(std::move(ray));
  }
  return rep;
}

std::vector<double> default_frequencies(const Eigen::MatrixXd& samples, std::size_t count) {
  if (count < 2) throw DomainError("frequency lattice needs at least two points");
  double s = samples.cols() > 1 ? coordinate_sd(samples).maxCoeff() : 0.0;
  if (!(s > 0.0)) s = 1.0;
  std::vector<double> out;
  const double lo = std::log(0.05 / s), hi = std::log(12.0 / s);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1)));
  return out;
}

DensityReport density_report(const Eigen::MatrixXd& samples, std::size_t lattice_points) {
  DensityReport rep;
  rep.samples = static_cast<std::size_t>(samples.cols());
  rep.charfn = charfn_decay(samples, default_frequencies(samples));
  const bool spread = samples.cols() >= 2 && (coordinate_sd(samples).array() > 0.0).all();
  if (samples.rows() <= 3 && spread) {
    rep.lattice = covering_lattice(samples, 6.0, lattice_points);
    rep.bandwidth = silverman_bandwidth(samples);
    rep.kde = kde(samples, rep.bandwidth, rep.lattice);
    rep.mass = lattice_mass(rep.kde, rep.lattice);
  } else {
    rep.mass = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace pathdens
