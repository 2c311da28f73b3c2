#include "pathdens/malliavin.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "pathdens/errors.hpp"
#include "pathdens/parallel.hpp"
#include "pathdens/rng.hpp"
#include "pathdens/roughpath.hpp"

namespace pathdens {

namespace {

Eigen::MatrixXd sigma_at(const CoefficientField& field, const SolutionBundle& bundle, std::size_t r) {
  const Eigen::VectorXd value = bundle.X.col(static_cast<Eigen::Index>(r));
  return eval_sigma(field, State{bundle.grid, bundle.grid.time(r), bundle.X, value});
}

std::vector<double> default_epsilons() {
  std::vector<double> e;
  for (int k = 0; k <= 8; ++k) e.push_back(std::pow(10.0, -6.0 + 0.5 * k));
  return e;
}

struct Fit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t points = 0;
};

// lambdas must be sorted.
Fit fit_slope(const std::vector<double>& lambdas, const std::vector<double>& eps, std::vector<std::size_t>* counts) {
  std::vector<double> xs, ys;
  const double m = static_cast<double>(lambdas.size());
  for (double e : eps) {
    const std::size_t c =
        static_cast<std::size_t>(std::upper_bound(lambdas.begin(), lambdas.end(), e) - lambdas.begin());
    if (counts) counts->push_back(c);
    if (c > 0) {
      xs.push_back(std::log(e));
      ys.push_back(std::log(static_cast<double>(c) / m));
    }
  }
  Fit f;
  f.points = xs.size();
  if (xs.size() < 2) return f;
  const double k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  f.slope = sxy / sxx;
  return f;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

MalliavinTimes malliavin_times(const TimeGrid& grid, std::size_t tau, std::size_t window_start, std::size_t count) {
  if (tau >= grid.size()) throw DomainError("tau beyond the grid");
  if (window_start > tau) throw DomainError("window start after tau");
  if (count == 0) throw DomainError("at least one Malliavin time is needed");
  std::vector<std::size_t> idx;
  if (tau <= count) {
    for (std::size_t r = 0; r < tau; ++r) idx.push_back(r);
  } else {
    for (std::size_t k = 0; k < count; ++k)
      idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(tau) /
                                                          static_cast<double>(count))));
    if (window_start < tau) idx.push_back(window_start);
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  }
  MalliavinTimes out;
  out.index = idx;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t next = i + 1 < idx.size() ? idx[i + 1] : tau;
    out.weight.push_back(grid.time(next) - grid.time(idx[i]));
  }
  return out;
}

Eigen::MatrixXd malliavin_derivative(const CoefficientField& field, const SolutionBundle& bundle, double r,
                                     double tau, const FdOptions& fd) {
  const std::size_t ir = bundle.grid.index_of(r);
  const std::size_t it = bundle.grid.index_of(tau);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(field.n, field.d);
  if (ir > it) return out;
  const Eigen::MatrixXd sig = sigma_at(field, bundle, ir);
  for (int i = 0; i < field.d; ++i)
    out.col(i) = propagate_variation(field, bundle, ir, sig.col(i), fd).col(static_cast<Eigen::Index>(it));
  return out;
}

Eigen::MatrixXd malliavin_derivative_operator(const FlowOperators& ops, const CoefficientField& field,
                                              const SolutionBundle& bundle, double r, double tau) {
  const std::size_t ir = bundle.grid.index_of(r);
  const std::size_t it = bundle.grid.index_of(tau);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(field.n, field.d);
  if (ir > it) return out;
  const Eigen::MatrixXd sig = sigma_at(field, bundle, ir);
  for (int i = 0; i < field.d; ++i) out.col(i) = j_tau_s(ops, tau, r, lift(Eigen::VectorXd(sig.col(i)), r, bundle.grid));
  return out;
}

std::vector<Eigen::MatrixXd> malliavin_derivatives(const CoefficientField& field, const SolutionBundle& bundle,
                                                   std::size_t tau, const std::vector<std::size_t>& times,
                                                   const FlowOptions& opts) {
  if (tau >= bundle.grid.size()) throw DomainError("tau beyond the grid");
  std::vector<Eigen::MatrixXd> out(times.size(), Eigen::MatrixXd::Zero(field.n, field.d));
  std::vector<std::ptrdiff_t> slot(tau + 1, -1);
  std::size_t stop = tau;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] > tau) continue;
    slot[times[i]] = static_cast<std::ptrdiff_t>(i);
    stop = std::min(stop, times[i]);
  }
  const LiftLayout layout = bundle.layout();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(field.n, static_cast<Eigen::Index>(layout.dim()));
  rho.rightCols(field.n).setIdentity();
  Gradient current;
  auto K = [&](std::size_t j) -> const Gradient& {
    current = step_jacobian(field, bundle, j, opts);
    return current;
  };
  backward_lifted_sweep(K, layout, tau, stop, rho, [&](std::size_t r, const Eigen::MatrixXd& coef) {
    if (slot[r] >= 0) out[static_cast<std::size_t>(slot[r])] = coef * sigma_at(field, bundle, r);
  });
  return out;
}

double smallest_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

MalliavinReport covariance(const CoefficientField& field, const SolutionBundle& bundle, double tau, double tau0,
                           const MalliavinOptions& opts) {
  const TimeGrid& grid = bundle.grid;
  if (tau0 < 0.0 || tau0 > tau || tau > grid.horizon()) throw DomainError("covariance window outside [0, tau]");
  MalliavinReport rep;
  rep.tau = grid.index_of(tau);
  rep.window_start = grid.index_of(tau0);
  rep.times = malliavin_times(grid, rep.tau, rep.window_start, opts.subgrid);
  rep.derivative = malliavin_derivatives(field, bundle, rep.tau, rep.times.index, opts.flow);
  rep.gamma = Eigen::MatrixXd::Zero(field.n, field.n);
  rep.gamma0 = Eigen::MatrixXd::Zero(field.n, field.n);
  // gamma0 first, so gamma is gamma0 plus the earlier terms.
  for (std::size_t i = 0; i < rep.times.index.size(); ++i) {
    if (rep.times.index[i] < rep.window_start) continue;
    const Eigen::MatrixXd& D = rep.derivative[i];
    rep.gamma0.noalias() += rep.times.weight[i] * (D * D.transpose());
  }
  rep.gamma = rep.gamma0;
  for (std::size_t i = 0; i < rep.times.index.size(); ++i) {
    if (rep.times.index[i] >= rep.window_start) continue;
    const Eigen::MatrixXd& D = rep.derivative[i];
    rep.gamma.noalias() += rep.times.weight[i] * (D * D.transpose());
  }
  rep.gamma = 0.5 * (rep.gamma + rep.gamma.transpose()).eval();
  rep.gamma0 = 0.5 * (rep.gamma0 + rep.gamma0.transpose()).eval();
  rep.lambda_min = smallest_eigenvalue(rep.gamma);
  rep.lambda_min0 = smallest_eigenvalue(rep.gamma0);
  return rep;
}

TailReport tail_fit(std::vector<double> lambdas, std::vector<double> epsilons, std::size_t bootstrap,
                    std::uint64_t seed) {
  if (epsilons.empty()) epsilons = default_epsilons();
  std::sort(epsilons.begin(), epsilons.end());
  TailReport rep;
  rep.lambda_min0 = lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  rep.epsilons = epsilons;
  const Fit f = fit_slope(lambdas, epsilons, &rep.counts);
  rep.slope = f.slope;
  rep.fitted_points = f.points;
  const double m = static_cast<double>(lambdas.size());
  for (std::size_t c : rep.counts) rep.probability.push_back(static_cast<double>(c) / m);
  std::vector<double> slopes;
  std::vector<double> resample(lambdas.size());
  for (std::size_t b = 0; b < bootstrap; ++b) {
    const CounterRng rng(seed, derive_stream(0xb007, b));
    for (std::size_t i = 0; i < resample.size(); ++i) {
      const std::size_t k = std::min(lambdas.size() - 1, static_cast<std::size_t>(rng.uniform(i) * m));
      resample[i] = lambdas[k];
    }
    std::sort(resample.begin(), resample.end());
    const Fit fb = fit_slope(resample, epsilons, nullptr);
    if (fb.points >= 2) slopes.push_back(fb.slope);
  }
  rep.slope_lower = quantile(slopes, 0.025);
  rep.slope_upper = quantile(slopes, 0.975);
  return rep;
}

TailReport tail_estimate(const CoefficientField& field, const Eigen::VectorXd& x0, const MeasureSpec& measure,
                         const Config& config, const TailOptions& opts) {
  if (opts.samples < 100) throw DomainError("tail estimates need at least 100 samples");
  config.validate(measure);
  const TimeGrid grid = build_grid(measure, config, field.metadata.required_points);
  const std::size_t workers = resolve_workers(opts.workers);
  const std::vector<double> lambdas = parallel_map<double>(opts.samples, workers, [&](std::size_t i) {
    const SolutionBundle b = solve_sde(field, x0, sample_increments(grid, field.d, config.seed, i), grid);
    return covariance(field, b, config.tau, config.tau0, opts.malliavin).lambda_min0;
  });
  return tail_fit(lambdas, opts.epsilons, opts.bootstrap, config.seed);
}

FdConsistency fd_consistency(const CoefficientField& field, const SolutionBundle& bundle, std::size_t j, int i,
                             double eps, std::size_t tau) {
  if (!(eps > 0.0)) throw DomainError("bump size must be positive");
  if (j >= bundle.grid.steps() || tau >= bundle.grid.size()) throw DomainError("index beyond the grid");
  if (i < 0 || i >= field.d) throw DomainError("noise component out of range");
  Eigen::MatrixXd noise = bundle.noise;
  noise(i, static_cast<Eigen::Index>(j)) += eps;
  const SolutionBundle bumped = solve_sde(field, bundle.x0, noise, bundle.grid);
  const Eigen::Index t = static_cast<Eigen::Index>(tau);
  FdConsistency out;
  out.bump = (bumped.X.col(t) - bundle.X.col(t)) / eps;
  out.malliavin =
      malliavin_derivative(field, bundle, bundle.grid.time(j), bundle.grid.time(tau)).col(i);
  const double scale = out.malliavin.norm();
  const double diff = (out.bump - out.malliavin).norm();
  out.gap = scale > 0.0 ? diff / scale : diff;
  return out;
}

}  // namespace pathdens
