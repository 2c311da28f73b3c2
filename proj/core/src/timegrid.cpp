#include "pathdens/timegrid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pathdens/errors.hpp"

namespace pathdens {

namespace {

double point_tol(double horizon) { return 1e-12 * std::max(1.0, horizon); }

}  // namespace

void MeasureSpec::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("measure horizon must be positive and finite");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const Atom& a = atoms[i];
    if (!(a.time >= 0.0 && a.time <= horizon)) throw DomainError("atom time outside [0, T]");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw DomainError("atom weight must be positive and finite");
    if (i > 0 && !(a.time > atoms[i - 1].time)) throw DomainError("atom times must be strictly increasing");
  }
}

double MeasureSpec::total_mass() const {
  double m = horizon;
  for (const Atom& a : atoms) m += a.weight;
  return m;
}

double MeasureSpec::mass(double a, double b) const {
  if (b <= a) return 0.0;
  const double lo = std::max(a, 0.0);
  const double hi = std::min(b, horizon);
  double m = std::max(0.0, hi - lo);
  for (const Atom& at : atoms)
    if (at.time >= a && at.time < b) m += at.weight;
  return m;
}

TimeGrid::TimeGrid(MeasureSpec measure, std::vector<double> points)
    : measure_(std::move(measure)), points_(std::move(points)) {
  measure_.validate();
  const double tol = point_tol(measure_.horizon);
  if (points_.size() < 2) throw DomainError("a grid needs at least one interval");
  if (points_.front() != 0.0 || points_.back() != measure_.horizon)
    throw DomainError("grid must start at 0 and end at T");
  for (std::size_t j = 1; j < points_.size(); ++j)
    if (!(points_[j] > points_[j - 1])) throw DomainError("grid points must be strictly increasing");

  const std::size_t n = points_.size() - 1;
  lebesgue_.resize(n);
  for (std::size_t j = 0; j < n; ++j) lebesgue_[j] = points_[j + 1] - points_[j];
  // Adjust the last interval so that the sequential sum of lengths is exactly T.
  if (n >= 2) {
    double partial = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) partial += lebesgue_[j];
    lebesgue_[n - 1] = measure_.horizon - partial;
  }
  weights_.assign(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) weights_[j] = lebesgue_[j];
  for (const Atom& a : measure_.atoms) {
    std::size_t best = 0;
    double dist = std::abs(points_[0] - a.time);
    const auto it = std::lower_bound(points_.begin(), points_.end(), a.time);
    for (auto cand : {it, it == points_.begin() ? it : it - 1}) {
      if (cand == points_.end()) continue;
      const double d = std::abs(*cand - a.time);
      if (d <= dist) {
        dist = d;
        best = static_cast<std::size_t>(cand - points_.begin());
      }
    }
    if (dist > tol) {
      std::ostringstream msg;
      msg << "atom at t=" << a.time << " is not a grid point";
      throw DomainError(msg.str());
    }
    weights_[best] += a.weight;
  }
  suffix_.assign(n + 2, 0.0);
  for (std::size_t j = n + 1; j-- > 0;) suffix_[j] = weights_[j] + suffix_[j + 1];
}

std::optional<std::size_t> TimeGrid::find(double t) const {
  const double tol = point_tol(measure_.horizon);
  const auto it = std::lower_bound(points_.begin(), points_.end(), t - tol);
  if (it != points_.end() && std::abs(*it - t) <= tol) return static_cast<std::size_t>(it - points_.begin());
  return std::nullopt;
}

std::size_t TimeGrid::index_of(double t) const {
  if (auto j = find(t)) return *j;
  std::ostringstream msg;
  msg << "t=" << t << " is not a grid point";
  throw DomainError(msg.str());
}

std::size_t TimeGrid::index_at(double t) const {
  const double tol = point_tol(measure_.horizon);
  const auto it = std::upper_bound(points_.begin(), points_.end(), t + tol);
  if (it == points_.begin()) return 0;
  return static_cast<std::size_t>(it - points_.begin()) - 1;
}

double TimeGrid::mass_between(std::size_t a, std::size_t b) const {
  if (b <= a) return 0.0;
  double m = 0.0;
  for (std::size_t j = a; j < b; ++j) m += weights_[j];
  return m;
}

double TimeGrid::mass_from(std::size_t a) const { return suffix_[std::min(a, suffix_.size() - 1)]; }

bool TimeGrid::uniform(double rel_tol) const {
  const double h = measure_.horizon / static_cast<double>(steps());
  for (std::size_t j = 0; j < steps(); ++j)
    if (std::abs(points_[j + 1] - points_[j] - h) > rel_tol * h * 16) return false;
  return true;
}

void Config::validate(const MeasureSpec& measure) const {
  measure.validate();
  if (!(p > 1.0 && p < 1.5)) throw ConfigurationError("p must lie in (1, 3/2)");
  const double a = alpha();
  if (!(a > 1.0 / 3.0 && a < 0.5)) throw ConfigurationError("alpha = 1/(2p) must lie in (1/3, 1/2)");
  if (!(tau > 0.0 && tau <= measure.horizon)) throw ConfigurationError("tau must lie in (0, T]");
  if (!(tau0 >= 0.0 && tau0 < tau)) throw ConfigurationError("tau0 must lie in [0, tau)");
  if (steps == 0) throw ConfigurationError("steps must be positive");
  for (const Atom& at : measure.atoms) {
    if (at.time >= tau0 && at.time < tau) {
      std::ostringstream msg;
      msg << "assumption A2 violated: atom at t=" << at.time << " lies in [tau0, tau) = [" << tau0 << ", " << tau
          << ")";
      throw ConfigurationError(msg.str());
    }
  }
}

TimeGrid build_grid(const MeasureSpec& measure, std::size_t n_steps, const std::vector<double>& required_points) {
  measure.validate();
  if (n_steps == 0) throw DomainError("n_steps must be at least 1");
  const double T = measure.horizon;
  const double tol = point_tol(T);
  // (time, priority): atoms beat required points, which beat uniform points.
  std::vector<std::pair<double, int>> cand;
  cand.reserve(n_steps + 1 + measure.atoms.size() + required_points.size());
  for (std::size_t j = 0; j <= n_steps; ++j) {
    double t = (j == n_steps) ? T : T * static_cast<double>(j) / static_cast<double>(n_steps);
    cand.emplace_back(t, 0);
  }
  for (double t : required_points) {
    if (!(t >= -tol && t <= T + tol) || !std::isfinite(t)) {
      std::ostringstream msg;
      msg << "required point " << t << " outside [0, T]";
      throw DomainError(msg.str());
    }
    cand.emplace_back(std::clamp(t, 0.0, T), 1);
  }
  for (const Atom& a : measure.atoms) cand.emplace_back(a.time, 2);
  std::sort(cand.begin(), cand.end());
  std::vector<double> pts;
  std::vector<int> prio;
  for (const auto& [t, pr] : cand) {
    if (!pts.empty() && t - pts.back() <= tol) {
      const bool endpoint = pts.back() == 0.0 || t == T;
      if (endpoint) {
        pts.back() = (t == T) ? T : 0.0;
      } else if (pr > prio.back()) {
        pts.back() = t;
        prio.back() = pr;
      }
      continue;
    }
    pts.push_back(t);
    prio.push_back(pr);
  }
  pts.front() = 0.0;
  pts.back() = T;
  return TimeGrid(measure, std::move(pts));
}

TimeGrid build_grid(const MeasureSpec& measure, const Config& config, const std::vector<double>& extra_points) {
  std::vector<double> req = extra_points;
  req.push_back(config.tau);
  req.push_back(config.tau0);
  return build_grid(measure, config.steps, req);
}

TimeGrid refine(const TimeGrid& grid, unsigned levels) {
  if (levels == 0) return grid;
  const std::size_t k = std::size_t{1} << levels;
  const double scale = 1.0 / static_cast<double>(k);
  std::vector<double> pts;
  pts.reserve(grid.steps() * k + 1);
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const double a = grid.time(j);
    const double h = grid.time(j + 1) - a;
    for (std::size_t i = 0; i < k; ++i) pts.push_back(a + h * (static_cast<double>(i) * scale));
  }
  pts.push_back(grid.horizon());
  return TimeGrid(grid.measure(), std::move(pts));
}

TimeGrid coarsen(const TimeGrid& grid, std::size_t k) {
  if (k == 0 || grid.steps() % k != 0) throw DomainError("grid size is not divisible by the coarsening factor");
  std::vector<double> pts;
  for (std::size_t j = 0; j <= grid.steps(); j += k) pts.push_back(grid.time(j));
  return TimeGrid(grid.measure(), std::move(pts));
}

double lp_norm(const Eigen::MatrixXd& path, const TimeGrid& grid, double p) {
  if (!(p > 1.0)) throw DomainError("lp_norm requires p > 1");
  if (static_cast<std::size_t>(path.cols()) != grid.size()) throw DomainError("path does not match the grid");
  double s = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double w = grid.weight(j);
    if (w == 0.0) continue;
    s += w * std::pow(path.col(static_cast<Eigen::Index>(j)).norm(), p);
  }
  return std::pow(s, 1.0 / p);
}

double lifted_norm(const Eigen::MatrixXd& path, const Eigen::VectorXd& point, const TimeGrid& grid, double p) {
  const double a = lp_norm(path, grid, p);
  return std::sqrt(a * a + point.squaredNorm());
}

double indicator_distance(double t, double dt, const TimeGrid& grid, double p) {
  if (!(p > 1.0)) throw DomainError("indicator_distance requires p > 1");
  const double lo = dt >= 0 ? t : t + dt;
  const double hi = dt >= 0 ? t + dt : t;
  const auto a = grid.find(lo);
  const auto b = grid.find(hi);
  if (!a || !b) throw ContractError("indicator_distance endpoints must be grid points");
  return std::pow(grid.mass_between(*a, *b), 1.0 / p);
}

double hs_norm_S(double t, const TimeGrid& grid, int n) {
  const std::size_t j = grid.index_of(t);
  if (n < 0) throw DomainError("dimension must be nonnegative");
  return static_cast<double>(n) * (grid.mass_from(j) + 1.0);
}

double holder_seminorm_indices(const Eigen::MatrixXd& values, const TimeGrid& grid, double alpha, std::size_t ia,
                               std::size_t ib) {
  if (ib < ia || ib >= grid.size()) throw DomainError("empty Hölder window");
  double best = 0.0;
  for (std::size_t s = ia; s <= ib; ++s) {
    for (std::size_t t = s + 1; t <= ib; ++t) {
      const double d = (values.col(static_cast<Eigen::Index>(t)) - values.col(static_cast<Eigen::Index>(s))).norm();
      if (d == 0.0) continue;
      best = std::max(best, d / std::pow(grid.time(t) - grid.time(s), alpha));
    }
  }
  return best;
}

double holder_seminorm(const Eigen::MatrixXd& values, const TimeGrid& grid, double alpha, double a, double b) {
  if (static_cast<std::size_t>(values.cols()) != grid.size()) throw DomainError("values do not match the grid");
  if (!(b >= a)) throw DomainError("empty Hölder window");
  const double tol = 1e-12 * std::max(1.0, grid.horizon());
  std::size_t ia = grid.size(), ib = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (grid.time(j) >= a - tol && grid.time(j) <= b + tol) {
      ia = std::min(ia, j);
      ib = std::max(ib, j);
    }
  }
  if (ia == grid.size()) throw DomainError("empty Hölder window");
  return holder_seminorm_indices(values, grid, alpha, ia, ib);
}

double lift_space_norm(const Eigen::VectorXd& v, const LiftLayout& layout, const TimeGrid& grid, double p) {
  if (static_cast<std::size_t>(v.size()) != layout.dim()) throw DomainError("vector does not match the lift layout");
  Eigen::Map<const Eigen::MatrixXd> path(v.data(), layout.n, static_cast<Eigen::Index>(layout.slots));
  return lifted_norm(path, v.tail(layout.n), grid, p);
}

}  // namespace pathdens
