#include "pathdens/delay_lift.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "pathdens/errors.hpp"

namespace pathdens {

namespace {

double tol_for(double horizon) { return 1e-12 * std::max(1.0, horizon); }

int find_shift(const std::vector<double>& shifts, double u, double tol) {
  for (std::size_t l = 0; l < shifts.size(); ++l)
    if (std::abs(shifts[l] - u) <= tol) return static_cast<int>(l);
  return -1;
}

std::vector<std::size_t> shift_indices(const DelaySystem& system, const TimeGrid& grid) {
  std::vector<std::size_t> k;
  for (double s : system.shifts) k.push_back(shift_index(grid, s));
  return k;
}

void check_wiring(const DelaySystem& system) {
  const int L = static_cast<int>(system.blocks());
  if (L == 0 || system.shifts.front() != 0.0) throw ConfigurationError("block 0 must have shift 0");
  if (system.wiring.size() != system.blocks()) throw ConfigurationError("wiring table needs one row per block");
  for (const auto& row : system.wiring) {
    if (row.size() != system.base_delays.size())
      throw ConfigurationError("wiring row needs one entry per base delay");
    for (int w : row)
      if (w < -1 || w >= L) throw ConfigurationError("wiring references a missing block");
  }
}

void check_dynamics(const DelaySystem& system, const DelayDynamics& dyn) {
  if (dyn.n != system.n) throw ConfigurationError("dynamics dimension differs from the lifted system");
  if (dyn.delays.size() != system.base_delays.size())
    throw ConfigurationError("dynamics delays differ from the lifted system");
  for (std::size_t i = 0; i < dyn.delays.size(); ++i)
    if (std::abs(dyn.delays[i] - system.base_delays[i]) > tol_for(system.horizon))
      throw ConfigurationError("dynamics delays differ from the lifted system");
  if (!dyn.drift || !dyn.sigma) throw ConfigurationError("dynamics need drift and diffusion");
}

// Arguments of block l at grid column j of the lifted path.
std::vector<Eigen::VectorXd> block_args(const DelaySystem& system, const Eigen::VectorXd& stacked, std::size_t l,
                                        const Eigen::VectorXd& x0) {
  const int n = system.n;
  std::vector<Eigen::VectorXd> args;
  args.reserve(system.base_delays.size() + 1);
  args.push_back(stacked.segment(static_cast<Eigen::Index>(l) * n, n));
  for (int w : system.wiring[l]) args.push_back(w < 0 ? x0 : Eigen::VectorXd(stacked.segment(w * n, n)));
  return args;
}

}  // namespace

DelaySystem build_lift(const std::vector<double>& delays, double horizon, int n) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (n < 1) throw DomainError("dimension must be positive");
  const double tol = tol_for(horizon);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (!(delays[i] > 0.0 && delays[i] < horizon)) throw DomainError("delays must lie in (0, T)");
    if (i > 0 && !(delays[i] > delays[i - 1] + tol)) throw DomainError("delays must be strictly increasing");
  }
  DelaySystem sys;
  sys.horizon = horizon;
  sys.n = n;
  sys.base_delays = delays;

  std::vector<double> seen{0.0};
  std::deque<double> queue{0.0};
  while (!queue.empty()) {
    const double s = queue.front();
    queue.pop_front();
    for (double h : delays) {
      const double u = s + h;
      if (u >= horizon - tol || find_shift(seen, u, tol) >= 0) continue;
      seen.push_back(u);
      queue.push_back(u);
    }
  }
  for (double u : seen)
    if (u != 0.0 && find_shift(delays, u, tol) < 0) sys.composite_delays.push_back(u);
  std::sort(sys.composite_delays.begin(), sys.composite_delays.end());

  sys.shifts.push_back(0.0);
  sys.shifts.insert(sys.shifts.end(), delays.begin(), delays.end());
  sys.shifts.insert(sys.shifts.end(), sys.composite_delays.begin(), sys.composite_delays.end());
  for (double s : sys.shifts) {
    std::vector<int> row;
    for (double h : delays) row.push_back(s + h >= horizon - tol ? -1 : find_shift(sys.shifts, s + h, tol));
    sys.wiring.push_back(std::move(row));
  }
  return sys;
}

std::vector<double> lift_required_points(const DelaySystem& system) {
  std::vector<double> out;
  for (double a : system.shifts) {
    out.push_back(a);
    for (double b : system.shifts)
      if (a > b) out.push_back(a - b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t shift_index(const TimeGrid& grid, double h) {
  if (h == 0.0) return 0;
  const auto k = grid.find(h);
  if (!k) throw DomainError("delay is not a grid point");
  const double tol = tol_for(grid.horizon());
  for (std::size_t j = *k; j < grid.size(); ++j)
    if (std::abs(grid.time(j) - h - grid.time(j - *k)) > tol)
      throw DomainError("grid is not invariant under the delay shift");
  return *k;
}

Eigen::MatrixXd shifted_brownian(const TimeGrid& grid, const Eigen::MatrixXd& values, double h) {
  if (static_cast<std::size_t>(values.cols()) != grid.size()) throw DomainError("path does not match the grid");
  const std::size_t k = shift_index(grid, h);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.rows(), values.cols());
  const Eigen::Index m = values.cols() - static_cast<Eigen::Index>(k);
  out.rightCols(m) = values.leftCols(m);
  return out;
}

DelayedArea delayed_cross_area(const TimeGrid& grid, const Eigen::MatrixXd& values, double h, double s, double t) {
  const Eigen::MatrixXd bh = shifted_brownian(grid, values, h);
  const std::size_t a = grid.index_of(s);
  const std::size_t b = grid.index_of(t);
  if (b < a) throw DomainError("area needs s <= t");
  const Eigen::Index d = values.rows();
  DelayedArea out;
  out.upper = Eigen::MatrixXd::Zero(d, d);
  out.companion_direct = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd bh_db = Eigen::MatrixXd::Zero(d, d);  // (j, i): sum B^i_{r-h} dB^j_r
  const Eigen::Index ia = static_cast<Eigen::Index>(a);
  for (std::size_t r = a; r < b; ++r) {
    const Eigen::Index rr = static_cast<Eigen::Index>(r);
    const Eigen::VectorXd db = values.col(rr + 1) - values.col(rr);
    const Eigen::VectorXd dbh = bh.col(rr + 1) - bh.col(rr);
    out.upper.noalias() += (bh.col(rr) - bh.col(ia)) * db.transpose();
    out.companion_direct.noalias() += (values.col(rr) - values.col(ia)) * dbh.transpose();
    bh_db.noalias() += db * bh.col(rr).transpose();
  }
  const Eigen::Index ib = static_cast<Eigen::Index>(b);
  out.companion = (values.col(ib) - values.col(ia)) * bh.col(ib).transpose() - bh_db;
  if (h == 0.0) out.companion.diagonal().array() -= grid.time(b) - grid.time(a);
  return out;
}

RoughPath extended_lift(const DelaySystem& system, const TimeGrid& fine_grid, const Eigen::MatrixXd& fine_values,
                        std::size_t k) {
  const Eigen::Index d = fine_values.rows();
  const Eigen::Index L = static_cast<Eigen::Index>(system.blocks());
  Eigen::MatrixXd stacked(d * L, fine_values.cols());
  for (Eigen::Index l = 0; l < L; ++l)
    stacked.middleRows(l * d, d) = shifted_brownian(fine_grid, fine_values, system.shifts[static_cast<std::size_t>(l)]);
  return lift(fine_grid, stacked, k);
}

Eigen::MatrixXd extended_noise(const DelaySystem& system, const Eigen::MatrixXd& noise, const TimeGrid& grid) {
  if (static_cast<std::size_t>(noise.cols()) != grid.steps()) throw DomainError("noise does not match the grid");
  const Eigen::Index d = noise.rows();
  const auto ks = shift_indices(system, grid);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d * static_cast<Eigen::Index>(ks.size()), noise.cols());
  for (std::size_t l = 0; l < ks.size(); ++l) {
    const Eigen::Index m = noise.cols() - static_cast<Eigen::Index>(ks[l]);
    out.block(static_cast<Eigen::Index>(l) * d, static_cast<Eigen::Index>(ks[l]), d, m) = noise.leftCols(m);
  }
  return out;
}

Eigen::MatrixXd solve_lifted(const DelaySystem& system, const DelayDynamics& dyn, const Eigen::VectorXd& x0,
                             const Eigen::MatrixXd& noise, const TimeGrid& grid) {
  check_wiring(system);
  check_dynamics(system, dyn);
  if (x0.size() != system.n) throw DomainError("initial value does not match the dimension");
  if (noise.rows() != dyn.d || static_cast<std::size_t>(noise.cols()) != grid.steps())
    throw DomainError("noise does not match the grid intervals");
  const int n = system.n;
  const std::size_t L = system.blocks();
  const auto ks = shift_indices(system, grid);
  Eigen::MatrixXd X(system.dim(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 0; l < L; ++l) X.block(static_cast<Eigen::Index>(l) * n, 0, n, 1) = x0;
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    const Eigen::VectorXd cur = X.col(jj);
    for (std::size_t l = 0; l < L; ++l) {
      const Eigen::Index row = static_cast<Eigen::Index>(l) * n;
      const Eigen::VectorXd value = cur.segment(row, n);
      if (j < ks[l]) {
        X.block(row, jj + 1, n, 1) = value;
        continue;
      }
      const std::size_t u = j - ks[l];
      const auto args = block_args(system, cur, l, x0);
      const Eigen::VectorXd next =
          value + (dyn.drift(grid.time(u), args) * grid.dt(u) +
                   dyn.sigma(grid.time(u), args) * noise.col(static_cast<Eigen::Index>(u)));
      if (!next.allFinite()) throw DivergenceError("lifted solution became non-finite", j + 1);
      X.block(row, jj + 1, n, 1) = next;
    }
  }
  return X;
}

CoefficientField lifted_field(const DelaySystem& system, const DelayDynamics& dyn, const Eigen::VectorXd& x0) {
  check_wiring(system);
  check_dynamics(system, dyn);
  if (x0.size() != system.n) throw DomainError("initial value does not match the dimension");
  CoefficientField f;
  f.n = system.dim();
  f.d = dyn.d * static_cast<int>(system.blocks());
  f.metadata.family = "delay_lift";
  f.metadata.state_only = true;
  f.metadata.smooth_in_time = false;
  f.metadata.required_points = lift_required_points(system);
  const int n = system.n;
  const int d = dyn.d;
  f.drift = [system, dyn, x0, n](const State& s) -> Eigen::VectorXd {
    const std::size_t j = s.index();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(system.dim());
    for (std::size_t l = 0; l < system.blocks(); ++l) {
      const std::size_t k = shift_index(s.grid, system.shifts[l]);
      if (j < k) continue;
      out.segment(static_cast<Eigen::Index>(l) * n, n) =
          dyn.drift(s.grid.time(j - k), block_args(system, s.value, l, x0));
    }
    return out;
  };
  f.sigma = [system, dyn, x0, n, d](const State& s) -> Eigen::MatrixXd {
    const std::size_t j = s.index();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(system.dim(), d * static_cast<int>(system.blocks()));
    for (std::size_t l = 0; l < system.blocks(); ++l) {
      const std::size_t k = shift_index(s.grid, system.shifts[l]);
      if (j < k) continue;
      const Eigen::Index li = static_cast<Eigen::Index>(l);
      out.block(li * n, li * d, n, d) = dyn.sigma(s.grid.time(j - k), block_args(system, s.value, l, x0));
    }
    return out;
  };
  return f;
}

Eigen::MatrixXd method_of_steps(const DelayDynamics& dyn, const Eigen::VectorXd& x0, const TimeGrid& grid) {
  if (!grid.uniform()) throw DomainError("method of steps needs a uniform grid");
  if (x0.size() != dyn.n) throw DomainError("initial value does not match the dimension");
  std::vector<std::size_t> ks;
  for (double h : dyn.delays) {
    ks.push_back(shift_index(grid, h));
    if (ks.back() == 0) throw DomainError("delays must exceed the mesh");
  }
  const std::size_t N = grid.steps();
  const std::size_t span = ks.empty() ? N : *std::min_element(ks.begin(), ks.end());
  Eigen::MatrixXd X(dyn.n, static_cast<Eigen::Index>(grid.size()));
  X.col(0) = x0;
  auto args_at = [&](std::size_t j, const Eigen::VectorXd& current) {
    std::vector<Eigen::VectorXd> a{current};
    for (std::size_t k : ks) a.push_back(j >= k ? Eigen::VectorXd(X.col(static_cast<Eigen::Index>(j - k))) : x0);
    return a;
  };
  // On each interval of length min delay the lagged values are already known.
  for (std::size_t start = 0; start < N; start += span) {
    for (std::size_t j = start; j < std::min(start + span, N); ++j) {
      const Eigen::VectorXd x = X.col(static_cast<Eigen::Index>(j));
      const double dt = grid.dt(j);
      const Eigen::VectorXd f0 = dyn.drift(grid.time(j), args_at(j, x));
      const Eigen::VectorXd pred = x + dt * f0;
      const Eigen::VectorXd f1 = dyn.drift(grid.time(j + 1), args_at(j + 1, pred));
      X.col(static_cast<Eigen::Index>(j + 1)) = x + 0.5 * dt * (f0 + f1);
    }
  }
  return X;
}

}  // namespace pathdens
