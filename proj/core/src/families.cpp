#include "pathdens/families.hpp"

#include <algorithm>
#include <cmath>

#include "pathdens/errors.hpp"

namespace pathdens {

namespace {

double grid_tol(const TimeGrid& grid) { return 1e-12 * std::max(1.0, grid.horizon()); }

// Grid index of a past time u, robust to rounding of t - h.
std::size_t past_index(const TimeGrid& grid, double u) { return grid.index_at(u + grid_tol(grid)); }

int point_col(const State& s, int i) { return static_cast<int>(LiftLayout(s.n(), s.grid).point()) + i; }
int slot_col(const State& s, std::size_t r, int i) {
  return static_cast<int>(LiftLayout(s.n(), s.grid).slot(r)) + i;
}

TimeDerivative zero_time(int n) { return {Eigen::VectorXd::Zero(n), false}; }

CoefficientField::TimeFn autonomous(int n) {
  return [n](const State&, Which) { return zero_time(n).value; };
}

// Measure carried by the cell [t_j, t) of the left-point path, t in (t_j, t_{j+1}).
double partial_cell_mass(const TimeGrid& grid, std::size_t j, double t) {
  if (t - grid.time(j) <= grid_tol(grid)) return 0.0;
  return (t - grid.time(j)) + grid.atom_weight(j);
}

}  // namespace

Nonlinearity parse_nonlinearity(const std::string& name) {
  if (name == "identity") return Nonlinearity::Identity;
  if (name == "sin") return Nonlinearity::Sine;
  if (name == "tanh") return Nonlinearity::Tanh;
  throw ConfigurationError("unknown nonlinearity '" + name + "'");
}

double apply(Nonlinearity phi, double x) {
  switch (phi) {
    case Nonlinearity::Identity: return x;
    case Nonlinearity::Sine: return std::sin(x);
    case Nonlinearity::Tanh: return std::tanh(x);
  }
  return x;
}

double apply_derivative(Nonlinearity phi, double x) {
  switch (phi) {
    case Nonlinearity::Identity: return 1.0;
    case Nonlinearity::Sine: return std::cos(x);
    case Nonlinearity::Tanh: {
      const double th = std::tanh(x);
      return 1.0 - th * th;
    }
  }
  return 1.0;
}

CoefficientField intro_example(double switch_time) {
  CoefficientField f;
  f.n = 1;
  f.d = 1;
  f.metadata.family = "intro";
  f.metadata.state_only = false;
  f.metadata.required_points = {switch_time};
  f.metadata.growth_exponents = {1.0};
  auto after = [switch_time](const State& s) { return s.t > switch_time + grid_tol(s.grid); };
  f.drift = [=](const State& s) -> Eigen::VectorXd {
    if (!after(s)) return -s.value;
    return -s.path.col(static_cast<Eigen::Index>(s.grid.index_of(switch_time)));
  };
  f.sigma = [](const State&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Ones(1, 1); };
  f.gradient = [=](const State& s, Which w, Triplets& out) {
    if (!w.is_drift()) return;
    if (!after(s))
      out.emplace_back(0, point_col(s, 0), -1.0);
    else
      out.emplace_back(0, slot_col(s, s.grid.index_of(switch_time), 0), -1.0);
  };
  f.time_derivative = autonomous(1);
  return f;
}

CoefficientField linear_field(const Eigen::MatrixXd& drift, const std::vector<Eigen::MatrixXd>& slopes,
                              const Eigen::MatrixXd& offsets, const Eigen::VectorXd& drift_offset) {
  const int n = static_cast<int>(drift.rows());
  const int d = static_cast<int>(offsets.cols());
  if (drift.cols() != n || offsets.rows() != n || d < 1) throw DomainError("linear field: inconsistent shapes");
  if (!slopes.empty() && static_cast<int>(slopes.size()) != d) throw DomainError("linear field: one slope per noise");
  for (const auto& s : slopes)
    if (s.rows() != n || s.cols() != n) throw DomainError("linear field: slopes must be n x n");
  const Eigen::VectorXd c0 = drift_offset.size() == 0 ? Eigen::VectorXd::Zero(n) : drift_offset;
  if (c0.size() != n) throw DomainError("linear field: drift offset must have n entries");
  CoefficientField f;
  f.n = n;
  f.d = d;
  f.metadata.family = "linear";
  f.metadata.state_only = true;
  f.metadata.growth_exponents = {1.0};
  f.drift = [drift, c0](const State& s) -> Eigen::VectorXd { return drift * s.value + c0; };
  f.sigma = [slopes, offsets](const State& s) -> Eigen::MatrixXd {
    Eigen::MatrixXd out = offsets;
    for (std::size_t k = 0; k < slopes.size(); ++k) out.col(static_cast<Eigen::Index>(k)) += slopes[k] * s.value;
    return out;
  };
  f.gradient = [drift, slopes, n](const State& s, Which w, Triplets& out) {
    const Eigen::MatrixXd* m = nullptr;
    if (w.is_drift())
      m = &drift;
    else if (!slopes.empty())
      m = &slopes[static_cast<std::size_t>(w.k)];
    if (!m) return;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if ((*m)(r, c) != 0.0) out.emplace_back(r, point_col(s, c), (*m)(r, c));
  };
  f.time_derivative = autonomous(n);
  return f;
}

CoefficientField geometric_field(double mu, double vol) {
  CoefficientField f = linear_field(Eigen::MatrixXd::Constant(1, 1, mu), {Eigen::MatrixXd::Constant(1, 1, vol)},
                                    Eigen::MatrixXd::Zero(1, 1));
  f.metadata.family = "geometric";
  return f;
}

CoefficientField additive_field(const Eigen::MatrixXd& drift) {
  const Eigen::Index n = drift.rows();
  CoefficientField f = linear_field(drift, {}, Eigen::MatrixXd::Identity(n, n));
  f.metadata.family = "additive";
  return f;
}

CoefficientField constant_field(const Eigen::VectorXd& drift, const Eigen::MatrixXd& sigma) {
  const Eigen::Index n = sigma.rows();
  if (drift.size() != n) throw DomainError("constant field: drift and sigma disagree on n");
  CoefficientField f = linear_field(Eigen::MatrixXd::Zero(n, n), {}, sigma, drift);
  f.metadata.family = "constant";
  return f;
}

CoefficientField integral_coefficient(int n, double kappa, double coupling, Nonlinearity phi, double vol) {
  if (n < 1) throw DomainError("integral coefficient: n must be positive");
  CoefficientField f;
  f.n = n;
  f.d = n;
  f.metadata.family = "integral";
  f.metadata.growth_exponents = {1.0};
  f.drift = [=](const State& s) -> Eigen::VectorXd {
    const std::size_t j = s.index();
    const double part = partial_cell_mass(s.grid, j, s.t);
    Eigen::VectorXd out = -kappa * s.value;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < j; ++r) acc += s.grid.weight(r) * apply(phi, s.path(i, static_cast<Eigen::Index>(r)));
      if (part > 0.0) acc += part * apply(phi, s.path(i, static_cast<Eigen::Index>(j)));
      out(i) += coupling * acc;
    }
    return out;
  };
  f.sigma = [=](const State&) -> Eigen::MatrixXd { return vol * Eigen::MatrixXd::Identity(n, n); };
  f.gradient = [=](const State& s, Which w, Triplets& out) {
    if (!w.is_drift()) return;
    const std::size_t j = s.index();
    const double part = partial_cell_mass(s.grid, j, s.t);
    for (int i = 0; i < n; ++i) {
      if (kappa != 0.0) out.emplace_back(i, point_col(s, i), -kappa);
      for (std::size_t r = 0; r < j; ++r)
        out.emplace_back(i, slot_col(s, r, i),
                         coupling * s.grid.weight(r) * apply_derivative(phi, s.path(i, static_cast<Eigen::Index>(r))));
      if (part > 0.0)
        out.emplace_back(i, slot_col(s, j, i),
                         coupling * part * apply_derivative(phi, s.path(i, static_cast<Eigen::Index>(j))));
    }
  };
  f.time_derivative = [=](const State& s, Which w) -> Eigen::VectorXd {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (!w.is_drift()) return out;
    const std::size_t j = s.index();
    for (int i = 0; i < n; ++i) out(i) = coupling * apply(phi, s.path(i, static_cast<Eigen::Index>(j)));
    return out;
  };
  return f;
}

double delay_integral(const State& s, int i, Nonlinearity phi) {
  const TimeGrid& g = s.grid;
  const double t = s.t;
  const double T = g.horizon();
  const std::size_t j = s.index();
  const double x0 = s.path(i, 0);
  double acc = apply(phi, x0) * (std::exp(-t) - std::exp(-T));
  for (std::size_t r = 0; r <= j && r < g.size(); ++r) {
    if (g.time(r) >= t) break;
    const double right = r + 1 < g.size() ? std::min(g.time(r + 1), t) : t;
    acc += apply(phi, s.path(i, static_cast<Eigen::Index>(r))) * (std::exp(right - t) - std::exp(g.time(r) - t));
  }
  return acc;
}

CoefficientField continuous_delay(int n, double kappa, double coupling, Nonlinearity phi, double vol) {
  if (n < 1) throw DomainError("continuous delay: n must be positive");
  CoefficientField f;
  f.n = n;
  f.d = n;
  f.metadata.family = "continuous_delay";
  f.metadata.growth_exponents = {1.0};
  f.drift = [=](const State& s) -> Eigen::VectorXd {
    Eigen::VectorXd out = -kappa * s.value;
    for (int i = 0; i < n; ++i) out(i) += coupling * delay_integral(s, i, phi);
    return out;
  };
  f.sigma = [=](const State&) -> Eigen::MatrixXd { return vol * Eigen::MatrixXd::Identity(n, n); };
  f.gradient = [=](const State& s, Which w, Triplets& out) {
    if (!w.is_drift()) return;
    const TimeGrid& g = s.grid;
    const double t = s.t;
    const std::size_t j = s.index();
    for (int i = 0; i < n; ++i) {
      if (kappa != 0.0) out.emplace_back(i, point_col(s, i), -kappa);
      const double x0 = s.path(i, 0);
      out.emplace_back(i, slot_col(s, 0, i),
                       coupling * apply_derivative(phi, x0) * (std::exp(-t) - std::exp(-g.horizon())));
      for (std::size_t r = 0; r <= j && r < g.size(); ++r) {
        if (g.time(r) >= t) break;
        const double right = r + 1 < g.size() ? std::min(g.time(r + 1), t) : t;
        out.emplace_back(i, slot_col(s, r, i),
                         coupling * apply_derivative(phi, s.path(i, static_cast<Eigen::Index>(r))) *
                             (std::exp(right - t) - std::exp(g.time(r) - t)));
      }
    }
  };
  f.time_derivative = [=](const State& s, Which w) -> Eigen::VectorXd {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (!w.is_drift()) return out;
    const std::size_t j = s.index();
    const double eT = std::exp(-s.grid.horizon());
    for (int i = 0; i < n; ++i) {
      const double zeta = delay_integral(s, i, phi);
      out(i) = coupling * (-zeta + apply(phi, s.path(i, static_cast<Eigen::Index>(j))) - apply(phi, s.path(i, 0)) * eT);
    }
    return out;
  };
  return f;
}

CoefficientField discrete_points(int n, std::vector<double> times, double kappa, double coupling, Nonlinearity phi,
                                 double vol) {
  if (n < 1) throw DomainError("discrete points: n must be positive");
  std::sort(times.begin(), times.end());
  CoefficientField f;
  f.n = n;
  f.d = n;
  f.metadata.family = "discrete_points";
  f.metadata.required_points = times;
  f.metadata.smooth_in_time = false;
  f.metadata.growth_exponents = {1.0};
  f.drift = [=](const State& s) -> Eigen::VectorXd {
    Eigen::VectorXd out = -kappa * s.value;
    for (double u : times) {
      if (u > s.t + grid_tol(s.grid)) break;
      const Eigen::Index r = static_cast<Eigen::Index>(s.grid.index_of(u));
      for (int i = 0; i < n; ++i) out(i) += coupling * apply(phi, s.path(i, r));
    }
    return out;
  };
  f.sigma = [=](const State&) -> Eigen::MatrixXd { return vol * Eigen::MatrixXd::Identity(n, n); };
  f.gradient = [=](const State& s, Which w, Triplets& out) {
    if (!w.is_drift()) return;
    for (int i = 0; i < n; ++i)
      if (kappa != 0.0) out.emplace_back(i, point_col(s, i), -kappa);
    for (double u : times) {
      if (u > s.t + grid_tol(s.grid)) break;
      const std::size_t r = s.grid.index_of(u);
      for (int i = 0; i < n; ++i)
        out.emplace_back(i, slot_col(s, r, i),
                         coupling * apply_derivative(phi, s.path(i, static_cast<Eigen::Index>(r))));
    }
  };
  f.time_derivative = autonomous(n);
  return f;
}

double hormander_parameter(const Hormander3DParams& p, const State& s) {
  if (p.frozen_a) return *p.frozen_a;
  if (s.t <= p.switch_time + grid_tol(s.grid)) return 0.5 * (p.a_min + p.a_max);
  const double x = s.path(0, static_cast<Eigen::Index>(s.grid.index_of(p.switch_time)));
  return p.a_min + (p.a_max - p.a_min) * 0.5 * (1.0 + std::tanh(x));
}

CoefficientField hormander_example_3d(const Hormander3DParams& p) {
  if (p.frozen_a) {
    if (*p.frozen_a < 2.0) throw DomainError("the parameter a must be at least 2");
  } else if (p.a_min < 2.0 || p.a_max < p.a_min) {
    throw DomainError("the parameter range must satisfy 2 <= a_min <= a_max");
  }
  CoefficientField f;
  f.n = 3;
  f.d = 2;
  f.metadata.family = "hormander3d";
  f.metadata.growth_exponents = {1.0};
  if (!p.frozen_a) {
    f.metadata.required_points = {p.switch_time};
    f.metadata.smooth_in_time = false;
  } else {
    f.metadata.state_only = true;
  }
  f.drift = [](const State&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(3); };
  f.sigma = [p](const State& s) -> Eigen::MatrixXd {
    const double a = hormander_parameter(p, s);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3, 2);
    out(0, 0) = 1.0;
    out(1, 1) = a + std::sin(s.value(1));
    out(2, 1) = s.value(0);
    return out;
  };
  f.gradient = [p](const State& s, Which w, Triplets& out) {
    if (w.is_drift() || w.k == 0) return;
    out.emplace_back(1, point_col(s, 1), std::cos(s.value(1)));
    out.emplace_back(2, point_col(s, 0), 1.0);
    if (!p.frozen_a && s.t > p.switch_time + grid_tol(s.grid)) {
      const std::size_t r = s.grid.index_of(p.switch_time);
      const double th = std::tanh(s.path(0, static_cast<Eigen::Index>(r)));
      out.emplace_back(1, slot_col(s, r, 0), (p.a_max - p.a_min) * 0.5 * (1.0 - th * th));
    }
  };
  if (p.frozen_a) f.time_derivative = autonomous(3);
  return f;
}

CoefficientField degenerate_pair() {
  CoefficientField f;
  f.n = 2;
  f.d = 2;
  f.metadata.family = "degenerate_pair";
  f.metadata.state_only = true;
  f.metadata.growth_exponents = {1.0};
  f.drift = [](const State& s) -> Eigen::VectorXd { return Eigen::Vector2d(-s.value(0), 0.0); };
  f.sigma = [](const State& s) -> Eigen::MatrixXd {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2, 2);
    out(0, 0) = 1.0;
    out(0, 1) = 0.5 * std::sin(s.value(0));
    return out;
  };
  f.gradient = [](const State& s, Which w, Triplets& out) {
    if (w.is_drift())
      out.emplace_back(0, point_col(s, 0), -1.0);
    else if (w.k == 1)
      out.emplace_back(0, point_col(s, 0), 0.5 * std::cos(s.value(0)));
  };
  f.time_derivative = autonomous(2);
  return f;
}

DelayDynamics linear_delay_dynamics(std::vector<double> delays, std::vector<Eigen::MatrixXd> drift,
                                    std::vector<Eigen::MatrixXd> diffusion, Eigen::MatrixXd offset) {
  const std::size_t m = delays.size();
  const int n = static_cast<int>(offset.rows());
  if (drift.size() != m + 1) throw DomainError("linear delay dynamics: one drift matrix per lag (including 0)");
  if (!diffusion.empty() && diffusion.size() != m + 1)
    throw DomainError("linear delay dynamics: one diffusion matrix per lag (including 0)");
  for (const auto& a : drift)
    if (a.rows() != n || a.cols() != n) throw DomainError("linear delay dynamics: drift matrices must be n x n");
  for (const auto& a : diffusion)
    if (a.rows() != n || a.cols() != n) throw DomainError("linear delay dynamics: diffusion matrices must be n x n");
  DelayDynamics dyn;
  dyn.n = n;
  dyn.d = static_cast<int>(offset.cols());
  dyn.delays = std::move(delays);
  dyn.drift = [drift](double, const std::vector<Eigen::VectorXd>& args) -> Eigen::VectorXd {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(drift[0].rows());
    for (std::size_t l = 0; l < drift.size(); ++l) out += drift[l] * args[l];
    return out;
  };
  dyn.sigma = [diffusion, offset](double, const std::vector<Eigen::VectorXd>& args) -> Eigen::MatrixXd {
    Eigen::MatrixXd out = offset;
    for (std::size_t l = 0; l < diffusion.size(); ++l) out.col(0) += diffusion[l] * args[l];
    return out;
  };
  return dyn;
}

namespace {

struct LagRead {
  std::vector<Eigen::VectorXd> args;
  std::vector<std::size_t> slots;  // path slot per lag (index 0 unused: current value)
};

LagRead read_lags(const DelayDynamics& dyn, const State& s) {
  LagRead out;
  out.args.reserve(dyn.delays.size() + 1);
  out.slots.assign(dyn.delays.size() + 1, 0);
  out.args.push_back(s.value);
  for (std::size_t l = 0; l < dyn.delays.size(); ++l) {
    const double u = s.t - dyn.delays[l];
    const std::size_t r = u < -grid_tol(s.grid) ? 0 : past_index(s.grid, u);
    out.slots[l + 1] = r;
    out.args.push_back(s.path.col(static_cast<Eigen::Index>(r)));
  }
  return out;
}

}  // namespace

CoefficientField discrete_delay(const DelayDynamics& dyn) {
  for (double h : dyn.delays)
    if (!(h > 0.0)) throw DomainError("delays must be positive");
  CoefficientField f;
  f.n = dyn.n;
  f.d = dyn.d;
  f.metadata.family = "discrete_delay";
  f.metadata.required_points = dyn.delays;
  f.metadata.smooth_in_time = false;
  f.drift = [dyn](const State& s) -> Eigen::VectorXd { return dyn.drift(s.t, read_lags(dyn, s).args); };
  f.sigma = [dyn](const State& s) -> Eigen::MatrixXd { return dyn.sigma(s.t, read_lags(dyn, s).args); };
  // Chain rule through the lag arguments, differentiated by central differences.
  f.gradient = [dyn](const State& s, Which w, Triplets& out) {
    LagRead lr = read_lags(dyn, s);
    auto value = [&](const std::vector<Eigen::VectorXd>& args) -> Eigen::VectorXd {
      if (w.is_drift()) return dyn.drift(s.t, args);
      return dyn.sigma(s.t, args).col(w.k);
    };
    for (std::size_t l = 0; l < lr.args.size(); ++l) {
      for (int i = 0; i < dyn.n; ++i) {
        const double orig = lr.args[l](i);
        const double h = 1e-6 * std::max(1.0, std::abs(orig));
        lr.args[l](i) = orig + h;
        const Eigen::VectorXd fp = value(lr.args);
        lr.args[l](i) = orig - h;
        const Eigen::VectorXd fm = value(lr.args);
        lr.args[l](i) = orig;
        const Eigen::VectorXd q = (fp - fm) / (2 * h);
        const int col = l == 0 ? point_col(s, i) : slot_col(s, lr.slots[l], i);
        for (int r = 0; r < dyn.n; ++r)
          if (q(r) != 0.0) out.emplace_back(r, col, q(r));
      }
    }
  };
  return f;
}

}  // namespace pathdens
