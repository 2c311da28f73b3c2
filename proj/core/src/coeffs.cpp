#include "pathdens/coeffs.hpp"

#include <algorithm>
#include <cmath>

#include "pathdens/errors.hpp"

namespace pathdens {

namespace {

void check_time(const State& s) {
  const double T = s.grid.horizon();
  const double tol = 1e-12 * std::max(1.0, T);
  if (!(s.t >= -tol && s.t <= T + tol)) throw DomainError("evaluation time outside [0, T]");
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

// setFromTriplets allocates per column; gradients have a handful of rows and many columns.
void assemble(Gradient& g, Triplets& trips) {
  std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  g.reserve(static_cast<Eigen::Index>(trips.size()));
  std::size_t k = 0;
  for (Eigen::Index row = 0; row < g.rows(); ++row) {
    g.startVec(row);
    while (k < trips.size() && trips[k].row() == row) {
      const int col = trips[k].col();
      double v = 0.0;
      for (; k < trips.size() && trips[k].row() == row && trips[k].col() == col; ++k) v += trips[k].value();
      g.insertBack(row, col) = v;
    }
  }
  g.finalize();
}

double state_scale(const State& s) { return std::max(1.0, s.value.lpNorm<Eigen::Infinity>()); }

}  // namespace

CoefficientField user_field(int n, int d, CoefficientField::DriftFn drift, CoefficientField::SigmaFn sigma,
                            FieldMetadata metadata) {
  if (n < 1 || d < 1) throw DomainError("field dimensions must be positive");
  CoefficientField f;
  f.n = n;
  f.d = d;
  f.drift = std::move(drift);
  f.sigma = std::move(sigma);
  f.metadata = std::move(metadata);
  return f;
}

Eigen::VectorXd eval_b(const CoefficientField& field, const State& state) {
  check_time(state);
  return field.drift(state);
}

Eigen::MatrixXd eval_sigma(const CoefficientField& field, const State& state) {
  check_time(state);
  return field.sigma(state);
}

Eigen::VectorXd eval(const CoefficientField& field, Which which, const State& state) {
  if (which.is_drift()) return eval_b(field, state);
  if (which.k < 0 || which.k >= field.d) throw DomainError("diffusion column index out of range");
  return eval_sigma(field, state).col(which.k);
}

std::size_t first_index_from(const TimeGrid& grid, double t) {
  const std::size_t j = grid.index_at(t);
  const double tol = 1e-12 * std::max(1.0, grid.horizon());
  if (std::abs(grid.time(j) - t) <= tol) return j;
  return j + 1;
}

Gradient gradient(const CoefficientField& field, Which which, const State& state, const FdOptions& opts) {
  const LiftLayout layout(field.n, state.grid);
  Gradient g(field.n, static_cast<Eigen::Index>(layout.dim()));
  Triplets trips;
  if (opts.prefer_oracle && field.has_gradient()) {
    check_time(state);
    field.gradient(state, which, trips);
    assemble(g, trips);
    return g;
  }
  const double h = opts.rel_step * state_scale(state);
  Eigen::VectorXd value = state.value;
  const State vs{state.grid, state.t, state.path, value};
  for (int i = 0; i < field.n; ++i) {
    const double orig = value(i);
    value(i) = orig + h;
    const Eigen::VectorXd fp = eval(field, which, vs);
    value(i) = orig - h;
    const Eigen::VectorXd fm = eval(field, which, vs);
    value(i) = orig;
    const Eigen::VectorXd q = (fp - fm) / (2 * h);
    check_finite(q, "finite-difference gradient");
    for (int r = 0; r < field.n; ++r)
      if (q(r) != 0.0) trips.emplace_back(r, static_cast<int>(layout.point()) + i, q(r));
  }
  if (!field.metadata.state_only) {
    Eigen::MatrixXd path = state.path;
    const State ps{state.grid, state.t, path, state.value};
    const std::size_t last = std::min(state.index(), state.grid.size() - 1);
    for (std::size_t r = 0; r <= last; ++r) {
      for (int i = 0; i < field.n; ++i) {
        const Eigen::Index rr = static_cast<Eigen::Index>(r);
        const double orig = path(i, rr);
        path(i, rr) = orig + h;
        const Eigen::VectorXd fp = eval(field, which, ps);
        path(i, rr) = orig - h;
        const Eigen::VectorXd fm = eval(field, which, ps);
        path(i, rr) = orig;
        const Eigen::VectorXd q = (fp - fm) / (2 * h);
        check_finite(q, "finite-difference gradient");
        for (int row = 0; row < field.n; ++row)
          if (q(row) != 0.0) trips.emplace_back(row, static_cast<int>(layout.slot(r)) + i, q(row));
      }
    }
  }
  assemble(g, trips);
  return g;
}

Eigen::MatrixXd vertical_derivative(const CoefficientField& field, Which which, const State& state,
                                    const FdOptions& opts) {
  const int n = field.n;
  const std::size_t from = first_index_from(state.grid, state.t);
  const std::size_t slots = state.grid.size();
  if (opts.prefer_oracle && field.has_gradient()) {
    const LiftLayout layout(n, state.grid);
    const Gradient g = gradient(field, which, state, opts);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int row = 0; row < n; ++row) {
      for (Gradient::InnerIterator it(g, row); it; ++it) {
        const std::size_t c = static_cast<std::size_t>(it.col());
        if (layout.is_point(c)) {
          out(row, static_cast<Eigen::Index>(c - layout.point())) += it.value();
        } else if (layout.slot_of(c) >= from) {
          out(row, static_cast<Eigen::Index>(c % static_cast<std::size_t>(n))) += it.value();
        }
      }
    }
    return out;
  }
  const double h = opts.rel_step * state_scale(state);
  Eigen::MatrixXd out(n, n);
  Eigen::MatrixXd path = state.path;
  Eigen::VectorXd value = state.value;
  const State bumped{state.grid, state.t, path, value};
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd fp, fm;
    for (int sign : {1, -1}) {
      value(i) = state.value(i) + sign * h;
      for (std::size_t r = from; r < slots; ++r)
        path(i, static_cast<Eigen::Index>(r)) = state.path(i, static_cast<Eigen::Index>(r)) + sign * h;
      (sign > 0 ? fp : fm) = eval(field, which, bumped);
    }
    value(i) = state.value(i);
    path.row(i) = state.path.row(i);
    out.col(i) = (fp - fm) / (2 * h);
  }
  check_finite(out, "vertical derivative");
  return out;
}

Eigen::VectorXd directional_derivative(const CoefficientField& field, Which which, const State& state,
                                       const Eigen::MatrixXd& dpath, const Eigen::VectorXd& dvalue,
                                       const FdOptions& opts) {
  if (dpath.rows() != field.n || static_cast<std::size_t>(dpath.cols()) != state.grid.size() ||
      dvalue.size() != field.n)
    throw DomainError("direction does not match the lifted state");
  if (opts.prefer_oracle && field.has_gradient()) {
    const Gradient g = gradient(field, which, state, opts);
    const LiftLayout layout(field.n, state.grid);
    Eigen::VectorXd dir(static_cast<Eigen::Index>(layout.dim()));
    dir.head(dpath.size()) = Eigen::Map<const Eigen::VectorXd>(dpath.data(), dpath.size());
    dir.tail(field.n) = dvalue;
    return g * dir;
  }
  const double dn = std::max(dpath.lpNorm<Eigen::Infinity>(), dvalue.lpNorm<Eigen::Infinity>());
  if (dn == 0.0) return Eigen::VectorXd::Zero(field.n);
  const double h = opts.rel_step * state_scale(state) / dn;
  Eigen::MatrixXd path = state.path + h * dpath;
  Eigen::VectorXd value = state.value + h * dvalue;
  const Eigen::VectorXd fp = eval(field, which, State{state.grid, state.t, path, value});
  path = state.path - h * dpath;
  value = state.value - h * dvalue;
  const Eigen::VectorXd fm = eval(field, which, State{state.grid, state.t, path, value});
  Eigen::VectorXd q = (fp - fm) / (2 * h);
  check_finite(q, "directional derivative");
  return q;
}

Eigen::MatrixXd directional_derivative_sigma(const CoefficientField& field, const State& state,
                                             const Eigen::MatrixXd& dpath, const Eigen::VectorXd& dvalue,
                                             const FdOptions& opts) {
  Eigen::MatrixXd out(field.n, field.d);
  for (int k = 0; k < field.d; ++k)
    out.col(k) = directional_derivative(field, Which::sigma(k), state, dpath, dvalue, opts);
  return out;
}

TimeDerivative time_derivative(const CoefficientField& field, Which which, const State& state, double step,
                               const FdOptions& opts) {
  check_time(state);
  if (opts.prefer_oracle && field.has_time_derivative()) return {field.time_derivative(state, which), false};
  const TimeGrid& grid = state.grid;
  const double T = grid.horizon();
  if (step <= 0.0) {
    const std::size_t j = grid.index_at(state.t);
    step = j < grid.steps() ? grid.dt(j) : grid.dt(grid.steps() - 1);
  }
  const double half = 0.5 * step;
  auto at = [&](double t) { return eval(field, which, State{grid, t, state.path, state.value}); };
  TimeDerivative out;
  if (state.t - half < 0.0) {
    out.value = (at(state.t + half) - at(state.t)) / half;
    out.one_sided = true;
  } else if (state.t + half > T) {
    out.value = (at(state.t) - at(state.t - half)) / half;
    out.one_sided = true;
  } else {
    out.value = (at(state.t + half) - at(state.t - half)) / step;
  }
  check_finite(out.value, "time derivative");
  return out;
}

Eigen::VectorXd LiftedVector::flatten() const {
  Eigen::VectorXd v(path_part.size() + point_part.size());
  v.head(path_part.size()) = Eigen::Map<const Eigen::VectorXd>(path_part.data(), path_part.size());
  v.tail(point_part.size()) = point_part;
  return v;
}

LiftedVector LiftedVector::unflatten(const Eigen::VectorXd& v, const LiftLayout& layout) {
  if (static_cast<std::size_t>(v.size()) != layout.dim()) throw DomainError("vector does not match the lift layout");
  LiftedVector out;
  out.path_part = Eigen::Map<const Eigen::MatrixXd>(v.data(), layout.n, static_cast<Eigen::Index>(layout.slots));
  out.point_part = v.tail(layout.n);
  return out;
}

LiftedVector lift(const Eigen::VectorXd& v, double t, const TimeGrid& grid) {
  LiftedVector out;
  out.path_part = Eigen::MatrixXd::Zero(v.size(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t r = first_index_from(grid, t); r < grid.size(); ++r) out.path_part.col(static_cast<Eigen::Index>(r)) = v;
  out.point_part = v;
  return out;
}

Eigen::VectorXd lift_flat(const Eigen::VectorXd& v, double t, const TimeGrid& grid) { return lift(v, t, grid).flatten(); }

}  // namespace pathdens
