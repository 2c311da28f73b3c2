#include "pathdens/flow.hpp"

#include <algorithm>
#include <cmath>

#include "pathdens/errors.hpp"

namespace pathdens {

namespace {

Eigen::VectorXd increment(const CoefficientField& field, const State& s, double dt, const Eigen::VectorXd& db) {
  return eval_b(field, s) * dt + eval_sigma(field, s) * db;
}

// Point block (n x n) of an n x D gradient.
Eigen::MatrixXd point_block(const Gradient& g, const LiftLayout& layout) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.rows(), layout.n);
  for (Eigen::Index row = 0; row < g.outerSize(); ++row)
    for (Gradient::InnerIterator it(g, row); it; ++it)
      if (layout.is_point(static_cast<std::size_t>(it.col())))
        out(row, static_cast<Eigen::Index>(static_cast<std::size_t>(it.col()) - layout.point())) += it.value();
  return out;
}

void check_causal(const Gradient& g, const LiftLayout& layout, std::size_t j) {
  for (Eigen::Index row = 0; row < g.outerSize(); ++row)
    for (Gradient::InnerIterator it(g, row); it; ++it) {
      const std::size_t c = static_cast<std::size_t>(it.col());
      if (!layout.is_point(c) && layout.slot_of(c) > j)
        throw ContractError("coefficient gradient reads the path after the current time (step " + std::to_string(j) +
                            ")");
    }
}

// rho += coef * G for an m x D block of rows and an n x D sparse G.
void add_rows(Eigen::MatrixXd& rho, const Eigen::MatrixXd& coef, const Gradient& g, double sign) {
  for (Eigen::Index q = 0; q < g.outerSize(); ++q)
    for (Gradient::InnerIterator it(g, q); it; ++it) rho.col(it.col()) += (sign * it.value()) * coef.col(q);
}

Eigen::MatrixXd slot_sum_from(const Eigen::MatrixXd& rho, const LiftLayout& layout, std::size_t from) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rho.rows(), layout.n);
  for (std::size_t r = from; r < layout.slots; ++r)
    s += rho.middleCols(static_cast<Eigen::Index>(layout.slot(r)), layout.n);
  return s;
}

Eigen::MatrixXd point_cols(const Eigen::MatrixXd& rho, const LiftLayout& layout) {
  return rho.middleCols(static_cast<Eigen::Index>(layout.point()), layout.n);
}

// Shared backward sweep; rho is updated in place to rho Y_{tau <- stop}.
void backward_sweep_inplace(const std::function<const Gradient&(std::size_t)>& K, const LiftLayout& layout,
                            std::size_t tau, std::size_t stop, Eigen::MatrixXd& rho,
                            const std::function<void(std::size_t, const Eigen::MatrixXd&)>* visit) {
  Eigen::MatrixXd S = slot_sum_from(rho, layout, tau);
  if (visit) (*visit)(tau, S + point_cols(rho, layout));
  for (std::size_t j = tau; j-- > stop;) {
    const Eigen::MatrixXd c = S + point_cols(rho, layout);
    add_rows(rho, c, K(j), 1.0);
    S += rho.middleCols(static_cast<Eigen::Index>(layout.slot(j)), layout.n);
    if (visit) (*visit)(j, S + point_cols(rho, layout));
  }
}

}  // namespace

SolutionBundle solve_sde(const CoefficientField& field, const Eigen::VectorXd& x0, const Eigen::MatrixXd& noise,
                         const TimeGrid& grid) {
  if (x0.size() != field.n) throw DomainError("initial value does not match the field dimension");
  if (noise.rows() != field.d || static_cast<std::size_t>(noise.cols()) != grid.steps())
    throw DomainError("noise does not match the grid intervals");
  SolutionBundle b;
  b.grid = grid;
  b.x0 = x0;
  b.noise = noise;
  b.X = Eigen::MatrixXd::Zero(field.n, static_cast<Eigen::Index>(grid.size()));
  b.X.col(0) = x0;
  Eigen::VectorXd value = x0;
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    const State s{grid, grid.time(j), b.X, value};
    value = value + increment(field, s, grid.dt(j), noise.col(jj));
    if (!value.allFinite()) throw DivergenceError("solution became non-finite", j + 1);
    b.X.col(jj + 1) = value;
  }
  return b;
}

Eigen::VectorXd lifted_state(const SolutionBundle& bundle, std::size_t j) {
  const LiftLayout layout = bundle.layout();
  Eigen::VectorXd v(static_cast<Eigen::Index>(layout.dim()));
  for (std::size_t r = 0; r < layout.slots; ++r)
    v.segment(static_cast<Eigen::Index>(layout.slot(r)), layout.n) = bundle.X.col(static_cast<Eigen::Index>(std::min(r, j)));
  v.tail(layout.n) = bundle.X.col(static_cast<Eigen::Index>(j));
  return v;
}

Eigen::MatrixXd lift_solution(const SolutionBundle& bundle) {
  const LiftLayout layout = bundle.layout();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(layout.dim()), static_cast<Eigen::Index>(layout.slots));
  for (std::size_t j = 0; j < layout.slots; ++j) out.col(static_cast<Eigen::Index>(j)) = lifted_state(bundle, j);
  return out;
}

Eigen::MatrixXd direct_lifted_solve(const CoefficientField& field, const Eigen::VectorXd& x0,
                                    const Eigen::MatrixXd& noise, const TimeGrid& grid) {
  if (x0.size() != field.n) throw DomainError("initial value does not match the field dimension");
  if (noise.rows() != field.d || static_cast<std::size_t>(noise.cols()) != grid.steps())
    throw DomainError("noise does not match the grid intervals");
  const LiftLayout layout(field.n, grid);
  const Eigen::Index n = field.n;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(layout.dim()), static_cast<Eigen::Index>(grid.size()));
  Eigen::VectorXd v = lift_flat(x0, 0.0, grid);
  out.col(0) = v;
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const Eigen::MatrixXd path = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, static_cast<Eigen::Index>(grid.size()));
    const Eigen::VectorXd value = v.tail(n);
    const State s{grid, grid.time(j), path, value};
    const Eigen::VectorXd inc = increment(field, s, grid.dt(j), noise.col(static_cast<Eigen::Index>(j)));
    for (std::size_t r = j + 1; r < layout.slots; ++r) {
      auto seg = v.segment(static_cast<Eigen::Index>(layout.slot(r)), n);
      seg = seg + inc;
    }
    v.tail(n) = value + inc;
    if (!v.allFinite()) throw DivergenceError("lifted solution became non-finite", j + 1);
    out.col(static_cast<Eigen::Index>(j + 1)) = v;
  }
  return out;
}

Gradient step_jacobian(const CoefficientField& field, const SolutionBundle& bundle, std::size_t j,
                       const FlowOptions& opts) {
  if (!field.has_gradient() && !opts.allow_fd)
    throw ConfigurationError("field has no derivative oracle and finite differences are disabled");
  const LiftLayout layout = bundle.layout();
  const Eigen::VectorXd value = bundle.X.col(static_cast<Eigen::Index>(j));
  const State s{bundle.grid, bundle.grid.time(j), bundle.X, value};
  Gradient k = gradient(field, Which::drift(), s, opts.fd) * bundle.grid.dt(j);
  check_causal(k, layout, j);
  for (int q = 0; q < field.d; ++q) {
    const Gradient gq = gradient(field, Which::sigma(q), s, opts.fd);
    check_causal(gq, layout, j);
    k += gq * bundle.noise(q, static_cast<Eigen::Index>(j));
  }
  k.makeCompressed();
  return k;
}

StepFactor step_factor(const CoefficientField& field, const SolutionBundle& bundle, std::size_t j,
                       const FlowOptions& opts) {
  if (!field.has_gradient() && !opts.allow_fd)
    throw ConfigurationError("field has no derivative oracle and finite differences are disabled");
  const TimeGrid& grid = bundle.grid;
  const LiftLayout layout = bundle.layout();
  const Eigen::VectorXd value = bundle.X.col(static_cast<Eigen::Index>(j));
  const State s{grid, grid.time(j), bundle.X, value};
  const double dt = grid.dt(j);
  const Eigen::VectorXd db = bundle.noise.col(static_cast<Eigen::Index>(j));

  const Gradient gb = gradient(field, Which::drift(), s, opts.fd);
  check_causal(gb, layout, j);
  StepFactor f;
  f.K = gb * dt;
  Gradient noise_part(field.n, static_cast<Eigen::Index>(layout.dim()));
  Gradient ito(field.n, static_cast<Eigen::Index>(layout.dim()));
  for (int k = 0; k < field.d; ++k) {
    const Gradient gk = gradient(field, Which::sigma(k), s, opts.fd);
    check_causal(gk, layout, j);
    noise_part += gk * db(k);
    if (opts.scheme == InverseScheme::Euler) {
      const Eigen::MatrixXd pk = point_block(gk, layout);
      if (!pk.isZero(0.0)) ito += Gradient(Gradient(pk.sparseView()) * gk);
    }
  }
  f.K += noise_part;
  if (opts.scheme == InverseScheme::Euler) {
    f.H = (gb - ito) * dt + noise_part;
  } else {
    const Eigen::MatrixXd kpt = point_block(f.K, layout);
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(field.n, field.n) + kpt;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) throw NumericalError("Jacobian step is singular (step " + std::to_string(j) + ")");
    const Eigen::MatrixXd minv = lu.inverse();
    f.H = Gradient(Gradient(minv.sparseView()) * f.K);
  }
  f.K.makeCompressed();
  f.H.makeCompressed();
  return f;
}

FlowOperators::FlowOperators(const CoefficientField& field, const SolutionBundle& bundle, const FlowOptions& opts)
    : grid_(bundle.grid), layout_(bundle.layout()), scheme_(opts.scheme) {
  factors_.reserve(grid_.steps());
  for (std::size_t j = 0; j < grid_.steps(); ++j) factors_.push_back(step_factor(field, bundle, j, opts));
}

FlowOperators jacobian_grid(const CoefficientField& field, const SolutionBundle& bundle, const FlowOptions& opts) {
  return FlowOperators(field, bundle, opts);
}

FlowOperators inverse_grid(const CoefficientField& field, const SolutionBundle& bundle, const FlowOptions& opts) {
  return FlowOperators(field, bundle, opts);
}

Eigen::VectorXd FlowOperators::apply_Y(std::size_t J, const Eigen::VectorXd& v) const {
  if (J > steps()) throw DomainError("time index beyond the grid");
  const Eigen::Index n = layout_.n;
  Eigen::VectorXd out = v;
  Eigen::VectorXd pt = v.tail(n);
  // cum.col(m) = sum of increments from steps <= m; slot r has received steps < r.
  Eigen::MatrixXd cum(n, static_cast<Eigen::Index>(std::max<std::size_t>(J, 1)));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd c(n);
  for (std::size_t j = 0; j < J; ++j) {
    const Gradient& K = factors_[j].K;
    c.setZero();
    for (Eigen::Index q = 0; q < K.outerSize(); ++q) {
      double sum = 0.0;
      for (Gradient::InnerIterator it(K, q); it; ++it) {
        const std::size_t col = static_cast<std::size_t>(it.col());
        double x;
        if (layout_.is_point(col)) {
          x = pt(static_cast<Eigen::Index>(col - layout_.point()));
        } else {
          const std::size_t r = layout_.slot_of(col);
          x = v(static_cast<Eigen::Index>(col));
          if (r >= 1) x += cum(static_cast<Eigen::Index>(col % static_cast<std::size_t>(n)), static_cast<Eigen::Index>(r - 1));
        }
        sum += it.value() * x;
      }
      c(q) = sum;
    }
    acc += c;
    cum.col(static_cast<Eigen::Index>(j)) = acc;
    pt += c;
  }
  if (J > 0)
    for (std::size_t r = 1; r < layout_.slots; ++r)
      out.segment(static_cast<Eigen::Index>(layout_.slot(r)), n) += cum.col(static_cast<Eigen::Index>(std::min(r - 1, J - 1)));
  out.tail(n) = pt;
  return out;
}

Eigen::MatrixXd FlowOperators::projected_path(const Eigen::VectorXd& v) const {
  const Eigen::Index n = layout_.n;
  const std::size_t J = steps();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(J + 1));
  Eigen::VectorXd pt = v.tail(n);
  out.col(0) = pt;
  Eigen::MatrixXd cum(n, static_cast<Eigen::Index>(std::max<std::size_t>(J, 1)));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd c(n);
  for (std::size_t j = 0; j < J; ++j) {
    const Gradient& K = factors_[j].K;
    c.setZero();
    for (Eigen::Index q = 0; q < K.outerSize(); ++q) {
      double sum = 0.0;
      for (Gradient::InnerIterator it(K, q); it; ++it) {
        const std::size_t col = static_cast<std::size_t>(it.col());
        double x;
        if (layout_.is_point(col)) {
          x = pt(static_cast<Eigen::Index>(col - layout_.point()));
        } else {
          const std::size_t r = layout_.slot_of(col);
          x = v(static_cast<Eigen::Index>(col));
          if (r >= 1) x += cum(static_cast<Eigen::Index>(col % static_cast<std::size_t>(n)), static_cast<Eigen::Index>(r - 1));
        }
        sum += it.value() * x;
      }
      c(q) = sum;
    }
    acc += c;
    cum.col(static_cast<Eigen::Index>(j)) = acc;
    pt += c;
    out.col(static_cast<Eigen::Index>(j + 1)) = pt;
  }
  return out;
}

Eigen::VectorXd FlowOperators::apply_Z(std::size_t J, const Eigen::VectorXd& v) const {
  if (J > steps()) throw DomainError("time index beyond the grid");
  const Eigen::Index n = layout_.n;
  Eigen::VectorXd out = v;
  Eigen::VectorXd pt = v.tail(n);
  Eigen::MatrixXd adds = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(std::max<std::size_t>(J, 1)));
  Eigen::VectorXd c(n);
  // Later factors act first; their path additions sit beyond any slot read by earlier steps.
  for (std::size_t j = J; j-- > 0;) {
    const Gradient& H = factors_[j].H;
    c.setZero();
    for (Eigen::Index q = 0; q < H.outerSize(); ++q) {
      double sum = 0.0;
      for (Gradient::InnerIterator it(H, q); it; ++it) {
        const std::size_t col = static_cast<std::size_t>(it.col());
        const double x = layout_.is_point(col) ? pt(static_cast<Eigen::Index>(col - layout_.point()))
                                               : v(static_cast<Eigen::Index>(col));
        sum += it.value() * x;
      }
      c(q) = sum;
    }
    adds.col(static_cast<Eigen::Index>(j)) = -c;
    pt -= c;
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (std::size_t r = 1; r < layout_.slots; ++r) {
    if (r - 1 < J) acc += adds.col(static_cast<Eigen::Index>(r - 1));
    out.segment(static_cast<Eigen::Index>(layout_.slot(r)), n) += acc;
  }
  out.tail(n) = pt;
  return out;
}

Eigen::MatrixXd FlowOperators::left_Y(std::size_t J, const Eigen::MatrixXd& rho) const {
  if (J > steps()) throw DomainError("time index beyond the grid");
  Eigen::MatrixXd out = rho;
  backward_sweep_inplace([this](std::size_t j) -> const Gradient& { return factors_[j].K; }, layout_, J, 0, out,
                         nullptr);
  return out;
}

Eigen::MatrixXd FlowOperators::left_Z(std::size_t J, const Eigen::MatrixXd& rho) const {
  if (J > steps()) throw DomainError("time index beyond the grid");
  Eigen::MatrixXd out = rho;
  // Rows at slots after t_j are never modified by steps < j, so suffix sums of the input suffice.
  std::vector<Eigen::MatrixXd> suffix(layout_.slots + 1, Eigen::MatrixXd::Zero(rho.rows(), layout_.n));
  for (std::size_t r = layout_.slots; r-- > 0;)
    suffix[r] = suffix[r + 1] + rho.middleCols(static_cast<Eigen::Index>(layout_.slot(r)), layout_.n);
  for (std::size_t j = 0; j < J; ++j) {
    const Eigen::MatrixXd c = suffix[j + 1] + point_cols(out, layout_);
    add_rows(out, c, factors_[j].H, -1.0);
  }
  return out;
}

Eigen::MatrixXd FlowOperators::projected_Y(std::size_t J) const {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(layout_.n, static_cast<Eigen::Index>(dim()));
  e.rightCols(layout_.n).setIdentity();
  return left_Y(J, e);
}

Eigen::MatrixXd FlowOperators::dense_Y(std::size_t j) const {
  if (dim() > 4096) throw ResourceError("dense operators are limited to dimension 4096");
  const Eigen::Index D = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd out(D, D);
  for (Eigen::Index c = 0; c < D; ++c) out.col(c) = apply_Y(j, Eigen::VectorXd::Unit(D, c));
  return out;
}

Eigen::MatrixXd FlowOperators::dense_Z(std::size_t j) const {
  if (dim() > 4096) throw ResourceError("dense operators are limited to dimension 4096");
  const Eigen::Index D = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd out(D, D);
  for (Eigen::Index c = 0; c < D; ++c) out.col(c) = apply_Z(j, Eigen::VectorXd::Unit(D, c));
  return out;
}

void backward_lifted_sweep(const std::function<const Gradient&(std::size_t)>& K, const LiftLayout& layout,
                           std::size_t tau, std::size_t stop, Eigen::MatrixXd rho,
                           const std::function<void(std::size_t, const Eigen::MatrixXd&)>& visit) {
  if (stop > tau) throw DomainError("sweep must run backwards from tau");
  backward_sweep_inplace(K, layout, tau, stop, rho, &visit);
}

Eigen::MatrixXd propagate_variation(const CoefficientField& field, const SolutionBundle& bundle, std::size_t s,
                                    const Eigen::VectorXd& v, const FdOptions& opts) {
  const TimeGrid& grid = bundle.grid;
  if (s >= grid.size()) throw DomainError("start index beyond the grid");
  if (v.size() != field.n) throw DomainError("variation must have n entries");
  const LiftLayout layout = bundle.layout();
  const Eigen::Index n = field.n;
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(grid.size()));
  xi.col(static_cast<Eigen::Index>(s)) = v;
  const bool oracle = opts.prefer_oracle && field.has_gradient();
  Eigen::MatrixXd dpath;
  if (!oracle) dpath = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(grid.size()));

  for (std::size_t j = s; j < grid.steps(); ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    const Eigen::VectorXd value = bundle.X.col(jj);
    const State st{grid, grid.time(j), bundle.X, value};
    const Eigen::VectorXd cur = xi.col(jj);
    const double dt = grid.dt(j);
    Eigen::VectorXd inc = Eigen::VectorXd::Zero(n);
    if (oracle) {
      auto apply = [&](const Gradient& g) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
        for (Eigen::Index q = 0; q < g.outerSize(); ++q)
          for (Gradient::InnerIterator it(g, q); it; ++it) {
            const std::size_t col = static_cast<std::size_t>(it.col());
            double x;
            if (layout.is_point(col)) {
              x = cur(static_cast<Eigen::Index>(col - layout.point()));
            } else {
              const std::size_t r = layout.slot_of(col);
              const Eigen::Index comp = static_cast<Eigen::Index>(col % static_cast<std::size_t>(n));
              x = r < s ? 0.0 : xi(comp, static_cast<Eigen::Index>(std::min(r, j)));
            }
            out(q) += it.value() * x;
          }
        return out;
      };
      inc += apply(gradient(field, Which::drift(), st, opts)) * dt;
      for (int k = 0; k < field.d; ++k)
        inc += apply(gradient(field, Which::sigma(k), st, opts)) * bundle.noise(k, jj);
    } else {
      for (Eigen::Index r = jj; r < dpath.cols(); ++r) dpath.col(r) = cur;
      inc += directional_derivative(field, Which::drift(), st, dpath, cur, opts) * dt;
      inc += directional_derivative_sigma(field, st, dpath, cur, opts) * bundle.noise.col(jj);
    }
    xi.col(jj + 1) = cur + inc;
    if (!xi.col(jj + 1).allFinite()) throw DivergenceError("variation became non-finite", j + 1);
  }
  return xi;
}

Eigen::VectorXd j_tau_s(const FlowOperators& ops, double tau, double s, const LiftedVector& v) {
  const std::size_t it = ops.grid().index_of(tau);
  const std::size_t is = ops.grid().index_of(s);
  const Eigen::VectorXd w = ops.apply_Y(it, ops.apply_Z(is, v.flatten()));
  return w.tail(ops.layout().n);
}

JacobianSweep::JacobianSweep(const FlowOperators& ops, std::size_t tau) : ops_(ops) {
  rho_ = ops.projected_Y(tau);
  const LiftLayout& layout = ops.layout();
  suffix_.assign(layout.slots + 1, Eigen::MatrixXd::Zero(layout.n, layout.n));
  for (std::size_t r = layout.slots; r-- > 0;)
    suffix_[r] = suffix_[r + 1] + rho_.middleCols(static_cast<Eigen::Index>(layout.slot(r)), layout.n);
}

void JacobianSweep::advance_to(std::size_t s) {
  if (s < pos_) throw ContractError("JacobianSweep only moves forward");
  if (s > ops_.steps()) throw DomainError("time index beyond the grid");
  const LiftLayout& layout = ops_.layout();
  while (pos_ < s) {
    const Eigen::MatrixXd c = suffix_[pos_ + 1] + point_cols(rho_, layout);
    add_rows(rho_, c, ops_.factor(pos_).H, -1.0);
    ++pos_;
  }
}

Eigen::MatrixXd JacobianSweep::lifted(std::size_t from) const {
  if (from < pos_) throw ContractError("lifted direction starts before the sweep position");
  return suffix_[std::min(from, suffix_.size() - 1)] + point_cols(rho_, ops_.layout());
}

Eigen::MatrixXd JacobianSweep::slot(std::size_t r) const {
  const LiftLayout& layout = ops_.layout();
  return rho_.middleCols(static_cast<Eigen::Index>(layout.slot(r)), layout.n);
}

Eigen::VectorXd JacobianSweep::apply(const Eigen::VectorXd& v) const { return rho_ * v; }

InverseResidual check_inverse(const FlowOperators& ops, std::size_t j, int anchors) {
  const TimeGrid& grid = ops.grid();
  const LiftLayout& layout = ops.layout();
  std::vector<Eigen::VectorXd> probes;
  const std::size_t N = grid.steps();
  for (int a = 0; a < anchors; ++a) {
    const std::size_t r = static_cast<std::size_t>(a) * N / static_cast<std::size_t>(anchors);
    for (int i = 0; i < layout.n; ++i)
      probes.push_back(lift_flat(Eigen::VectorXd::Unit(layout.n, i), grid.time(r), grid));
  }
  for (int i = 0; i < layout.n; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.dim()));
    v(static_cast<Eigen::Index>(layout.point()) + i) = 1.0;
    probes.push_back(v);
  }
  InverseResidual res;
  for (const auto& v : probes) {
    const double nv = v.lpNorm<Eigen::Infinity>();
    res.zy = std::max(res.zy, (ops.apply_Z(j, ops.apply_Y(j, v)) - v).lpNorm<Eigen::Infinity>() / nv);
    res.yz = std::max(res.yz, (ops.apply_Y(j, ops.apply_Z(j, v)) - v).lpNorm<Eigen::Infinity>() / nv);
  }
  return res;
}

}  // namespace pathdens
