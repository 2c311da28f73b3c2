#include "pathdens/mastereq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathdens/errors.hpp"
#include "pathdens/parallel.hpp"

namespace pathdens {

namespace {

struct Indices {
  std::size_t ia = 0, ib = 0;
};

Indices window_indices(const TimeGrid& grid, const CheckWindow& w) {
  if (!(w.tau0 <= w.tau)) throw DomainError("window start after its end");
  Indices out{grid.index_of(w.tau0), grid.index_of(w.tau)};
  return out;
}

void check_rough_path(const SolutionBundle& bundle, const RoughPath& rp) {
  const TimeGrid& g = bundle.grid;
  if (rp.grid().size() != g.size()) throw DomainError("rough path and bundle grids differ");
  for (std::size_t j = 0; j < g.size(); ++j)
    if (std::abs(rp.grid().time(j) - g.time(j)) > 1e-12 * std::max(1.0, g.horizon()))
      throw DomainError("rough path and bundle grids differ");
  if (rp.dim() != bundle.d()) throw DomainError("rough path dimension differs from the noise dimension");
  const double scale = std::max(1.0, bundle.noise.lpNorm<Eigen::Infinity>());
  if ((rp.increments() - bundle.noise).lpNorm<Eigen::Infinity>() > 1e-12 * scale)
    throw DomainError("rough path does not carry the bundle noise");
}

// Area over interval j in the requested form.
Eigen::MatrixXd area_as(const RoughPath& rp, std::size_t j, Convention c) {
  Eigen::MatrixXd a = rp.area(j);
  const double half = 0.5 * rp.grid().dt(j);
  if (rp.convention() == Convention::Ito && c == Convention::Stratonovich) a.diagonal().array() += half;
  if (rp.convention() == Convention::Stratonovich && c == Convention::Ito) a.diagonal().array() -= half;
  return a;
}

// sum_k W_k dB^k + sum_{k,l} Q[k]_l BB^{lk}, with BB Stratonovich or Ito plus 1/2 sum_k Q[k]_k dt.
Eigen::VectorXd rough_increment(const Eigen::MatrixXd& W, const std::vector<Eigen::MatrixXd>& Q, const RoughPath& rp,
                                std::size_t j, bool ito_correction) {
  const Eigen::VectorXd dB = rp.increments().col(static_cast<Eigen::Index>(j));
  const Eigen::MatrixXd a = area_as(rp, j, ito_correction ? Convention::Ito : Convention::Stratonovich);
  Eigen::VectorXd out = W * dB;
  for (std::size_t k = 0; k < Q.size(); ++k) {
    out.noalias() += Q[k] * a.col(static_cast<Eigen::Index>(k));
    if (ito_correction) out += 0.5 * rp.grid().dt(j) * Q[k].col(static_cast<Eigen::Index>(k));
  }
  return out;
}

std::vector<VectorFieldEval> columns(const CoefficientField& field) {
  std::vector<VectorFieldEval> out;
  for (int k = 0; k < field.d; ++k) out.push_back(diffusion_column(field, k));
  return out;
}

// Integrand of the rough term (n x d) and its Gubinelli derivative, for either
// U_k = d_v V . sigma_k or U_k = [sigma_k, V].
struct RoughIntegrand {
  Eigen::MatrixXd W;
  std::vector<Eigen::MatrixXd> Q;
};

RoughIntegrand rough_integrand(const VectorFieldEval& v, const std::vector<VectorFieldEval>& sig, const State& s,
                               bool bracket, double rel) {
  const int n = s.n();
  const int d = static_cast<int>(sig.size());
  RoughIntegrand out;
  out.W.resize(n, d);
  std::vector<Eigen::VectorXd> sv;
  for (const auto& c : sig) sv.push_back(c.value(s));
  for (int k = 0; k < d; ++k) {
    VectorFieldEval wk;
    wk.nesting = v.nesting + 1;
    const VectorFieldEval& ck = sig[static_cast<std::size_t>(k)];
    if (bracket)
      wk.value = [&v, &ck, rel](const State& st) { return lie_bracket(v, ck, st, rel); };
    else
      wk.value = [&v, &ck, rel](const State& st) { return vertical_apply(v, st, ck.value(st), rel); };
    out.W.col(k) = wk.value(s);
    Eigen::MatrixXd q(n, d);
    for (int l = 0; l < d; ++l) {
      const VectorFieldEval& cl = sig[static_cast<std::size_t>(l)];
      q.col(l) = bracket ? lie_bracket(wk, cl, s, rel) : vertical_apply(wk, s, sv[static_cast<std::size_t>(l)], rel);
    }
    out.Q.push_back(std::move(q));
  }
  return out;
}

}  // namespace

Eigen::VectorXd sigma0(const CoefficientField& field, const State& s, double rel_step) {
  Eigen::VectorXd out = eval_b(field, s);
  for (int k = 0; k < field.d; ++k) {
    const VectorFieldEval c = diffusion_column(field, k);
    out -= 0.5 * vertical_apply(c, s, c.value(s), rel_step);
  }
  if (!out.allFinite()) throw NumericalError("non-finite Stratonovich drift");
  return out;
}

LiftedVector sigma0_hat(const CoefficientField& field, const State& s, double rel_step) {
  return lift(sigma0(field, s, rel_step), s.t, s.grid);
}

VectorFieldEval sigma0_field(const CoefficientField& field, double rel_step) {
  auto f = std::make_shared<const CoefficientField>(field);
  VectorFieldEval v;
  v.nesting = 1;
  v.value = [f, rel_step](const State& s) { return sigma0(*f, s, rel_step); };
  return v;
}

VectorFieldEval point_value_field(int n) {
  VectorFieldEval v;
  v.value = [](const State& s) { return Eigen::VectorXd(s.value); };
  v.vertical = [n](const State&) { return Eigen::MatrixXd::Identity(n, n).eval(); };
  return v;
}

VectorFieldEval constant_vector_field(const Eigen::VectorXd& c) {
  VectorFieldEval v;
  v.value = [c](const State&) { return c; };
  const Eigen::Index n = c.size();
  v.vertical = [n](const State&) { return Eigen::MatrixXd::Zero(n, n).eval(); };
  return v;
}

Eigen::VectorXd time_partial(const VectorFieldEval& v, const State& s, double step) {
  if (!(step > 0.0)) throw DomainError("time step must be positive");
  const double half = 0.5 * step;
  const double T = s.grid.horizon();
  auto at = [&](double t) { return v.value(State{s.grid, t, s.path, s.value}); };
  Eigen::VectorXd out;
  if (s.t - half < 0.0)
    out = (at(s.t + half) - at(s.t)) / half;
  else if (s.t + half > T)
    out = (at(s.t) - at(s.t - half)) / half;
  else
    out = (at(s.t + half) - at(s.t - half)) / step;
  if (!out.allFinite()) throw NumericalError("non-finite time derivative");
  return out;
}

MasterEqReport rough_ito_check(const CoefficientField& field, const VectorFieldEval& v, const SolutionBundle& bundle,
                               const RoughPath& rp, const CheckWindow& window, const MasterEqOptions& opts) {
  check_rough_path(bundle, rp);
  const TimeGrid& grid = bundle.grid;
  const auto [ia, ib] = window_indices(grid, window);
  const int n = bundle.n();
  const auto sig = columns(field);
  const VectorFieldEval s0 = sigma0_field(field, opts.rel_step);
  const double p = opts.p;

  MasterEqReport rep;
  rep.ia = ia;
  rep.ib = ib;
  for (std::size_t j = ia; j < ib; ++j) rep.mesh = std::max(rep.mesh, grid.dt(j));

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(grid.size()));
  Eigen::VectorXd drift_acc = Eigen::VectorXd::Zero(n), rough_acc = Eigen::VectorXd::Zero(n);
  // Point residual P_r for r in [ia, ib]. With increments lifted from the next grid
  // point, the lifted residual at t_m has path part P_r on [t_ia, t_m) and P_m after.
  std::vector<Eigen::VectorXd> point(ib - ia + 1);
  double running = 0.0;  // sum_{ia <= r < m} w_r |P_r|^p

  for (std::size_t m = ia;; ++m) {
    const Eigen::VectorXd xm = bundle.X.col(static_cast<Eigen::Index>(m));
    const State s{grid, grid.time(m), bundle.X, xm};
    values.col(static_cast<Eigen::Index>(m)) = v.value(s);
    const Eigen::VectorXd pm =
        values.col(static_cast<Eigen::Index>(m)) - values.col(static_cast<Eigen::Index>(ia)) - drift_acc - rough_acc;
    point[m - ia] = pm;
    const double tail = grid.mass_from(m);
    const double lp = std::pow(running + tail * std::pow(pm.norm(), p), 1.0 / p);
    const double r = std::sqrt(lp * lp + pm.squaredNorm());
    rep.residual.push_back(r);
    rep.residual_sup = std::max(rep.residual_sup, r);
    rep.drift_bracket = std::max(rep.drift_bracket, drift_acc.norm());
    rep.rough_bracket = std::max(rep.rough_bracket, rough_acc.norm());
    if (m == ib) break;
    running += grid.weight(m) * std::pow(pm.norm(), p);

    const double dt = grid.dt(m);
    const Eigen::VectorXd ds = time_partial(v, s, dt) + vertical_apply(v, s, s0.value(s), opts.rel_step);
    drift_acc += ds * dt;
    const RoughIntegrand ri = rough_integrand(v, sig, s, false, opts.rel_step);
    rough_acc += rough_increment(ri.W, ri.Q, rp, m, opts.ito_correction);
  }
  const Eigen::VectorXd v0 = values.col(static_cast<Eigen::Index>(ia));
  rep.initial = lifted_norm(lift(v0, grid.time(ia), grid).path_part, v0, grid, p);
  const Eigen::MatrixXd young = young_indicator_integral(values, ia, ib);
  rep.young = lp_norm(young, grid, p);
  return rep;
}

MasterEqReport master_equation_residual(const CoefficientField& field, const VectorFieldEval& v,
                                        const SolutionBundle& bundle, const FlowOperators& ops, const RoughPath& rp,
                                        const CheckWindow& window, const MasterEqOptions& opts,
                                        NorrisDecomposition* dec) {
  check_rough_path(bundle, rp);
  const TimeGrid& grid = bundle.grid;
  if (ops.grid().size() != grid.size() || ops.layout().n != bundle.n())
    throw DomainError("flow operators do not match the bundle");
  const auto [ia, ib] = window_indices(grid, window);
  const int n = bundle.n();
  const int d = bundle.d();
  const auto sig = columns(field);
  const VectorFieldEval s0 = sigma0_field(field, opts.rel_step);
  const LiftLayout layout = ops.layout();

  MasterEqReport rep;
  rep.ia = ia;
  rep.ib = ib;
  for (std::size_t j = ia; j < ib; ++j) rep.mesh = std::max(rep.mesh, grid.dt(j));

  if (dec) {
    const Eigen::Index G = static_cast<Eigen::Index>(grid.size());
    dec->grid = grid;
    dec->ia = ia;
    dec->ib = ib;
    dec->d = d;
    dec->I = Eigen::MatrixXd::Zero(n, G);
    dec->A = Eigen::MatrixXd::Zero(n * d, G);
    dec->A_prime.assign(grid.size(), Eigen::MatrixXd::Zero(n * d, d));
    dec->C = Eigen::MatrixXd::Zero(n, G);
    dec->D = Eigen::MatrixXd::Zero(n, G);
    dec->phi = Eigen::MatrixXd::Zero(1, G);
    for (std::size_t j = 0; j < grid.size(); ++j) dec->phi(0, static_cast<Eigen::Index>(j)) = grid.time(j);
  }

  JacobianSweep sweep(ops, ib);
  sweep.advance_to(ia);
  Eigen::VectorXd initial, young = Eigen::VectorXd::Zero(n), drift = Eigen::VectorXd::Zero(n),
                           rough = Eigen::VectorXd::Zero(n);
  for (std::size_t m = ia;; ++m) {
    const Eigen::VectorXd xm = bundle.X.col(static_cast<Eigen::Index>(m));
    const State s{grid, grid.time(m), bundle.X, xm};
    const Eigen::VectorXd vm = v.value(s);
    const Eigen::VectorXd lhs = sweep.lifted(m) * vm;
    if (m == ia) initial = lhs;
    const Eigen::VectorXd res = lhs - initial - young - drift - rough;
    const double r = m == ia ? 0.0 : res.norm();
    rep.residual.push_back(r);
    rep.residual_sup = std::max(rep.residual_sup, r);
    rep.initial = initial.norm();
    rep.young = std::max(rep.young, young.norm());
    rep.drift_bracket = std::max(rep.drift_bracket, drift.norm());
    rep.rough_bracket = std::max(rep.rough_bracket, rough.norm());
    if (dec) dec->I.col(static_cast<Eigen::Index>(m)) = lhs;
    if (m == ib) break;

    const double dt = grid.dt(m);
    Eigen::VectorXd y;
    if (opts.young_closed_form) {
      y = -sweep.slot(m) * vm;
    } else {
      const Eigen::VectorXd inc = lift_flat(vm, grid.time(m + 1), grid) - lift_flat(vm, grid.time(m), grid);
      Eigen::VectorXd flat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.dim()));
      flat.head(static_cast<Eigen::Index>(layout.point())) = inc.head(static_cast<Eigen::Index>(layout.point()));
      y = sweep.apply(flat);
    }
    const Eigen::MatrixXd M = sweep.lifted(m + 1);
    const Eigen::VectorXd c = M * (time_partial(v, s, dt) + lie_bracket(v, s0, s, opts.rel_step));
    const RoughIntegrand ri = rough_integrand(v, sig, s, true, opts.rel_step);
    Eigen::MatrixXd MW = M * ri.W;
    std::vector<Eigen::MatrixXd> MQ;
    for (const auto& q : ri.Q) MQ.push_back(M * q);
    young += y;
    drift += c * dt;
    rough += rough_increment(MW, MQ, rp, m, opts.ito_correction);
    if (dec) {
      const Eigen::Index col = static_cast<Eigen::Index>(m);
      dec->A.col(col) = Eigen::Map<const Eigen::VectorXd>(MW.data(), MW.size());
      Eigen::MatrixXd ap(n * d, d);
      for (int k = 0; k < d; ++k) ap.middleRows(k * n, n) = MQ[static_cast<std::size_t>(k)];
      dec->A_prime[m] = ap;
      dec->C.col(col) = c;
      dec->D.col(col) = y / dt;
      if (m + 1 == ib) {
        dec->A.col(col + 1) = dec->A.col(col);
        dec->A_prime[m + 1] = ap;
        dec->C.col(col + 1) = c;
        dec->D.col(col + 1) = dec->D.col(col);
      }
    }
    sweep.advance_to(m + 1);
  }
  return rep;
}

RefinementStudy refinement_study(const CoefficientField& field, const VectorFieldEval& v, const Eigen::VectorXd& x0,
                                 const MeasureSpec& measure, const CheckWindow& window, MasterCheck check,
                                 const RefinementOptions& opts) {
  if (opts.levels < 2) throw DomainError("a refinement study needs at least two levels");
  if (opts.seeds.empty()) throw DomainError("a refinement study needs at least one seed");
  if (opts.kappa == 0 || (opts.kappa & (opts.kappa - 1)) != 0) throw DomainError("kappa must be a power of two");
  unsigned lk = 0;
  while ((std::size_t{1} << lk) < opts.kappa) ++lk;
  std::vector<double> required = field.metadata.required_points;
  required.push_back(window.tau0);
  required.push_back(window.tau);
  const TimeGrid base = build_grid(measure, opts.base_steps, required);

  const auto per_seed = parallel_map<std::vector<double>>(
      opts.seeds.size(), resolve_workers(opts.workers), [&](std::size_t i) {
        BrownianTree tree(base, field.d, opts.seeds[i], 0);
        std::vector<double> out;
        for (unsigned l = 0; l < opts.levels; ++l) {
          const RoughPath ito = lift(tree.grid(l + lk), tree.values(l + lk), opts.kappa);
          const RoughPath rp = strat_from_ito(ito);
          const SolutionBundle b = solve_sde(field, x0, rp.increments(), rp.grid());
          if (check == MasterCheck::RoughIto) {
            out.push_back(rough_ito_check(field, v, b, rp, window, opts.check).residual_sup);
          } else {
            const FlowOperators ops(field, b, opts.flow);
            out.push_back(master_equation_residual(field, v, b, ops, rp, window, opts.check).residual_sup);
          }
        }
        return out;
      });

  RefinementStudy st;
  std::vector<double> x, y;
  for (unsigned l = 0; l < opts.levels; ++l) {
    double acc = 0.0;
    for (const auto& r : per_seed) acc += r[l];
    const double mean = acc / static_cast<double>(per_seed.size());
    st.steps.push_back(opts.base_steps << l);
    st.mean_residual.push_back(mean);
    x.push_back(static_cast<double>(l));
    y.push_back(std::log2(std::max(mean, std::numeric_limits<double>::min())));
  }
  const double k = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  st.rate = -(k * sxy - sx * sy) / (k * sxx - sx * sx);
  return st;
}

namespace {

double sup_norm_cols(const Eigen::MatrixXd& m, std::size_t ia, std::size_t ib) {
  double out = 0.0;
  for (std::size_t j = ia; j <= ib; ++j) out = std::max(out, m.col(static_cast<Eigen::Index>(j)).norm());
  return out;
}

}  // namespace

NorrisQuantities norris_quantities(const NorrisDecomposition& dec, const RoughPath& rp, double theta, double alpha) {
  const TimeGrid& g = dec.grid;
  const std::size_t ia = dec.ia, ib = dec.ib;
  if (rp.grid().size() != g.size()) throw DomainError("rough path and decomposition grids differ");
  NorrisQuantities q;
  q.norm_I_sup = sup_norm_cols(dec.I, ia, ib);
  q.norm_A_sup = sup_norm_cols(dec.A, ia, ib);

  // A' flattened per grid point for its Hölder seminorm; R^A over all window pairs.
  const Eigen::Index md = dec.A.rows();
  Eigen::MatrixXd ap(md * dec.d, static_cast<Eigen::Index>(g.size()));
  ap.setZero();
  for (std::size_t j = ia; j <= ib; ++j)
    ap.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(dec.A_prime[j].data(), md * dec.d);
  const Eigen::MatrixXd B = rp.values();
  double ra = 0.0;
  for (std::size_t s = ia; s <= ib; ++s) {
    for (std::size_t t = s + 1; t <= ib; ++t) {
      const Eigen::VectorXd r = dec.A.col(static_cast<Eigen::Index>(t)) - dec.A.col(static_cast<Eigen::Index>(s)) -
                                dec.A_prime[s] * (B.col(static_cast<Eigen::Index>(t)) - B.col(static_cast<Eigen::Index>(s)));
      ra = std::max(ra, r.norm() / std::pow(g.time(t) - g.time(s), 2.0 * alpha));
    }
  }
  q.controlled_norm_A = dec.A.col(static_cast<Eigen::Index>(ia)).norm() + dec.A_prime[ia].norm() +
                        holder_seminorm_indices(ap, g, alpha, ia, ib) + ra;
  q.norm_C = sup_norm_cols(dec.C, ia, ib) + holder_seminorm_indices(dec.C, g, alpha, ia, ib);
  q.norm_D = sup_norm_cols(dec.D, ia, ib) + holder_seminorm_indices(dec.D, g, alpha, ia, ib);
  q.norm_phi_2alpha = holder_seminorm_indices(dec.phi, g, 2.0 * alpha, ia, ib);
  q.L_theta = holder_roughness(rp.grid(), B, theta).L_theta;
  const double inv = q.L_theta > 0.0 ? 1.0 / q.L_theta : std::numeric_limits<double>::infinity();
  q.script_R = dec.I.col(static_cast<Eigen::Index>(ia)).norm() + inv + rough_path_norm(rp, alpha, ia, ib) +
               q.controlled_norm_A + q.norm_C + q.norm_D + q.norm_phi_2alpha;
  return q;
}

namespace {

std::vector<std::size_t> anchor_indices(std::size_t ia, std::size_t ib, std::size_t count) {
  std::vector<std::size_t> out;
  const std::size_t span = ib - ia;
  const std::size_t c = std::max<std::size_t>(1, std::min(count, span));
  for (std::size_t a = 0; a <= c; ++a) out.push_back(ia + a * span / c);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// |X^t - X^s|_{E_p} for the stopped paths, lifted.
double lifted_increment(const SolutionBundle& b, std::size_t s, std::size_t t, double p) {
  const TimeGrid& g = b.grid;
  const Eigen::VectorXd xs = b.X.col(static_cast<Eigen::Index>(s));
  double acc = 0.0;
  for (std::size_t r = s + 1; r <= t; ++r)
    acc += g.weight(r) * std::pow((b.X.col(static_cast<Eigen::Index>(r)) - xs).norm(), p);
  const Eigen::VectorXd dx = b.X.col(static_cast<Eigen::Index>(t)) - xs;
  if (t + 1 < g.size()) acc += g.mass_from(t + 1) * std::pow(dx.norm(), p);
  const double lp = std::pow(acc, 1.0 / p);
  return std::sqrt(lp * lp + dx.squaredNorm());
}

}  // namespace

ScriptRTerms script_R_terms(const CoefficientField& field, const SolutionBundle& bundle, const FlowOperators& ops,
                            const RoughPath& rp, double theta, const ScriptROptions& opts) {
  check_rough_path(bundle, rp);
  const TimeGrid& g = bundle.grid;
  const LiftLayout layout = ops.layout();
  const int n = bundle.n();
  const double p = opts.p;
  const double alpha = 1.0 / (2.0 * p);
  const std::size_t N = g.steps();
  const std::size_t ib = g.index_of(opts.tau < 0.0 ? g.horizon() : opts.tau);
  const std::size_t ia = g.index_of(opts.tau0);
  if (ib < ia) throw DomainError("window start after its end");

  ScriptRTerms t;
  t.x0 = bundle.x0.norm();
  if (opts.include_L_theta) {
    const double L = holder_roughness(rp.grid(), rp.values(), theta).L_theta;
    t.inv_L_theta = L > 0.0 ? 1.0 / L : std::numeric_limits<double>::infinity();
  }
  t.rough_path = rough_path_norm(rp, alpha, 0, N);

  const auto all = anchor_indices(0, N, opts.anchors);
  const auto win = anchor_indices(ia, ib, opts.anchors);
  std::vector<Eigen::VectorXd> probes;
  for (std::size_t r : anchor_indices(0, N, 8))
    for (int i = 0; i < n; ++i) probes.push_back(lift_flat(Eigen::VectorXd::Unit(n, i), g.time(r), g));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.dim()));
    v(static_cast<Eigen::Index>(layout.point()) + i) = 1.0;
    probes.push_back(v);
  }
  auto norm = [&](const Eigen::VectorXd& v) { return lift_space_norm(v, layout, g, p); };

  for (const auto& v : probes) t.Y_tau = std::max(t.Y_tau, norm(ops.apply_Y(ib, v)) / norm(v));

  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t c = a + 1; c < all.size(); ++c)
      t.X_alpha = std::max(t.X_alpha, lifted_increment(bundle, all[a], all[c], p) /
                                          std::pow(g.time(all[c]) - g.time(all[a]), alpha));

  for (const auto& v : probes) {
    const double nv = norm(v);
    std::vector<Eigen::VectorXd> zv;
    for (std::size_t a : all) zv.push_back(ops.apply_Z(a, v));
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t c = a + 1; c < all.size(); ++c)
        t.Z_alpha = std::max(t.Z_alpha, norm(zv[c] - zv[a]) / nv / std::pow(g.time(all[c]) - g.time(all[a]), alpha));
  }

  const Eigen::MatrixXd B = rp.values();
  for (std::size_t a = 0; a < win.size(); ++a) {
    const std::size_t s = win[a];
    const Eigen::VectorXd xs = bundle.X.col(static_cast<Eigen::Index>(s));
    const Eigen::MatrixXd sg = eval_sigma(field, State{g, g.time(s), bundle.X, xs});
    for (std::size_t c = a + 1; c < win.size(); ++c) {
      const std::size_t u = win[c];
      const Eigen::VectorXd dB = B.col(static_cast<Eigen::Index>(u)) - B.col(static_cast<Eigen::Index>(s));
      const Eigen::VectorXd r = bundle.X.col(static_cast<Eigen::Index>(u)) - xs - sg * dB;
      t.RX = std::max(t.RX, r.norm() / std::pow(g.time(u) - g.time(s), 2.0 * alpha));
    }
  }

  // R^Z_{s,t} v = Z_t v - Z_s v + sum_k Z_s U_s (d sigma_k(s) v) dB^k.
  for (const auto& v : probes) {
    const double nv = norm(v);
    std::vector<Eigen::VectorXd> zv;
    for (std::size_t s : win) zv.push_back(ops.apply_Z(s, v));
    for (std::size_t a = 0; a + 1 < win.size(); ++a) {
      const std::size_t s = win[a];
      const Eigen::VectorXd xs = bundle.X.col(static_cast<Eigen::Index>(s));
      const State st{g, g.time(s), bundle.X, xs};
      std::vector<Eigen::VectorXd> zprime;
      for (int k = 0; k < field.d; ++k) {
        const Eigen::VectorXd w = gradient(field, Which::sigma(k), st) * v;
        zprime.push_back(ops.apply_Z(s, lift_flat(w, g.time(s + 1), g)));
      }
      for (std::size_t c = a + 1; c < win.size(); ++c) {
        const std::size_t u = win[c];
        const Eigen::VectorXd dB = B.col(static_cast<Eigen::Index>(u)) - B.col(static_cast<Eigen::Index>(s));
        Eigen::VectorXd r = zv[c] - zv[a];
        for (int k = 0; k < field.d; ++k) r += dB(k) * zprime[static_cast<std::size_t>(k)];
        t.RZ = std::max(t.RZ, norm(r) / nv / std::pow(g.time(u) - g.time(s), 2.0 * alpha));
      }
    }
  }
  return t;
}

double script_R(const CoefficientField& field, const SolutionBundle& bundle, const FlowOperators& ops,
                const RoughPath& rp, double theta, const ScriptROptions& opts) {
  return script_R_terms(field, bundle, ops, rp, theta, opts).total();
}

}  // namespace pathdens
