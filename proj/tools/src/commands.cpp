#include "commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "output.hpp"
#include "pathdens/delay_lift.hpp"
#include "pathdens/density.hpp"
#include "pathdens/errors.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/hormander.hpp"
#include "pathdens/malliavin.hpp"
#include "pathdens/mastereq.hpp"
#include "pathdens/roughpath.hpp"

namespace pathdens::cli {

namespace {

using json = nlohmann::json;

const CoefficientField& field_of(const Scenario& s) {
  if (!s.field) throw ScenarioError("family", "missing");
  return *s.field;
}

Config scaled_config(const RunContext& ctx) {
  Config c = ctx.scenario.config;
  c.steps <<= ctx.mesh_doubling;
  return c;
}

TimeGrid scenario_grid(const Scenario& s, const Config& c, std::vector<double> extra = {}) {
  std::vector<double> req = field_of(s).metadata.required_points;
  req.insert(req.end(), extra.begin(), extra.end());
  req.push_back(c.tau);
  req.push_back(c.tau0);
  return build_grid(s.measure, c, req);
}

std::filesystem::path csv_path(const RunContext& ctx, const std::string& cmd) { return ctx.out / (cmd + ".csv"); }
std::filesystem::path summary_path(const RunContext& ctx, const std::string& cmd) {
  return ctx.out / (cmd + "_summary.json");
}

std::string simulate(const RunContext& ctx) {
  const Scenario& s = ctx.scenario;
  const CoefficientField& f = field_of(s);
  const Config c = scaled_config(ctx);
  const TimeGrid grid = scenario_grid(s, c);
  const SolutionBundle b = solve_sde(f, s.x0, sample_increments(grid, f.d, c.seed, 0), grid);
  const FlowOperators ops(f, b);
  std::vector<Eigen::MatrixXd> jac;
  for (int k = 0; k < f.n; ++k)
    jac.push_back(ops.projected_path(lift_flat(Eigen::VectorXd::Unit(f.n, k), 0.0, grid)));

  std::vector<std::string> cols{"t"};
  for (int i = 0; i < f.n; ++i) cols.push_back(fmt::format("x_{}", i + 1));
  for (int i = 0; i < f.n; ++i)
    for (int k = 0; k < f.n; ++k) cols.push_back(fmt::format("jacobian_{}_{}", i + 1, k + 1));
  CsvTable table(cols);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    std::vector<double> row{grid.time(j)};
    for (int i = 0; i < f.n; ++i) row.push_back(b.X(i, jj));
    for (int i = 0; i < f.n; ++i)
      for (int k = 0; k < f.n; ++k) row.push_back(jac[static_cast<std::size_t>(k)](i, jj));
    table.add(row);
  }
  table.write(csv_path(ctx, "simulate"), "simulate", s);

  const Eigen::Index last = static_cast<Eigen::Index>(grid.steps());
  Eigen::MatrixXd jt(f.n, f.n);
  for (int k = 0; k < f.n; ++k) jt.col(k) = jac[static_cast<std::size_t>(k)].col(last);
  json r;
  r["family"] = s.family;
  r["steps"] = grid.steps();
  r["terminal_state"] = to_json(Eigen::VectorXd(b.X.col(last)));
  r["terminal_jacobian"] = to_json(jt);
  write_summary(summary_path(ctx, "simulate"), "simulate", s, r);
  return fmt::format("simulate: {} steps, |X(T)| = {}, |J(T)| = {}", grid.steps(), num(b.X.col(last).norm()),
                     num(jt.norm()));
}

std::string malliavin(const RunContext& ctx) {
  const Scenario& s = ctx.scenario;
  const CoefficientField& f = field_of(s);
  const Config c = scaled_config(ctx);
  const TimeGrid grid = scenario_grid(s, c);
  MalliavinOptions mo;
  mo.subgrid = option_size(s, "subgrid", mo.subgrid);
  const SolutionBundle b = solve_sde(f, s.x0, sample_increments(grid, f.d, c.seed, 0), grid);
  const MalliavinReport rep = covariance(f, b, c.tau, c.tau0, mo);

  std::vector<std::string> cols{"r", "weight"};
  for (int i = 0; i < f.n; ++i)
    for (int k = 0; k < f.d; ++k) cols.push_back(fmt::format("d_{}_{}", i + 1, k + 1));
  CsvTable table(cols);
  for (std::size_t m = 0; m < rep.times.index.size(); ++m) {
    std::vector<double> row{grid.time(rep.times.index[m]), rep.times.weight[m]};
    for (int i = 0; i < f.n; ++i)
      for (int k = 0; k < f.d; ++k) row.push_back(rep.derivative[m](i, k));
    table.add(row);
  }
  table.write(csv_path(ctx, "malliavin"), "malliavin", s);

  json r;
  r["gamma"] = to_json(rep.gamma);
  r["gamma0"] = to_json(rep.gamma0);
  r["lambda_min"] = rep.lambda_min;
  r["lambda_min0"] = rep.lambda_min0;
  std::string line = fmt::format("malliavin: lambda_min = {}, lambda_min0 = {}", num(rep.lambda_min),
                                 num(rep.lambda_min0));
  const std::size_t samples = option_size(s, "samples", 0);
  if (samples > 0) {
    TailOptions to;
    to.samples = samples;
    to.epsilons = option_doubles(s, "epsilons", {});
    to.bootstrap = option_size(s, "bootstrap", to.bootstrap);
    to.workers = ctx.workers;
    to.malliavin = mo;
    const TailReport tr = tail_estimate(f, s.x0, s.measure, c, to);
    json t;
    t["epsilons"] = tr.epsilons;
    t["counts"] = tr.counts;
    t["probability"] = tr.probability;
    t["slope"] = tr.slope;
    t["slope_lower"] = tr.slope_lower;
    t["slope_upper"] = tr.slope_upper;
    t["fitted_points"] = tr.fitted_points;
    r["tail"] = t;
    line += fmt::format(", tail slope = {} [{}, {}]", num(tr.slope), num(tr.slope_lower), num(tr.slope_upper));
  }
  write_summary(summary_path(ctx, "malliavin"), "malliavin", s, r);
  return line;
}

Hormander3DParams hormander_params(const Scenario& s) {
  Hormander3DParams p;
  const json& fam = s.raw.at("family");
  p.a_min = fam.value("a_min", p.a_min);
  p.a_max = fam.value("a_max", p.a_max);
  p.switch_time = fam.value("switch_time", p.switch_time);
  if (fam.contains("frozen_a")) p.frozen_a = fam.at("frozen_a").get<double>();
  return p;
}

std::string hormander(const RunContext& ctx) {
  const Scenario& s = ctx.scenario;
  const CoefficientField& f = field_of(s);
  const Config c = scaled_config(ctx);
  const TimeGrid grid = scenario_grid(s, c);
  const int depth = static_cast<int>(option_size(s, "max_depth", 3));
  const double tol = option_double(s, "tol", 0.0);
  const Eigen::MatrixXd path = s.x0.replicate(1, static_cast<Eigen::Index>(grid.size()));
  const State st{grid, c.tau, path, s.x0};
  const HormanderReport rep = span_check(f, st, depth, tol);

  CsvTable table({"depth", "lambda_min"});
  for (std::size_t j = 0; j < rep.lambda_by_depth.size(); ++j)
    table.add({static_cast<double>(j), rep.lambda_by_depth[j]});
  table.write(csv_path(ctx, "hormander"), "hormander", s);

  json r;
  r["lambda_min"] = rep.lambda_min;
  r["lambda_by_depth"] = rep.lambda_by_depth;
  r["spanning_depth"] = rep.spanning_depth ? json(*rep.spanning_depth) : json(nullptr);
  std::string line = fmt::format("hormander: lambda_min = {}, spanning depth = {}", num(rep.lambda_min),
                                 rep.spanning_depth ? std::to_string(*rep.spanning_depth) : "none");
  if (s.family == "hormander_3d") {
    const double a = hormander_parameter(hormander_params(s), st);
    const Example3D ex = example_3d_closed_form(a, s.x0.head<3>());
    const std::vector<BracketPtr> basis{leaf_node(0), leaf_node(1), bracket_node(leaf_node(0), leaf_node(1))};
    const double numeric = smallest_eigenvalue(bracket_gram(basis, f, st));
    json e;
    e["a"] = a;
    e["bracket"] = to_json(Eigen::VectorXd(ex.bracket));
    e["det"] = ex.det;
    e["lambda_min_closed_form"] = ex.lambda_min;
    e["lambda_min_numeric"] = numeric;
    r["example_3d"] = e;
    line += fmt::format(", basis lambda_min = {} (closed form {})", num(numeric), num(ex.lambda_min));
  }
  const std::size_t samples = option_size(s, "samples", 0);
  if (samples > 0) {
    const A5Certificate cert = a5_certificate(f, s.x0, s.measure, c, samples, depth, ctx.workers);
    json a;
    a["lambda_min"] = cert.lambda_min;
    a["lambda_median"] = cert.lambda_median;
    a["inverse_moments"] = cert.inverse_moments;
    a["passed"] = cert.passed;
    r["certificate"] = a;
    line += fmt::format(", certificate {}", cert.passed ? "passed" : "failed");
  }
  write_summary(summary_path(ctx, "hormander"), "hormander", s, r);
  return line;
}

VectorFieldEval check_field(const Scenario& s) {
  const CoefficientField& f = field_of(s);
  const std::string v = option_string(s, "v", "sigma1");
  if (v == "point") return point_value_field(f.n);
  if (v == "constant") {
    const auto c = option_doubles(s, "v_constant", {});
    if (static_cast<int>(c.size()) != f.n) throw ScenarioError("options.v_constant", fmt::format("expected {} entries", f.n));
    return constant_vector_field(Eigen::Map<const Eigen::VectorXd>(c.data(), f.n));
  }
  if (v.rfind("sigma", 0) == 0) {
    int k = 0;
    try {
      k = std::stoi(v.substr(5));
    } catch (const std::exception&) {
      k = 0;
    }
    if (k < 1 || k > f.d) throw ScenarioError("options.v", "expected sigma1..sigma" + std::to_string(f.d));
    return diffusion_column(f, k - 1);
  }
  throw ScenarioError("options.v", "unknown vector field '" + v + "'");
}

std::string master_like(const RunContext& ctx, const std::string& cmd, MasterCheck which) {
  const Scenario& s = ctx.scenario;
  const CoefficientField& f = field_of(s);
  const VectorFieldEval v = check_field(s);
  const CheckWindow window{s.config.tau0, s.config.tau};
  const std::size_t kappa = option_size(s, "kappa", 8);
  MasterEqOptions mo;
  mo.p = s.config.p;

  json r;
  std::string line;
  if (ctx.mesh_doubling > 0) {
    RefinementOptions ro;
    ro.base_steps = s.config.steps;
    ro.levels = ctx.mesh_doubling + 1;
    ro.kappa = kappa;
    ro.check = mo;
    ro.workers = ctx.workers;
    if (s.options.contains("seeds")) {
      ro.seeds.clear();
      for (double x : option_doubles(s, "seeds", {})) ro.seeds.push_back(static_cast<std::uint64_t>(x));
    }
    const RefinementStudy st = refinement_study(f, v, s.x0, s.measure, window, which, ro);
    CsvTable table({"steps", "mean_residual"});
    for (std::size_t l = 0; l < st.steps.size(); ++l) table.add({static_cast<double>(st.steps[l]), st.mean_residual[l]});
    table.write(csv_path(ctx, cmd), cmd, s);
    r["steps"] = st.steps;
    r["mean_residual"] = st.mean_residual;
    r["rate"] = st.rate;
    r["seeds"] = ro.seeds;
    line = fmt::format("{}: refinement rate = {} over {} meshes", cmd, num(st.rate), st.steps.size());
  } else {
    std::vector<double> req = f.metadata.required_points;
    req.push_back(window.tau0);
    req.push_back(window.tau);
    const TimeGrid fine = build_grid(s.measure, s.config.steps * kappa, req);
    const RoughPath rp = strat_from_ito(lift(fine, sample_brownian(fine, f.d, s.config.seed, 0), kappa));
    const SolutionBundle b = solve_sde(f, s.x0, rp.increments(), rp.grid());
    MasterEqReport rep;
    if (which == MasterCheck::MasterEquation) {
      const FlowOperators ops(f, b);
      NorrisDecomposition dec;
      rep = master_equation_residual(f, v, b, ops, rp, window, mo, &dec);
      const NorrisQuantities q = norris_quantities(dec, rp, option_double(s, "theta", 0.6), s.config.alpha());
      json n;
      n["norm_I_sup"] = q.norm_I_sup;
      n["norm_A_sup"] = q.norm_A_sup;
      n["controlled_norm_A"] = q.controlled_norm_A;
      n["norm_C"] = q.norm_C;
      n["norm_D"] = q.norm_D;
      n["norm_phi_2alpha"] = q.norm_phi_2alpha;
      n["L_theta"] = q.L_theta;
      n["R_bar"] = q.script_R;
      r["norris"] = n;
    } else {
      rep = rough_ito_check(f, v, b, rp, window, mo);
      r["geometric_defect_rms"] = geometric_defect_rms(rp);
    }
    CsvTable table({"t", "residual"});
    for (std::size_t m = 0; m < rep.residual.size(); ++m) table.add({b.grid.time(rep.ia + m), rep.residual[m]});
    table.write(csv_path(ctx, cmd), cmd, s);
    r["residual_sup"] = rep.residual_sup;
    r["initial"] = rep.initial;
    r["young"] = rep.young;
    r["drift_bracket"] = rep.drift_bracket;
    r["rough_bracket"] = rep.rough_bracket;
    r["mesh"] = rep.mesh;
    line = fmt::format("{}: residual sup = {} on [{}, {}]", cmd, num(rep.residual_sup), num(window.tau0),
                       num(window.tau));
  }
  write_summary(summary_path(ctx, cmd), cmd, s, r);
  return line;
}

// Chen defect on triples of an index lattice with at most `points` nodes.
double sampled_chen_defect(const RoughPath& rp, std::size_t points) {
  const std::size_t N = rp.grid().steps();
  const std::size_t stride = std::max<std::size_t>(1, N / (points - 1));
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < N; j += stride) idx.push_back(j);
  idx.push_back(N);
  double worst = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      for (std::size_t e = b + 1; e < idx.size(); ++e)
        worst = std::max(worst, chen_defect_indices(rp, idx[a], idx[b], idx[e]).norm());
  return worst;
}

std::string delay_lift_cmd(const RunContext& ctx) {
  const Scenario& s = ctx.scenario;
  if (!s.delay) throw ScenarioError("delay", "missing (required by delay-lift)");
  const DelayDynamics& dyn = *s.delay;
  const Config c = scaled_config(ctx);
  const DelaySystem sys = build_lift(dyn.delays, s.measure.horizon, dyn.n);
  const TimeGrid grid = build_grid(s.measure, c, lift_required_points(sys));
  const Eigen::MatrixXd values = sample_brownian(grid, dyn.d, c.seed, 0);
  const Eigen::MatrixXd noise = increments_of(values);
  const Eigen::MatrixXd L = solve_lifted(sys, dyn, s.x0, noise, grid);
  const SolutionBundle direct = solve_sde(discrete_delay(dyn), s.x0, noise, grid);
  const double block0 = (L.topRows(dyn.n) - direct.X).lpNorm<Eigen::Infinity>();
  const Eigen::MatrixXd quiet = solve_lifted(sys, dyn, s.x0, Eigen::MatrixXd::Zero(dyn.d, noise.cols()), grid);
  double steps_gap = std::numeric_limits<double>::quiet_NaN();
  if (grid.uniform()) steps_gap = (quiet.topRows(dyn.n) - method_of_steps(dyn, s.x0, grid)).lpNorm<Eigen::Infinity>();
  const RoughPath ext = extended_lift(sys, grid, values, 1);
  const double chen = sampled_chen_defect(ext, 33);

  std::vector<std::string> cols{"t"};
  for (std::size_t l = 0; l < sys.blocks(); ++l)
    for (int i = 0; i < dyn.n; ++i) cols.push_back(fmt::format("block{}_{}", l, i + 1));
  for (int i = 0; i < dyn.n; ++i) cols.push_back(fmt::format("direct_{}", i + 1));
  CsvTable table(cols);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    std::vector<double> row{grid.time(j)};
    for (Eigen::Index i = 0; i < L.rows(); ++i) row.push_back(L(i, jj));
    for (int i = 0; i < dyn.n; ++i) row.push_back(direct.X(i, jj));
    table.add(row);
  }
  table.write(csv_path(ctx, "delay-lift"), "delay-lift", s);

  json r;
  r["blocks"] = sys.blocks();
  r["shifts"] = sys.shifts;
  r["composite_delays"] = sys.composite_delays;
  r["wiring"] = sys.wiring;
  r["block0_max_gap"] = block0;
  r["method_of_steps_gap"] = steps_gap;
  r["extended_chen_defect"] = chen;
  write_summary(summary_path(ctx, "delay-lift"), "delay-lift", s, r);
  return fmt::format("delay-lift: {} blocks, block-0 gap = {}, method-of-steps gap = {}, Chen defect = {}",
                     sys.blocks(), num(block0), num(steps_gap), num(chen));
}

std::string density(const RunContext& ctx) {
  const Scenario& s = ctx.scenario;
  const CoefficientField& f = field_of(s);
  const Config c = scaled_config(ctx);
  const std::size_t samples = option_size(s, "samples", 10000);
  const std::size_t points = option_size(s, "lattice_points", f.n <= 2 ? 64 : 24);
  const Eigen::MatrixXd X = sample_terminal(f, s.x0, s.measure, c, samples, ctx.workers);
  const DensityReport rep = density_report(X, points);

  std::vector<std::string> cols;
  for (int i = 0; i < f.n; ++i) cols.push_back(fmt::format("x_{}", i + 1));
  cols.push_back("kde");
  CsvTable table(cols);
  for (std::size_t k = 0; k < static_cast<std::size_t>(rep.kde.size()); ++k) {
    const Eigen::VectorXd p = rep.lattice.point(k);
    std::vector<double> row(p.data(), p.data() + p.size());
    row.push_back(rep.kde(static_cast<Eigen::Index>(k)));
    table.add(row);
  }
  table.write(csv_path(ctx, "density"), "density", s);

  json r;
  r["samples"] = rep.samples;
  r["mean"] = to_json(Eigen::VectorXd(X.rowwise().mean()));
  r["bandwidth"] = to_json(rep.bandwidth);
  r["kde_mass"] = rep.mass;
  r["noise_floor"] = rep.charfn.noise_floor;
  r["frequencies"] = rep.charfn.frequencies;
  json rays = json::array();
  for (const auto& ray : rep.charfn.rays) {
    json j;
    j["direction"] = to_json(ray.direction);
    j["slope"] = ray.slope;
    j["fitted_points"] = ray.fitted_points;
    j["decays"] = ray.decays;
    j["modulus"] = ray.modulus;
    rays.push_back(j);
  }
  r["rays"] = rays;
  r["non_decaying"] = rep.charfn.non_decaying;
  write_summary(summary_path(ctx, "density"), "density", s, r);
  return fmt::format("density: {} samples, kde mass = {}, non-decaying directions = {}", rep.samples, num(rep.mass),
                     rep.charfn.non_decaying.size());
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate",    "malliavin",  "hormander", "master-check",
                                              "rough-check", "delay-lift", "density"};
  return names;
}

std::string run_command(const std::string& command, const RunContext& ctx) {
  std::filesystem::create_directories(ctx.out);
  if (command == "simulate") return simulate(ctx);
  if (command == "malliavin") return malliavin(ctx);
  if (command == "hormander") return hormander(ctx);
  if (command == "master-check") return master_like(ctx, command, MasterCheck::MasterEquation);
  if (command == "rough-check") return master_like(ctx, command, MasterCheck::RoughIto);
  if (command == "delay-lift") return delay_lift_cmd(ctx);
  if (command == "density") return density(ctx);
  throw ScenarioError("command", "unknown command '" + command + "'");
}

std::string command_help() {
  return R"(Outputs (<dir>/<command>.csv and <dir>/<command>_summary.json; the CSV starts with a
"# pathdens <command> scenario_hash=<hex> seed=<n>" comment line):
  simulate      t, x_i, jacobian_i_k (projected Jacobian of X(t) w.r.t. x0, e_k lifted at 0)
  malliavin     r, weight, d_i_k (D_r X(tau) on the Malliavin sub-grid)
                options: subgrid, samples (>0 adds the small-eigenvalue tail), epsilons, bootstrap
  hormander     depth, lambda_min (cumulative bracket Gram at (tau, x0))
                options: max_depth, tol, samples (>0 adds the sampled certificate)
  master-check  t, residual; with --mesh-doubling R: steps, mean_residual over R+1 meshes
  rough-check   same layout as master-check
                options: v (sigma<k> | point | constant), v_constant, kappa, theta, seeds
  delay-lift    t, block<l>_i, direct_i
  density       x_i, kde on the covering lattice
                options: samples, lattice_points
--mesh-doubling R multiplies config.steps by 2^R, except for master-check and
rough-check where it sets the number of refinement levels.)";
}

}  // namespace pathdens::cli
