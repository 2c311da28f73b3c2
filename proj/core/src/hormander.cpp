#include "pathdens/hormander.hpp"

#include <algorithm>
#include <cmath>

#include "pathdens/errors.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/malliavin.hpp"
#include "pathdens/parallel.hpp"
#include "pathdens/roughpath.hpp"

namespace pathdens {

VectorFieldEval diffusion_column(const CoefficientField& field, int k) {
  if (k < 0 || k >= field.d) throw DomainError("diffusion column index out of range");
  auto f = std::make_shared<const CoefficientField>(field);
  VectorFieldEval v;
  v.value = [f, k](const State& s) { return eval(*f, Which::sigma(k), s); };
  if (field.has_gradient())
    v.vertical = [f, k](const State& s) { return vertical_derivative(*f, Which::sigma(k), s); };
  return v;
}

Eigen::VectorXd vertical_apply(const VectorFieldEval& v, const State& s, const Eigen::VectorXd& w, double rel_step) {
  if (v.vertical) return v.vertical(s) * w;
  const double wn = w.lpNorm<Eigen::Infinity>();
  if (wn == 0.0) return Eigen::VectorXd::Zero(w.size());
  const double h = rel_step * std::ldexp(1.0, -v.nesting) * std::max(1.0, s.value.lpNorm<Eigen::Infinity>()) / wn;
  const std::size_t from = first_index_from(s.grid, s.t);
  Eigen::MatrixXd path = s.path;
  Eigen::VectorXd value = s.value;
  auto bumped = [&](double sign) {
    for (std::size_t r = from; r < s.grid.size(); ++r)
      path.col(static_cast<Eigen::Index>(r)) = s.path.col(static_cast<Eigen::Index>(r)) + sign * h * w;
    value = s.value + sign * h * w;
    return v.value(State{s.grid, s.t, path, value});
  };
  const Eigen::VectorXd fp = bumped(1.0);
  const Eigen::VectorXd fm = bumped(-1.0);
  Eigen::VectorXd out = (fp - fm) / (2 * h);
  if (!out.allFinite()) throw NumericalError("non-finite bracket derivative");
  return out;
}

Eigen::VectorXd lie_bracket(const VectorFieldEval& v1, const VectorFieldEval& v2, const State& s, double rel_step) {
  const Eigen::VectorXd a = v1.value(s);
  const Eigen::VectorXd b = v2.value(s);
  return vertical_apply(v1, s, b, rel_step) - vertical_apply(v2, s, a, rel_step);
}

std::string BracketNode::label() const {
  if (is_leaf()) return "s" + std::to_string(leaf + 1);
  return "[" + left->label() + "," + right->label() + "]";
}

BracketPtr leaf_node(int k) {
  auto n = std::make_shared<BracketNode>();
  n->leaf = k;
  return n;
}

BracketPtr bracket_node(BracketPtr left, BracketPtr right) {
  auto n = std::make_shared<BracketNode>();
  n->depth = std::max(left->depth, right->depth) + 1;
  n->left = std::move(left);
  n->right = std::move(right);
  return n;
}

VectorFieldEval evaluator(const BracketPtr& node, const CoefficientField& field, double rel_step) {
  if (node->is_leaf()) return diffusion_column(field, node->leaf);
  const VectorFieldEval l = evaluator(node->left, field, rel_step);
  const VectorFieldEval r = evaluator(node->right, field, rel_step);
  VectorFieldEval out;
  out.nesting = node->depth;
  const double h = rel_step * std::ldexp(1.0, -(node->depth - 1));
  out.value = [l, r, h](const State& s) { return lie_bracket(l, r, s, h); };
  return out;
}

std::vector<std::vector<BracketPtr>> generate_sigma_sets(const CoefficientField& field, int max_depth,
                                                         std::size_t cap) {
  if (max_depth < 0) throw DomainError("bracket depth must be nonnegative");
  const std::size_t d = static_cast<std::size_t>(field.d);
  std::size_t total = 0, layer = 1;
  for (int j = 0; j <= max_depth; ++j) {
    layer *= d;
    total += layer;
    if (total > cap) throw ResourceError("bracket sets exceed the node cap");
  }
  std::vector<std::vector<BracketPtr>> sets(1);
  for (int k = 0; k < field.d; ++k) sets[0].push_back(leaf_node(k));
  for (int j = 1; j <= max_depth; ++j) {
    std::vector<BracketPtr> next;
    for (int k = 0; k < field.d; ++k)
      for (const auto& v : sets.back()) next.push_back(bracket_node(sets[0][static_cast<std::size_t>(k)], v));
    sets.push_back(std::move(next));
  }
  return sets;
}

Eigen::MatrixXd bracket_gram(const std::vector<BracketPtr>& nodes, const CoefficientField& field, const State& s,
                             double rel_step) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(field.n, field.n);
  for (const auto& node : nodes) {
    const Eigen::VectorXd v = evaluator(node, field, rel_step).value(s);
    g.noalias() += v * v.transpose();
  }
  return g;
}

HormanderReport span_check(const CoefficientField& field, const State& s, int max_depth, double tol,
                           double rel_step) {
  const auto sets = generate_sigma_sets(field, max_depth);
  HormanderReport rep;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(field.n, field.n);
  for (int j = 0; j <= max_depth; ++j) {
    gram += bracket_gram(sets[static_cast<std::size_t>(j)], field, s, rel_step);
    const double lam = std::max(0.0, smallest_eigenvalue(gram));
    rep.lambda_by_depth.push_back(lam);
    const double thr = tol > 0.0 ? tol : 1e-8 * gram.trace();
    if (!rep.spanning_depth && lam > thr) rep.spanning_depth = j;
  }
  rep.lambda_min = rep.lambda_by_depth.back();
  return rep;
}

Example3D example_3d_closed_form(double a, const Eigen::Vector3d& y) {
  if (a < 2.0) throw DomainError("the parameter a must be at least 2");
  const double c = a + std::sin(y(1));
  const double s = c * c + y(0) * y(0) + 1.0;
  Example3D out;
  out.bracket = Eigen::Vector3d(0.0, 0.0, -1.0);
  out.det = -c;
  out.lambda_min = std::min(1.0, 2.0 * c * c / (s + std::sqrt(s * s - 4.0 * c * c)));
  return out;
}

double example_3d_lambda_numeric(double a, const Eigen::Vector3d& y) {
  Eigen::Matrix3d m;
  m.col(0) = Eigen::Vector3d(1, 0, 0);
  m.col(1) = Eigen::Vector3d(0, a + std::sin(y(1)), y(0));
  m.col(2) = Eigen::Vector3d(0, 0, -1);
  return smallest_eigenvalue(m.transpose() * m);
}

A5Certificate a5_certificate(const CoefficientField& field, const Eigen::VectorXd& x0, const MeasureSpec& measure,
                             const Config& config, std::size_t samples, int max_depth, std::size_t workers) {
  if (samples == 0) throw DomainError("at least one sample is needed");
  config.validate(measure);
  const TimeGrid grid = build_grid(measure, config, field.metadata.required_points);
  const std::size_t it = grid.index_of(config.tau);
  A5Certificate cert;
  cert.reports = parallel_map<HormanderReport>(samples, resolve_workers(workers), [&](std::size_t i) {
    const SolutionBundle b = solve_sde(field, x0, sample_increments(grid, field.d, config.seed, i), grid);
    const Eigen::VectorXd value = b.X.col(static_cast<Eigen::Index>(it));
    return span_check(field, State{grid, config.tau, b.X, value}, max_depth);
  });
  cert.passed = true;
  for (const auto& r : cert.reports) {
    cert.lambda.push_back(r.lambda_min);
    if (!r.spanning_depth) cert.passed = false;
  }
  std::vector<double> sorted = cert.lambda;
  std::sort(sorted.begin(), sorted.end());
  cert.lambda_min = sorted.front();
  cert.lambda_median = sorted[sorted.size() / 2];
  for (double q : {1.0, 2.0, 4.0}) {
    double acc = 0.0;
    for (double l : cert.lambda) acc += std::pow(l, -q);
    cert.inverse_moments.push_back(acc / static_cast<double>(samples));
  }
  return cert;
}

}  // namespace pathdens
