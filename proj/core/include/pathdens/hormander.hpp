#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pathdens/coeffs.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens {

// Non-anticipative vector field with an optional analytic vertical derivative.
struct VectorFieldEval {
  std::function<Eigen::VectorXd(const State&)> value;
  std::function<Eigen::MatrixXd(const State&)> vertical;  // n x n, may be empty
  int nesting = 0;                                       // bracket depth, scales the FD step
};

// sigma_k of a field; the oracle is used when the field has one.
VectorFieldEval diffusion_column(const CoefficientField& field, int k);

// d_v V . w: analytic when available, else a central difference along (1_{[t,T]} w, w).
Eigen::VectorXd vertical_apply(const VectorFieldEval& v, const State& s, const Eigen::VectorXd& w,
                               double rel_step = 1e-5);

// [V1, V2] = d_v V1 . V2 - d_v V2 . V1, so that [A1, A2] = -A2' A1 for a constant A1.
Eigen::VectorXd lie_bracket(const VectorFieldEval& v1, const VectorFieldEval& v2, const State& s,
                            double rel_step = 1e-5);

// Binary bracket tree over the diffusion columns.
struct BracketNode {
  int leaf = -1;  // column index for leaves
  std::shared_ptr<const BracketNode> left, right;
  int depth = 0;

  bool is_leaf() const { return leaf >= 0; }
  std::string label() const;
};
using BracketPtr = std::shared_ptr<const BracketNode>;

BracketPtr leaf_node(int k);
BracketPtr bracket_node(BracketPtr left, BracketPtr right);

// Nested FD steps shrink as rel_step * 2^-depth.
VectorFieldEval evaluator(const BracketPtr& node, const CoefficientField& field, double rel_step = 1e-5);

// Sigma_0 = {sigma_k}, Sigma_j = {[sigma_k, V] : V in Sigma_{j-1}}; |Sigma_j| = d^{j+1}.
// ResourceError when the total node count exceeds `cap`.
std::vector<std::vector<BracketPtr>> generate_sigma_sets(const CoefficientField& field, int max_depth,
                                                         std::size_t cap = 10000);

// Gram matrix sum V V^T over the given nodes at a state.
Eigen::MatrixXd bracket_gram(const std::vector<BracketPtr>& nodes, const CoefficientField& field, const State& s,
                             double rel_step = 1e-5);

struct HormanderReport {
  double lambda_min = 0.0;                // at max depth
  std::vector<double> lambda_by_depth;    // cumulative over Sigma_0..Sigma_j
  std::optional<int> spanning_depth;      // first depth with lambda_min > tol
  std::optional<double> theta_lower;      // closed-form bound when registered
};

// tol <= 0 means 1e-8 * trace(Gram) at each depth.
HormanderReport span_check(const CoefficientField& field, const State& s, int max_depth = 3, double tol = 0.0,
                           double rel_step = 1e-5);

struct Example3D {
  Eigen::Vector3d bracket;
  double det = 0.0;
  double lambda_min = 0.0;
};
// Closed forms for A1 = (1, 0, 0), A2 = (0, a + sin y2, y1).
Example3D example_3d_closed_form(double a, const Eigen::Vector3d& y);
// Smallest eigenvalue of M^T M for M = [A1, A2, [A1, A2]], by symmetric eigensolve.
double example_3d_lambda_numeric(double a, const Eigen::Vector3d& y);

struct A5Certificate {
  std::vector<HormanderReport> reports;
  std::vector<double> lambda;  // per sample
  double lambda_min = 0.0;
  double lambda_median = 0.0;
  // Empirical E[lambda^-q] for q = 1, 2, 4.
  std::vector<double> inverse_moments;
  bool passed = false;  // every sample spans
};

// Monte Carlo surrogate: span_check at (tau, X_tau) over sampled solution paths.
A5Certificate a5_certificate(const CoefficientField& field, const Eigen::VectorXd& x0, const MeasureSpec& measure,
                             const Config& config, std::size_t samples, int max_depth = 3, std::size_t workers = 0);

}  // namespace pathdens
