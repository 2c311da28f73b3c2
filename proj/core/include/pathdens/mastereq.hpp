#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pathdens/coeffs.hpp"
#include "pathdens/flow.hpp"
#include "pathdens/hormander.hpp"
#include "pathdens/roughpath.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens {

// b - 1/2 sum_k d_v sigma_k . sigma_k, the Stratonovich drift.
Eigen::VectorXd sigma0(const CoefficientField& field, const State& s, double rel_step = 1e-5);
LiftedVector sigma0_hat(const CoefficientField& field, const State& s, double rel_step = 1e-5);
VectorFieldEval sigma0_field(const CoefficientField& field, double rel_step = 1e-5);

// V(t, x) = x(t).
VectorFieldEval point_value_field(int n);
VectorFieldEval constant_vector_field(const Eigen::VectorXd& c);

// d_t V at fixed path and value: central difference at +-step/2, one-sided at 0 and T.
Eigen::VectorXd time_partial(const VectorFieldEval& v, const State& s, double step);

struct CheckWindow {
  double tau0 = 0.0;
  double tau = 1.0;
};

struct MasterEqOptions {
  double p = 1.4;
  double rel_step = 1e-4;
  // Young term as -J slot(s) V(s); otherwise J applied to the explicit indicator increment.
  bool young_closed_form = true;
  // Use the Ito area plus 1/2 sum_k Q'_kk dt instead of the Stratonovich area.
  bool ito_correction = false;
};

// Integrand pieces of the master equation on the window, for the Norris quantities.
// A is stored as vec(m x d) columns, A' as (m d) x d per grid point (column l is the
// derivative along noise direction l). phi is scalar; D dphi reproduces the Young term.
struct NorrisDecomposition {
  TimeGrid grid;
  std::size_t ia = 0, ib = 0;
  int d = 1;
  Eigen::MatrixXd I;
  Eigen::MatrixXd A;
  std::vector<Eigen::MatrixXd> A_prime;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;
  Eigen::MatrixXd phi;

  int m() const { return static_cast<int>(I.rows()); }
};

struct MasterEqReport {
  double residual_sup = 0.0;
  // Sup over the window of the accumulated terms.
  double initial = 0.0;
  double young = 0.0;
  double drift_bracket = 0.0;
  double rough_bracket = 0.0;
  double mesh = 0.0;
  double refinement_rate = 0.0;  // filled by refinement_study
  std::size_t ia = 0, ib = 0;
  std::vector<double> residual;  // per grid index ia..ib
};

// V^(t, X_t) minus the initial, Young, ds and rough terms of the lifted Ito formula,
// measured in the lift-space norm. The rough path must be on the bundle grid and
// carry the bundle noise.
MasterEqReport rough_ito_check(const CoefficientField& field, const VectorFieldEval& v, const SolutionBundle& bundle,
                               const RoughPath& rp, const CheckWindow& window, const MasterEqOptions& opts = {});

// J_{tau,t} V^(t, X_t) minus its four-term expansion (initial, Young, drift bracket,
// rough bracket), in R^n. Brackets follow [sigma_k, V] = d_v V . sigma_k - d_v sigma_k . V.
MasterEqReport master_equation_residual(const CoefficientField& field, const VectorFieldEval& v,
                                        const SolutionBundle& bundle, const FlowOperators& ops, const RoughPath& rp,
                                        const CheckWindow& window, const MasterEqOptions& opts = {},
                                        NorrisDecomposition* decomposition = nullptr);

enum class MasterCheck { RoughIto, MasterEquation };

struct RefinementOptions {
  std::size_t base_steps = 512;
  unsigned levels = 4;  // base_steps * 2^l for l < levels
  std::size_t kappa = 8;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  FlowOptions flow;
  MasterEqOptions check;
  std::size_t workers = 1;
};

struct RefinementStudy {
  std::vector<std::size_t> steps;
  std::vector<double> mean_residual;
  double rate = 0.0;  // minus the log2 slope of mean_residual against steps
};

// Nested Brownian trees: level l uses the same paths as level l-1, refined.
RefinementStudy refinement_study(const CoefficientField& field, const VectorFieldEval& v, const Eigen::VectorXd& x0,
                                 const MeasureSpec& measure, const CheckWindow& window, MasterCheck check,
                                 const RefinementOptions& opts = {});

struct NorrisQuantities {
  double norm_I_sup = 0.0;
  double norm_A_sup = 0.0;
  double controlled_norm_A = 0.0;  // |A| + |A'| at tau0, plus ||A'||_alpha + ||R^A||_2alpha
  double norm_C = 0.0;             // sup + alpha-Hölder
  double norm_D = 0.0;
  double norm_phi_2alpha = 0.0;
  double L_theta = 0.0;
  // |I_tau0| + 1/L_theta + rough path norm + the four norms above.
  double script_R = 0.0;
};

NorrisQuantities norris_quantities(const NorrisDecomposition& dec, const RoughPath& rp, double theta,
                                   double alpha = 1.0 / 2.8);

struct ScriptROptions {
  double p = 1.4;
  double tau0 = 0.0;
  double tau = -1.0;  // negative: the horizon
  bool include_L_theta = true;
  // Grid times used for the Hölder and operator-norm probes.
  std::size_t anchors = 32;
};

struct ScriptRTerms {
  double x0 = 0.0;
  double inv_L_theta = 0.0;
  double Y_tau = 0.0;
  double rough_path = 0.0;
  double X_alpha = 0.0;
  double Z_alpha = 0.0;
  double RX = 0.0;
  double RZ = 0.0;

  double total() const { return 2.0 + x0 + inv_L_theta + Y_tau + rough_path + X_alpha + Z_alpha + RX + RZ; }
};

// Grid surrogate for 2 + |x0| + 1/L_theta + ||Y_tau|| + ||(B,BB)||_alpha + ||X||_alpha + ||Z||_alpha
// + ||R^X||_2alpha + ||R^Z||_2alpha. Operator norms are maxima over lifted unit probes.
ScriptRTerms script_R_terms(const CoefficientField& field, const SolutionBundle& bundle, const FlowOperators& ops,
                            const RoughPath& rp, double theta, const ScriptROptions& opts = {});
double script_R(const CoefficientField& field, const SolutionBundle& bundle, const FlowOperators& ops,
                const RoughPath& rp, double theta, const ScriptROptions& opts = {});

}  // namespace pathdens
