#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathdens/coeffs.hpp"

namespace pathdens {

// Scalar nonlinearity applied componentwise inside path integrals.
enum class Nonlinearity { Identity, Sine, Tanh };

Nonlinearity parse_nonlinearity(const std::string& name);
double apply(Nonlinearity phi, double x);
double apply_derivative(Nonlinearity phi, double x);

// b(t, x) = -x(t) for t <= switch_time and -x(switch_time) afterwards; sigma = 1.
// The switch time must be a grid point.
CoefficientField intro_example(double switch_time = 1.0);

// b = A y + c0 (constant), sigma_k = S_k y + C e_k. State dependent.
CoefficientField linear_field(const Eigen::MatrixXd& drift, const std::vector<Eigen::MatrixXd>& slopes,
                              const Eigen::MatrixXd& offsets, const Eigen::VectorXd& drift_offset = {});
// Scalar dX = mu X dt + vol X dB.
CoefficientField geometric_field(double mu, double vol);
// b = A y, sigma = I (d = n).
CoefficientField additive_field(const Eigen::MatrixXd& drift);
CoefficientField constant_field(const Eigen::VectorXd& drift, const Eigen::MatrixXd& sigma);

// b_i = -kappa y_i + coupling * int_{[0,t)} phi(x_i(s)) mu(ds), sigma = vol I.
// mu is the grid measure (Lebesgue plus atoms).
CoefficientField integral_coefficient(int n, double kappa, double coupling, Nonlinearity phi, double vol);

// b_i = -kappa y_i + coupling * int_{-T}^0 phi(x_i(t+s)) e^s ds, sigma = vol I, with
// x(u) = x(0) for u < 0.
CoefficientField continuous_delay(int n, double kappa, double coupling, Nonlinearity phi, double vol);
// The delay integral alone (component i), evaluated on the left-point grid path.
double delay_integral(const State& state, int i, Nonlinearity phi);

// b_i = -kappa y_i + coupling * sum_{s_l <= t} phi(x_i(s_l)), sigma = vol I.
// Sampling times must be grid points.
CoefficientField discrete_points(int n, std::vector<double> times, double kappa, double coupling, Nonlinearity phi,
                                 double vol);

// n = 3, d = 2, b = 0, sigma_1 = (1, 0, 0), sigma_2 = (0, a + sin y_2, y_1).
// The parameter a depends on the past: a = a_min + (a_max - a_min)(1 + tanh x_1(t_a))/2
// for t > t_a and the midpoint of [a_min, a_max] before. A fixed `frozen_a` makes it constant.
struct Hormander3DParams {
  double a_min = 2.0;
  double a_max = 3.0;
  double switch_time = 0.25;
  std::optional<double> frozen_a;
};
CoefficientField hormander_example_3d(const Hormander3DParams& params = {});
double hormander_parameter(const Hormander3DParams& params, const State& state);

// n = d = 2: b = (-y_1, 0), sigma_1 = (1, 0), sigma_2 = (sin(y_1)/2, 0).
// Both fields point along e_1, so no bracket ever reaches e_2.
CoefficientField degenerate_pair();

// Coefficients depending on X(t), X(t - h_1), ..., X(t - h_m) with X(u) = x(0) for u < 0.
struct DelayDynamics {
  int n = 1;
  int d = 1;
  std::vector<double> delays;
  // args[0] = X(t), args[l] = X(t - h_l).
  std::function<Eigen::VectorXd(double, const std::vector<Eigen::VectorXd>&)> drift;
  std::function<Eigen::MatrixXd(double, const std::vector<Eigen::VectorXd>&)> sigma;
};
// Linear dynamics with h_0 = 0: b = sum_l A_l X(t - h_l), sigma = C plus sum_l S_l X(t - h_l)
// added to the first column. A_l and S_l are n x n (S may be empty), C is n x d.
DelayDynamics linear_delay_dynamics(std::vector<double> delays, std::vector<Eigen::MatrixXd> drift,
                                    std::vector<Eigen::MatrixXd> diffusion, Eigen::MatrixXd offset);
// Field reading lagged grid values; lags must be grid-aligned.
CoefficientField discrete_delay(const DelayDynamics& dynamics);

}  // namespace pathdens
