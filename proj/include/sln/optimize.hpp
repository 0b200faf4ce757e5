#pragma once

#include <Eigen/Dense>
#include <functional>

#include "sln/model.hpp"

namespace sln {

// Generic dense quasi-Newton minimizer used by the tilt solvers.
// The objective may return +inf outside its domain; line search backtracks.
struct BfgsOptions {
  int max_iter = 300;
  double grad_tol = 1e-10;
  double step_tol = 1e-14;
};
struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0;
  double grad_norm = 0;
  int iterations = 0;
  bool converged = false;
};
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd* grad)>;
BfgsResult minimize_bfgs(const ObjectiveFn& f, Eigen::VectorXd x0, const BfgsOptions& opt = {});

// --- left tail -------------------------------------------------------------

struct LeftTilt {
  Eigen::VectorXd w_star;   // simplex point
  Eigen::VectorXd mu_star;  // tilt
  double objective = 0;
  double grad_norm = 0;
  int iterations = 0;
  bool converged = false;
};

// mu_bar = [(ln gamma - w'nu + sum_i w_i ln w_i) / (w'Sigma w)] * L'w
Eigen::VectorXd mu_bar_warm_start(const SlnModel& m, double gamma, const Eigen::VectorXd& w);

// ||mu||^2 + ln Phibar((w'(nu - L mu) - ln gamma - sum_i w_i ln w_i is
// subtracted as +w'ln(1/w)) / sqrt(w'Sigma w)); see left_tilt_objective impl.
double left_tilt_objective(const SlnModel& m, double gamma, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& mu);

// Joint minimization over (w in simplex, mu) with softmax reparameterization
// of w, warm-started at uniform w and mu_bar. Never returns a point worse
// than the warm start.
LeftTilt solve_left_tilt(const SlnModel& m, double gamma);

// psi(z; mu) = ||mu||^2/2 - z'mu + sum_j ln Phibar(mu_j - alpha_j(z)),
// the log of the sequential sampler's likelihood-ratio weight. -inf when z
// leaves the feasible region (running sum reaches gamma).
double psi(const SlnModel& m, double gamma, const Eigen::VectorXd& mu, const Eigen::VectorXd& z);
Eigen::VectorXd psi_gradient(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& z);

struct PsiMax {
  Eigen::VectorXd z;
  double c = 0;  // max of psi; exp(c) bounds every weight
  double grad_norm = 0;
  bool converged = false;
};
// Concave maximization of psi in z (acceptance-rejection constant).
PsiMax maximize_psi(const SlnModel& m, double gamma, const Eigen::VectorXd& mu);

// --- right tail ------------------------------------------------------------

// mu* = ((ln gamma - nu_k) / sigma_k^2) * Sigma e_k
Eigen::VectorXd asymptotic_right_tilt(const SlnModel& m, double gamma, int k);

struct RightTilt {
  int k = 0;
  Eigen::VectorXd mu;
  double objective = 0;   // mu' Sigma^-1 mu / 2
  double g1_slack = 0;    // exp(mu_k+nu_k) + sum_{i!=k} exp(mu_i+nu_i+sigma_i^2/2) - gamma
  double g2_slack = 0;    // mu_k+nu_k+sigma_k^2/2 - max_{j!=k}(mu_j+nu_j+sigma_j^2/2)
  double kkt_residual = 0;
  bool converged = false;
};

double right_tilt_objective(const SlnModel& m, const Eigen::VectorXd& mu);
double right_tilt_g1(const SlnModel& m, double gamma, int k, const Eigen::VectorXd& mu);
double right_tilt_g2(const SlnModel& m, int k, const Eigen::VectorXd& mu);

// min mu' Sigma^-1 mu / 2 over {g1 >= 0, g2 >= 0}. The feasible set has
// disconnected branches (mass on component k alone vs spread over all
// components), so the penalty solver runs from both starts and keeps the
// better feasible point.
RightTilt solve_right_tilt(const SlnModel& m, double gamma, int k);

}  // namespace sln
