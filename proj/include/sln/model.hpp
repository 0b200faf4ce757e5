#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace sln {

// Sum of dependent log-normals: S = sum_k X_k with ln X ~ N(nu, Sigma),
// sampled through Y = nu + L Z, L the lower Cholesky factor of Sigma.
struct SlnModel {
  int d = 0;
  Eigen::VectorXd nu;
  Eigen::MatrixXd Sigma;
  Eigen::MatrixXd L;      // lower Cholesky factor
  Eigen::VectorXd sigma;  // marginal standard deviations sqrt(Sigma_kk)

  // packed row-major lower triangle of L for tight sampling loops
  std::vector<double> lrow;
  double lij(int i, int j) const noexcept {
    return lrow[static_cast<std::size_t>(i) * (i + 1) / 2 + j];
  }
};

// Validates shape, symmetry (1e-12 relative) and positive definiteness.
SlnModel new_model(Eigen::VectorXd nu, Eigen::MatrixXd Sigma);

// Sigma = s2 * ((1 - rho) I + rho 1 1^T)
SlnModel equicorrelated(int d, double rho, double s2, const Eigen::VectorXd& nu);
SlnModel equicorrelated(int d, double rho, double s2, double nu0);
SlnModel iid_model(int d, double nu0, double s2);

// Discretely monitored geometric Brownian motion: X_i = price at t_i,
// nu_i = ln X0 + (r - sigma^2/2) t_i, Sigma_ij = sigma^2 min(t_i, t_j).
struct BlackScholesSpec {
  double X0, r, sigma, T;
  int d;
};
SlnModel black_scholes_model(const BlackScholesSpec& p);  // uniform grid t_i = i T / d
SlnModel black_scholes_model(const BlackScholesSpec& p, std::span<const double> times);

// True iff nu is constant and Sigma = sigma0^2 I (1e-12 relative tolerance).
bool model_is_iid(const SlnModel& m, double* nu0 = nullptr, double* sigma0 = nullptr);

// Threshold for the j-th coordinate of the sequential left-tail sampler:
// the largest z_j keeping the running sum below gamma, i.e.
// [ln(gamma - partial_sum) - nu_j - sum_{k<j} L_jk z_k] / L_jj.
// Returns -inf when partial_sum >= gamma (the remaining budget is gone).
double alpha_threshold(const SlnModel& m, double gamma, int j,
                       std::span<const double> z_prefix, double partial_sum);

}  // namespace sln
