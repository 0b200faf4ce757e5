#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sln/driver.hpp"
#include "sln/model.hpp"
#include "sln/optimize.hpp"
#include "sln/rng.hpp"
#include "sln/stats.hpp"

namespace sln {

// ln of the asymptotic right tail: logsumexp_k ln Phibar((ln gamma - nu_k)/sigma_k).
double ell_as(const SlnModel& m, double gamma);

// Per-stratum estimator of h_k = P(S > gamma, X_k is the maximum):
// Y = nu + mu + L xi, weight exp(-||r||^2/2 - r'xi) with r = L^-1 mu,
// indicator {S > gamma and argmax X = k} (lowest-index tie-break).
struct StratumResult {
  int k = 0;
  std::uint64_t n_k = 0;
  LogValue log_sum;               // signed ln sum of weights (all >= 0 here)
  double log_mean = 0;            // -inf when n_k = 0 or no hits
  double log_var = 0;             // unbiased; -inf when degenerate
  double log_second_moment = 0;   // ln m2 (central, /n)
  double log_fourth_central = 0;  // ln m4 (diagnostic)
  Eigen::VectorXd mu;
  double wall_seconds = 0;
};
StratumResult estimate_hbar(const SlnModel& m, double gamma, int k, const RightTilt& tilt,
                            std::uint64_t n_k, UniformStream& stream, const ExecPolicy& pol = {});

// Kernel view of the same replication (dim = d).
KernelFn hbar_kernel(const SlnModel& m, double gamma, int k, const Eigen::VectorXd& mu);

// Proportional allocation n_k ~ n P(X_k > gamma)/ell_as with randomized
// rounding: floor the real allocations, then hand out the leftover units by
// sampling strata without replacement with probability exactly equal to the
// fractional parts (one uniform consumed from the stream).
std::vector<std::uint64_t> allocate_strata(const SlnModel& m, double gamma, std::uint64_t n,
                                           UniformStream& stream);

struct RightTailEstimate {
  LogEstimate est;
  std::vector<StratumResult> strata;
  std::vector<RightTilt> tilts;
};
// Stratified estimator: ell_hat = sum_k mean(hbar_k); strata independent, so
// Var = sum Var_k / n_k. Solves the tilt program once per stratum.
RightTailEstimate estimate_right_tail_full(const SlnModel& m, double gamma, std::uint64_t n,
                                           UniformStream& stream, const ExecPolicy& pol = {});
LogEstimate estimate_right_tail(const SlnModel& m, double gamma, std::uint64_t n,
                                UniformStream& stream, const ExecPolicy& pol = {});

// ln of d(d-1) exp((1-rho^2)/2) (ln gamma / gamma^(1-rho)) Phibar(ln gamma):
// the second-order term for the standardized equicorrelated model.
double second_order_residual(double rho, int d, double gamma);

// Var-hat(S^2) / Var-hat^2 on one stratum: measures how noisy the variance
// estimate itself is (grows like ln gamma for the tilted kernel, explosively
// for naive ones).
double variance_of_variance_diagnostic(const SlnModel& m, double gamma, int k,
                                       const RightTilt& tilt, std::uint64_t n_k,
                                       UniformStream& stream);

}  // namespace sln
