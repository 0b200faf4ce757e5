#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "sln/driver.hpp"
#include "sln/model.hpp"
#include "sln/optimize.hpp"
#include "sln/rng.hpp"
#include "sln/stats.hpp"

namespace sln {

// One pass of the sequential truncated-normal sampler: z_j drawn from
// N(mu_j, 1) truncated above at alpha_j(z_1..z_{j-1}), so the running sum
// of x stays below gamma by construction. log_weight = psi(z; mu).
struct SequentialDraw {
  Eigen::VectorXd z;
  Eigen::VectorXd x;
  double log_weight = 0;
};
SequentialDraw sample_sequential(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                                 std::span<const double> u);

// Replication kernels (dim = d uniforms each). The simple estimator is the
// mu = 0 special case of the tilted one.
KernelFn cdf_kernel(const SlnModel& m, double gamma, const Eigen::VectorXd& mu);
KernelFn pdf_kernel(const SlnModel& m, double gamma, const Eigen::VectorXd& mu);

// P(S <= gamma) with the untilted sequential sampler: product of the
// conditional normal CDFs along the path.
LogEstimate estimate_cdf_simple(const SlnModel& m, double gamma, std::uint64_t n,
                                UniformStream& stream, const ExecPolicy& pol = {});

// P(S <= gamma) under the optimized tilt; solves the tilt program once.
// tilt_out (optional) receives the tilt actually used.
LogEstimate estimate_cdf(const SlnModel& m, double gamma, std::uint64_t n, UniformStream& stream,
                         const ExecPolicy& pol = {}, LeftTilt* tilt_out = nullptr);

// Density of S at gamma (signed estimator, push-out form).
LogEstimate estimate_pdf(const SlnModel& m, double gamma, std::uint64_t n, UniformStream& stream,
                         const ExecPolicy& pol = {}, LeftTilt* tilt_out = nullptr);

// Exact sampling of X | S <= gamma by acceptance-rejection with envelope
// constant c = max_z psi. dim = d + 1 uniforms per proposal (the last one
// drives the Exp(1) variate).
struct ConditionalDraw {
  Eigen::VectorXd x;
  std::uint64_t proposals = 0;  // attempts consumed for this accepted draw
};
struct ConditionalSample {
  std::vector<ConditionalDraw> draws;
  std::uint64_t proposals = 0;
  double acceptance_rate = 0;
  double c = 0;
  LeftTilt tilt;
  unsigned flags = 0;
};
ConditionalSample sample_conditional(const SlnModel& m, double gamma, std::uint64_t n_draws,
                                     UniformStream& stream);

}  // namespace sln
