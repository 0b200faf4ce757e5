#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "sln/driver.hpp"
#include "sln/model.hpp"
#include "sln/rng.hpp"
#include "sln/stats.hpp"

namespace sln {

enum class Side { left, right };

// Plain indicator estimator, either tail. dim = d.
LogEstimate crude_mc(const SlnModel& m, double gamma, Side side, std::uint64_t n,
                     UniformStream& stream, const ExecPolicy& pol = {});
KernelFn crude_mc_kernel(const SlnModel& m, double gamma, Side side);

// Right-tail scale boost: Y ~ N(nu, Sigma/(1-theta)), weight
// exp(-theta ||xi||^2 / (2(1-theta))) / (1-theta)^(d/2) on {S > gamma}. dim = d.
LogEstimate variance_boosted(const SlnModel& m, double gamma, double theta, std::uint64_t n,
                             UniformStream& stream, const ExecPolicy& pol = {});
KernelFn variance_boosted_kernel(const SlnModel& m, double gamma, double theta);

// Conditional-on-the-rest tail estimator for iid models:
// d * Phibar((ln[(gamma - S_{d-1}) v M_{d-1}] - nu)/sigma). dim = max(d-1, 1).
// Throws NotIid unless nu is constant and Sigma = sigma^2 I.
LogEstimate asmussen_kroese(const SlnModel& m, double gamma, std::uint64_t n,
                            UniformStream& stream, const ExecPolicy& pol = {});
KernelFn asmussen_kroese_kernel(const SlnModel& m, double gamma);

// Two-part estimator: ell1_hat = ell_as / N sampled under the exact-tail
// mixture (N = number of coordinates above ln gamma), plus a boosted
// residual on {S > gamma, max X < gamma}. dims d+1 and d.
struct IsveEstimate {
  LogEstimate total;
  LogEstimate part1;
  LogEstimate part2;
};
IsveEstimate isve_full(const SlnModel& m, double gamma, double theta, std::uint64_t n1,
                       std::uint64_t n2, UniformStream& stream, const ExecPolicy& pol = {});
LogEstimate isve(const SlnModel& m, double gamma, double theta, std::uint64_t n1,
                 std::uint64_t n2, UniformStream& stream, const ExecPolicy& pol = {});
KernelFn isve_mixture_kernel(const SlnModel& m, double gamma);            // dim d+1
KernelFn isve_residual_kernel(const SlnModel& m, double gamma, double theta);  // dim d
double isve_default_theta(double gamma);  // 1 - 1/ln^2(gamma)

// Sampling guts of the mixture (exposed for diagnostics): the log-coordinate
// vector Y and, via k_out, the component index drawn. Consumes d+1 uniforms.
Eigen::VectorXd isve_mixture_draw(const SlnModel& m, double gamma, std::span<const double> u,
                                  int* k_out = nullptr);

// Single-tilt right-tail estimator with caller-chosen mu:
// weight exp(||r||^2/2 ... ) on {S >= gamma} without the argmax indicator;
// unbiased for any mu, used to demonstrate why one tilt is not enough. dim = d.
LogEstimate gt_right_tail(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                          std::uint64_t n, UniformStream& stream, const ExecPolicy& pol = {});
KernelFn gt_right_tail_kernel(const SlnModel& m, double gamma, const Eigen::VectorXd& mu);

}  // namespace sln
