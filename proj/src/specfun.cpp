#include "sln/specfun.hpp"

#include <cmath>
#include <limits>

#include "sln/errors.hpp"

namespace sln {
namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244008444;
constexpr double kSqrt2Pi = 2.506628274631000502415765;
constexpr double kLnSqrt2Pi = 0.9189385332046727417803297;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Mills-ratio asymptotic for x >= 37.5, where 0.5*erfc(x/sqrt(2)) leaves the
// normal double range: the truncation error of the series is below 2e-15
// relative there and falls with x.
double log_phi_bar_asymptotic(double x) noexcept {
  const double r = 1.0 / (x * x);
  const double series = -r * (1.0 - r * (3.0 - r * (15.0 - r * (105.0 - r * 945.0))));
  return -0.5 * x * x - std::log(x) - kLnSqrt2Pi + std::log1p(series);
}

double upper_tail(double x) noexcept {  // Phibar(x) for x >= 0, may underflow
  return x >= 37.5 ? std::exp(log_phi_bar_asymptotic(x)) : 0.5 * std::erfc(x * kInvSqrt2);
}

}  // namespace

double log_phi_bar(double x) noexcept {
  if (std::isnan(x)) return x;
  if (x >= 37.5) {
    if (x == kInf) return -kInf;
    return log_phi_bar_asymptotic(x);
  }
  if (x >= 0.0) return std::log(0.5 * std::erfc(x * kInvSqrt2));
  if (x == -kInf) return 0.0;
  return std::log1p(-upper_tail(-x));
}

namespace {

// Inverse CDF on the central band |p - 1/2| <= 0.425: series seed plus a few
// Newton corrections against erfc (quadratic convergence; the seed is within
// ~2% at the band edge).
double quantile_central(double p) noexcept {
  const double t = (p - 0.5) * kSqrt2Pi;
  const double t2 = t * t;
  double x = t * (1.0 + t2 * (1.0 / 6.0 + t2 * (7.0 / 120.0 + t2 * (127.0 / 5040.0))));
  for (int it = 0; it < 4; ++it) {
    const double cdf = 0.5 * std::erfc(-x * kInvSqrt2);
    x -= (cdf - p) * std::exp(0.5 * x * x + kLnSqrt2Pi);
  }
  return x;
}

// Solve log Phibar(y) = lp for y > 0 (lp <= ln 0.075): asymptotic seed, then
// Newton in log space. Stable arbitrarily deep into the tail.
double quantile_tail_from_log(double lp) noexcept {
  double y = std::sqrt(-2.0 * lp);
  const double adj = -2.0 * (lp + std::log(y) + kLnSqrt2Pi);
  if (adj > 0.0) y = std::sqrt(adj);
  for (int it = 0; it < 6; ++it) {
    const double g = log_phi_bar(y) - lp;
    const double h = normal_hazard(y);
    const double step = g / h;
    y += step;
    if (y <= 0.0) y = 1e-8;
    if (std::fabs(step) <= 1e-15 * (1.0 + y)) break;
  }
  return -y;  // the lower quantile
}

constexpr double kCentralCut = 0.075;
const double kLogCentralCut = std::log(0.075);

// Phi^-1(p) for p <= 0.925, given ln p as well.
double quantile_core(double p, double lp) noexcept {
  if (p >= kCentralCut) return quantile_central(p);
  return quantile_tail_from_log(lp);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
  if (p > 0.925) return -quantile_core(1.0 - p, std::log1p(-p));
  return quantile_core(p, std::log(p));
}

double normal_quantile_from_log(double log_p) {
  if (!(log_p < 0.0)) throw DomainError("normal_quantile_from_log: log p must be negative");
  if (log_p > -0.077961541469694150) {  // ln 0.925: reflect for the upper band
    const double q = -std::expm1(log_p);  // 1 - p, full precision
    return -quantile_core(q, std::log(q));
  }
  const double p = std::exp(log_p);  // may underflow to 0; only central path needs it
  return quantile_core(p, log_p);
}

double trunc_norm_inverse(double mu, double a, double u) {
  if (std::isnan(mu) || std::isnan(a)) throw DomainError("trunc_norm_inverse: NaN bound");
  if (!(u > 0.0) || !(u < 1.0)) throw DomainError("trunc_norm_inverse: u must lie in (0,1)");
  if (a == -kInf) throw EmptyRegion("trunc_norm_inverse: truncation region has zero mass");
  const double lp = std::log(u) + log_phi_bar(mu - a);
  const double z = mu + normal_quantile_from_log(lp);
  return z < a ? z : a;
}

}  // namespace sln
