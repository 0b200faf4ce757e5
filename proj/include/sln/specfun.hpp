#pragma once

#include <cmath>

namespace sln {

// ln P(N(0,1) > x). Accurate to ~1e-13 relative in the log over the full
// double range; never returns NaN, and -inf only for x = +inf.
double log_phi_bar(double x) noexcept;

inline double phi_bar(double x) noexcept { return std::exp(log_phi_bar(x)); }

// ln of the standard normal density.
inline double log_normal_density(double x) noexcept {
  return -0.5 * x * x - 0.9189385332046727417803297;  // ln sqrt(2 pi)
}

// phi(x) / Phibar(x), stable for large |x| (~x as x -> +inf, ~phi(x) as x -> -inf).
inline double normal_hazard(double x) noexcept {
  return std::exp(log_normal_density(x) - log_phi_bar(x));
}

// Inverse standard normal CDF. Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

// Inverse CDF taking ln(p); usable far below the smallest positive double
// (log_p down to about -1e9 stays fully accurate). Throws DomainError
// unless log_p < 0.
double normal_quantile_from_log(double log_p);

// Quantile u of N(mu,1) truncated to (-inf, a]. Throws EmptyRegion when
// a = -inf, DomainError unless 0 < u < 1 and mu, a are not NaN.
// Result never exceeds a.
double trunc_norm_inverse(double mu, double a, double u);

}  // namespace sln
