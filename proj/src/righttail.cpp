#include "sln/righttail.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "sln/errors.hpp"
#include "sln/specfun.hpp"

namespace sln {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double marginal_log_tail(const SlnModel& m, double gamma, int k) {
  return log_phi_bar((std::log(gamma) - m.nu(k)) / m.sigma(k));
}

}  // namespace

double ell_as(const SlnModel& m, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("ell_as: gamma must be positive");
  double mx = -kInf;
  std::vector<double> t(static_cast<std::size_t>(m.d));
  for (int k = 0; k < m.d; ++k) {
    t[static_cast<std::size_t>(k)] = marginal_log_tail(m, gamma, k);
    mx = std::max(mx, t[static_cast<std::size_t>(k)]);
  }
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (double v : t) s += std::exp(v - mx);
  return mx + std::log(s);
}

KernelFn hbar_kernel(const SlnModel& m, double gamma, int k, const Eigen::VectorXd& mu) {
  if (k < 0 || k >= m.d) throw DimensionMismatch("hbar_kernel: k out of range");
  if (mu.size() != m.d) throw DimensionMismatch("hbar_kernel: bad mu length");
  if (!(gamma > 0.0)) throw DomainError("hbar_kernel: gamma must be positive");
  auto model = std::make_shared<const SlnModel>(m);
  const Eigen::VectorXd rv = m.L.template triangularView<Eigen::Lower>().solve(mu);
  std::vector<double> r(rv.data(), rv.data() + m.d);
  std::vector<double> shift(static_cast<std::size_t>(m.d));
  for (int i = 0; i < m.d; ++i) shift[static_cast<std::size_t>(i)] = m.nu(i) + mu(i);
  const double log_w0 = -0.5 * rv.squaredNorm();
  const double log_gamma = std::log(gamma);
  return [model, k, log_gamma, log_w0, r = std::move(r),
          shift = std::move(shift)](std::span<const double> u) -> LogValue {
    const int d = model->d;
    thread_local std::vector<double> xi, y;
    xi.resize(static_cast<std::size_t>(d));
    y.resize(static_cast<std::size_t>(d));
    double rdx = 0.0;
    for (int j = 0; j < d; ++j) {
      const double q = normal_quantile(u[static_cast<std::size_t>(j)]);
      xi[static_cast<std::size_t>(j)] = q;
      rdx += r[static_cast<std::size_t>(j)] * q;
    }
    int best = 0;
    double ymax = -kInf;
    for (int j = 0; j < d; ++j) {
      const double* lr = model->lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
      double dot = 0.0;
      for (int i = 0; i <= j; ++i) dot += lr[i] * xi[static_cast<std::size_t>(i)];
      const double yj = shift[static_cast<std::size_t>(j)] + dot;
      y[static_cast<std::size_t>(j)] = yj;
      if (yj > ymax) {
        ymax = yj;
        best = j;
      }
    }
    if (best != k) return {};
    double se = 0.0;
    for (int j = 0; j < d; ++j) se += std::exp(y[static_cast<std::size_t>(j)] - ymax);
    const double log_s = ymax + std::log(se);
    if (!(log_s > log_gamma)) return {};
    return log_value(log_w0 - rdx, 1);
  };
}

StratumResult estimate_hbar(const SlnModel& m, double gamma, int k, const RightTilt& tilt,
                            std::uint64_t n_k, UniformStream& stream, const ExecPolicy& pol) {
  StratumResult out;
  out.k = k;
  out.n_k = n_k;
  out.mu = tilt.mu;
  out.log_mean = -kInf;
  out.log_var = -kInf;
  out.log_second_moment = -kInf;
  out.log_fourth_central = -kInf;
  if (n_k == 0) return out;
  ExecPolicy p4 = pol;
  p4.max_power = 4;
  const auto t0 = std::chrono::steady_clock::now();
  const KernelFn kern = hbar_kernel(m, gamma, k, tilt.mu);
  const LogAccumulator acc = run_replications(kern, stream, stream.cursor(), n_k, p4);
  stream.seek(stream.cursor() + n_k);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.log_sum = acc.log_sum(1);
  out.log_mean = acc.log_mean().log_abs;
  if (n_k >= 2) out.log_var = acc.log_var();
  // single-replication stratum: bound the variance by the raw second moment
  if (n_k == 1) out.log_var = acc.log_sum(2).log_abs;
  out.log_second_moment = acc.log_central_moment(2).log_abs;
  out.log_fourth_central = acc.log_central_moment(4).log_abs;
  return out;
}

std::vector<std::uint64_t> allocate_strata(const SlnModel& m, double gamma, std::uint64_t n,
                                           UniformStream& stream) {
  const int d = m.d;
  const double las = ell_as(m, gamma);
  std::vector<double> p(static_cast<std::size_t>(d), 0.0);
  if (las > -kInf) {
    double tot = 0.0;
    for (int k = 0; k < d; ++k) {
      p[static_cast<std::size_t>(k)] = std::exp(marginal_log_tail(m, gamma, k) - las);
      tot += p[static_cast<std::size_t>(k)];
    }
    for (double& v : p) v /= tot;
  } else {
    for (double& v : p) v = 1.0 / d;
  }
  std::vector<std::uint64_t> nk(static_cast<std::size_t>(d), 0);
  std::vector<double> frac(static_cast<std::size_t>(d), 0.0);
  double frac_sum = 0.0;
  std::uint64_t assigned = 0;
  for (int k = 0; k < d; ++k) {
    const double a = static_cast<double>(n) * p[static_cast<std::size_t>(k)];
    const double base = std::floor(a);
    nk[static_cast<std::size_t>(k)] = static_cast<std::uint64_t>(base);
    assigned += nk[static_cast<std::size_t>(k)];
    frac[static_cast<std::size_t>(k)] = a - base;
    frac_sum += frac[static_cast<std::size_t>(k)];
  }
  std::vector<double> u(static_cast<std::size_t>(stream.dim()));
  stream.next(u);
  const std::uint64_t leftover = n - assigned;
  if (leftover > 0 && frac_sum > 0.0) {
    // systematic pass over the fractional parts: thresholds i + U on the
    // cumulated (rescaled) fractions select each stratum with probability
    // equal to its fractional part, without replacement
    const double scale = static_cast<double>(leftover) / frac_sum;
    int idx = 0;
    double cum = frac[0] * scale;
    for (std::uint64_t i = 0; i < leftover; ++i) {
      const double t = static_cast<double>(i) + u[0];
      while (cum <= t && idx < d - 1) {
        ++idx;
        cum += frac[static_cast<std::size_t>(idx)] * scale;
      }
      ++nk[static_cast<std::size_t>(idx)];
    }
  }
  return nk;
}

RightTailEstimate estimate_right_tail_full(const SlnModel& m, double gamma, std::uint64_t n,
                                           UniformStream& stream, const ExecPolicy& pol) {
  if (!(gamma > 0.0)) throw DomainError("estimate_right_tail_full: gamma must be positive");
  const int d = m.d;
  const auto t0 = std::chrono::steady_clock::now();
  RightTailEstimate out;
  out.tilts.reserve(static_cast<std::size_t>(d));
  unsigned flags = 0;
  for (int k = 0; k < d; ++k) {
    out.tilts.push_back(solve_right_tilt(m, gamma, k));
    if (!out.tilts.back().converged) flags |= kFlagOptimizerFallback;
  }
  const std::vector<std::uint64_t> nk = allocate_strata(m, gamma, n, stream);
  std::vector<LogValue> means;
  means.reserve(static_cast<std::size_t>(d));
  LogAccumulator var_terms(1);
  std::uint64_t n_total = 0;
  for (int k = 0; k < d; ++k) {
    const std::uint64_t n_k = nk[static_cast<std::size_t>(k)];
    if (n_k == 0) flags |= kFlagZeroStrata;
    UniformStream sub = stream.sub(static_cast<std::uint64_t>(k) + 1, d);
    StratumResult sr = estimate_hbar(m, gamma, k, out.tilts[static_cast<std::size_t>(k)], n_k, sub, pol);
    n_total += n_k;
    if (n_k > 0) {
      means.push_back(log_value(sr.log_mean, sr.log_mean == -kInf ? 0 : 1));
      if (sr.log_var > -kInf)
        var_terms.add_log(sr.log_var - std::log(static_cast<double>(n_k)), 1);
    }
    out.strata.push_back(std::move(sr));
  }
  const LogValue total = signed_lse(means);
  const double log_var = var_terms.count() > 0 ? var_terms.log_sum(1).log_abs : -kInf;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.est = make_estimate_parts(total, log_var, 1, wall, flags);
  out.est.n = n_total;
  return out;
}

LogEstimate estimate_right_tail(const SlnModel& m, double gamma, std::uint64_t n,
                                UniformStream& stream, const ExecPolicy& pol) {
  return estimate_right_tail_full(m, gamma, n, stream, pol).est;
}

double second_order_residual(double rho, int d, double gamma) {
  if (!(gamma > 1.0)) throw DomainError("second_order_residual: gamma must exceed 1");
  if (d < 2) return -kInf;
  if (!(rho >= 0.0) || rho >= 1.0) throw DomainError("second_order_residual: rho must be in [0, 1)");
  const double lg = std::log(gamma);
  return std::log(static_cast<double>(d) * (d - 1)) + 0.5 * (1.0 - rho * rho) + std::log(lg) -
         (1.0 - rho) * lg + log_phi_bar(lg);
}

double variance_of_variance_diagnostic(const SlnModel& m, double gamma, int k,
                                       const RightTilt& tilt, std::uint64_t n_k,
                                       UniformStream& stream) {
  if (n_k < 100) throw DomainError("variance_of_variance_diagnostic: needs n_k >= 100");
  ExecPolicy p4;
  p4.max_power = 4;
  const KernelFn kern = hbar_kernel(m, gamma, k, tilt.mu);
  const LogAccumulator acc = run_replications(kern, stream, stream.cursor(), n_k, p4);
  stream.seek(stream.cursor() + n_k);
  const double lvv = sample_var_of_var(acc);
  const double lv = acc.log_var();
  if (lv == -kInf) return 0.0;
  return std::exp(lvv - 2.0 * lv);
}

}  // namespace sln
