#include "sln/lefttail.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "sln/errors.hpp"
#include "sln/specfun.hpp"

namespace sln {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Forward pass shared by the draw struct and the hot kernels. Writes z (and
// optionally accumulates z . a for the density push-out); returns psi.
// All buffers are caller-owned so kernels can keep thread_local scratch.
double seq_forward(const SlnModel& m, double gamma, const double* mu, std::span<const double> u,
                   double* z, double* x_out, const double* a, double* z_dot_a) {
  const int d = m.d;
  double psi_val = 0.0;
  double s = 0.0;
  double zda = 0.0;
  for (int j = 0; j < d; ++j) {
    if (s >= gamma) return -kInf;
    const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
    double dot = 0.0;
    for (int k = 0; k < j; ++k) dot += lr[k] * z[k];
    const double alpha = (std::log(gamma - s) - m.nu(j) - dot) / lr[j];
    const double zj = trunc_norm_inverse(mu[j], alpha, u[static_cast<std::size_t>(j)]);
    z[j] = zj;
    psi_val += 0.5 * mu[j] * mu[j] - zj * mu[j] + log_phi_bar(mu[j] - alpha);
    if (a) zda += zj * a[j];
    const double xj = std::exp(m.nu(j) + dot + lr[j] * zj);
    if (x_out) x_out[j] = xj;
    s += xj;
  }
  if (z_dot_a) *z_dot_a = zda;
  return psi_val;
}

}  // namespace

SequentialDraw sample_sequential(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                                 std::span<const double> u) {
  if (mu.size() != m.d) throw DimensionMismatch("sample_sequential: bad mu length");
  if (u.size() < static_cast<std::size_t>(m.d))
    throw DimensionMismatch("sample_sequential: need d uniforms");
  if (!(gamma > 0.0)) throw DomainError("sample_sequential: gamma must be positive");
  SequentialDraw out;
  out.z.resize(m.d);
  out.x.resize(m.d);
  out.log_weight = seq_forward(m, gamma, mu.data(), u, out.z.data(), out.x.data(), nullptr, nullptr);
  return out;
}

KernelFn cdf_kernel(const SlnModel& m, double gamma, const Eigen::VectorXd& mu) {
  if (mu.size() != m.d) throw DimensionMismatch("cdf_kernel: bad mu length");
  if (!(gamma > 0.0)) throw DomainError("cdf_kernel: gamma must be positive");
  auto model = std::make_shared<const SlnModel>(m);
  std::vector<double> muv(mu.data(), mu.data() + m.d);
  return [model, gamma, muv = std::move(muv)](std::span<const double> u) -> LogValue {
    thread_local std::vector<double> z;
    z.resize(static_cast<std::size_t>(model->d));
    const double p = seq_forward(*model, gamma, muv.data(), u, z.data(), nullptr, nullptr, nullptr);
    if (p == -kInf) return {};
    return log_value(p, 1);
  };
}

KernelFn pdf_kernel(const SlnModel& m, double gamma, const Eigen::VectorXd& mu) {
  if (mu.size() != m.d) throw DimensionMismatch("pdf_kernel: bad mu length");
  if (!(gamma > 0.0)) throw DomainError("pdf_kernel: gamma must be positive");
  auto model = std::make_shared<const SlnModel>(m);
  std::vector<double> muv(mu.data(), mu.data() + m.d);
  // push-out direction a = L^-1 1
  Eigen::VectorXd av = m.L.template triangularView<Eigen::Lower>().solve(
      Eigen::VectorXd::Ones(m.d));
  std::vector<double> a(av.data(), av.data() + m.d);
  const double log_gamma = std::log(gamma);
  return [model, gamma, log_gamma, muv = std::move(muv),
          a = std::move(a)](std::span<const double> u) -> LogValue {
    thread_local std::vector<double> z;
    z.resize(static_cast<std::size_t>(model->d));
    double zda = 0.0;
    const double p =
        seq_forward(*model, gamma, muv.data(), u, z.data(), nullptr, a.data(), &zda);
    if (p == -kInf || zda == 0.0) return {};
    // f_hat = exp(psi) * (-z . a) / gamma
    return log_value(p + std::log(std::fabs(zda)) - log_gamma, zda < 0.0 ? 1 : -1);
  };
}

LogEstimate estimate_cdf_simple(const SlnModel& m, double gamma, std::uint64_t n,
                                UniformStream& stream, const ExecPolicy& pol) {
  return run_estimate(cdf_kernel(m, gamma, Eigen::VectorXd::Zero(m.d)), stream, n, pol);
}

LogEstimate estimate_cdf(const SlnModel& m, double gamma, std::uint64_t n, UniformStream& stream,
                         const ExecPolicy& pol, LeftTilt* tilt_out) {
  const LeftTilt tilt = solve_left_tilt(m, gamma);
  if (tilt_out) *tilt_out = tilt;
  const unsigned flags = tilt.converged ? 0u : kFlagNoConvergence;
  return run_estimate(cdf_kernel(m, gamma, tilt.mu_star), stream, n, pol, flags);
}

LogEstimate estimate_pdf(const SlnModel& m, double gamma, std::uint64_t n, UniformStream& stream,
                         const ExecPolicy& pol, LeftTilt* tilt_out) {
  const LeftTilt tilt = solve_left_tilt(m, gamma);
  if (tilt_out) *tilt_out = tilt;
  const unsigned flags = tilt.converged ? 0u : kFlagNoConvergence;
  return run_estimate(pdf_kernel(m, gamma, tilt.mu_star), stream, n, pol, flags);
}

ConditionalSample sample_conditional(const SlnModel& m, double gamma, std::uint64_t n_draws,
                                     UniformStream& stream) {
  if (stream.dim() != m.d + 1)
    throw DimensionMismatch("sample_conditional: stream dim must be d + 1");
  if (!(gamma > 0.0)) throw DomainError("sample_conditional: gamma must be positive");
  ConditionalSample out;
  out.tilt = solve_left_tilt(m, gamma);
  const PsiMax pm = maximize_psi(m, gamma, out.tilt.mu_star);
  out.c = pm.c;
  if (!pm.converged || !std::isfinite(pm.c))
    throw NoConvergence("sample_conditional: log-weight envelope maximization failed");
  if (!out.tilt.converged) out.flags |= kFlagNoConvergence;
  const double c_eff = pm.c + 1e-10 * (1.0 + std::fabs(pm.c));

  out.draws.reserve(n_draws);
  std::vector<double> u(static_cast<std::size_t>(m.d) + 1);
  std::uint64_t since_accept = 0;
  while (out.draws.size() < n_draws) {
    stream.next(u);
    ++out.proposals;
    ++since_accept;
    SequentialDraw d = sample_sequential(m, gamma, out.tilt.mu_star,
                                         std::span<const double>(u.data(), u.size() - 1));
    if (d.log_weight == -kInf) continue;
    const double e = -std::log1p(-u.back());  // Exp(1)
    if (e > c_eff - d.log_weight) {
      ConditionalDraw cd;
      cd.x = std::move(d.x);
      cd.proposals = since_accept;
      out.draws.push_back(std::move(cd));
      since_accept = 0;
    }
  }
  out.acceptance_rate =
      out.proposals == 0 ? 0.0 : static_cast<double>(n_draws) / static_cast<double>(out.proposals);
  return out;
}

}  // namespace sln
