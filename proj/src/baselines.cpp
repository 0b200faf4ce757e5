#include "sln/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "sln/errors.hpp"
#include "sln/specfun.hpp"

namespace sln {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log sum of exp(y_j) plus the max coordinate, via one shared pass
struct SumMax {
  double log_s;
  double y_max;
};

SumMax log_sum_and_max(const double* y, int d) {
  double mx = y[0];
  for (int j = 1; j < d; ++j) mx = std::max(mx, y[j]);
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += std::exp(y[j] - mx);
  return {mx + std::log(s), mx};
}

// y = nu + scale * L xi with xi = Phi^-1(u); thread-local scratch
void gaussian_path(const SlnModel& m, std::span<const double> u, double scale,
                   std::vector<double>& xi, std::vector<double>& y) {
  const int d = m.d;
  xi.resize(static_cast<std::size_t>(d));
  y.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) xi[static_cast<std::size_t>(j)] = normal_quantile(u[static_cast<std::size_t>(j)]);
  for (int j = 0; j < d; ++j) {
    const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
    double dot = 0.0;
    for (int i = 0; i <= j; ++i) dot += lr[i] * xi[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(j)] = m.nu(j) + scale * dot;
  }
}

}  // namespace

KernelFn crude_mc_kernel(const SlnModel& m, double gamma, Side side) {
  if (!(gamma > 0.0)) throw DomainError("crude_mc_kernel: gamma must be positive");
  auto model = std::make_shared<const SlnModel>(m);
  const double log_gamma = std::log(gamma);
  return [model, log_gamma, side](std::span<const double> u) -> LogValue {
    thread_local std::vector<double> xi, y;
    gaussian_path(*model, u, 1.0, xi, y);
    const double log_s = log_sum_and_max(y.data(), model->d).log_s;
    const bool hit = side == Side::right ? log_s > log_gamma : log_s <= log_gamma;
    return hit ? log_value(0.0, 1) : LogValue{};
  };
}

LogEstimate crude_mc(const SlnModel& m, double gamma, Side side, std::uint64_t n,
                     UniformStream& stream, const ExecPolicy& pol) {
  return run_estimate(crude_mc_kernel(m, gamma, side), stream, n, pol);
}

KernelFn variance_boosted_kernel(const SlnModel& m, double gamma, double theta) {
  if (!(gamma > 0.0)) throw DomainError("variance_boosted_kernel: gamma must be positive");
  if (!(theta >= 0.0) || theta >= 1.0)
    throw DomainError("variance_boosted_kernel: theta must be in [0, 1)");
  auto model = std::make_shared<const SlnModel>(m);
  const double log_gamma = std::log(gamma);
  const double scale = 1.0 / std::sqrt(1.0 - theta);
  const double wcoef = -theta / (2.0 * (1.0 - theta));
  const double wconst = -0.5 * m.d * std::log(1.0 - theta);
  return [model, log_gamma, scale, wcoef, wconst](std::span<const double> u) -> LogValue {
    thread_local std::vector<double> xi, y;
    gaussian_path(*model, u, scale, xi, y);
    const double log_s = log_sum_and_max(y.data(), model->d).log_s;
    if (!(log_s > log_gamma)) return {};
    double n2 = 0.0;
    for (double v : xi) n2 += v * v;
    return log_value(wcoef * n2 + wconst, 1);
  };
}

LogEstimate variance_boosted(const SlnModel& m, double gamma, double theta, std::uint64_t n,
                             UniformStream& stream, const ExecPolicy& pol) {
  return run_estimate(variance_boosted_kernel(m, gamma, theta), stream, n, pol);
}

KernelFn asmussen_kroese_kernel(const SlnModel& m, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("asmussen_kroese_kernel: gamma must be positive");
  double nu0 = 0.0, sigma0 = 0.0;
  if (!model_is_iid(m, &nu0, &sigma0))
    throw NotIid("asmussen_kroese_kernel: model must be iid (constant nu, Sigma = s2 I)");
  const int d = m.d;
  const double log_d = std::log(static_cast<double>(d));
  return [d, nu0, sigma0, gamma, log_d](std::span<const double> u) -> LogValue {
    double s = 0.0, mx = 0.0;
    for (int j = 0; j + 1 < d; ++j) {
      const double x = std::exp(nu0 + sigma0 * normal_quantile(u[static_cast<std::size_t>(j)]));
      s += x;
      mx = std::max(mx, x);
    }
    const double t = std::max(gamma - s, mx);
    if (!(t > 0.0)) return {};
    return log_value(log_d + log_phi_bar((std::log(t) - nu0) / sigma0), 1);
  };
}

LogEstimate asmussen_kroese(const SlnModel& m, double gamma, std::uint64_t n,
                            UniformStream& stream, const ExecPolicy& pol) {
  return run_estimate(asmussen_kroese_kernel(m, gamma), stream, n, pol);
}

double isve_default_theta(double gamma) {
  if (!(gamma > 0.0)) throw DomainError("isve_default_theta: gamma must be positive");
  const double lg = std::log(gamma);
  if (lg <= 1.0) return 0.0;
  return 1.0 - 1.0 / (lg * lg);
}

namespace {

// Precomputed tables for the exact-tail mixture: component probabilities,
// truncation points, and the conditional Gaussian of the other coordinates
// given Y_k.
struct MixturePre {
  int d = 0;
  double log_gamma = 0;
  double log_ell_as = 0;
  std::vector<double> cum_p;     // cumulative component probabilities, last = 1
  std::vector<double> t;         // (ln gamma - nu_k)/sigma_k
  std::vector<Eigen::VectorXd> b;        // regression coefficients, d-1 each
  std::vector<Eigen::MatrixXd> chol;     // lower Cholesky of the conditional cov

  MixturePre(const SlnModel& m, double gamma) {
    d = m.d;
    log_gamma = std::log(gamma);
    std::vector<double> lt(static_cast<std::size_t>(d));
    double mx = -kInf;
    for (int k = 0; k < d; ++k) {
      lt[static_cast<std::size_t>(k)] = log_phi_bar((log_gamma - m.nu(k)) / m.sigma(k));
      mx = std::max(mx, lt[static_cast<std::size_t>(k)]);
    }
    double s = 0.0;
    for (double v : lt) s += std::exp(v - mx);
    log_ell_as = mx + std::log(s);
    cum_p.resize(static_cast<std::size_t>(d));
    double c = 0.0;
    for (int k = 0; k < d; ++k) {
      c += std::exp(lt[static_cast<std::size_t>(k)] - log_ell_as);
      cum_p[static_cast<std::size_t>(k)] = c;
    }
    cum_p.back() = 1.0;
    t.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) t[static_cast<std::size_t>(k)] = (log_gamma - m.nu(k)) / m.sigma(k);
    b.reserve(static_cast<std::size_t>(d));
    chol.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
      const double s2k = m.Sigma(k, k);
      Eigen::VectorXd sk(d - 1);
      Eigen::MatrixXd C(d - 1, d - 1);
      int r = 0;
      for (int i = 0; i < d; ++i) {
        if (i == k) continue;
        sk(r) = m.Sigma(i, k);
        int cidx = 0;
        for (int j = 0; j < d; ++j) {
          if (j == k) continue;
          C(r, cidx) = m.Sigma(i, j);
          ++cidx;
        }
        ++r;
      }
      C -= sk * sk.transpose() / s2k;
      b.push_back(sk / s2k);
      if (d > 1) {
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success)
          throw NotPositiveDefinite("isve: conditional covariance is not positive definite");
        chol.push_back(llt.matrixL());
      } else {
        chol.emplace_back(0, 0);
      }
    }
  }

  // fills y (length d); returns the component index
  int draw(const SlnModel& m, std::span<const double> u, double* y) const {
    int k = 0;
    while (k < d - 1 && cum_p[static_cast<std::size_t>(k)] < u[0]) ++k;
    // Y_k = nu_k + sigma_k Z with Z ~ N(0,1) conditioned on Z > t_k,
    // realized as -TN_(-inf, -t_k)(0, 1) so Y_k is increasing in u[1]
    const double z = -trunc_norm_inverse(0.0, -t[static_cast<std::size_t>(k)], 1.0 - u[1]);
    const double yk = m.nu(k) + m.sigma(k) * z;
    if (d == 1) {
      y[0] = yk;
      return k;
    }
    thread_local std::vector<double> xi;
    xi.resize(static_cast<std::size_t>(d - 1));
    for (int j = 0; j < d - 1; ++j)
      xi[static_cast<std::size_t>(j)] = normal_quantile(u[static_cast<std::size_t>(j) + 2]);
    const Eigen::VectorXd& bk = b[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& Lc = chol[static_cast<std::size_t>(k)];
    int r = 0;
    for (int i = 0; i < d; ++i) {
      if (i == k) {
        y[i] = yk;
        continue;
      }
      double dot = 0.0;
      for (int j = 0; j <= r; ++j) dot += Lc(r, j) * xi[static_cast<std::size_t>(j)];
      y[i] = m.nu(i) + bk(r) * (yk - m.nu(k)) + dot;
      ++r;
    }
    return k;
  }
};

}  // namespace

Eigen::VectorXd isve_mixture_draw(const SlnModel& m, double gamma, std::span<const double> u,
                                  int* k_out) {
  if (!(gamma > 0.0)) throw DomainError("isve_mixture_draw: gamma must be positive");
  if (u.size() < static_cast<std::size_t>(m.d) + 1)
    throw DimensionMismatch("isve_mixture_draw: need d + 1 uniforms");
  const MixturePre pre(m, gamma);
  Eigen::VectorXd y(m.d);
  const int k = pre.draw(m, u, y.data());
  if (k_out) *k_out = k;
  return y;
}

KernelFn isve_mixture_kernel(const SlnModel& m, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("isve_mixture_kernel: gamma must be positive");
  auto model = std::make_shared<const SlnModel>(m);
  auto pre = std::make_shared<const MixturePre>(m, gamma);
  return [model, pre](std::span<const double> u) -> LogValue {
    thread_local std::vector<double> y;
    y.resize(static_cast<std::size_t>(model->d));
    const int k = pre->draw(*model, u, y.data());
    int n_above = 1;  // the conditioned coordinate is above by construction
    for (int j = 0; j < model->d; ++j)
      if (j != k && y[static_cast<std::size_t>(j)] > pre->log_gamma) ++n_above;
    return log_value(pre->log_ell_as - std::log(static_cast<double>(n_above)), 1);
  };
}

KernelFn isve_residual_kernel(const SlnModel& m, double gamma, double theta) {
  if (!(gamma > 0.0)) throw DomainError("isve_residual_kernel: gamma must be positive");
  if (!(theta >= 0.0) || theta >= 1.0)
    throw DomainError("isve_residual_kernel: theta must be in [0, 1)");
  auto model = std::make_shared<const SlnModel>(m);
  const double log_gamma = std::log(gamma);
  const double scale = 1.0 / std::sqrt(1.0 - theta);
  const double wcoef = -theta / (2.0 * (1.0 - theta));
  const double wconst = -0.5 * m.d * std::log(1.0 - theta);
  return [model, log_gamma, scale, wcoef, wconst](std::span<const double> u) -> LogValue {
    thread_local std::vector<double> xi, y;
    gaussian_path(*model, u, scale, xi, y);
    const SumMax sm = log_sum_and_max(y.data(), model->d);
    if (!(sm.log_s > log_gamma) || !(sm.y_max < log_gamma)) return {};
    double n2 = 0.0;
    for (double v : xi) n2 += v * v;
    return log_value(wcoef * n2 + wconst, 1);
  };
}

IsveEstimate isve_full(const SlnModel& m, double gamma, double theta, std::uint64_t n1,
                       std::uint64_t n2, UniformStream& stream, const ExecPolicy& pol) {
  const auto t0 = std::chrono::steady_clock::now();
  IsveEstimate out;
  {
    UniformStream s1 = stream.sub(1, m.d + 1);
    out.part1 = run_estimate(isve_mixture_kernel(m, gamma), s1, n1, pol);
  }
  {
    UniformStream s2 = stream.sub(2, m.d);
    out.part2 = run_estimate(isve_residual_kernel(m, gamma, theta), s2, n2, pol);
  }
  unsigned flags = 0;
  if (out.part1.sign == 0 || out.part2.sign == 0) flags |= kFlagSingleComponent;
  const LogValue parts[] = {{out.part1.log_mean, out.part1.sign},
                            {out.part2.log_mean, out.part2.sign}};
  const LogValue total = signed_lse(parts);
  // independent sub-streams: variances add
  LogAccumulator var_terms(1);
  auto add_var = [&](const LogEstimate& e) {
    if (e.sign == 0 || e.n == 0 || e.re_percent <= 0.0) return;
    const double log_sd_mean = std::log(e.re_percent / 100.0) + e.log_mean;
    var_terms.add_log(2.0 * log_sd_mean, 1);
  };
  add_var(out.part1);
  add_var(out.part2);
  const double log_var = var_terms.count() > 0 ? var_terms.log_sum(1).log_abs : -kInf;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.total = make_estimate_parts(total, log_var, 1, wall, flags);
  out.total.n = n1 + n2;
  return out;
}

LogEstimate isve(const SlnModel& m, double gamma, double theta, std::uint64_t n1,
                 std::uint64_t n2, UniformStream& stream, const ExecPolicy& pol) {
  return isve_full(m, gamma, theta, n1, n2, stream, pol).total;
}

KernelFn gt_right_tail_kernel(const SlnModel& m, double gamma, const Eigen::VectorXd& mu) {
  if (mu.size() != m.d) throw DimensionMismatch("gt_right_tail_kernel: bad mu length");
  if (!(gamma > 0.0)) throw DomainError("gt_right_tail_kernel: gamma must be positive");
  auto model = std::make_shared<const SlnModel>(m);
  const Eigen::VectorXd rv = m.L.template triangularView<Eigen::Lower>().solve(mu);
  std::vector<double> r(rv.data(), rv.data() + m.d);
  std::vector<double> shift(static_cast<std::size_t>(m.d));
  for (int i = 0; i < m.d; ++i) shift[static_cast<std::size_t>(i)] = m.nu(i) + mu(i);
  const double log_w0 = -0.5 * rv.squaredNorm();
  const double log_gamma = std::log(gamma);
  return [model, log_gamma, log_w0, r = std::move(r),
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
    for (int j = 0; j < d; ++j) {
      const double* lr = model->lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
      double dot = 0.0;
      for (int i = 0; i <= j; ++i) dot += lr[i] * xi[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(j)] = shift[static_cast<std::size_t>(j)] + dot;
    }
    const double log_s = log_sum_and_max(y.data(), d).log_s;
    if (!(log_s >= log_gamma)) return {};
    return log_value(log_w0 - rdx, 1);
  };
}

LogEstimate gt_right_tail(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                          std::uint64_t n, UniformStream& stream, const ExecPolicy& pol) {
  return run_estimate(gt_right_tail_kernel(m, gamma, mu), stream, n, pol);
}

}  // namespace sln
