#include "sln/optimize.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "sln/errors.hpp"
#include "sln/specfun.hpp"

namespace sln {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

BfgsResult minimize_bfgs(const ObjectiveFn& f, Eigen::VectorXd x0, const BfgsOptions& opt) {
  const Eigen::Index n = x0.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = std::move(x0), g(n), gnew(n);
  double fx = f(x, &g);
  BfgsResult res;
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    res.grad_norm = kInf;
    return res;
  }
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (g.norm() <= opt.grad_tol) break;
    Eigen::VectorXd p = -(H * g);
    double gp = g.dot(p);
    if (!(gp < 0.0)) {  // stale curvature; restart steepest-descent
      H.setIdentity();
      p = -g;
      gp = g.dot(p);
    }
    double t = 1.0;
    double fnew = kInf;
    Eigen::VectorXd xnew;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      xnew = x + t * p;
      fnew = f(xnew, &gnew);
      if (std::isfinite(fnew) && fnew <= fx + 1e-4 * t * gp) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;
    const Eigen::VectorXd s = xnew - x;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      // H <- (I - rho s y')H(I - rho y s') + rho s s'
      H -= rho * (s * Hy.transpose() + Hy * s.transpose());
      H += rho * rho * (y.dot(Hy)) * (s * s.transpose());
      H += rho * (s * s.transpose());
    }
    const double move = s.norm();
    x = std::move(xnew);
    fx = fnew;
    g = gnew;
    if (move <= opt.step_tol * (1.0 + x.norm())) break;
  }
  res.x = std::move(x);
  res.f = fx;
  res.grad_norm = g.norm();
  res.iterations = it;
  res.converged = res.grad_norm <= opt.grad_tol;
  return res;
}

// --- left tail ---------------------------------------------------------------

Eigen::VectorXd mu_bar_warm_start(const SlnModel& m, double gamma, const Eigen::VectorXd& w) {
  if (w.size() != m.d) throw DimensionMismatch("mu_bar_warm_start: bad w length");
  if (!(gamma > 0.0)) throw DomainError("mu_bar_warm_start: gamma must be positive");
  double wlogw = 0.0;
  for (int i = 0; i < m.d; ++i) {
    const double wi = w(i);
    if (wi > 0.0) wlogw += wi * std::log(wi);
  }
  const double t = (std::log(gamma) - w.dot(m.nu) + wlogw) / (w.dot(m.Sigma * w));
  return t * (m.L.transpose() * w);
}

double left_tilt_objective(const SlnModel& m, double gamma, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& mu) {
  double wlogw = 0.0;
  for (int i = 0; i < m.d; ++i) {
    const double wi = w(i);
    if (wi > 0.0) wlogw += wi * std::log(wi);
  }
  const double s = std::sqrt(w.dot(m.Sigma * w));
  const double arg = (w.dot(m.nu - m.L * mu) - std::log(gamma) - wlogw) / s;
  return mu.squaredNorm() + log_phi_bar(arg);
}

namespace {

// Joint objective in free variables x = [v (softmax logits); mu], with the
// analytic gradient. w = softmax(v); the v-gradient is the simplex-projected
// chain rule, so the iteration never leaves the simplex.
struct LeftTiltProblem {
  const SlnModel& m;
  double log_gamma;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const int d = m.d;
    const auto v = x.head(d);
    const auto mu = x.tail(d);
    // softmax with internals kept for w_i ln w_i
    const double vmax = v.maxCoeff();
    Eigen::VectorXd e = (v.array() - vmax).exp();
    const double Z = e.sum();
    const Eigen::VectorXd w = e / Z;
    const double logZ = std::log(Z);
    double wlogw = 0.0;
    for (int i = 0; i < d; ++i) wlogw += w(i) * (v(i) - vmax - logZ);

    const Eigen::VectorXd Sw = m.Sigma * w;
    const double s2 = w.dot(Sw);
    const double s = std::sqrt(s2);
    const Eigen::VectorXd Lmu = m.L * mu;
    const double arg = (w.dot(m.nu - Lmu) - log_gamma - wlogw) / s;
    const double f = mu.squaredNorm() + log_phi_bar(arg);
    if (grad) {
      const double h = normal_hazard(arg);  // -d lnPhibar / d arg
      grad->resize(2 * d);
      grad->tail(d) = 2.0 * mu + (h / s) * (m.L.transpose() * w);
      // dA/dw_i = [nu_i - (L mu)_i - ln w_i - 1]/s - A (Sigma w)_i / s^2
      Eigen::VectorXd gw(d);
      for (int i = 0; i < d; ++i) {
        const double lnwi = v(i) - vmax - logZ;
        gw(i) = -h * ((m.nu(i) - Lmu(i) - lnwi - 1.0) / s - arg * Sw(i) / s2);
      }
      const double gbar = w.dot(gw);
      grad->head(d) = w.array() * (gw.array() - gbar);
    }
    return f;
  }
};

}  // namespace

LeftTilt solve_left_tilt(const SlnModel& m, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("solve_left_tilt: gamma must be positive");
  const int d = m.d;
  const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(d, 1.0 / d);
  Eigen::VectorXd x0(2 * d);
  x0.head(d).setZero();
  x0.tail(d) = mu_bar_warm_start(m, gamma, w0);

  LeftTiltProblem prob{m, std::log(gamma)};
  BfgsOptions opt;
  opt.max_iter = 500;
  opt.grad_tol = 1e-8;
  const BfgsResult r = minimize_bfgs(ObjectiveFn(std::cref(prob)), x0, opt);

  LeftTilt out;
  const auto v = r.x.head(d);
  const double vmax = v.maxCoeff();
  Eigen::VectorXd e = (v.array() - vmax).exp();
  out.w_star = e / e.sum();
  out.mu_star = r.x.tail(d);
  out.objective = r.f;
  out.grad_norm = r.grad_norm;
  out.iterations = r.iterations;
  out.converged = r.grad_norm <= 1e-6;  // stationarity contract for the joint block
  return out;
}

// --- psi ---------------------------------------------------------------------

namespace {

// Shared forward pass: thresholds, per-step tail logs, and (optionally) the
// gradient accumulators. Returns psi, or -inf when z is outside the sampler's
// support {sum x <= gamma}.
double psi_impl(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
  const int d = m.d;
  double psi_val = 0.0;
  double s = 0.0;  // running sum of x_k
  std::vector<double> x(static_cast<std::size_t>(d));
  std::vector<double> hj(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    if (s >= gamma) {
      if (grad) grad->setConstant(d, std::numeric_limits<double>::quiet_NaN());
      return -kInf;
    }
    const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
    double dot = 0.0;
    for (int k = 0; k < j; ++k) dot += lr[k] * z(k);
    const double a = (std::log(gamma - s) - m.nu(j) - dot) / lr[j];
    const double t = mu(j) - a;
    psi_val += 0.5 * mu(j) * mu(j) - z(j) * mu(j) + log_phi_bar(t);
    if (grad) hj[static_cast<std::size_t>(j)] = normal_hazard(t);
    x[static_cast<std::size_t>(j)] = std::exp(m.nu(j) + dot + lr[j] * z(j));
    s += x[static_cast<std::size_t>(j)];
  }
  if (s > gamma) {  // outside the sampler's support {sum x <= gamma}
    if (grad) grad->setConstant(d, std::numeric_limits<double>::quiet_NaN());
    return -kInf;
  }
  if (grad) {
    // dpsi/dz_i = -mu_i + sum_{j>i} H_j * dalpha_j/dz_i,
    // dalpha_j/dz_i = -[(sum_{k=i..j-1} x_k L_ki)/(gamma - s_j) + L_ji]/L_jj
    grad->resize(d);
    for (int i = 0; i < d; ++i) (*grad)(i) = -mu(i);
    std::vector<double> acc(static_cast<std::size_t>(d), 0.0);  // acc[i] = sum x_k L_ki
    double sj = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j > 0) {
        const int p = j - 1;
        const double* lrp = m.lrow.data() + static_cast<std::size_t>(p) * (p + 1) / 2;
        for (int i = 0; i <= p; ++i) acc[static_cast<std::size_t>(i)] += x[static_cast<std::size_t>(p)] * lrp[i];
        sj += x[static_cast<std::size_t>(p)];
      }
      const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
      const double rem = gamma - sj;
      const double h = hj[static_cast<std::size_t>(j)];
      if (h == 0.0) continue;
      for (int i = 0; i < j; ++i) {
        const double da = -(acc[static_cast<std::size_t>(i)] / rem + lr[i]) / lr[j];
        (*grad)(i) += h * da;
      }
    }
  }
  return psi_val;
}

}  // namespace

double psi(const SlnModel& m, double gamma, const Eigen::VectorXd& mu, const Eigen::VectorXd& z) {
  if (mu.size() != m.d || z.size() != m.d) throw DimensionMismatch("psi: bad vector length");
  return psi_impl(m, gamma, mu, z, nullptr);
}

Eigen::VectorXd psi_gradient(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& z) {
  if (mu.size() != m.d || z.size() != m.d) throw DimensionMismatch("psi_gradient: bad vector length");
  Eigen::VectorXd g;
  psi_impl(m, gamma, mu, z, &g);
  return g;
}

namespace {

// psi with the last coordinate eliminated at its threshold, z_d = alpha_d(v):
// psi is nonincreasing in z_d there (requires mu_d <= 0), so the supremum
// over the support is attained on {sum x = gamma} and the reduced problem has
// an interior maximum. Returns the value; fills the reduced gradient and the
// full z vector when requested.
double reduced_psi(const SlnModel& m, double gamma, const Eigen::VectorXd& mu,
                   const Eigen::VectorXd& v, Eigen::VectorXd* grad, Eigen::VectorXd* z_out) {
  const int d = m.d;
  double psi_val = 0.0;
  double s = 0.0;
  std::vector<double> x(static_cast<std::size_t>(d));
  std::vector<double> hj(static_cast<std::size_t>(d));
  std::vector<double> z(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    if (s >= gamma) return -kInf;
    const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
    double dot = 0.0;
    for (int k = 0; k < j; ++k) dot += lr[k] * z[static_cast<std::size_t>(k)];
    const double a = (std::log(gamma - s) - m.nu(j) - dot) / lr[j];
    const double zj = j < d - 1 ? v(j) : a;
    z[static_cast<std::size_t>(j)] = zj;
    psi_val += 0.5 * mu(j) * mu(j) - zj * mu(j) + log_phi_bar(mu(j) - a);
    if (grad) hj[static_cast<std::size_t>(j)] = normal_hazard(mu(j) - a);
    x[static_cast<std::size_t>(j)] = std::exp(m.nu(j) + dot + lr[j] * zj);
    s += x[static_cast<std::size_t>(j)];
  }
  if (z_out) {
    z_out->resize(d);
    for (int j = 0; j < d; ++j) (*z_out)(j) = z[static_cast<std::size_t>(j)];
  }
  if (grad) {
    // d psi/d v_i at fixed thresholds, plus the chain term through
    // z_{d-1} = alpha_{d-1}(v) whose psi-slope is -mu_{d-1}
    grad->resize(d - 1);
    for (int i = 0; i < d - 1; ++i) (*grad)(i) = -mu(i);
    std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
    double sj = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j > 0) {
        const int p = j - 1;
        const double* lrp = m.lrow.data() + static_cast<std::size_t>(p) * (p + 1) / 2;
        for (int i = 0; i <= p; ++i)
          acc[static_cast<std::size_t>(i)] += x[static_cast<std::size_t>(p)] * lrp[i];
        sj += x[static_cast<std::size_t>(p)];
      }
      const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
      const double rem = gamma - sj;
      const double h = hj[static_cast<std::size_t>(j)];
      const double w = j == d - 1 ? h - mu(j) : h;  // threshold term + chain term
      if (w == 0.0) continue;
      for (int i = 0; i < std::min(j, d - 1); ++i) {
        const double da = -(acc[static_cast<std::size_t>(i)] / rem + lr[i]) / lr[j];
        (*grad)(i) += w * da;
      }
    }
  }
  return psi_val;
}

}  // namespace

PsiMax maximize_psi(const SlnModel& m, double gamma, const Eigen::VectorXd& mu) {
  if (!(gamma > 0.0)) throw DomainError("maximize_psi: gamma must be positive");
  if (mu.size() != m.d) throw DimensionMismatch("maximize_psi: bad mu length");
  const int d = m.d;
  PsiMax out;
  if (mu(d - 1) > 0.0) {
    // psi increases without bound as z_d decreases: no finite envelope
    out.z = Eigen::VectorXd::Zero(d);
    out.c = kInf;
    out.grad_norm = kInf;
    out.converged = false;
    return out;
  }
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(d);
  const bool zero_ok = psi_impl(m, gamma, mu, z0, nullptr) > -kInf;
  if (!zero_ok) {
    // interior start: every component's contribution pinned at gamma/(2d)
    const Eigen::VectorXd target =
        Eigen::VectorXd::Constant(d, std::log(gamma / (2.0 * d))) - m.nu;
    z0 = m.L.template triangularView<Eigen::Lower>().solve(target);
  }
  if (d == 1) {
    // reduced problem has no free variables
    const double alpha = (std::log(gamma) - m.nu(0)) / m.L(0, 0);
    const double z = mu(0) == 0.0 ? (zero_ok ? 0.0 : alpha) : alpha;
    out.z = Eigen::VectorXd::Constant(1, z);
    out.c = 0.5 * mu(0) * mu(0) - z * mu(0) + log_phi_bar(mu(0) - alpha);
    out.grad_norm = 0.0;
    out.converged = true;
    return out;
  }
  auto f = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    const double val = reduced_psi(m, gamma, mu, v, grad, nullptr);
    if (grad) {
      if (val == -kInf)
        grad->setZero(d - 1);
      else
        *grad = -*grad;
    }
    return -val;
  };
  BfgsOptions opt;
  opt.max_iter = 500;
  opt.grad_tol = 1e-9;
  const BfgsResult r = minimize_bfgs(f, z0.head(d - 1), opt);

  // Newton polish: quasi-Newton alone tends to stall around 1e-6 in higher
  // dimensions. The maximum is interior and smooth, so a few Newton steps on
  // a finite-difference Hessian of the analytic gradient finish the job.
  const int n = d - 1;
  Eigen::VectorXd v = r.x, gv(n);
  double val = reduced_psi(m, gamma, mu, v, &gv, nullptr);
  for (int round = 0; round < 10 && val > -kInf && gv.norm() > 1e-10; ++round) {
    Eigen::MatrixXd Hn(n, n);
    Eigen::VectorXd gp(n), gm(n), vp;
    bool fd_ok = true;
    for (int i = 0; i < n && fd_ok; ++i) {
      const double h = 1e-5 * (1.0 + std::fabs(v(i)));
      vp = v;
      vp(i) = v(i) + h;
      fd_ok = reduced_psi(m, gamma, mu, vp, &gp, nullptr) > -kInf;
      if (!fd_ok) break;
      vp(i) = v(i) - h;
      fd_ok = reduced_psi(m, gamma, mu, vp, &gm, nullptr) > -kInf;
      if (!fd_ok) break;
      Hn.col(i) = (gp - gm) / (2.0 * h);
    }
    if (!fd_ok) break;
    Hn = 0.5 * (Hn + Hn.transpose()).eval();
    const Eigen::VectorXd dv = Hn.ldlt().solve(-gv);
    if (!dv.allFinite() || gv.dot(dv) <= 0.0) break;  // not an ascent direction
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      vp = v + t * dv;
      Eigen::VectorXd gnew(n);
      const double fnew = reduced_psi(m, gamma, mu, vp, &gnew, nullptr);
      if (fnew >= val) {
        v = vp;
        val = fnew;
        gv = gnew;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  Eigen::VectorXd z_full;
  out.c = reduced_psi(m, gamma, mu, v, nullptr, &z_full);
  out.z = z_full;
  out.grad_norm = gv.norm();
  out.converged = out.grad_norm <= 1e-8;
  return out;
}

// --- right tail --------------------------------------------------------------

Eigen::VectorXd asymptotic_right_tilt(const SlnModel& m, double gamma, int k) {
  if (k < 0 || k >= m.d) throw DimensionMismatch("asymptotic_right_tilt: k out of range");
  if (!(gamma > 0.0)) throw DomainError("asymptotic_right_tilt: gamma must be positive");
  const double scale = (std::log(gamma) - m.nu(k)) / m.Sigma(k, k);
  return scale * m.Sigma.col(k);
}

double right_tilt_objective(const SlnModel& m, const Eigen::VectorXd& mu) {
  const Eigen::VectorXd r = m.L.template triangularView<Eigen::Lower>().solve(mu);
  return 0.5 * r.squaredNorm();
}

double right_tilt_g1(const SlnModel& m, double gamma, int k, const Eigen::VectorXd& mu) {
  double sum = 0.0;
  for (int i = 0; i < m.d; ++i) {
    const double extra = i == k ? 0.0 : 0.5 * m.Sigma(i, i);
    sum += std::exp(mu(i) + m.nu(i) + extra);
  }
  return sum - gamma;
}

double right_tilt_g2(const SlnModel& m, int k, const Eigen::VectorXd& mu) {
  double best = -kInf;
  for (int j = 0; j < m.d; ++j) {
    if (j == k) continue;
    best = std::max(best, mu(j) + m.nu(j) + 0.5 * m.Sigma(j, j));
  }
  if (best == -kInf) return kInf;  // d = 1: vacuous
  return mu(k) + m.nu(k) + 0.5 * m.Sigma(k, k) - best;
}

namespace {

// Raise mu_k until both constraints hold (monotone in mu_k); exact g1 = 0
// when the budget constraint was short.
void project_feasible(const SlnModel& m, double gamma, int k, Eigen::VectorXd& mu) {
  const double g2 = right_tilt_g2(m, k, mu);
  if (g2 < 0.0) mu(k) += -g2 + 1e-9;
  double rest = 0.0;
  for (int i = 0; i < m.d; ++i)
    if (i != k) rest += std::exp(mu(i) + m.nu(i) + 0.5 * m.Sigma(i, i));
  if (rest < gamma) {
    const double need = std::log(gamma - rest) - m.nu(k);
    if (mu(k) < need) mu(k) = need;
  }
}

struct RightTiltPenalty {
  const SlnModel& m;
  double gamma;
  int k;
  double c = 1.0;
  double tau = 1e-3;

  double operator()(const Eigen::VectorXd& mu, Eigen::VectorXd* grad) const {
    const int d = m.d;
    const Eigen::VectorXd r = m.L.template triangularView<Eigen::Lower>().solve(mu);
    double f = 0.5 * r.squaredNorm();
    Eigen::VectorXd gq;
    if (grad) {
      gq = m.L.transpose().template triangularView<Eigen::Upper>().solve(r);
      *grad = gq;
    }
    // g1
    Eigen::VectorXd ex(d);
    double g1 = -gamma;
    for (int i = 0; i < d; ++i) {
      const double extra = i == k ? 0.0 : 0.5 * m.Sigma(i, i);
      ex(i) = std::exp(mu(i) + m.nu(i) + extra);
      g1 += ex(i);
    }
    if (g1 < 0.0) {
      f += c * g1 * g1;
      if (grad) *grad += (2.0 * c * g1) * ex;
    }
    // smoothed g2: b_k - tau * LSE(b_j / tau)
    if (d > 1) {
      double bmax = -kInf;
      for (int j = 0; j < d; ++j) {
        if (j == k) continue;
        bmax = std::max(bmax, mu(j) + m.nu(j) + 0.5 * m.Sigma(j, j));
      }
      double zsum = 0.0;
      Eigen::VectorXd p = Eigen::VectorXd::Zero(d);
      for (int j = 0; j < d; ++j) {
        if (j == k) continue;
        const double bj = mu(j) + m.nu(j) + 0.5 * m.Sigma(j, j);
        p(j) = std::exp((bj - bmax) / tau);
        zsum += p(j);
      }
      const double smax = bmax + tau * std::log(zsum);
      const double g2 = mu(k) + m.nu(k) + 0.5 * m.Sigma(k, k) - smax;
      if (g2 < 0.0) {
        f += c * g2 * g2;
        if (grad) {
          (*grad)(k) += 2.0 * c * g2;
          for (int j = 0; j < d; ++j)
            if (j != k) (*grad)(j) -= 2.0 * c * g2 * p(j) / zsum;
        }
      }
    }
    return f;
  }
};

// Active-set Newton polish on the KKT system; constraints: optionally g1 = 0,
// and b_k = b_j for each tied j. The set is grown by violation checks until a
// KKT point with nonnegative multipliers and no violated constraint remains.
struct PolishResult {
  Eigen::VectorXd mu;
  double kkt = kInf;
  bool ok = false;
};

PolishResult polish_active_set(const SlnModel& m, double gamma, int k, Eigen::VectorXd mu) {
  const int d = m.d;
  const auto lower = m.L.template triangularView<Eigen::Lower>();
  const auto upperT = m.L.transpose().template triangularView<Eigen::Upper>();
  const double scale = std::max(1.0, std::fabs(std::log(gamma)));
  auto b_val = [&](const Eigen::VectorXd& v, int j) {
    return v(j) + m.nu(j) + 0.5 * m.Sigma(j, j);
  };
  auto bk_val = [&](const Eigen::VectorXd& v) { return v(k) + m.nu(k) + 0.5 * m.Sigma(k, k); };
  for (int round = 0; round < d + 6; ++round) {
    // classify active constraints at the current point (violated counts active)
    const double g1 = right_tilt_g1(m, gamma, k, mu);
    const bool a1 = g1 < 1e-4 * std::max(1.0, gamma);
    std::vector<int> ties;
    if (d > 1) {
      const double g2 = right_tilt_g2(m, k, mu);
      if (g2 < 1e-4 * scale) {
        double bmax = -kInf;
        for (int j = 0; j < d; ++j)
          if (j != k) bmax = std::max(bmax, b_val(mu, j));
        for (int j = 0; j < d; ++j)
          if (j != k && b_val(mu, j) > bmax - 1e-4 * scale) ties.push_back(j);
      }
    }
    const int nc = (a1 ? 1 : 0) + static_cast<int>(ties.size());
    if (nc == 0) {
      // unconstrained minimum is mu = 0; valid only if feasible there
      Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
      if (right_tilt_g1(m, gamma, k, zero) >= 0.0 &&
          (d == 1 || right_tilt_g2(m, k, zero) >= 0.0))
        return {zero, 0.0, true};
      return {mu, kInf, false};
    }
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(nc);
    bool newton_ok = false;
    for (int it = 0; it < 60; ++it) {
      Eigen::VectorXd ex(d);
      double g1v = -gamma;
      for (int i = 0; i < d; ++i) {
        const double extra = i == k ? 0.0 : 0.5 * m.Sigma(i, i);
        ex(i) = std::exp(mu(i) + m.nu(i) + extra);
        g1v += ex(i);
      }
      Eigen::MatrixXd J(nc, d);
      Eigen::VectorXd cval(nc);
      int row = 0;
      if (a1) {
        J.row(row) = ex.transpose();
        cval(row) = g1v;
        ++row;
      }
      for (const int j : ties) {
        Eigen::RowVectorXd cj = Eigen::RowVectorXd::Zero(d);
        cj(k) = 1.0;
        cj(j) = -1.0;
        J.row(row) = cj;
        cval(row) = bk_val(mu) - b_val(mu, j);
        ++row;
      }
      const Eigen::VectorXd r = lower.solve(mu);
      const Eigen::VectorXd gq = upperT.solve(r);
      // W = Sigma^-1 + lambda_1 diag(ex) (only g1 contributes curvature);
      // a negative transient multiplier is clamped to keep W positive definite
      Eigen::MatrixXd W = upperT.solve(lower.solve(Eigen::MatrixXd::Identity(d, d)));
      if (a1 && lambda(0) > 0.0) W += lambda(0) * ex.asDiagonal().toDenseMatrix();
      Eigen::MatrixXd K(d + nc, d + nc);
      K.setZero();
      K.topLeftCorner(d, d) = W;
      K.topRightCorner(d, nc) = -J.transpose();
      K.bottomLeftCorner(nc, d) = J;
      Eigen::VectorXd rhs(d + nc);
      rhs.head(d) = -(gq - J.transpose() * lambda);
      rhs.tail(nc) = -cval;
      const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
      Eigen::VectorXd dmu = sol.head(d);
      const double dn = dmu.norm();
      if (dn > 2.0 * scale) dmu *= 2.0 * scale / dn;  // trust region on wild steps
      lambda += sol.tail(nc);
      mu += dmu;
      if (dmu.norm() <= 1e-13 * (1.0 + mu.norm()) && cval.norm() <= 1e-10 * scale) {
        newton_ok = true;
        break;
      }
    }
    if (!newton_ok) return {mu, kInf, false};
    // inactive constraints must not be violated at the Newton point
    bool grew = false;
    if (right_tilt_g1(m, gamma, k, mu) < -1e-8 * std::max(1.0, gamma)) grew = true;
    if (!grew && d > 1) {
      const double bk = bk_val(mu);
      for (int j = 0; j < d && !grew; ++j) {
        if (j == k) continue;
        const bool in_ties =
            std::find(ties.begin(), ties.end(), j) != ties.end();
        if (!in_ties && b_val(mu, j) > bk + 1e-8 * scale) grew = true;
      }
    }
    if (grew) continue;  // re-classify: the violated constraint joins the set
    // multiplier signs: drop the most negative and retry
    int drop = -1;
    double worst = -1e-9;
    for (int i = 0; i < nc; ++i)
      if (lambda(i) < worst) {
        worst = lambda(i);
        drop = i;
      }
    if (drop < 0) {
      const Eigen::VectorXd r = lower.solve(mu);
      const Eigen::VectorXd gq = upperT.solve(r);
      Eigen::VectorXd resid = gq;
      int row = 0;
      Eigen::VectorXd ex(d);
      for (int i = 0; i < d; ++i) {
        const double extra = i == k ? 0.0 : 0.5 * m.Sigma(i, i);
        ex(i) = std::exp(mu(i) + m.nu(i) + extra);
      }
      if (a1) resid -= std::max(lambda(row++), 0.0) * ex;
      for (std::size_t t = 0; t < ties.size(); ++t) {
        Eigen::VectorXd cj = Eigen::VectorXd::Zero(d);
        cj(k) = 1.0;
        cj(ties[t]) = -1.0;
        resid -= std::max(lambda(row++), 0.0) * cj;
      }
      return {mu, resid.norm(), true};
    }
    // perturb off the dropped constraint and re-classify
    if (a1 && drop == 0) {
      mu(k) += 1e-3 * scale;
    } else {
      const int j = ties[static_cast<std::size_t>(drop - (a1 ? 1 : 0))];
      mu(j) -= 1e-3 * scale;
    }
  }
  return {mu, kInf, false};
}

struct Candidate {
  Eigen::VectorXd mu;
  double obj = kInf;
  double kkt = kInf;
  bool ok = false;
};

Candidate run_from_start(const SlnModel& m, double gamma, int k, Eigen::VectorXd mu0) {
  RightTiltPenalty pen{m, gamma, k};
  const double scale = std::max(1.0, std::fabs(std::log(gamma)));
  BfgsOptions opt;
  opt.max_iter = 120;
  opt.grad_tol = 1e-8;
  Eigen::VectorXd mu = std::move(mu0);
  for (double c = 1e2; c <= 1e8 + 1.0; c *= 10.0) {
    pen.c = c;
    // shrink the max smoothing before the polish so near-ties separate cleanly
    pen.tau = (c >= 1e6 ? 1e-6 : 1e-3) * scale;
    mu = minimize_bfgs(ObjectiveFn(std::cref(pen)), mu, opt).x;
  }
  PolishResult pr = polish_active_set(m, gamma, k, mu);
  Candidate cand;
  if (pr.ok) {
    cand.mu = pr.mu;
    cand.kkt = pr.kkt;
  } else {
    project_feasible(m, gamma, k, mu);
    cand.mu = mu;
    cand.kkt = kInf;
  }
  cand.obj = right_tilt_objective(m, cand.mu);
  const double s1 = right_tilt_g1(m, gamma, k, cand.mu);
  const double s2 = right_tilt_g2(m, k, cand.mu);
  cand.ok = s1 >= -1e-8 && (m.d == 1 || s2 >= -1e-8);
  return cand;
}

}  // namespace

RightTilt solve_right_tilt(const SlnModel& m, double gamma, int k) {
  if (k < 0 || k >= m.d) throw DimensionMismatch("solve_right_tilt: k out of range");
  if (!(gamma > 0.0)) throw DomainError("solve_right_tilt: gamma must be positive");
  const int d = m.d;

  // start 1: asymptotic spike solution, projected feasible
  Eigen::VectorXd s1v = asymptotic_right_tilt(m, gamma, k);
  project_feasible(m, gamma, k, s1v);
  Candidate c1 = run_from_start(m, gamma, k, s1v);

  // start 2: spread the budget over every component
  double rest = std::exp(m.nu(k));
  for (int i = 0; i < d; ++i)
    if (i != k) rest += std::exp(m.nu(i) + 0.5 * m.Sigma(i, i));
  Eigen::VectorXd s2v = Eigen::VectorXd::Constant(d, std::log(gamma) - std::log(rest));
  project_feasible(m, gamma, k, s2v);
  Candidate c2 = run_from_start(m, gamma, k, s2v);

  const Candidate* best = &c1;
  if (c2.ok && (!c1.ok || c2.obj < c1.obj)) best = &c2;

  RightTilt out;
  out.k = k;
  if (!best->ok) {
    // fall back to the feasible projection of the asymptotic tilt
    Eigen::VectorXd mu = asymptotic_right_tilt(m, gamma, k);
    project_feasible(m, gamma, k, mu);
    out.mu = mu;
    out.objective = right_tilt_objective(m, mu);
    out.g1_slack = right_tilt_g1(m, gamma, k, mu);
    out.g2_slack = d == 1 ? kInf : right_tilt_g2(m, k, mu);
    out.kkt_residual = kInf;
    out.converged = false;
    return out;
  }
  out.mu = best->mu;
  out.objective = best->obj;
  out.g1_slack = right_tilt_g1(m, gamma, k, out.mu);
  out.g2_slack = d == 1 ? kInf : right_tilt_g2(m, k, out.mu);
  out.kkt_residual = best->kkt;
  out.converged = best->kkt <= 1e-6;
  return out;
}

}  // namespace sln
