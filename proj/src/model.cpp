#include "sln/model.hpp"

#include <cmath>
#include <limits>

#include "sln/errors.hpp"

namespace sln {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void pack_lower(SlnModel& m) {
  const int d = m.d;
  m.lrow.resize(static_cast<std::size_t>(d) * (d + 1) / 2);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j)
      m.lrow[static_cast<std::size_t>(i) * (i + 1) / 2 + j] = m.L(i, j);
}

}  // namespace

SlnModel new_model(Eigen::VectorXd nu, Eigen::MatrixXd Sigma) {
  const auto d = nu.size();
  if (d < 1) throw DimensionMismatch("model: dimension must be >= 1");
  if (Sigma.rows() != d || Sigma.cols() != d)
    throw DimensionMismatch("model: Sigma must be d x d with d = len(nu)");
  if (!nu.allFinite() || !Sigma.allFinite())
    throw DomainError("model: nu and Sigma must be finite");
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double a = Sigma(i, j), b = Sigma(j, i);
      if (std::fabs(a - b) > 1e-12 * (std::fabs(a) + std::fabs(b) + 1.0))
        throw DomainError("model: Sigma is not symmetric");
    }
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("model: Sigma is not positive definite");
  SlnModel m;
  m.d = static_cast<int>(d);
  m.nu = std::move(nu);
  m.Sigma = std::move(Sigma);
  m.L = llt.matrixL();
  m.sigma = m.Sigma.diagonal().cwiseSqrt();
  pack_lower(m);
  return m;
}

SlnModel equicorrelated(int d, double rho, double s2, const Eigen::VectorXd& nu) {
  if (d < 1) throw DimensionMismatch("equicorrelated: d must be >= 1");
  if (nu.size() != d) throw DimensionMismatch("equicorrelated: len(nu) != d");
  if (!(s2 > 0.0)) throw DomainError("equicorrelated: s2 must be positive");
  Eigen::MatrixXd Sigma = Eigen::MatrixXd::Constant(d, d, rho * s2);
  Sigma.diagonal().setConstant(s2);
  return new_model(nu, std::move(Sigma));
}

SlnModel equicorrelated(int d, double rho, double s2, double nu0) {
  return equicorrelated(d, rho, s2, Eigen::VectorXd::Constant(d, nu0));
}

SlnModel iid_model(int d, double nu0, double s2) { return equicorrelated(d, 0.0, s2, nu0); }

SlnModel black_scholes_model(const BlackScholesSpec& p, std::span<const double> times) {
  if (p.d < 1) throw DimensionMismatch("black_scholes: d must be >= 1");
  if (!(p.X0 > 0.0) || !(p.sigma > 0.0) || !(p.T > 0.0))
    throw DomainError("black_scholes: X0, sigma, T must be positive");
  if (static_cast<int>(times.size()) != p.d)
    throw DimensionMismatch("black_scholes: need d monitoring times");
  double prev = 0.0;
  for (const double t : times) {
    if (!(t > prev)) throw DomainError("black_scholes: times must be positive and increasing");
    prev = t;
  }
  Eigen::VectorXd nu(p.d);
  Eigen::MatrixXd Sigma(p.d, p.d);
  const double drift = p.r - 0.5 * p.sigma * p.sigma;
  for (int i = 0; i < p.d; ++i) {
    nu(i) = std::log(p.X0) + drift * times[static_cast<std::size_t>(i)];
    for (int j = 0; j < p.d; ++j)
      Sigma(i, j) = p.sigma * p.sigma *
                    std::min(times[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)]);
  }
  return new_model(std::move(nu), std::move(Sigma));
}

SlnModel black_scholes_model(const BlackScholesSpec& p) {
  if (p.d < 1) throw DimensionMismatch("black_scholes: d must be >= 1");
  std::vector<double> times(static_cast<std::size_t>(p.d));
  for (int i = 0; i < p.d; ++i)
    times[static_cast<std::size_t>(i)] = p.T * (i + 1) / static_cast<double>(p.d);
  return black_scholes_model(p, times);
}

bool model_is_iid(const SlnModel& m, double* nu0, double* sigma0) {
  const double n0 = m.nu(0);
  for (int i = 1; i < m.d; ++i)
    if (std::fabs(m.nu(i) - n0) > 1e-12 * (1.0 + std::fabs(n0))) return false;
  const double s2 = m.Sigma(0, 0);
  for (int i = 0; i < m.d; ++i) {
    if (std::fabs(m.Sigma(i, i) - s2) > 1e-12 * s2) return false;
    for (int j = 0; j < i; ++j)
      if (std::fabs(m.Sigma(i, j)) > 1e-12 * s2) return false;
  }
  if (nu0) *nu0 = n0;
  if (sigma0) *sigma0 = std::sqrt(s2);
  return true;
}

double alpha_threshold(const SlnModel& m, double gamma, int j,
                       std::span<const double> z_prefix, double partial_sum) {
  if (j < 0 || j >= m.d) throw DimensionMismatch("alpha_threshold: coordinate out of range");
  if (static_cast<int>(z_prefix.size()) < j)
    throw DimensionMismatch("alpha_threshold: prefix too short");
  if (partial_sum >= gamma) return -kInf;
  double dot = 0.0;
  const double* lr = m.lrow.data() + static_cast<std::size_t>(j) * (j + 1) / 2;
  for (int k = 0; k < j; ++k) dot += lr[k] * z_prefix[static_cast<std::size_t>(k)];
  return (std::log(gamma - partial_sum) - m.nu(j) - dot) / lr[j];
}

}  // namespace sln
