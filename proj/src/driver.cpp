#include "sln/driver.hpp"

#include <chrono>

#include "sln/errors.hpp"

namespace sln {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

LogEstimate run_estimate(const KernelFn& kernel, UniformStream& stream, std::uint64_t n,
                         const ExecPolicy& pol, unsigned flags) {
  const auto t0 = std::chrono::steady_clock::now();
  LogAccumulator acc = run_replications(kernel, stream, stream.cursor(), n, pol);
  stream.seek(stream.cursor() + n);
  return make_estimate(acc, seconds_since(t0), flags);
}

LogEstimate rqmc_estimate(const KernelFn& kernel, int dim, StreamKind kind, int shifts,
                          std::uint64_t n, std::uint64_t seed, const ExecPolicy& pol) {
  if (shifts < 2) throw DomainError("rqmc_estimate: needs at least 2 randomizations");
  const auto t0 = std::chrono::steady_clock::now();
  const UniformStream base = UniformStream::make(kind, dim, seed);
  LogAccumulator across(2);  // one signed mean per randomization
  for (int r = 0; r < shifts; ++r) {
    const UniformStream s = base.sub(static_cast<std::uint64_t>(r) + 1, dim);
    LogAccumulator a = run_replications(kernel, s, 0, n, pol);
    across.add(a.count() ? a.log_mean() : LogValue{});
  }
  LogEstimate e = make_estimate(across, seconds_since(t0));
  e.n = static_cast<std::uint64_t>(shifts) * n;
  return e;
}

std::vector<std::pair<double, double>> convergence_points(
    const KernelFn& kernel, int dim, StreamKind kind, std::span<const std::uint64_t> n_grid,
    int shifts, std::uint64_t seed, const ExecPolicy& pol) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(n_grid.size());
  std::uint64_t i = 0;
  for (const std::uint64_t n : n_grid) {
    const std::uint64_t s = mix64(seed ^ (i + 1) * 0x9e3779b97f4a7c15ull);
    const LogEstimate e = rqmc_estimate(kernel, dim, kind, shifts, n, s, pol);
    pts.emplace_back(static_cast<double>(n), e.re_percent);
    ++i;
  }
  return pts;
}

double convergence_slope(const KernelFn& kernel, int dim, StreamKind kind,
                         std::span<const std::uint64_t> n_grid, int shifts, std::uint64_t seed,
                         const ExecPolicy& pol) {
  const auto pts = convergence_points(kernel, dim, kind, n_grid, shifts, seed, pol);
  return fit_loglog_slope(pts);
}

}  // namespace sln
